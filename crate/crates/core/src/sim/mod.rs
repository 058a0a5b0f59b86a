//! Deterministic planar grasp surrogate.
//!
//! Side view: `x` runs along the prismatic axis, `y` points up, the ground is
//! `y = 0`. The hand hangs above the object; the thumb chain is mounted on the
//! left jaw and the index and middle chains on the right jaw. Each jaw's
//! mounting half-circle sets a finger back by `R (1 - cos phi)` from the jaw
//! and out of plane by `R sin phi`; a finger whose out-of-plane offset exceeds
//! the object's half depth never touches it. Fingers do not interact with the
//! ground.
//!
//! Each frame, every finger is solved to torque equilibrium under overdamped
//! joint dynamics with the object held at its current pose. While the hand
//! closes the object rests on the ground; afterwards it moves vertically only,
//! carried by contact normals and Coulomb friction, and cannot rise past the
//! palm at wrist height.

mod bundle;
pub mod contact;
pub mod finger;

use alloc::string::String;
use alloc::vec::Vec;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use bundle::{bundled_objects, scripted_records, MASS_SCALE, TENDON_FULL_BEND};
pub use contact::{friction_contact, Shape};
pub use finger::{flexure_stiffness, FingerChain};

use crate::design_space::{self, DesignVector, Finger};
use crate::objective::{self, EvalOutcome};
use crate::{math, seed, Error, Result};
use finger::{ContactLaw, ContactSummary, FingerConstants, Frame, JointLimits, Obstacle};

/// `T_fixed` while the tendon displacement is at or below its target, else 0.
pub fn tendon_force(ds_current: f64, ds_target: f64, t_fixed: f64) -> f64 {
    if ds_current <= ds_target {
        t_fixed
    } else {
        0.0
    }
}

/// `ceil(sqrt(2 ds / a) / dt)`.
pub fn prismatic_frame_count(ds: f64, accel: f64, dt: f64) -> usize {
    if ds <= 0.0 {
        return 0;
    }
    math::ceil(math::sqrt(2.0 * ds / accel) / dt) as usize
}

/// Accelerate-then-decelerate move of `ds` over [`prismatic_frame_count`]
/// frames. The acceleration magnitude is `4 ds / (N dt)^2`, which covers the
/// whole distance in the printed frame count and ends at rest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionProfile {
    pub distance: f64,
    pub frames: usize,
    pub dt: f64,
    pub accel: f64,
}

impl MotionProfile {
    pub fn new(ds: f64, accel: f64, dt: f64) -> Self {
        let frames = prismatic_frame_count(ds, accel, dt);
        let duration = frames as f64 * dt;
        let accel = if frames == 0 { 0.0 } else { 4.0 * ds / (duration * duration) };
        MotionProfile { distance: ds.max(0.0), frames, dt, accel }
    }

    fn duration(&self) -> f64 {
        self.frames as f64 * self.dt
    }

    /// Velocity at time `t` from the start.
    pub fn velocity_at(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, self.duration());
        self.accel * t.min(self.duration() - t)
    }

    /// Distance covered by time `t`.
    pub fn position_at(&self, t: f64) -> f64 {
        let total = self.duration();
        if self.frames == 0 {
            return 0.0;
        }
        let t = t.clamp(0.0, total);
        let half = 0.5 * total;
        if t <= half {
            0.5 * self.accel * t * t
        } else {
            let r = total - t;
            self.distance - 0.5 * self.accel * r * r
        }
    }

    /// Displacement during frame `k`.
    pub fn step(&self, k: usize) -> f64 {
        let t0 = k as f64 * self.dt;
        self.position_at(t0 + self.dt) - self.position_at(t0)
    }

    /// Signed acceleration during frame `k` (0 outside the move).
    pub fn accel_in(&self, k: usize) -> f64 {
        if k >= self.frames {
            return 0.0;
        }
        let mid = (k as f64 + 0.5) * self.dt;
        if mid < 0.5 * self.duration() {
            self.accel
        } else if mid > 0.5 * self.duration() {
            -self.accel
        } else {
            0.0
        }
    }
}

/// Per-frame displacements of the move; they sum to `ds`.
pub fn motion_profile(ds: f64, accel: f64, dt: f64) -> Vec<f64> {
    let p = MotionProfile::new(ds, accel, dt);
    (0..p.frames).map(|k| p.step(k)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DensityClass {
    Light,
    Heavy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimObject {
    pub id: String,
    pub shape: Shape,
    /// kg
    pub mass: f64,
    pub friction: f64,
    /// Areal density (kg/m^2) that, with [`MASS_SCALE`], gave `mass`.
    pub density: f64,
    pub class: DensityClass,
    /// Extent perpendicular to the grasp plane (m).
    pub depth: f64,
}

impl SimObject {
    pub fn check(&self) -> Result<()> {
        self.shape.check()?;
        if !(self.mass > 0.0) || !(self.friction >= 0.0) || !(self.depth > 0.0) {
            return Err(Error::invalid("object needs positive mass and depth, non-negative friction"));
        }
        Ok(())
    }
}

/// Wrist pose relative to the object centre in the grasp plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanarPose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TendonTargets {
    pub thumb: f64,
    pub index: f64,
    pub middle: f64,
}

impl TendonTargets {
    pub fn get(&self, f: Finger) -> f64 {
        match f {
            Finger::Thumb => self.thumb,
            Finger::Index => self.index,
            Finger::Middle => self.middle,
        }
    }
}

/// One demonstration, replayed open-loop by [`rollout`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TeleopRecord {
    pub object_id: String,
    pub grasp_pose: PlanarPose,
    /// Closing stroke of the prismatic joint from fully open (m).
    pub prismatic_displacement: f64,
    /// Tendon displacement targets (m).
    pub tendon_targets: TendonTargets,
    pub lift_height: f64,
}

impl TeleopRecord {
    pub fn check(&self) -> Result<()> {
        let t = &self.tendon_targets;
        let values = [self.prismatic_displacement, t.thumb, t.index, t.middle, self.lift_height];
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::invalid("record displacements must be finite and non-negative"));
        }
        let p = &self.grasp_pose;
        if ![p.x, p.y, p.theta].iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("grasp pose".into()));
        }
        Ok(())
    }
}

/// Physical and numerical constants of the surrogate (SI units).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub frame_rate: f64,
    /// Frames for closing the hand: the prismatic stroke, then tendon
    /// actuation until the cap.
    pub grasp_frames: usize,
    pub test_frames: usize,
    pub tendon_force: f64,
    pub prismatic_accel: f64,
    pub wrist_accel: f64,
    /// Jaw gap with the prismatic joint fully open (m).
    pub open_gap: f64,
    pub youngs_modulus: f64,
    pub web_width: f64,
    pub flexure_thickness: f64,
    /// Joint viscous damping (N m s / rad).
    pub joint_damping: f64,
    pub joint_min: f64,
    pub joint_max: f64,
    pub limit_stiffness: f64,
    pub contact_stiffness: f64,
    pub contact_smoothing: f64,
    pub samples_per_link: usize,
    /// Viscous coupling between object and hand while touching (N s / m).
    pub object_damping: f64,
    pub gravity: f64,
    pub impulse_range: [f64; 2],
    pub solver_iterations: usize,
    pub solver_tolerance: f64,
    /// Total normal force above which force feedback counts as nonzero (N).
    pub feedback_threshold: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            frame_rate: 3000.0,
            grasp_frames: 800,
            test_frames: 700,
            tendon_force: 20.0,
            prismatic_accel: 60.0,
            wrist_accel: 2.0,
            open_gap: 0.32,
            youngs_modulus: 2.0e6,
            web_width: 0.010,
            flexure_thickness: 0.004,
            joint_damping: 1e-3,
            joint_min: 0.0,
            joint_max: 1.6,
            limit_stiffness: 100.0,
            contact_stiffness: 2000.0,
            contact_smoothing: 5e-4,
            samples_per_link: 3,
            object_damping: 2.0,
            gravity: 9.81,
            impulse_range: [0.05, 0.2],
            solver_iterations: 200,
            solver_tolerance: 1e-6,
            feedback_threshold: 1e-3,
        }
    }
}

impl SimConfig {
    pub fn dt(&self) -> f64 {
        1.0 / self.frame_rate
    }

    pub fn check(&self) -> Result<()> {
        let positive = [
            self.frame_rate,
            self.tendon_force,
            self.prismatic_accel,
            self.wrist_accel,
            self.open_gap,
            self.youngs_modulus,
            self.web_width,
            self.flexure_thickness,
            self.contact_stiffness,
            self.contact_smoothing,
            self.solver_tolerance,
        ];
        if positive.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::config("sim", "physical constants must be positive and finite"));
        }
        if !(self.joint_min < self.joint_max) {
            return Err(Error::config("sim.joint_min", "must be below joint_max"));
        }
        if !(0.0 <= self.impulse_range[0] && self.impulse_range[0] <= self.impulse_range[1]) {
            return Err(Error::config("sim.impulse_range", "need 0 <= low <= high"));
        }
        if self.solver_iterations == 0 || self.samples_per_link == 0 {
            return Err(Error::config("sim", "solver iterations and samples per link must be positive"));
        }
        Ok(())
    }

    fn constants(&self) -> FingerConstants {
        FingerConstants {
            youngs_modulus: self.youngs_modulus,
            web_width: self.web_width,
            flexure_thickness: self.flexure_thickness,
        }
    }
}

/// What happens after the lift.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhaseConfig {
    /// Apply the disturbance impulse and run the test frames.
    pub test_phase: bool,
    /// Impulse (N s) to use instead of a seeded draw.
    pub impulse: Option<f64>,
    /// Tendon force used after the lift instead of the configured one.
    pub hold_tension: Option<f64>,
    pub seed: u64,
}

impl PhaseConfig {
    pub fn training() -> Self {
        PhaseConfig::default()
    }

    pub fn test(seed: u64) -> Self {
        PhaseConfig { test_phase: true, seed, ..PhaseConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutReport {
    pub outcome: EvalOutcome,
    /// False when an equilibrium solve hit its iteration cap.
    pub converged: bool,
    /// Largest residual over all converged solves (N m).
    pub max_residual: f64,
    pub solves: usize,
    /// Newton iterations summed over all solves.
    pub iterations: usize,
    pub frames: usize,
    pub impulse: Option<f64>,
    /// Final total flexion per finger (rad), thumb, index, middle.
    pub flexion: [f64; 3],
}

struct FingerState {
    chain: FingerChain,
    side: f64,
    setback: f64,
    psi: f64,
    in_plane: bool,
    target: f64,
    theta: Vec<f64>,
}

struct World<'a> {
    cfg: &'a SimConfig,
    object: &'a SimObject,
    fingers: Vec<FingerState>,
    wrist: [f64; 2],
    tilt: f64,
    gap: f64,
    object_pos: [f64; 2],
    object_vel: f64,
    stuck: bool,
    max_residual: f64,
    solves: usize,
    iterations: usize,
    failed: bool,
    last_contact: ContactSummary,
    flexion: [f64; 3],
}

impl World<'_> {
    fn solve_fingers(&mut self, tension: f64) -> ContactSummary {
        let cfg = self.cfg;
        let (s, c) = (math::sin(self.tilt), math::cos(self.tilt));
        let mut total = ContactSummary::default();
        let damping_rate = cfg.joint_damping * cfg.frame_rate;
        let contact = ContactLaw {
            stiffness: cfg.contact_stiffness,
            smoothing: cfg.contact_smoothing,
            samples_per_link: cfg.samples_per_link,
        };
        let limits = JointLimits { min: cfg.joint_min, max: cfg.joint_max, stiffness: cfg.limit_stiffness };
        for (slot, fs) in self.fingers.iter_mut().enumerate() {
            let local_x = -fs.side * (0.5 * self.gap + fs.setback);
            let base = [self.wrist[0] + c * local_x, self.wrist[1] + s * local_x];
            let ds = fs.chain.tendon_displacement(&fs.theta);
            let frame = Frame {
                base,
                base_angle: -math::FRAC_PI_2 + fs.side * fs.psi + self.tilt,
                side: fs.side,
                tension: tendon_force(ds, fs.target, tension),
                damping_rate,
                theta_prev: &fs.theta,
                obstacle: fs.in_plane.then_some(Obstacle { shape: &self.object.shape, center: self.object_pos }),
                contact,
                limits,
            };
            let (theta, summary, stats) = fs.chain.solve(&frame, cfg.solver_iterations, cfg.solver_tolerance);
            self.solves += 1;
            self.iterations += stats.iterations;
            if !stats.converged {
                self.failed = true;
                return total;
            }
            self.max_residual = self.max_residual.max(stats.residual);
            fs.theta = theta;
            self.flexion[slot] = fs.theta.iter().sum();
            total.add(&summary);
        }
        self.last_contact = total;
        total
    }

    fn half_height(&self) -> f64 {
        self.object.shape.half_height()
    }

    fn on_ground(&self) -> bool {
        self.object_pos[1] - self.half_height() <= 1e-12
    }

    /// Advances the object one frame given the hand's vertical velocity at
    /// the frame start and its acceleration during the frame.
    fn step_object(&mut self, contact: &ContactSummary, hand_v0: f64, hand_a: f64) {
        let dt = self.cfg.dt();
        let m = self.object.mass;
        let mu = self.object.friction;
        let hand_v1 = hand_v0 + hand_a * dt;
        let v_rel = self.object_vel - hand_v0;
        let damping = if contact.touching { self.cfg.object_damping * v_rel } else { 0.0 };
        let free = contact.lift - m * self.cfg.gravity - damping;
        let cap = mu * contact.friction_normal;

        let mut accel;
        let mut stick = false;
        if self.stuck {
            let demand = m * hand_a - free;
            let friction = friction_contact(contact.friction_normal, mu, demand);
            if demand.abs() <= cap {
                accel = hand_a;
                stick = true;
            } else {
                accel = (free + friction) / m;
            }
        } else {
            let friction = if v_rel > 0.0 { -cap } else { cap };
            accel = (free + friction) / m;
            let v_rel_next = v_rel + (accel - hand_a) * dt;
            if v_rel_next * v_rel <= 0.0 && cap > 0.0 {
                stick = true;
            }
        }
        if self.on_ground() && accel < 0.0 && self.object_vel <= 0.0 {
            accel = 0.0;
            stick = false;
        }
        if stick {
            self.object_vel = hand_v1;
        } else {
            self.object_vel += accel * dt;
        }
        self.stuck = stick;
        self.object_pos[1] += self.object_vel * dt;
        // the palm spans the jaws at wrist height
        let ceiling = self.wrist[1] - self.object.shape.top();
        if self.object_pos[1] > ceiling {
            self.object_pos[1] = ceiling;
            self.object_vel = self.object_vel.min(hand_v1);
            self.stuck = false;
        }
        let floor = self.half_height();
        if self.object_pos[1] < floor {
            self.object_pos[1] = floor;
            self.object_vel = self.object_vel.max(0.0);
            self.stuck = false;
        }
    }
}

/// Replays `record` with `design` on `object`.
///
/// Invalid designs return the invalid outcome without simulating. A solve
/// that fails to converge ends the rollout as a dropped object.
pub fn rollout(
    design: &DesignVector,
    record: &TeleopRecord,
    object: &SimObject,
    cfg: &SimConfig,
    phase: &PhaseConfig,
) -> Result<RolloutReport> {
    cfg.check()?;
    object.check()?;
    record.check()?;
    let not_run = |outcome| RolloutReport {
        outcome,
        converged: true,
        max_residual: 0.0,
        solves: 0,
        iterations: 0,
        frames: 0,
        impulse: None,
        flexion: [0.0; 3],
    };
    if !design_space::validate(design).valid {
        return Ok(not_run(EvalOutcome::invalid_design()));
    }

    let constants = cfg.constants();
    let radius = design.radius * 1e-3;
    let fingers = Finger::ALL
        .iter()
        .map(|&f| {
            let fd = design.finger(f);
            let out_of_plane = (radius * math::sin(fd.phi)).abs();
            FingerState {
                chain: FingerChain::from_design(fd, &constants),
                side: if f == Finger::Thumb { 1.0 } else { -1.0 },
                setback: radius * (1.0 - math::cos(fd.phi)),
                psi: fd.psi,
                in_plane: out_of_plane <= 0.5 * (object.depth + cfg.web_width),
                target: record.tendon_targets.get(f),
                theta: alloc::vec![0.0; fd.h.len()],
            }
        })
        .collect();

    let hh = object.shape.half_height();
    let start_object = [0.0, hh];
    let start_wrist = [record.grasp_pose.x, hh + record.grasp_pose.y];
    let mut w = World {
        cfg,
        object,
        fingers,
        wrist: start_wrist,
        tilt: record.grasp_pose.theta,
        gap: cfg.open_gap,
        object_pos: start_object,
        object_vel: 0.0,
        stuck: true,
        max_residual: 0.0,
        solves: 0,
        iterations: 0,
        failed: false,
        last_contact: ContactSummary::default(),
        flexion: [0.0; 3],
    };
    let dt = cfg.dt();
    let mut frames = 0;
    let mut collided = false;

    let stroke = record.prismatic_displacement.min(cfg.open_gap);
    let close = MotionProfile::new(stroke, cfg.prismatic_accel, dt);
    for k in 0..cfg.grasp_frames {
        w.gap = cfg.open_gap - close.position_at((k + 1) as f64 * dt);
        // tendons engage once the stroke is complete
        let tension = if k < close.frames { 0.0 } else { cfg.tendon_force };
        w.solve_fingers(tension);
        frames += 1;
        if w.failed {
            break;
        }
    }

    let lift = MotionProfile::new(record.lift_height, cfg.wrist_accel, dt);
    if !w.failed {
        for k in 0..lift.frames {
            let v0 = lift.velocity_at(k as f64 * dt);
            w.wrist[1] = start_wrist[1] + lift.position_at((k + 1) as f64 * dt);
            let contact = w.solve_fingers(cfg.tendon_force);
            frames += 1;
            if w.failed {
                break;
            }
            w.step_object(&contact, v0, lift.accel_in(k));
        }
        collided |= w.on_ground();
    }

    let mut impulse = None;
    if phase.test_phase && !w.failed {
        let j = phase.impulse.unwrap_or_else(|| {
            let [lo, hi] = cfg.impulse_range;
            if hi > lo {
                seed::rng(phase.seed).random_range(lo..=hi)
            } else {
                lo
            }
        });
        impulse = Some(j);
        w.object_vel -= j / object.mass;
        w.stuck = false;
        let tension = phase.hold_tension.unwrap_or(cfg.tendon_force);
        for _ in 0..cfg.test_frames {
            let contact = w.solve_fingers(tension);
            frames += 1;
            if w.failed {
                break;
            }
            w.step_object(&contact, 0.0, 0.0);
            collided |= w.on_ground();
        }
    }

    let outcome = if w.failed {
        let drop = -record.lift_height;
        EvalOutcome {
            dq: [0.0, drop],
            dq_y: drop,
            ground_collision: true,
            design_valid: true,
            contact_at_end: false,
            force_feedback_nonzero: false,
            lifted: false,
        }
    } else {
        let dq = [
            (w.object_pos[0] - w.wrist[0]) - (start_object[0] - start_wrist[0]),
            (w.object_pos[1] - w.wrist[1]) - (start_object[1] - start_wrist[1]),
        ];
        EvalOutcome {
            dq,
            dq_y: dq[1],
            ground_collision: collided,
            design_valid: true,
            contact_at_end: w.last_contact.touching,
            force_feedback_nonzero: w.last_contact.normal > cfg.feedback_threshold,
            lifted: objective::is_lifted(w.object_pos[1] - start_object[1], record.lift_height),
        }
    };
    Ok(RolloutReport {
        outcome,
        converged: !w.failed,
        max_residual: w.max_residual,
        solves: w.solves,
        iterations: w.iterations,
        frames,
        impulse,
        flexion: w.flexion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tendon_force_examples() {
        assert_eq!(tendon_force(0.004, 0.005, 10.0), 10.0);
        assert_eq!(tendon_force(0.006, 0.005, 10.0), 0.0);
        assert_eq!(tendon_force(0.005, 0.005, 10.0), 10.0);
    }

    #[test]
    fn frame_count_examples() {
        let dt = 1.0 / 3000.0;
        assert_eq!(prismatic_frame_count(0.02, 1.0, dt), 600);
        assert_eq!(prismatic_frame_count(0.08, 1.0, dt), 1200);
        assert_eq!(prismatic_frame_count(0.0, 1.0, dt), 0);
    }

    #[test]
    fn profile_ends_at_rest_and_covers_distance() {
        let dt = 1.0 / 3000.0;
        let p = MotionProfile::new(0.02, 1.0, dt);
        assert_eq!(p.velocity_at(p.frames as f64 * dt), 0.0);
        let steps = motion_profile(0.02, 1.0, dt);
        assert_eq!(steps.len(), 600);
        let total: f64 = steps.iter().sum();
        assert!((total - 0.02).abs() < 1e-12);
    }
}
