//! Pseudo-rigid-body finger: rigid links joined by torsional flexure springs,
//! flexed by a single tendon.

use alloc::vec::Vec;

use super::contact::{penalty_force, Shape};
use crate::design_space::FingerDesign;
use crate::math;

/// Cantilever flexure stiffness `E w h^3 / (12 l)` (N m / rad), SI inputs.
pub fn flexure_stiffness(youngs_modulus: f64, width: f64, thickness: f64, length: f64) -> f64 {
    youngs_modulus * width * thickness * thickness * thickness / (12.0 * length)
}

/// Material and geometry constants shared by every finger (SI units).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FingerConstants {
    pub youngs_modulus: f64,
    pub web_width: f64,
    pub flexure_thickness: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FingerChain {
    /// Per-joint spring stiffness (N m / rad).
    pub stiffness: Vec<f64>,
    /// Per-joint tendon moment arm (m).
    pub moment_arm: Vec<f64>,
    /// Rigid link length `l_seg + l_fle` (m).
    pub link_length: f64,
    /// Per-link contact capsule radius (m).
    pub radius: Vec<f64>,
}

const MM: f64 = 1e-3;

impl FingerChain {
    pub fn from_design(fd: &FingerDesign, c: &FingerConstants) -> Self {
        let k = flexure_stiffness(c.youngs_modulus, c.web_width, c.flexure_thickness, fd.l_fle * MM);
        let moment_arm = fd
            .h
            .iter()
            .zip(&fd.h_ten)
            .map(|(h, t)| (h - t) * MM + 0.5 * c.flexure_thickness)
            .collect();
        FingerChain {
            stiffness: alloc::vec![k; fd.h.len()],
            moment_arm,
            link_length: (fd.l_seg + fd.l_fle) * MM,
            radius: fd.h.iter().map(|h| 0.5 * h * MM).collect(),
        }
    }

    pub fn joints(&self) -> usize {
        self.stiffness.len()
    }

    /// Tendon path shortening `sum r_i theta_i`.
    pub fn tendon_displacement(&self, theta: &[f64]) -> f64 {
        math::dot(&self.moment_arm, theta)
    }

    /// `sum k_i theta_i^2 / 2`.
    pub fn spring_energy(&self, theta: &[f64]) -> f64 {
        0.5 * self.stiffness.iter().zip(theta).map(|(k, t)| k * t * t).sum::<f64>()
    }

    /// Joint positions `p_0 = base .. p_S` (tip).
    pub fn kinematics(&self, base: [f64; 2], base_angle: f64, side: f64, theta: &[f64], out: &mut Vec<[f64; 2]>) {
        out.clear();
        out.push(base);
        let mut angle = base_angle;
        let mut p = base;
        for t in theta {
            angle += side * t;
            p = [p[0] + self.link_length * math::cos(angle), p[1] + self.link_length * math::sin(angle)];
            out.push(p);
        }
    }
}

/// Penalty contact law and out-of-plane reach.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactLaw {
    pub stiffness: f64,
    pub smoothing: f64,
    pub samples_per_link: usize,
}

/// Soft joint limits: a quadratic restoring torque outside `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointLimits {
    pub min: f64,
    pub max: f64,
    pub stiffness: f64,
}

impl JointLimits {
    fn torque(&self, theta: f64) -> f64 {
        if theta > self.max {
            -self.stiffness * (theta - self.max) * (theta - self.max)
        } else if theta < self.min {
            self.stiffness * (self.min - theta) * (self.min - theta)
        } else {
            0.0
        }
    }
}

/// The object as seen by one solve: a shape at a fixed world position.
#[derive(Debug, Clone, Copy)]
pub struct Obstacle<'a> {
    pub shape: &'a Shape,
    pub center: [f64; 2],
}

/// Everything one equilibrium solve needs besides the chain itself.
#[derive(Debug, Clone, Copy)]
pub struct Frame<'a> {
    pub base: [f64; 2],
    pub base_angle: f64,
    /// `+1` when flexion turns the chain counter-clockwise.
    pub side: f64,
    pub tension: f64,
    /// Joint damping divided by the time step; 0 for a static solve.
    pub damping_rate: f64,
    pub theta_prev: &'a [f64],
    pub obstacle: Option<Obstacle<'a>>,
    pub contact: ContactLaw,
    pub limits: JointLimits,
}

/// Net contact effect on the object, in the world frame.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ContactSummary {
    /// Sum of normal force magnitudes (N).
    pub normal: f64,
    /// Sum of normal forces weighted by `|n_x|`: the normal load that can
    /// carry vertical friction (N).
    pub friction_normal: f64,
    /// Vertical component of the normal forces on the object, up positive (N).
    pub lift: f64,
    pub touching: bool,
}

impl ContactSummary {
    pub fn add(&mut self, other: &ContactSummary) {
        self.normal += other.normal;
        self.friction_normal += other.friction_normal;
        self.lift += other.lift;
        self.touching |= other.touching;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// Max-norm of the joint torque residual at exit (N m).
    pub residual: f64,
    pub converged: bool,
}

#[derive(Default)]
struct Scratch {
    points: Vec<[f64; 2]>,
    r0: Vec<f64>,
    r1: Vec<f64>,
    trial: Vec<f64>,
    jac: Vec<f64>,
    step: Vec<f64>,
}

impl FingerChain {
    /// Joint torque residual
    /// `T r + tau_contact + tau_limit - k theta - c (theta - theta_prev) / dt`.
    pub fn residual(&self, theta: &[f64], f: &Frame<'_>, out: &mut [f64]) -> ContactSummary {
        let mut pts = Vec::new();
        self.residual_with(theta, f, out, &mut pts)
    }

    fn residual_with(&self, theta: &[f64], f: &Frame<'_>, out: &mut [f64], pts: &mut Vec<[f64; 2]>) -> ContactSummary {
        let n = self.joints();
        for i in 0..n {
            out[i] = f.tension * self.moment_arm[i] + f.limits.torque(theta[i])
                - self.stiffness[i] * theta[i]
                - f.damping_rate * (theta[i] - f.theta_prev[i]);
        }
        let mut summary = ContactSummary::default();
        let Some(obs) = f.obstacle else {
            return summary;
        };
        self.kinematics(f.base, f.base_angle, f.side, theta, pts);
        let samples = f.contact.samples_per_link.max(1);
        for link in 0..n {
            let a = pts[link];
            let b = pts[link + 1];
            let rad = self.radius[link];
            for s in 1..=samples {
                let u = s as f64 / samples as f64;
                let q = [a[0] + u * (b[0] - a[0]), a[1] + u * (b[1] - a[1])];
                let rel = [q[0] - obs.center[0], q[1] - obs.center[1]];
                if obs.shape.clear_of(rel, rad) {
                    continue;
                }
                let (sd, nrm) = obs.shape.signed_distance(rel);
                let depth = rad - sd;
                if depth <= 0.0 {
                    continue;
                }
                let mag = penalty_force(depth, f.contact.stiffness, f.contact.smoothing);
                summary.touching = true;
                summary.normal += mag;
                summary.friction_normal += mag * nrm[0].abs();
                summary.lift -= mag * nrm[1];
                let force = [mag * nrm[0], mag * nrm[1]];
                for (j, pj) in pts.iter().enumerate().take(link + 1) {
                    let arm = [q[0] - pj[0], q[1] - pj[1]];
                    out[j] += f.side * (arm[0] * force[1] - arm[1] * force[0]);
                }
            }
        }
        summary
    }

    /// Damped Newton solve of `residual = 0` from `theta_prev`, with a
    /// forward-difference Jacobian and backtracking on the residual norm.
    pub fn solve(&self, f: &Frame<'_>, max_iterations: usize, tolerance: f64) -> (Vec<f64>, ContactSummary, SolveStats) {
        let n = self.joints();
        let mut s = Scratch::default();
        s.r0.resize(n, 0.0);
        s.r1.resize(n, 0.0);
        s.jac.resize(n * n, 0.0);
        s.step.resize(n, 0.0);
        let mut theta = f.theta_prev.to_vec();
        let mut summary = self.residual_with(&theta, f, &mut s.r0, &mut s.points);
        let mut norm = max_abs(&s.r0);
        let mut iterations = 0;
        while norm >= tolerance && iterations < max_iterations {
            iterations += 1;
            for j in 0..n {
                let h = 1e-7 * (1.0 + theta[j].abs());
                s.trial.clear();
                s.trial.extend_from_slice(&theta);
                s.trial[j] += h;
                self.residual_with(&s.trial, f, &mut s.r1, &mut s.points);
                for i in 0..n {
                    s.jac[i * n + j] = (s.r1[i] - s.r0[i]) / h;
                }
            }
            for i in 0..n {
                s.step[i] = -s.r0[i];
            }
            if !solve_dense(&mut s.jac, &mut s.step, n) {
                break;
            }
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..30 {
                s.trial.clear();
                s.trial.extend(theta.iter().zip(&s.step).map(|(t, d)| t + alpha * d));
                let trial_summary = self.residual_with(&s.trial, f, &mut s.r1, &mut s.points);
                let trial_norm = max_abs(&s.r1);
                if trial_norm < norm {
                    theta.clear();
                    theta.extend_from_slice(&s.trial);
                    core::mem::swap(&mut s.r0, &mut s.r1);
                    norm = trial_norm;
                    summary = trial_summary;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        let converged = norm < tolerance && norm.is_finite();
        (theta, summary, SolveStats { iterations, residual: norm, converged })
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| if x.is_nan() { f64::NAN } else { m.max(x.abs()) })
}

/// Solves `a x = b` in place (`b` becomes `x`) by Gaussian elimination with
/// partial pivoting. Returns false for a singular matrix.
fn solve_dense(a: &mut [f64], b: &mut [f64], n: usize) -> bool {
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs())).unwrap_or(col);
        if !(a[pivot * n + col].abs() > 1e-300) {
            return false;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        for row in col + 1..n {
            let factor = a[row * n + col] / a[col * n + col];
            for k in col..n {
                a[row * n + k] -= factor * a[col * n + k];
            }
            b[row] -= factor * b[col];
        }
    }
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row * n + k] * b[k];
        }
        b[row] = acc / a[row * n + row];
    }
    b.iter().all(|x| x.is_finite())
}
