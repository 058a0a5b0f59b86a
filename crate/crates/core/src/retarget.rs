//! Offline retargeting of recorded hand-keypoint streams into teleoperation
//! records for the surrogate.
//!
//! World frame conventions: metres, `y` up. The grasp plane is the object's
//! local `x`-`y` plane, so planar projection keeps `x`, `y` and the rotation
//! about `z`.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::design_space::Finger;
use crate::math;
use crate::sim::{PlanarPose, TeleopRecord, TendonTargets};
use crate::{Error, Result};

pub type Vec3 = [f64; 3];

/// Accepted deviation of a quaternion norm from 1.
pub const UNIT_TOLERANCE: f64 = 1e-9;
/// Below this arc angle `slerp` falls back to normalized lerp.
pub const SLERP_LINEAR_BELOW: f64 = 1e-6;

fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn norm3(a: Vec3) -> f64 {
    math::norm(&a)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quat {
    pub const IDENTITY: Quat = Quat { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    /// Rotation by `angle` about the unit vector `axis`.
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Quat {
        let n = norm3(axis);
        let (s, c) = (math::sin(0.5 * angle), math::cos(0.5 * angle));
        let k = if n > 0.0 { s / n } else { 0.0 };
        Quat { w: c, x: axis[0] * k, y: axis[1] * k, z: axis[2] * k }
    }

    pub fn norm(&self) -> f64 {
        math::sqrt(self.dot(self))
    }

    pub fn is_unit(&self) -> bool {
        (self.norm() - 1.0).abs() <= UNIT_TOLERANCE
    }

    pub fn dot(&self, o: &Quat) -> f64 {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn normalized(&self) -> Quat {
        let n = self.norm();
        Quat { w: self.w / n, x: self.x / n, y: self.y / n, z: self.z / n }
    }

    pub fn conj(&self) -> Quat {
        Quat { w: self.w, x: -self.x, y: -self.y, z: -self.z }
    }

    pub fn neg(&self) -> Quat {
        Quat { w: -self.w, x: -self.x, y: -self.y, z: -self.z }
    }

    /// Hamilton product `self * o`.
    pub fn mul(&self, o: &Quat) -> Quat {
        Quat {
            w: self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            x: self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            y: self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            z: self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        }
    }

    pub fn rotate(&self, v: Vec3) -> Vec3 {
        let u = [self.x, self.y, self.z];
        let t = scale(cross(u, v), 2.0);
        add(add(v, scale(t, self.w)), cross(u, t))
    }

    /// Rotation angle in `[0, pi]`, treating `q` and `-q` alike.
    pub fn angle(&self) -> f64 {
        let v = math::sqrt(self.x * self.x + self.y * self.y + self.z * self.z);
        2.0 * math::atan2(v, self.w.abs())
    }

    /// Angle of the rotation taking `self` to `o`.
    pub fn angle_to(&self, o: &Quat) -> f64 {
        self.conj().mul(o).angle()
    }

    fn check(&self, what: &str) -> Result<()> {
        if [self.w, self.x, self.y, self.z].iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(what.into()));
        }
        if !self.is_unit() {
            return Err(Error::invalid(alloc::format!("{what} is not a unit quaternion (norm {})", self.norm())));
        }
        Ok(())
    }
}

/// Interior angle between the distal and proximal phalanx directions, in
/// `[0, pi]`; 0 for a straight finger.
pub fn bend_angle(tip: Vec3, distal: Vec3, proximal: Vec3) -> Result<f64> {
    let v1 = sub(tip, distal);
    let v2 = sub(distal, proximal);
    let (n1, n2) = (norm3(v1), norm3(v2));
    if !(n1 > 0.0 && n2 > 0.0) {
        return Err(Error::invalid("bend angle needs two non-zero phalanx vectors"));
    }
    let c = math::dot(&v1, &v2) / (n1 * n2);
    Ok(math::acos(c.clamp(-1.0, 1.0)))
}

/// Linear displacement of a pulley of radius `r_pulley` turned by `delta_q`.
pub fn pulley_displacement(delta_q: f64, r_pulley: f64) -> Result<f64> {
    if !(r_pulley > 0.0) {
        return Err(Error::invalid("pulley radius must be positive"));
    }
    Ok(r_pulley * delta_q)
}

/// Shortest-arc spherical interpolation between unit quaternions.
pub fn slerp(q0: &Quat, q1: &Quat, t: f64) -> Result<Quat> {
    q0.check("slerp start")?;
    q1.check("slerp end")?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::invalid("slerp parameter outside [0, 1]"));
    }
    let mut d = q0.dot(q1);
    let q1 = if d < 0.0 {
        d = -d;
        q1.neg()
    } else {
        *q1
    };
    let half = math::acos(d.min(1.0));
    let (a, b) = if 2.0 * half < SLERP_LINEAR_BELOW {
        (1.0 - t, t)
    } else {
        let s = math::sin(half);
        (math::sin((1.0 - t) * half) / s, math::sin(t * half) / s)
    };
    let q = Quat {
        w: a * q0.w + b * q1.w,
        x: a * q0.x + b * q1.x,
        y: a * q0.y + b * q1.y,
        z: a * q0.z + b * q1.z,
    };
    Ok(q.normalized())
}

/// Rigid transform: rotate, then translate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pose {
    pub position: Vec3,
    pub orientation: Quat,
}

impl Pose {
    pub const IDENTITY: Pose = Pose { position: [0.0; 3], orientation: Quat::IDENTITY };

    /// `self * other`: `other` expressed in `self`'s frame.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            position: add(self.position, self.orientation.rotate(other.position)),
            orientation: self.orientation.mul(&other.orientation),
        }
    }

    pub fn inverse(&self) -> Pose {
        let q = self.orientation.conj();
        Pose { position: scale(q.rotate(self.position), -1.0), orientation: q }
    }

    /// `self^-1 * other`.
    pub fn relative(&self, other: &Pose) -> Pose {
        self.inverse().compose(other)
    }
}

/// Per-step limits beyond which a wrist step counts as a tracking jump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpTolerance {
    /// m
    pub translation: f64,
    /// rad
    pub rotation: f64,
}

impl Default for JumpTolerance {
    fn default() -> Self {
        JumpTolerance { translation: 0.05, rotation: 0.35 }
    }
}

/// Marks the frame at which the operator closed the grasp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraspMarker {
    pub object_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HandFrame {
    /// s
    pub timestamp: f64,
    /// Named keypoint positions in the world frame (m).
    pub keypoints: BTreeMap<String, Vec3>,
    pub wrist_orientation: Quat,
    /// Tracked object pose, needed at the grasp frame.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object_pose: Option<Pose>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grasp: Option<GraspMarker>,
}

impl HandFrame {
    pub fn keypoint(&self, name: &str) -> Result<Vec3> {
        self.keypoints
            .get(name)
            .copied()
            .ok_or_else(|| Error::invalid(alloc::format!("frame at t={} lacks keypoint `{name}`", self.timestamp)))
    }

    pub fn wrist_pose(&self) -> Result<Pose> {
        Ok(Pose { position: self.keypoint("wrist")?, orientation: self.wrist_orientation })
    }

    /// Bend angle of one finger. Per-finger keypoints
    /// (`index_tip`, `index_distal`, `index_proximal`, ...) take precedence
    /// over the generic `fingertip`, `distal` and `proximal`.
    pub fn finger_bend(&self, finger: Finger) -> Result<f64> {
        let name = finger.name();
        let get = |part: &str, generic: &str| {
            let key = alloc::format!("{name}_{part}");
            self.keypoints.get(&key).copied().map_or_else(|| self.keypoint(generic), Ok)
        };
        bend_angle(get("tip", "fingertip")?, get("distal", "distal")?, get("proximal", "proximal")?)
    }

    pub fn check(&self) -> Result<()> {
        if !self.timestamp.is_finite() {
            return Err(Error::NonFinite("timestamp".into()));
        }
        if self.keypoints.values().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("keypoint".into()));
        }
        self.wrist_orientation.check("wrist orientation")?;
        if let Some(p) = &self.object_pose {
            p.orientation.check("object orientation")?;
        }
        Ok(())
    }
}

/// Validates every frame and the strictly increasing timestamps.
pub fn check_stream(frames: &[HandFrame]) -> Result<()> {
    for f in frames {
        f.check()?;
    }
    if frames.windows(2).any(|w| !(w[1].timestamp > w[0].timestamp)) {
        return Err(Error::invalid("timestamps must strictly increase"));
    }
    Ok(())
}

/// Relative wrist transforms between consecutive frames. A step beyond the
/// jump tolerance becomes `max(ceil(|t| / tol_t), ceil(angle / tol_r))` equal
/// sub-steps, linear in translation and slerped in rotation.
pub fn delta_pose_stream(frames: &[HandFrame], tolerance: &JumpTolerance) -> Result<Vec<Pose>> {
    if frames.len() < 2 {
        return Err(Error::invalid("need at least two frames"));
    }
    if !(tolerance.translation > 0.0 && tolerance.rotation > 0.0) {
        return Err(Error::invalid("jump tolerances must be positive"));
    }
    check_stream(frames)?;
    let poses = frames.iter().map(HandFrame::wrist_pose).collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(poses.len() - 1);
    for pair in poses.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let step = a.relative(b);
        let dist = norm3(step.position);
        let angle = step.orientation.angle();
        if dist <= tolerance.translation && angle <= tolerance.rotation {
            out.push(step);
            continue;
        }
        let pieces = math::ceil(dist / tolerance.translation).max(math::ceil(angle / tolerance.rotation)) as usize;
        let mut prev = *a;
        for k in 1..=pieces {
            let t = k as f64 / pieces as f64;
            let next = if k == pieces {
                *b
            } else {
                Pose {
                    position: add(a.position, scale(sub(b.position, a.position), t)),
                    orientation: slerp(&a.orientation, &b.orientation, t)?,
                }
            };
            out.push(prev.relative(&next));
            prev = next;
        }
    }
    Ok(out)
}

/// Composes deltas onto `start`.
pub fn compose_deltas(start: &Pose, deltas: &[Pose]) -> Pose {
    deltas.iter().fold(*start, |p, d| p.compose(d))
}

/// `scale * |thumb - index|`, clamped to `travel`.
pub fn pinch_to_prismatic(thumb_tip: Vec3, index_tip: Vec3, mapping_scale: f64, travel: [f64; 2]) -> Result<f64> {
    if !(mapping_scale > 0.0) {
        return Err(Error::invalid("mapping scale must be positive"));
    }
    if !(travel[0] <= travel[1]) {
        return Err(Error::invalid("travel range is empty"));
    }
    Ok((mapping_scale * norm3(sub(thumb_tip, index_tip))).clamp(travel[0], travel[1]))
}

/// Constants of the hand-to-gripper map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Calibration {
    /// Pinch distance to jaw opening.
    pub mapping_scale: f64,
    /// Jaw opening range (m); the upper end is fully open.
    pub travel: [f64; 2],
    /// Tendon displacement at a bend of `pi` (m).
    pub tendon_full_bend: f64,
    pub jump_tolerance: JumpTolerance,
}

impl Default for Calibration {
    fn default() -> Self {
        Calibration {
            mapping_scale: 1.0,
            travel: [0.0, crate::sim::SimConfig::default().open_gap],
            tendon_full_bend: crate::sim::TENDON_FULL_BEND,
            jump_tolerance: JumpTolerance::default(),
        }
    }
}

/// `(theta / pi) * full_bend`.
pub fn bend_to_tendon(theta: f64, full_bend: f64) -> f64 {
    theta / math::PI * full_bend
}

/// Rotation about `z` left after dropping the out-of-plane components.
fn planar_angle(q: &Quat) -> f64 {
    let x = q.rotate([1.0, 0.0, 0.0]);
    math::atan2(x[1], x[0])
}

/// Builds a record from one stream:
/// - grasp pose: wrist relative to the object at the grasp frame, planar;
/// - prismatic stroke: from fully open to the pinch-mapped opening;
/// - tendon targets: bend angles at the grasp frame, mapped linearly;
/// - lift height: vertical wrist travel from the grasp frame to the end.
pub fn compile_record(frames: &[HandFrame], cal: &Calibration) -> Result<TeleopRecord> {
    check_stream(frames)?;
    let g = frames
        .iter()
        .position(|f| f.grasp.is_some())
        .ok_or_else(|| Error::invalid("stream has no grasp marker"))?;
    let grasp = &frames[g];
    let marker = grasp.grasp.as_ref().expect("found above");
    let object = grasp.object_pose.ok_or_else(|| Error::invalid("grasp frame lacks an object pose"))?;
    let wrist = grasp.wrist_pose()?;
    let rel = object.relative(&wrist);

    let opening = pinch_to_prismatic(grasp.keypoint("thumb_tip")?, grasp.keypoint("index_tip")?, cal.mapping_scale, cal.travel)?;
    let target = |f| grasp.finger_bend(f).map(|t| bend_to_tendon(t, cal.tendon_full_bend));
    let last = frames.last().expect("non-empty").wrist_pose()?;

    let record = TeleopRecord {
        object_id: marker.object_id.clone(),
        grasp_pose: PlanarPose { x: rel.position[0], y: rel.position[1], theta: planar_angle(&rel.orientation) },
        prismatic_displacement: cal.travel[1] - opening,
        tendon_targets: TendonTargets {
            thumb: target(Finger::Thumb)?,
            index: target(Finger::Index)?,
            middle: target(Finger::Middle)?,
        },
        lift_height: (last.position[1] - wrist.position[1]).max(0.0),
    };
    record.check()?;
    Ok(record)
}
