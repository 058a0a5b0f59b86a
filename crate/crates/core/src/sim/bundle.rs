//! The bundled object set and the scripted demonstrations for it.

use alloc::format;
use alloc::vec::Vec;

use super::{DensityClass, PlanarPose, Shape, SimConfig, SimObject, TeleopRecord, TendonTargets};

/// Areal density times area times this factor gives the object mass.
pub const MASS_SCALE: f64 = 20.0;

const DEPTH: f64 = 0.06;
const FRICTION: f64 = 0.6;
/// Corner radius of the boxes (m).
const CORNER: f64 = 0.003;

/// Four primitives, each in a light and a heavy density class.
pub fn bundled_objects() -> Vec<SimObject> {
    let shapes = [
        ("small-disc", Shape::Disc { radius: 0.025 }, [2.0, 6.0]),
        ("large-disc", Shape::Disc { radius: 0.04 }, [3.0, 7.0]),
        ("thin-bar", Shape::rounded_rectangle(0.09, 0.012, CORNER), [2.5, 6.5]),
        ("square", Shape::rounded_rectangle(0.05, 0.05, CORNER), [3.5, 7.5]),
    ];
    let mut out = Vec::with_capacity(8);
    for (class, slot) in [(DensityClass::Light, 0), (DensityClass::Heavy, 1)] {
        for (name, shape, densities) in &shapes {
            let density = densities[slot];
            let tag = if slot == 0 { "light" } else { "heavy" };
            out.push(SimObject {
                id: format!("{name}-{tag}"),
                mass: density * shape.area() * MASS_SCALE,
                shape: shape.clone(),
                friction: FRICTION,
                density,
                class,
                depth: DEPTH,
            });
        }
    }
    out
}

/// Height of the finger mounts above the top of the object (m).
const MOUNT_CLEARANCE: f64 = 0.005;
/// Baseline capsule radius plus clearance left by the jaw (m).
const JAW_CLEARANCE: f64 = 0.0075;
/// Tendon displacement at full bend (m).
pub const TENDON_FULL_BEND: f64 = 0.04;

/// Five demonstrations per object from a scripted grasp heuristic: the finger
/// mounts sit just above the object, the jaws stop a clearance outside it and
/// every finger is asked to bend by about half a turn so it wraps underneath.
pub fn scripted_records(object: &SimObject, cfg: &SimConfig) -> Vec<TeleopRecord> {
    let hh = object.shape.half_height();
    let hw = object.shape.half_width();
    let dx = [0.0, 0.003, -0.003, 0.005, -0.002];
    let dy = [0.0, 0.004, -0.003, 0.006, 0.002];
    let tilt = [0.0, 0.03, -0.03, 0.0, 0.05];
    let bend = [0.5, 0.55, 0.45, 0.6, 0.5];
    let squeeze = [0.0, 0.002, -0.002, 0.004, 0.001];
    (0..5)
        .map(|v| {
            let gap = 2.0 * (hw + JAW_CLEARANCE) - squeeze[v];
            let target = bend[v] * TENDON_FULL_BEND;
            TeleopRecord {
                object_id: object.id.clone(),
                grasp_pose: PlanarPose { x: dx[v], y: hh + MOUNT_CLEARANCE + dy[v], theta: tilt[v] },
                prismatic_displacement: (cfg.open_gap - gap).max(0.0),
                tendon_targets: TendonTargets { thumb: target, index: target, middle: target },
                lift_height: 0.05,
            }
        })
        .collect()
}
