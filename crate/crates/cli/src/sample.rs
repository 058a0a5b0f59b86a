//! A synthetic tracked-hand stream: the hand descends onto the small light
//! disc, closes, marks the grasp and lifts. It ships as sample data and pins
//! the retargeting output through a golden record.

use cemrm_core::math;
use cemrm_core::retarget::{GraspMarker, HandFrame, Pose, Quat, Vec3};

pub const OBJECT_ID: &str = "small-disc-light";
const RATE: f64 = 30.0;
const APPROACH: usize = 25;
const LIFT: usize = 20;
const SEGMENT: f64 = 0.02;

fn smooth(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

/// Proximal, distal and tip of a two-link finger hanging from `base` (hand
/// frame, y up) and curling towards `inward` (+1 or -1 along x).
fn finger(base: Vec3, bend: f64, inward: f64) -> [Vec3; 3] {
    let distal = add(base, [0.0, -SEGMENT, 0.0]);
    let tip = add(distal, [inward * SEGMENT * math::sin(bend), -SEGMENT * math::cos(bend), 0.0]);
    [base, distal, tip]
}

pub fn stream() -> Vec<HandFrame> {
    let object = Pose {
        position: [0.40, 0.025, 0.30],
        orientation: Quat::from_axis_angle([0.0, 1.0, 0.0], 0.3),
    };
    let grasp_offset: Vec3 = [0.001, 0.031, 0.0];
    let tilt = Quat::from_axis_angle([0.0, 0.0, 1.0], 0.02);
    let hand_q = object.orientation.mul(&tilt);
    let bends = [0.50, 0.52, 0.48].map(|b| b * math::PI);

    let n = APPROACH + LIFT;
    (0..n)
        .map(|k| {
            let approach = smooth(k as f64 / (APPROACH - 1) as f64);
            let lift = smooth((k as f64 - (APPROACH - 1) as f64) / LIFT as f64);
            let local = add(grasp_offset, [0.0, 0.2 * (1.0 - approach), 0.0]);
            let mut wrist = add(object.position, object.orientation.rotate(local));
            wrist[1] += 0.05 * lift;
            let obj = Pose { position: [object.position[0], object.position[1] + 0.05 * lift, object.position[2]], ..object };

            // jaw half-opening at the finger bases, closing to fit the disc
            let half = 0.09 - 0.0375 * approach;
            let b = bends.map(|x| x * approach);
            let fingers = [
                ("thumb", finger([-half, -0.01, 0.0], b[0], 1.0)),
                ("index", finger([half, -0.01, 0.012], b[1], -1.0)),
                ("middle", finger([half, -0.01, -0.012], b[2], -1.0)),
            ];
            let mut keypoints = std::collections::BTreeMap::new();
            keypoints.insert("wrist".to_string(), wrist);
            for (name, pts) in fingers {
                for (part, p) in ["proximal", "distal", "tip"].iter().zip(pts) {
                    keypoints.insert(format!("{name}_{part}"), add(wrist, hand_q.rotate(p)));
                }
            }
            HandFrame {
                timestamp: k as f64 / RATE,
                keypoints,
                wrist_orientation: hand_q,
                object_pose: Some(obj),
                grasp: (k == APPROACH - 1).then(|| GraspMarker { object_id: OBJECT_ID.into() }),
            }
        })
        .collect()
}

/// The stream as JSON lines.
pub fn stream_text() -> String {
    stream().iter().map(|f| serde_json::to_string(f).expect("frame serializes") + "\n").collect()
}
