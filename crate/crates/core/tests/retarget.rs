use std::collections::BTreeMap;

use cemrm_core::retarget::*;
use proptest::prelude::*;

fn unit_quat() -> impl Strategy<Value = Quat> {
    (prop::array::uniform3(-1.0f64..1.0), -3.1f64..3.1).prop_filter_map("axis", |(a, angle)| {
        let n = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
        (n > 1e-3).then(|| Quat::from_axis_angle([a[0] / n, a[1] / n, a[2] / n], angle))
    })
}

fn point() -> impl Strategy<Value = Vec3> {
    prop::array::uniform3(-1.0f64..1.0)
}

fn frame(t: f64, wrist: Vec3, q: Quat) -> HandFrame {
    let mut keypoints = BTreeMap::new();
    keypoints.insert("wrist".to_string(), wrist);
    HandFrame { timestamp: t, keypoints, wrist_orientation: q, object_pose: None, grasp: None }
}

fn dist(a: Vec3, b: Vec3) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

proptest! {
    #[test]
    fn bend_angle_ignores_rigid_motion_and_scale(
        tip in point(), distal in point(), prox in point(), q in unit_quat(), shift in point(), s in 0.1f64..10.0
    ) {
        prop_assume!(dist(tip, distal) > 1e-2 && dist(prox, distal) > 1e-2);
        let a = bend_angle(tip, distal, prox).unwrap();
        let map = |p: Vec3| {
            let r = q.rotate(p);
            [s * r[0] + shift[0], s * r[1] + shift[1], s * r[2] + shift[2]]
        };
        let b = bend_angle(map(tip), map(distal), map(prox)).unwrap();
        prop_assert!((0.0..=std::f64::consts::PI).contains(&a));
        prop_assert!((a - b).abs() < 1e-7, "{a} vs {b}");
    }

    #[test]
    fn slerp_moves_at_constant_angular_speed(q0 in unit_quat(), q1 in unit_quat(), t1 in 0.0f64..1.0, t2 in 0.0f64..1.0) {
        let total = q0.angle_to(&q1);
        let a = slerp(&q0, &q1, t1).unwrap();
        let b = slerp(&q0, &q1, t2).unwrap();
        prop_assert!(a.is_unit());
        prop_assert!((a.angle_to(&b) - (t1 - t2).abs() * total).abs() < 1e-7);
    }

    #[test]
    fn deltas_compose_back_to_the_last_pose(
        steps in prop::collection::vec((prop::array::uniform3(-0.3f64..0.3), unit_quat()), 2..12)
    ) {
        let frames: Vec<HandFrame> = steps.iter().enumerate().map(|(i, (p, q))| frame(i as f64 * 0.1, *p, *q)).collect();
        let deltas = delta_pose_stream(&frames, &JumpTolerance::default()).unwrap();
        let start = frames[0].wrist_pose().unwrap();
        let end = frames.last().unwrap().wrist_pose().unwrap();
        let got = compose_deltas(&start, &deltas);
        prop_assert!(dist(got.position, end.position) < 1e-6);
        prop_assert!(got.orientation.angle_to(&end.orientation) < 1e-6);
        let tol = JumpTolerance::default();
        for d in &deltas {
            let n = (d.position[0].powi(2) + d.position[1].powi(2) + d.position[2].powi(2)).sqrt();
            prop_assert!(n <= tol.translation + 1e-9);
            prop_assert!(d.orientation.angle() <= tol.rotation + 1e-9);
        }
    }

    #[test]
    fn pulley_is_linear(dq in -10.0f64..10.0, k in -5.0f64..5.0, r in 1e-4f64..0.1) {
        let one = pulley_displacement(dq, r).unwrap();
        prop_assert!((pulley_displacement(k * dq, r).unwrap() - k * one).abs() < 1e-12);
        prop_assert!((pulley_displacement(dq, 2.0 * r).unwrap() - 2.0 * one).abs() < 1e-12);
    }
}

#[test]
fn constant_stream_gives_identity_deltas() {
    let q = Quat::from_axis_angle([0.0, 1.0, 0.0], 0.4);
    let frames: Vec<HandFrame> = (0..5).map(|i| frame(i as f64, [0.1, 0.2, 0.3], q)).collect();
    for d in delta_pose_stream(&frames, &JumpTolerance::default()).unwrap() {
        assert!(dist(d.position, [0.0; 3]) < 1e-15);
        assert!(d.orientation.angle() < 1e-7);
    }
}

#[test]
fn half_metre_jump_becomes_ten_sub_steps() {
    let frames = [frame(0.0, [0.0; 3], Quat::IDENTITY), frame(1.0, [0.5, 0.0, 0.0], Quat::IDENTITY)];
    let deltas = delta_pose_stream(&frames, &JumpTolerance::default()).unwrap();
    assert_eq!(deltas.len(), 10);
    for d in &deltas {
        assert!(d.position[0] <= 0.05 + 1e-12);
    }
}

#[test]
fn pinch_examples() {
    assert_eq!(pinch_to_prismatic([0.1; 3], [0.1; 3], 1.0, [0.0, 0.06]).unwrap(), 0.0);
    assert_eq!(pinch_to_prismatic([0.0; 3], [0.08, 0.0, 0.0], 1.0, [0.0, 0.06]).unwrap(), 0.06);
    assert_eq!(pinch_to_prismatic([0.0; 3], [0.04, 0.0, 0.0], 0.5, [0.0, 0.06]).unwrap(), 0.02);
}

fn straight_hand(t: f64, wrist_y: f64, grasp: bool) -> HandFrame {
    let mut f = frame(t, [0.0, wrist_y, 0.0], Quat::IDENTITY);
    for (name, x) in [("thumb", -0.03), ("index", 0.03), ("middle", 0.03)] {
        f.keypoints.insert(format!("{name}_proximal"), [x, wrist_y - 0.01, 0.0]);
        f.keypoints.insert(format!("{name}_distal"), [x, wrist_y - 0.03, 0.0]);
        f.keypoints.insert(format!("{name}_tip"), [x, wrist_y - 0.05, 0.0]);
    }
    if grasp {
        f.grasp = Some(GraspMarker { object_id: "box".into() });
        f.object_pose = Some(Pose { position: [0.0, 0.02, 0.0], orientation: Quat::IDENTITY });
    }
    f
}

#[test]
fn straight_fingers_and_no_lift() {
    let frames = [straight_hand(0.0, 0.1, false), straight_hand(0.1, 0.06, true), straight_hand(0.2, 0.06, false)];
    let r = compile_record(&frames, &Calibration::default()).unwrap();
    assert_eq!([r.tendon_targets.thumb, r.tendon_targets.index, r.tendon_targets.middle], [0.0; 3]);
    assert_eq!(r.lift_height, 0.0);
    assert!((r.grasp_pose.y - 0.04).abs() < 1e-15);
    assert!((r.prismatic_displacement - (Calibration::default().travel[1] - 0.06)).abs() < 1e-15);
}

#[test]
fn stream_without_marker_is_rejected() {
    let frames = [straight_hand(0.0, 0.1, false), straight_hand(0.1, 0.1, false)];
    assert!(compile_record(&frames, &Calibration::default()).is_err());
}
