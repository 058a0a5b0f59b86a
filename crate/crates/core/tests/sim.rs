use cemrm_core::design_space::uniform_baseline;
use cemrm_core::objective::grasp_success;
use cemrm_core::sim::*;

fn small_disc() -> SimObject {
    bundled_objects().into_iter().find(|o| o.id == "small-disc-light").unwrap()
}

fn idle_record(object: &SimObject) -> TeleopRecord {
    TeleopRecord {
        object_id: object.id.clone(),
        grasp_pose: PlanarPose { x: 0.0, y: object.shape.half_height() + 0.005, theta: 0.0 },
        prismatic_displacement: 0.0,
        tendon_targets: TendonTargets { thumb: 0.0, index: 0.0, middle: 0.0 },
        lift_height: 0.05,
    }
}

#[test]
fn baseline_grasps_the_symmetric_disc() {
    let cfg = SimConfig::default();
    let obj = small_disc();
    let rec = &scripted_records(&obj, &cfg)[0];
    let rep = rollout(&uniform_baseline(4, 40.0).unwrap(), rec, &obj, &cfg, &PhaseConfig::test(0)).unwrap();
    assert!(rep.converged);
    assert!(grasp_success(&rep.outcome), "{:?}", rep.outcome);
    assert!(rep.max_residual < cfg.solver_tolerance);
}

#[test]
fn zero_actuation_never_succeeds() {
    let cfg = SimConfig::default();
    let base = uniform_baseline(4, 40.0).unwrap();
    for obj in bundled_objects() {
        let rep = rollout(&base, &idle_record(&obj), &obj, &cfg, &PhaseConfig::test(1)).unwrap();
        assert!(!grasp_success(&rep.outcome), "{}", obj.id);
        assert!(rep.outcome.ground_collision);
    }
}

#[test]
fn releasing_the_tendons_drops_the_object() {
    let cfg = SimConfig::default();
    let obj = small_disc();
    let rec = &scripted_records(&obj, &cfg)[0];
    let phase = PhaseConfig { test_phase: true, impulse: Some(0.2), hold_tension: Some(0.0), seed: 0 };
    let rep = rollout(&uniform_baseline(4, 40.0).unwrap(), rec, &obj, &cfg, &phase).unwrap();
    assert_eq!(rep.impulse, Some(0.2));
    assert!(!grasp_success(&rep.outcome));
}

#[test]
fn seeded_test_phase_is_deterministic() {
    let cfg = SimConfig::default();
    let obj = small_disc();
    let rec = &scripted_records(&obj, &cfg)[1];
    let base = uniform_baseline(4, 40.0).unwrap();
    let a = rollout(&base, rec, &obj, &cfg, &PhaseConfig::test(7)).unwrap();
    let b = rollout(&base, rec, &obj, &cfg, &PhaseConfig::test(7)).unwrap();
    assert_eq!(a, b);
    let j = a.impulse.unwrap();
    assert!((cfg.impulse_range[0]..=cfg.impulse_range[1]).contains(&j));
}

#[test]
fn free_flexion_grows_with_tendon_force() {
    let obj = small_disc();
    let mut rec = idle_record(&obj);
    rec.tendon_targets = TendonTargets { thumb: 1.0, index: 1.0, middle: 1.0 };
    let base = uniform_baseline(4, 40.0).unwrap();
    let mut last = [-1.0; 3];
    for i in 1..=10 {
        let cfg = SimConfig { tendon_force: 0.01 * i as f64, ..SimConfig::default() };
        let rep = rollout(&base, &rec, &obj, &cfg, &PhaseConfig::training()).unwrap();
        for f in 0..3 {
            assert!(rep.flexion[f] > last[f], "finger {f} at step {i}");
        }
        last = rep.flexion;
    }
}

#[test]
fn invalid_design_is_not_simulated() {
    let cfg = SimConfig::default();
    let obj = small_disc();
    let mut d = uniform_baseline(4, 40.0).unwrap();
    d.index.phi = 0.0;
    d.middle.phi = 0.0;
    let rep = rollout(&d, &scripted_records(&obj, &cfg)[0], &obj, &cfg, &PhaseConfig::training()).unwrap();
    assert!(!rep.outcome.design_valid);
    assert_eq!(rep.frames, 0);
}

#[test]
fn bundled_objects_are_consistent() {
    let objs = bundled_objects();
    assert_eq!(objs.len(), 8);
    for o in &objs {
        o.check().unwrap();
        assert!((o.mass - o.density * o.shape.area() * MASS_SCALE).abs() < 1e-15);
        assert_eq!(scripted_records(o, &SimConfig::default()).len(), 5);
    }
}
