use camguide_core::geometry::RotationCommand;
use camguide_core::planner::SessionStatus;
use camguide_core::simulator::{apply_rotation, generate_scene, run_online, scenario, NoiseModel, OfflineModel, PipelineConfig, Scenario, SceneConfig};
use nalgebra::Vector3;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rank_distance(model: &OfflineModel, a: camguide_core::BinId, b: camguide_core::BinId) -> usize {
    let (ax, ay) = model.ranking.ranks(a).unwrap();
    let (bx, by) = model.ranking.ranks(b).unwrap();
    ax.abs_diff(bx) + ay.abs_diff(by)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn default_runs_respect_step_invariants(seed in 0u64..100_000) {
        let cfg = PipelineConfig::default();
        let sc = scenario(Scenario::Default, seed).unwrap();
        let noise = NoiseModel::default().with_seed(seed);
        let model = OfflineModel::build(&sc.scene, &noise, &cfg).unwrap();
        let r = run_online(&model, &sc.scene, sc.initial, sc.destination, &noise, &cfg, seed).unwrap();
        prop_assert!(r.status.is_terminal());
        prop_assert_eq!(r.history.len(), r.steps);
        prop_assert!(r.steps <= cfg.planner.max_steps);
        for s in &r.history {
            prop_assert!((1..=4).contains(&s.support_views.len()));
            prop_assert_eq!(s.transfer.is_some(), s.support_views.len() >= 2);
            if let Some(d) = s.overlay.arrow_direction {
                prop_assert!((d[0].hypot(d[1]) - 1.0).abs() < 1e-9);
            }
        }
        if r.status == SessionStatus::Success {
            prop_assert!(r.within_audit_bound, "error {} px", r.oracle_final_error_px);
        }
        let again = run_online(&model, &sc.scene, sc.initial, sc.destination, &noise, &cfg, seed).unwrap();
        prop_assert_eq!(&again, &r);
    }

    #[test]
    fn noiseless_waypoints_approach_the_target(seed in 0u64..100_000) {
        let cfg = PipelineConfig::default();
        let sc = scenario(Scenario::Default, seed).unwrap();
        let noise = NoiseModel::noiseless().with_seed(seed);
        let model = OfflineModel::build(&sc.scene, &noise, &cfg).unwrap();
        let r = run_online(&model, &sc.scene, sc.initial, sc.destination, &noise, &cfg, seed).unwrap();
        prop_assert_eq!(r.status, SessionStatus::Success);
        let d: Vec<usize> = r.waypoints.iter().map(|&w| rank_distance(&model, w, r.target_bin)).collect();
        for w in d.windows(2) {
            prop_assert!(w[0] == 0 || w[1] < w[0], "{:?}", d);
        }
    }
}

proptest! {
    #[test]
    fn rotation_keeps_the_center(axis in (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64), angle in 0.0..3.1f64, seed in any::<u64>()) {
        let axis = Vector3::new(axis.0, axis.1, axis.2);
        prop_assume!(axis.norm() > 1e-3);
        let scene = generate_scene(&SceneConfig { n_points: 20, n_cameras: 5, min_coverage: 0.0, seed: seed % 1000, ..SceneConfig::default() }).unwrap();
        let cam = &scene.cameras[0];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let out = apply_rotation(cam, &RotationCommand { axis: axis.normalize(), angle }, &NoiseModel::default(), &mut rng);
        prop_assert_eq!(out.pose.center, cam.pose.center);
        let r = out.pose.rotation;
        prop_assert!((r.transpose() * r - nalgebra::Matrix3::identity()).norm() < 1e-9);
        prop_assert!((r.determinant() - 1.0).abs() < 1e-9);
    }
}
