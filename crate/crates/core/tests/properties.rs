use camguide_core::correspondence::{build_tracks, DictionaryConfig, Observation, ViewObservations, VisualDictionary};
use camguide_core::geometry::{
    epipolar_line, epipolar_point_transfer, fundamental_from_cameras, rotation_from_command, rotation_to_center,
    transfer_line, transfer_point, FundamentalMatrix, HomogLine, Homography, Intrinsics, Pixel, Pose, RansacConfig,
};
use camguide_core::planner::{inside_image, Overlay, OverlayKind};
use camguide_core::simulator::{generate_scene, render_view, NoiseModel, SceneConfig};
use camguide_core::sofa::{
    aggregate_ranks, build_vote_graph, kendall_distance, transition_matrix, Axis, Edge, PartialOrder, VoteGraph,
};
use camguide_core::{BinId, ViewId};
use nalgebra::{Matrix3, Rotation3, Vector3};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn k() -> Intrinsics {
    Intrinsics::new(900.0, 900.0, 640.0, 360.0)
}

fn pixel() -> impl Strategy<Value = Pixel> {
    (-200.0..1480.0f64, -200.0..920.0f64).prop_map(|(x, y)| Pixel::new(x, y))
}

fn rotation() -> impl Strategy<Value = Matrix3<f64>> {
    (-0.5..0.5f64, -0.5..0.5f64, -0.5..0.5f64)
        .prop_map(|(a, b, c)| Rotation3::from_euler_angles(a, b, c).into_inner())
}

fn homography() -> impl Strategy<Value = Homography> {
    (prop::array::uniform8(-0.3..0.3f64), -0.001..0.001f64).prop_filter_map("singular", |(e, g)| {
        let m = Matrix3::new(1.0 + e[0], e[1], 100.0 * e[2], e[3], 1.0 + e[4], 100.0 * e[5], g * e[6], g * e[7], 1.0);
        Homography::new(m).ok()
    })
}

fn scale() -> impl Strategy<Value = f64> {
    prop_oneof![0.001..1000.0f64, -1000.0..-0.001f64]
}

/// Two cameras looking at the origin from different sides.
fn camera_pair(a: f64, b: f64) -> (Pose, Pose) {
    let at = |t: f64| Vector3::new(10.0 * t.sin(), 0.3 * t, -10.0 * t.cos());
    (Pose::look_at(at(a), Vector3::zeros()), Pose::look_at(at(b), Vector3::zeros()))
}

fn brute_kendall(full: &[BinId], partial: &[BinId]) -> u64 {
    let pos = |b: &BinId| full.iter().position(|x| x == b).unwrap();
    let mut n = 0;
    for i in 0..partial.len() {
        for j in i + 1..partial.len() {
            if pos(&partial[i]) > pos(&partial[j]) {
                n += 1;
            }
        }
    }
    n
}

fn partial(view: u32, bins: &[BinId]) -> PartialOrder {
    PartialOrder { view_id: ViewId(view), axis: Axis::X, ranked_bins: bins.to_vec(), coords: (0..bins.len()).map(|i| i as f64).collect() }
}

proptest! {
    #[test]
    fn point_transfer_ignores_scale(h in homography(), s in scale(), p in pixel()) {
        let hs = Homography::new(h.matrix() * s).unwrap();
        let (a, b) = (transfer_point(&h, p).unwrap(), transfer_point(&hs, p).unwrap());
        prop_assert!(a.distance(b) < 1e-9 * (1.0 + a.x.abs().max(a.y.abs())));
    }

    #[test]
    fn line_scale_does_not_change_distances(l in (-1.0..1.0f64, -1.0..1.0f64, -500.0..500.0f64), s in scale(), p in pixel()) {
        prop_assume!(l.0.hypot(l.1) > 1e-3);
        let a = HomogLine::new(l.0, l.1, l.2).unwrap();
        let b = HomogLine::new(s * l.0, s * l.1, s * l.2).unwrap();
        prop_assert!((a.distance(p) - b.distance(p)).abs() < 1e-9 * (1.0 + a.distance(p)));
    }

    #[test]
    fn homography_preserves_incidence(h in homography(), p in pixel(), q in pixel()) {
        prop_assume!(p.distance(q) > 1.0);
        let l = HomogLine::through(p, q).unwrap();
        let hp = transfer_point(&h, p).unwrap();
        let hl = transfer_line(&h, &l).unwrap();
        prop_assert!(hl.distance(hp) < 1e-9 * (1.0 + hp.x.abs().max(hp.y.abs())));
    }

    #[test]
    fn fundamental_ignores_scale(a in -1.0..-0.1f64, b in 0.1..1.0f64, s in scale(), p in (-3.0..3.0f64, -2.0..2.0f64, -1.0..1.0f64)) {
        let (p1, p2) = camera_pair(a, b);
        let f = fundamental_from_cameras(&k(), &p1, &k(), &p2).unwrap();
        let f = FundamentalMatrix::from_matrix(*f.matrix()).unwrap();
        let fs = FundamentalMatrix::from_matrix(f.matrix() * s).unwrap();
        let x = k().project(&p1.to_camera(&Vector3::new(p.0, p.1, p.2))).unwrap();
        let y = k().project(&p2.to_camera(&Vector3::new(p.0, p.1, p.2))).unwrap();
        let (l, ls) = (epipolar_line(&f, x).unwrap(), epipolar_line(&fs, x).unwrap());
        prop_assert!(l.approx_eq(&ls, 1e-9 * (1.0 + l.c().abs())));
        prop_assert!(l.distance(y) < 1e-6);
    }

    #[test]
    fn concurrent_lines_transfer_exactly(target in pixel(), n in 2usize..7, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lines: Vec<HomogLine> = (0..n)
            .map(|i| {
                let t = 0.2 + 2.7 * i as f64 / n as f64;
                HomogLine::through(target, Pixel::new(target.x + 100.0 * t.cos(), target.y + 100.0 * t.sin())).unwrap()
            })
            .collect();
        let r = epipolar_point_transfer(&lines, 3.0, &RansacConfig::default(), &mut rng).unwrap();
        prop_assert_eq!(r.inlier_count, n);
        for l in &lines {
            prop_assert!(l.distance(r.point) < 1e-9 * (1.0 + target.x.abs().max(target.y.abs())));
        }
    }

    #[test]
    fn centering_is_idempotent(p in pixel()) {
        let k = k();
        let cmd = rotation_to_center(&k, p);
        let rot = rotation_from_command(&cmd);
        // The ray through p, expressed in the rotated camera.
        let moved = k.project(&(rot.transpose() * k.ray(p))).unwrap();
        prop_assert!(rotation_to_center(&k, moved).angle < 1e-6);
        if cmd.angle > 1e-9 {
            prop_assert!((cmd.axis.norm() - 1.0).abs() < 1e-9);
        }
        prop_assert!((0.0..=std::f64::consts::PI).contains(&cmd.angle));
    }

    #[test]
    fn rotation_homography_matches_reprojection(r in rotation(), x in (-3.0..3.0f64, -2.0..2.0f64, 5.0..20.0f64)) {
        let k = k();
        let x = Vector3::new(x.0, x.1, x.2);
        let (Some(a), Some(b)) = (k.project(&x), k.project(&(r * x))) else { return Ok(()); };
        let p = transfer_point(&Homography::from_rotation(&k, &r), a).unwrap();
        prop_assert!(p.distance(b) < 1e-6);
    }

    #[test]
    fn overlay_is_sound(p in prop::option::of(pixel()), behind in any::<bool>(), w in 100.0..2000.0f64, h in 100.0..2000.0f64) {
        let o = Overlay::build(p, behind, &[], w, h);
        match o.kind {
            OverlayKind::PointMarker => prop_assert!(inside_image(o.point.unwrap(), w, h)),
            OverlayKind::DirectionArrow => {
                let d = o.arrow_direction.unwrap();
                prop_assert!((d[0].hypot(d[1]) - 1.0).abs() < 1e-9);
                prop_assert!(behind || !inside_image(o.point.unwrap(), w, h));
            }
            OverlayKind::EpipolarLines => prop_assert!(p.is_none()),
        }
    }

    #[test]
    fn kendall_matches_pair_count(n in 1usize..=8, seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut full: Vec<BinId> = (0..n as u32).map(BinId).collect();
        full.shuffle(&mut rng);
        let mut sub: Vec<BinId> = full.iter().copied().filter(|_| rand::Rng::random_bool(&mut rng, 0.7)).collect();
        sub.shuffle(&mut rng);
        prop_assert_eq!(kendall_distance(&full, &partial(0, &sub)).unwrap(), brute_kendall(&full, &sub));
    }

    #[test]
    fn transition_rows_are_stochastic(n in 1u32..12, edges in prop::collection::vec((0u32..12, 0u32..12, 0.0..5.0f64), 0..40), damping in 0.0..0.5f64) {
        let mut es: Vec<Edge> = edges
            .into_iter()
            .filter(|&(a, b, _)| a < n && b < n && a != b)
            .map(|(a, b, w)| Edge { from: BinId(a.min(b)), to: BinId(a.max(b)), weight: w })
            .collect();
        es.sort_by_key(|e| (e.from, e.to));
        es.dedup_by_key(|e| (e.from, e.to));
        let g = VoteGraph { nodes: (0..n).map(BinId).collect(), edges: es };
        let m = transition_matrix(&g, damping).unwrap();
        for i in 0..m.len() {
            let row = m.row(i);
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(row.iter().all(|&p| p >= 0.0));
        }
        let mut order = aggregate_ranks(&g, damping, 1e-9, 200).unwrap().order;
        order.sort();
        prop_assert_eq!(order, g.nodes.clone());
    }

    #[test]
    fn consistent_orders_are_recovered(n in 2u32..25, views in 2usize..8, seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut truth: Vec<BinId> = (0..n).map(BinId).collect();
        truth.shuffle(&mut rng);
        // One full view makes every pair comparable; the rest are random subsets.
        let mut partials = vec![partial(0, &truth)];
        for v in 1..views as u32 {
            let sub: Vec<BinId> = truth.iter().copied().filter(|_| rand::Rng::random_bool(&mut rng, 0.5)).collect();
            partials.push(partial(v, &sub));
        }
        let g = build_vote_graph(&partials);
        prop_assert_eq!(aggregate_ranks(&g, 0.05, 1e-12, 5000).unwrap().order, truth);
    }
}

fn rendered(seed: u64, confusion: f64) -> Vec<ViewObservations> {
    let scene = generate_scene(&SceneConfig { n_points: 60, n_cameras: 20, seed, min_coverage: 0.0, ..SceneConfig::default() }).unwrap();
    let noise = NoiseModel { confusion_rate: confusion, ..NoiseModel::default() }.with_seed(seed);
    scene.cameras.iter().map(|c| render_view(c, &scene.points, &noise)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn dictionary_and_tracks_are_deterministic(seed in 0u64..1000) {
        let views = rendered(seed, 0.05);
        let all: Vec<Observation> = views.iter().flat_map(|v| v.observations.clone()).collect();
        let cfg = DictionaryConfig { seed, ..DictionaryConfig::default() };
        let (d1, d2) = (VisualDictionary::build(&all, &cfg).unwrap(), VisualDictionary::build(&all, &cfg).unwrap());
        prop_assert_eq!(&d1, &d2);
        let t1 = build_tracks(&views, &d1).unwrap();
        prop_assert_eq!(&t1, &build_tracks(&views, &d2).unwrap());
        for t in &t1 {
            let mut vs: Vec<ViewId> = t.views().collect();
            let n = vs.len();
            vs.sort();
            vs.dedup();
            prop_assert_eq!(vs.len(), n);
            prop_assert!(n >= 2);
        }
        // Every observation falls into exactly one leaf.
        for o in &all {
            let b = d1.quantize(&o.descriptor).unwrap();
            prop_assert!((b.0 as usize) < d1.leaf_count());
        }
    }

    #[test]
    fn clean_descriptors_give_pure_tracks(seed in 0u64..1000) {
        let views = rendered(seed, 0.0);
        let all: Vec<Observation> = views.iter().flat_map(|v| v.observations.clone()).collect();
        let dict = VisualDictionary::build(&all, &DictionaryConfig::default()).unwrap();
        for t in build_tracks(&views, &dict).unwrap() {
            let first = t.observations[0].truth_point_id;
            prop_assert!(t.observations.iter().all(|o| o.truth_point_id == first));
        }
    }
}
