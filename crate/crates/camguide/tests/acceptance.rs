//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use camguide::batch::{run_batch, summarize, BatchSpec};
use camguide::formats::{NoiseJson, RankingJson, TranscriptJson};
use camguide_core::correspondence::{Descriptor, Observation, Track, ViewObservations};
use camguide_core::geometry::{
    epipolar_line, epipolar_point_transfer, fundamental_from_cameras, rotation_to_center, HomogLine, Pixel, RansacConfig,
};
use camguide_core::live::LiveSession;
use camguide_core::planner::SessionStatus;
use camguide_core::simulator::{
    apply_rotation, generate_scene, majority_truth, oracle_projection, render_view, run_online, run_online_with, scenario,
    Layout, NoiseModel, OfflineModel, PipelineConfig, Scenario, SceneConfig, VirtualCamera,
};
use camguide_core::sofa::{kendall_distance, normalized_kendall_distance, Axis, PartialOrder, SofaRanking};
use camguide_core::{BinId, PointId, ViewId};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn partial(bins: Vec<BinId>) -> PartialOrder {
    let coords = (0..bins.len()).map(|i| i as f64).collect();
    PartialOrder { view_id: ViewId(0), axis: Axis::X, ranked_bins: bins, coords }
}

fn brute_kendall(full: &[BinId], part: &[BinId]) -> u64 {
    let pos = |b: &BinId| full.iter().position(|x| x == b).unwrap();
    let mut n = 0;
    for i in 0..part.len() {
        for j in i + 1..part.len() {
            n += u64::from(pos(&part[i]) > pos(&part[j]));
        }
    }
    n
}

fn kendall_oracle() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut agree = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=8);
        let mut full: Vec<BinId> = (0..n).map(BinId).collect();
        full.shuffle(&mut rng);
        let mut part: Vec<BinId> = full.iter().copied().filter(|_| rng.random_bool(0.75)).collect();
        part.shuffle(&mut rng);
        agree += usize::from(kendall_distance(&full, &partial(part.clone())).unwrap() == brute_kendall(&full, &part));
    }
    let dt = t.elapsed();
    check(agree == 1000 && dt < Duration::from_secs(5), format!("{agree}/1000 exact in {dt:.2?}"))
}

fn obs(view: u32, x: f64, y: f64) -> Observation {
    Observation { view_id: ViewId(view), pixel: Pixel::new(x, y), descriptor: Descriptor(Vec::new()), truth_point_id: None }
}

fn exact_recovery() -> Outcome {
    let t = Instant::now();
    let mut exact = 0;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 50u32;
        let mut sx: Vec<BinId> = (0..n).map(BinId).collect();
        let mut sy = sx.clone();
        sx.shuffle(&mut rng);
        sy.shuffle(&mut rng);
        let rank = |o: &[BinId], b: BinId| o.iter().position(|&x| x == b).unwrap() as f64;
        let mut tracks: Vec<Track> = (0..n).map(|b| Track { bin: BinId(b), observations: Vec::new() }).collect();
        let views: Vec<ViewId> = (0..10).map(ViewId).collect();
        for v in 0..10u32 {
            // View 0 sees every bin, so every pair is compared.
            let (ox, oy, s) = (rng.random_range(-300.0..300.0), rng.random_range(-300.0..300.0), rng.random_range(5.0..20.0));
            for t in tracks.iter_mut() {
                if v == 0 || rng.random_bool(0.5) {
                    t.observations.push(obs(v, ox + s * rank(&sx, t.bin), oy + s * rank(&sy, t.bin)));
                }
            }
        }
        let r = SofaRanking::build(&tracks, &views, &PipelineConfig::default().sofa).unwrap();
        let kx = kendall_distance(&sx, &partial(r.sigma_x.clone())).unwrap();
        let ky = kendall_distance(&sy, &partial(r.sigma_y.clone())).unwrap();
        exact += usize::from(kx == 0 && ky == 0);
    }
    let dt = t.elapsed();
    check(exact == 20 && dt < Duration::from_secs(10), format!("{exact}/20 datasets recovered in {dt:.2?}"))
}

fn noisy_sofa() -> Outcome {
    let t = Instant::now();
    let cfg = PipelineConfig::default();
    let mut total = 0.0;
    for seed in 0..20u64 {
        let scene = generate_scene(&SceneConfig { n_points: 50, n_cameras: 20, seed, ..SceneConfig::default() }).unwrap();
        let noise = NoiseModel { confusion_rate: 0.05, pixel_sigma: 2.0, ..NoiseModel::default() }.with_seed(seed);
        let model = OfflineModel::build(&scene, &noise, &cfg).unwrap();
        // Oracle x-order: bins sorted by the world x of their majority point.
        let truth = |b: BinId| majority_truth(&model.tracks, b).map(|p| scene.points[p.0 as usize].position.x);
        let est: Vec<BinId> = model.ranking.sigma_x.iter().copied().filter(|&b| truth(b).is_some()).collect();
        let mut oracle = est.clone();
        oracle.sort_by(|&a, &b| truth(a).unwrap().total_cmp(&truth(b).unwrap()));
        total += normalized_kendall_distance(&oracle, &partial(est)).unwrap();
    }
    let mean = total / 20.0;
    let dt = t.elapsed();
    check(mean <= 0.10 && dt < Duration::from_secs(30), format!("mean normalized Kendall {mean:.4} in {dt:.2?}"))
}

fn line_angle(l: &HomogLine) -> f64 {
    l.b().atan2(l.a()).rem_euclid(std::f64::consts::PI)
}

/// Oracle epipolar lines in `target` of one scene point seen by `supports`.
fn oracle_lines(target: &VirtualCamera, supports: &[&VirtualCamera], x: &nalgebra::Vector3<f64>) -> Vec<HomogLine> {
    supports
        .iter()
        .map(|c| {
            let f = fundamental_from_cameras(&c.intrinsics, &c.pose, &target.intrinsics, &target.pose).unwrap();
            let p = c.intrinsics.project(&c.pose.to_camera(x)).unwrap();
            epipolar_line(&f, p).unwrap()
        })
        .collect()
}

fn ept_exactness() -> Outcome {
    let scene = generate_scene(&SceneConfig { layout: Layout::Ring, n_points: 200, n_cameras: 30, ..SceneConfig::default() }).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let ransac = RansacConfig::default();
    let (mut exact, mut flagged, mut worst) = (0, 0, 0.0f64);
    let mut trial = 0;
    while trial < 100 {
        let point = &scene.points[rng.random_range(0..scene.points.len())];
        let seen: Vec<&VirtualCamera> = scene.cameras.iter().filter(|c| oracle_projection(c, point).is_some_and(|p| c.in_bounds(p))).collect();
        let k = 2 + trial % 3;
        if seen.len() < k + 1 {
            continue;
        }
        let mut pick: Vec<&VirtualCamera> = seen.choose_multiple(&mut rng, k + 1).copied().collect();
        let target = pick.pop().unwrap();
        let lines = oracle_lines(target, &pick, &point.position);
        // Support sets whose lines nearly coincide do not define a point.
        let distinct = lines.iter().enumerate().all(|(i, a)| {
            lines[i + 1..].iter().all(|b| {
                let d = (line_angle(a) - line_angle(b)).abs();
                d.min(std::f64::consts::PI - d) > 2f64.to_radians()
            })
        });
        if !distinct {
            continue;
        }
        trial += 1;
        let truth = oracle_projection(target, point).unwrap();
        let r = epipolar_point_transfer(&lines, 3.0, &ransac, &mut rng).unwrap();
        let err = r.point.distance(truth);
        worst = worst.max(err);
        exact += usize::from(err <= 1e-6 && r.inlier_count == lines.len());

        // One outlier line 20 to 200 px from the true point among at least
        // three true lines.
        let mut lines = lines;
        while lines.len() < 3 {
            let extra = seen.iter().copied().find(|c| c.id != target.id && !pick.iter().any(|p| p.id == c.id));
            let Some(c) = extra else { break };
            pick.push(c);
            lines = oracle_lines(target, &pick, &point.position);
        }
        let theta = rng.random_range(0.0..std::f64::consts::PI);
        let off = rng.random_range(20.0..200.0);
        let (nx, ny) = (theta.cos(), theta.sin());
        let outlier = HomogLine::new(nx, ny, -(nx * truth.x + ny * truth.y) - off).unwrap();
        let at = rng.random_range(0..=lines.len());
        lines.insert(at, outlier);
        let r = epipolar_point_transfer(&lines, 3.0, &ransac, &mut rng).unwrap();
        flagged += usize::from(!r.inlier_flags[at]);
    }
    check(exact == 100 && flagged >= 99, format!("{exact}/100 within 1e-6 px (worst {worst:.1e}), outlier flagged {flagged}/100"))
}

fn rotation_round_trip() -> Outcome {
    let scene = generate_scene(&SceneConfig::default()).unwrap();
    let noise = NoiseModel::noiseless();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut ok, mut worst, mut n) = (0, 0.0f64, 0);
    while n < 100 {
        let cam = &scene.cameras[rng.random_range(0..scene.cameras.len())];
        let point = &scene.points[rng.random_range(0..scene.points.len())];
        let Some(p) = oracle_projection(cam, point).filter(|&p| cam.in_bounds(p)) else { continue };
        n += 1;
        let moved = apply_rotation(cam, &rotation_to_center(&cam.intrinsics, p), &noise, &mut rng);
        let err = oracle_projection(&moved, point).map_or(f64::INFINITY, |q| q.distance(moved.frame().center()));
        worst = worst.max(err);
        ok += usize::from(err <= 1e-6);
    }
    check(ok == 100, format!("{ok}/100 within 1e-6 px of center (worst {worst:.1e})"))
}

fn overlay_chaining() -> Outcome {
    let cfg = PipelineConfig::default();
    let (mut ok, mut worst) = (0, 0.0f64);
    let mut failures = Vec::new();
    for seed in 0..50u64 {
        let sc = scenario(Scenario::Default, seed).unwrap();
        let noise = NoiseModel::noiseless().with_seed(seed);
        let model = OfflineModel::build(&sc.scene, &noise, &cfg).unwrap();
        let mut live = LiveSession::new(Arc::new(sc.scene), Arc::new(model), sc.initial, sc.destination, noise, cfg, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xC4A1);
        for _ in 0..20 {
            if live.status().is_terminal() {
                break;
            }
            live.steer(rng.random_range(-0.02..=0.02), rng.random_range(-0.02..=0.02)).unwrap();
        }
        let chained = live.current_step().filter(|s| s.transfer.is_some()).and(live.state().overlay.point);
        let fresh = live.fresh_transfer().and_then(|l| l.point);
        let err = match (chained, fresh) {
            (Some(a), Some(b)) => a.distance(b),
            _ if live.status() == SessionStatus::Success => 0.0,
            _ => f64::INFINITY,
        };
        worst = worst.max(err);
        if err <= 0.5 {
            ok += 1;
        } else {
            failures.push(seed);
        }
    }
    check(ok == 50, format!("{ok}/50 seeds within 0.5 px (worst {worst:.3} px) failing {failures:?}"))
}

fn end_to_end() -> Outcome {
    let t = Instant::now();
    let spec = BatchSpec { scenario: "default".into(), seed: 0, noise: NoiseJson::default() };
    let rows = run_batch(&spec, 50).unwrap();
    let s = summarize(&rows);
    let audited = rows.iter().filter(|r| r.status == SessionStatus::Success).all(|r| r.within_audit_bound);
    let dt = t.elapsed();
    check(
        s.success_rate >= 0.85 && s.mean_steps <= 4.0 && audited && dt < Duration::from_secs(300),
        format!("success {:.2}, mean steps {:.2}, audit {}, {dt:.1?}", s.success_rate, s.mean_steps, if audited { "ok" } else { "violated" }),
    )
}

fn large_gap() -> Outcome {
    let cfg = PipelineConfig::default();
    let mut arc_ok = 0;
    let mut gap_ok = 0;
    let mut arc_steps = Vec::new();
    for seed in 0..10u64 {
        for (kind, hits) in [(Scenario::LargeArc, &mut arc_ok), (Scenario::Gap, &mut gap_ok)] {
            let sc = scenario(kind, seed).unwrap();
            let noise = NoiseModel::default().with_seed(seed);
            let model = OfflineModel::build(&sc.scene, &noise, &cfg).unwrap();
            let r = run_online(&model, &sc.scene, sc.initial, sc.destination, &noise, &cfg, seed).unwrap();
            let good = match kind {
                Scenario::LargeArc => {
                    arc_steps.push(r.steps);
                    r.status == SessionStatus::Success && r.steps >= 2
                }
                _ => r.status == SessionStatus::NoOverlapFailure,
            };
            *hits += usize::from(good);
        }
    }
    check(arc_ok == 10 && gap_ok == 10, format!("large arc {arc_ok}/10 (steps {arc_steps:?}), gap {gap_ok}/10 NoOverlapFailure"))
}

fn corrupt(mut v: ViewObservations, rng: &mut ChaCha8Rng) -> ViewObservations {
    for o in &mut v.observations {
        o.truth_point_id = if rng.random_bool(0.5) { None } else { Some(PointId(rng.random())) };
    }
    v
}

fn transcript_hash(model: &OfflineModel, report: &camguide_core::simulator::RunReport) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(&TranscriptJson::from(report)).unwrap());
    for axis in [Axis::X, Axis::Y] {
        h.update(serde_json::to_vec(&RankingJson::new(&model.ranking, axis)).unwrap());
    }
    h.finalize().into()
}

fn oracle_separation() -> Outcome {
    let cfg = PipelineConfig::default();
    let mut same = 0;
    let seeds = [0u64, 1, 2, 3, 4];
    for &seed in &seeds {
        let sc = scenario(Scenario::Default, seed).unwrap();
        let noise = NoiseModel::default().with_seed(seed);
        let views: Vec<ViewObservations> = sc.scene.cameras.iter().map(|c| render_view(c, &sc.scene.points, &noise)).collect();
        let clean = OfflineModel::from_views(views.clone(), &cfg).unwrap();
        let a = run_online(&clean, &sc.scene, sc.initial, sc.destination, &noise, &cfg, seed).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0BAD);
        let dirty_views = views.into_iter().map(|v| corrupt(v, &mut rng)).collect();
        let dirty = OfflineModel::from_views(dirty_views, &cfg).unwrap();
        let b = run_online_with(&dirty, &sc.scene, sc.initial, sc.destination, &noise, &cfg, seed, |v| corrupt(v, &mut rng)).unwrap();
        same += usize::from(transcript_hash(&clean, &a) == transcript_hash(&dirty, &b));
    }
    check(same == seeds.len(), format!("{same}/{} transcript hashes unchanged", seeds.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("kendall oracle", kendall_oracle),
        ("exact SOFA recovery", exact_recovery),
        ("noisy SOFA quality", noisy_sofa),
        ("EPT exactness", ept_exactness),
        ("rotation round-trip", rotation_round_trip),
        ("overlay chaining", overlay_chaining),
        ("end-to-end guidance", end_to_end),
        ("large-gap multi-step", large_gap),
        ("oracle separation", oracle_separation),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = run();
        failed += usize::from(!o.pass);
        println!("criterion {} {name}: {} ({}; {:.1?})", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail, t.elapsed());
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
