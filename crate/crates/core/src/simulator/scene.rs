use alloc::vec::Vec;
use core::f64::consts::PI;
use nalgebra::Vector3;
#[allow(unused_imports)] // inherent float methods need std
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{mix_seed, oracle_projection, ScenePoint, VirtualCamera};
use crate::geometry::{Intrinsics, Pose};
use crate::{PointId, ViewId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Layout {
    /// Cameras on an arc in front of the facade, all on the `z < 0` side.
    OneSidedArc,
    /// Cameras on a full circle around a compact point cloud.
    Ring,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SceneConfig {
    pub n_points: usize,
    pub n_cameras: usize,
    pub layout: Layout,
    pub arc_span_deg: f64,
    /// Depth range of the points protruding from the facade toward the
    /// cameras, in meters.
    pub depth_range: (f64, f64),
    pub fov_deg: f64,
    pub seed: u64,
    pub image_size: (u32, u32),
    pub facade_width: f64,
    pub facade_height: f64,
    /// Thickness of the facade slab.
    pub slab_depth: f64,
    pub protrusion_fraction: f64,
    pub arc_radius: f64,
    pub radius_jitter: f64,
    pub height_jitter: f64,
    /// Horizontal spread of camera aim points around their nominal spot.
    pub aim_spread: f64,
    /// Required fraction of points seen by at least two cameras.
    pub min_coverage: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            n_points: 400,
            n_cameras: 60,
            layout: Layout::OneSidedArc,
            arc_span_deg: 140.0,
            depth_range: (1.0, 4.0),
            fov_deg: 60.0,
            seed: 0,
            image_size: (1280, 720),
            facade_width: 40.0,
            facade_height: 8.0,
            slab_depth: 0.3,
            protrusion_fraction: 0.15,
            arc_radius: 14.0,
            radius_jitter: 3.0,
            height_jitter: 2.0,
            aim_spread: 3.0,
            min_coverage: 0.95,
        }
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum SceneError {
    #[error("invalid scene config: {0}")]
    InvalidConfig(&'static str),
    #[error("could not reach the required coverage ({0:.3})")]
    InsufficientCoverage(f64),
}

impl SceneConfig {
    pub fn validate(&self) -> Result<(), SceneError> {
        let bad = |m| Err(SceneError::InvalidConfig(m));
        if self.n_cameras < 5 {
            return bad("n_cameras must be at least 5");
        }
        if self.n_points == 0 {
            return bad("n_points must be positive");
        }
        if !(self.fov_deg > 0.0 && self.fov_deg < 180.0) {
            return bad("fov_deg must be in (0, 180)");
        }
        if self.image_size.0 == 0 || self.image_size.1 == 0 {
            return bad("image size must be positive");
        }
        if !(self.depth_range.0 >= 0.0 && self.depth_range.0 <= self.depth_range.1) {
            return bad("depth_range must satisfy 0 <= near <= far");
        }
        if !(self.arc_span_deg > 0.0 && self.arc_span_deg <= 180.0) {
            return bad("arc_span_deg must be in (0, 180]");
        }
        if !(0.0..=1.0).contains(&self.protrusion_fraction) || !(0.0..=1.0).contains(&self.min_coverage) {
            return bad("fractions must be in [0, 1]");
        }
        if !(self.arc_radius > 0.0 && self.facade_width > 0.0 && self.facade_height > 0.0) {
            return bad("scene dimensions must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub points: Vec<ScenePoint>,
    pub cameras: Vec<VirtualCamera>,
    pub seed: u64,
}

impl Scene {
    pub fn camera(&self, id: ViewId) -> Option<&VirtualCamera> {
        self.cameras.iter().find(|c| c.id == id)
    }

    /// Fraction of points inside the image of at least two cameras.
    pub fn coverage(&self) -> f64 {
        let seen = self
            .points
            .iter()
            .filter(|p| {
                self.cameras
                    .iter()
                    .filter(|c| oracle_projection(c, p).is_some_and(|px| c.in_bounds(px)))
                    .take(2)
                    .count()
                    == 2
            })
            .count();
        seen as f64 / self.points.len().max(1) as f64
    }
}

const MAX_ATTEMPTS: u64 = 20;

/// Generates points and cameras; retries with derived seeds until the
/// coverage requirement holds.
pub fn generate_scene(cfg: &SceneConfig) -> Result<Scene, SceneError> {
    cfg.validate()?;
    let mut best = 0.0f64;
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, attempt));
        let scene = match cfg.layout {
            Layout::OneSidedArc => arc_scene(cfg, &mut rng, None),
            Layout::Ring => ring_scene(cfg, &mut rng),
        };
        let cov = scene.coverage();
        if cov >= cfg.min_coverage {
            return Ok(scene);
        }
        best = best.max(cov);
    }
    Err(SceneError::InsufficientCoverage(best))
}

fn intrinsics(cfg: &SceneConfig) -> Intrinsics {
    Intrinsics::from_fov(cfg.image_size.0, cfg.image_size.1, cfg.fov_deg.to_radians())
}

fn facade_points(cfg: &SceneConfig, rng: &mut ChaCha8Rng) -> Vec<ScenePoint> {
    (0..cfg.n_points)
        .map(|i| {
            let x = rng.random_range(-0.5..0.5) * cfg.facade_width;
            let y = rng.random_range(-0.5..0.5) * cfg.facade_height;
            let z = if rng.random::<f64>() < cfg.protrusion_fraction {
                -rng.random_range(cfg.depth_range.0..=cfg.depth_range.1)
            } else {
                rng.random_range(0.0..=cfg.slab_depth)
            };
            ScenePoint {
                id: PointId(i as u32),
                position: Vector3::new(x, y, z),
                descriptor_seed: mix_seed(cfg.seed, 0x5EED_0000 + i as u64),
            }
        })
        .collect()
}

/// Arc cameras. `clusters` restricts the arc positions to the given
/// fractional ranges of the span.
fn arc_scene(cfg: &SceneConfig, rng: &mut ChaCha8Rng, clusters: Option<&[(f64, f64)]>) -> Scene {
    let points = facade_points(cfg, rng);
    let k = intrinsics(cfg);
    let half_span = cfg.arc_span_deg.to_radians() / 2.0;
    let reach = cfg.facade_width / 2.0 - cfg.aim_spread;
    let n = cfg.n_cameras;
    let cameras = (0..n)
        .map(|i| {
            let u = match clusters {
                None => (i as f64 + rng.random_range(0.2..0.8)) / n as f64,
                Some(c) => {
                    let per = n.div_ceil(c.len());
                    let (lo, hi) = c[(i / per).min(c.len() - 1)];
                    lo + (hi - lo) * ((i % per) as f64 + rng.random_range(0.2..0.8)) / per as f64
                }
            };
            // u in [0, 1] runs left to right.
            let phi = -half_span + 2.0 * half_span * u;
            let r = cfg.arc_radius + rng.random_range(-1.0..=1.0) * cfg.radius_jitter;
            let center = Vector3::new(
                r * phi.sin(),
                rng.random_range(-1.0..=1.0) * cfg.height_jitter,
                -r * phi.cos(),
            );
            let aim = Vector3::new(
                (2.0 * u - 1.0) * reach + rng.random_range(-1.0..=1.0) * cfg.aim_spread,
                rng.random_range(-0.2..=0.2) * cfg.facade_height,
                0.0,
            );
            VirtualCamera {
                id: ViewId(i as u32),
                intrinsics: k,
                pose: Pose::look_at(center, aim),
                width: cfg.image_size.0,
                height: cfg.image_size.1,
            }
        })
        .collect();
    Scene { points, cameras, seed: cfg.seed }
}

/// Points on a vertical wall of `radius`, curving over azimuths within
/// `half_span` of +z, seen by cameras near the axis. Camera `i` faces
/// azimuth `-aim_half + 2 aim_half i / (n - 1)`, so the ids run left to
/// right and the first and last views face the ends.
fn wall_scene(cfg: &SceneConfig, radius: f64, half_span: f64, aim_half: f64, rng: &mut ChaCha8Rng) -> Scene {
    let at = |a: f64, r: f64, y: f64| Vector3::new(r * a.sin(), y, r * a.cos());
    let points = (0..cfg.n_points)
        .map(|i| {
            let a = rng.random_range(-half_span..half_span);
            let depth = if rng.random::<f64>() < cfg.protrusion_fraction {
                rng.random_range(cfg.depth_range.0..=cfg.depth_range.1)
            } else {
                -rng.random_range(0.0..=cfg.slab_depth)
            };
            let y = rng.random_range(-0.5..0.5) * cfg.facade_height;
            ScenePoint {
                id: PointId(i as u32),
                position: at(a, radius - depth, y),
                descriptor_seed: mix_seed(cfg.seed, 0x5EED_0000 + i as u64),
            }
        })
        .collect();
    let k = intrinsics(cfg);
    let n = cfg.n_cameras;
    let cameras = (0..n)
        .map(|i| {
            let a = -aim_half + 2.0 * aim_half * i as f64 / (n - 1) as f64;
            let ca = rng.random_range(0.0..2.0 * PI);
            let cr = cfg.radius_jitter * rng.random::<f64>().sqrt();
            let center = Vector3::new(cr * ca.cos(), rng.random_range(-1.5..=1.5) * cfg.height_jitter, cr * ca.sin());
            let aim = at(a + rng.random_range(-0.05..0.05), radius, rng.random_range(-0.2..=0.2) * cfg.facade_height);
            VirtualCamera {
                id: ViewId(i as u32),
                intrinsics: k,
                pose: Pose::look_at(center, aim),
                width: cfg.image_size.0,
                height: cfg.image_size.1,
            }
        })
        .collect();
    Scene { points, cameras, seed: cfg.seed }
}

fn ring_scene(cfg: &SceneConfig, rng: &mut ChaCha8Rng) -> Scene {
    let radius = cfg.facade_width / 4.0;
    let points = (0..cfg.n_points)
        .map(|i| {
            let a = rng.random_range(0.0..2.0 * PI);
            let r = radius * rng.random::<f64>().sqrt();
            ScenePoint {
                id: PointId(i as u32),
                position: Vector3::new(
                    r * a.cos(),
                    rng.random_range(-0.5..0.5) * cfg.facade_height,
                    r * a.sin(),
                ),
                descriptor_seed: mix_seed(cfg.seed, 0x5EED_0000 + i as u64),
            }
        })
        .collect();
    let k = intrinsics(cfg);
    let cameras = (0..cfg.n_cameras)
        .map(|i| {
            let a = 2.0 * PI * (i as f64 + rng.random_range(0.2..0.8)) / cfg.n_cameras as f64;
            let r = cfg.arc_radius + rng.random_range(-1.0..=1.0) * cfg.radius_jitter;
            let center =
                Vector3::new(r * a.cos(), rng.random_range(-1.0..=1.0) * cfg.height_jitter, r * a.sin());
            let aim = Vector3::new(
                rng.random_range(-0.3..0.3) * radius,
                rng.random_range(-0.2..=0.2) * cfg.facade_height,
                rng.random_range(-0.3..0.3) * radius,
            );
            VirtualCamera {
                id: ViewId(i as u32),
                intrinsics: k,
                pose: Pose::look_at(center, aim),
                width: cfg.image_size.0,
                height: cfg.image_size.1,
            }
        })
        .collect();
    Scene { points, cameras, seed: cfg.seed }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scenario {
    /// Default one-sided scene with a random view pair.
    Default,
    /// Curved wall around a camera cluster; the initial and destination
    /// views face the wall's ends, more than 100° apart.
    LargeArc,
    /// Two camera clusters over the facade ends with nothing in between.
    Gap,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioScene {
    pub scene: Scene,
    pub initial: ViewId,
    pub destination: ViewId,
}

/// Builds a scenario scene and its view pair from `seed`.
pub fn scenario(kind: Scenario, seed: u64) -> Result<ScenarioScene, SceneError> {
    match kind {
        Scenario::Default => {
            let scene = generate_scene(&SceneConfig { seed, ..SceneConfig::default() })?;
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0xFA1E));
            let n = scene.cameras.len();
            let i = rng.random_range(0..n);
            let mut d = rng.random_range(0..n - 1);
            if d >= i {
                d += 1;
            }
            Ok(ScenarioScene { initial: scene.cameras[i].id, destination: scene.cameras[d].id, scene })
        }
        Scenario::LargeArc => {
            let cfg = SceneConfig { seed, n_points: 600, n_cameras: 60, facade_height: 12.0, ..SceneConfig::default() };
            for attempt in 0..MAX_ATTEMPTS {
                let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(mix_seed(seed, 0xA4C), attempt));
                let scene = wall_scene(&cfg, 20.0, 110f64.to_radians(), 80f64.to_radians(), &mut rng);
                if scene.coverage() >= cfg.min_coverage {
                    let last = ViewId(scene.cameras.len() as u32 - 1);
                    return Ok(ScenarioScene { scene, initial: ViewId(0), destination: last });
                }
            }
            Err(SceneError::InsufficientCoverage(0.0))
        }
        Scenario::Gap => {
            let cfg = SceneConfig { seed, ..SceneConfig::default() };
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x6A9));
            let mut scene = arc_scene(&cfg, &mut rng, Some(&[(0.0, 0.15), (0.85, 1.0)]));
            let n = scene.cameras.len();
            let i = rng.random_range(0..n / 2);
            let d = n / 2 + rng.random_range(0..n / 2);
            scene.cameras.swap(0, i);
            scene.cameras.swap(1, d);
            for (k, c) in scene.cameras.iter_mut().enumerate() {
                c.id = ViewId(k as u32);
            }
            Ok(ScenarioScene { scene, initial: ViewId(0), destination: ViewId(1) })
        }
    }
}
