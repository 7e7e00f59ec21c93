use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{apply_rotation, mix_seed, oracle_projection, render_view, NoiseModel, Scene, VirtualCamera};
use crate::correspondence::{DictionaryConfig, DictionaryError, TrackSet, ViewObservations, VisualDictionary};
use crate::planner::{guidance_step, GuidanceSession, GuidanceStep, PlannerConfig, PlannerError, SessionStatus};
use crate::sofa::{SofaConfig, SofaError, SofaRanking};
use crate::{BinId, PointId, ViewId};

/// Guided-camera frames get ids `GUIDED_VIEW_BASE + frame index`.
pub const GUIDED_VIEW_BASE: u32 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct PipelineConfig {
    pub dictionary: DictionaryConfig,
    pub sofa: SofaConfig,
    pub planner: PlannerConfig,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("unknown view {0}")]
    UnknownView(ViewId),
    #[error("initial and destination views are equal")]
    SameView,
    #[error("invalid noise model")]
    InvalidNoise,
    #[error(transparent)]
    Dictionary(#[from] DictionaryError),
    #[error(transparent)]
    Sofa(#[from] SofaError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error("too few tracks ({0})")]
    TooFewTracks(usize),
}

/// Products of the offline phase: auxiliary views, dictionary, tracks and
/// the global orderings.
#[derive(Clone, Debug)]
pub struct OfflineModel {
    pub views: Vec<ViewObservations>,
    pub dictionary: VisualDictionary,
    pub tracks: TrackSet,
    pub ranking: SofaRanking,
}

impl OfflineModel {
    pub fn from_views(views: Vec<ViewObservations>, cfg: &PipelineConfig) -> Result<Self, SimError> {
        let all: Vec<_> = views.iter().flat_map(|v| v.observations.iter().cloned()).collect();
        let dictionary = VisualDictionary::build(&all, &cfg.dictionary)?;
        let tracks = TrackSet::from_views(&views, &dictionary)?;
        if tracks.len() < 2 {
            return Err(SimError::TooFewTracks(tracks.len()));
        }
        let ids: Vec<ViewId> = views.iter().map(|v| v.view_id).collect();
        let ranking = SofaRanking::build(tracks.tracks(), &ids, &cfg.sofa)?;
        Ok(Self { views, dictionary, tracks, ranking })
    }

    /// Renders every scene camera and runs the offline phase.
    pub fn build(scene: &Scene, noise: &NoiseModel, cfg: &PipelineConfig) -> Result<Self, SimError> {
        if !noise.is_valid() {
            return Err(SimError::InvalidNoise);
        }
        let views = scene.cameras.iter().map(|c| render_view(c, &scene.points, noise)).collect();
        Self::from_views(views, cfg)
    }
}

/// Most frequent ground-truth point among the auxiliary observations of a
/// bin, lower id on ties. Audit use only.
pub fn majority_truth(tracks: &TrackSet, bin: BinId) -> Option<PointId> {
    let mut counts: BTreeMap<PointId, usize> = BTreeMap::new();
    for o in &tracks.get(bin)?.observations {
        if o.view_id.0 < GUIDED_VIEW_BASE {
            if let Some(p) = o.truth_point_id {
                *counts.entry(p).or_insert(0) += 1;
            }
        }
    }
    counts.into_iter().fold(None, |best: Option<(PointId, usize)>, (p, c)| match best {
        Some((_, bc)) if bc >= c => best,
        _ => Some((p, c)),
    }).map(|b| b.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub status: SessionStatus,
    /// Guidance steps taken, i.e. intermediate views.
    pub steps: usize,
    pub waypoints: Vec<BinId>,
    pub target_bin: BinId,
    pub history: Vec<GuidanceStep>,
    /// Distance of the target point's true projection from the final image
    /// center; infinite if it ends behind the camera.
    pub oracle_final_error_px: f64,
    /// Per-axis offset behind `oracle_final_error_px`.
    pub oracle_final_offset: (f64, f64),
    pub target_point: Option<PointId>,
    /// Whether the final offset lies within the center box grown by three
    /// pixel sigmas on each axis.
    pub within_audit_bound: bool,
    pub final_camera: VirtualCamera,
}

/// Online phase: guides a camera starting at `initial` toward the center
/// point of `destination`. `run_seed` drives RANSAC, actuation noise and the
/// guided camera's rendering.
pub fn run_online(
    model: &OfflineModel,
    scene: &Scene,
    initial: ViewId,
    destination: ViewId,
    noise: &NoiseModel,
    cfg: &PipelineConfig,
    run_seed: u64,
) -> Result<RunReport, SimError> {
    run_online_with(model, scene, initial, destination, noise, cfg, run_seed, |v| v)
}

/// As [`run_online`], passing every rendered guided frame through `tap`
/// before the pipeline sees it.
#[allow(clippy::too_many_arguments)]
pub fn run_online_with(
    model: &OfflineModel,
    scene: &Scene,
    initial: ViewId,
    destination: ViewId,
    noise: &NoiseModel,
    cfg: &PipelineConfig,
    run_seed: u64,
    mut tap: impl FnMut(ViewObservations) -> ViewObservations,
) -> Result<RunReport, SimError> {
    if initial == destination {
        return Err(SimError::SameView);
    }
    let start = scene.camera(initial).ok_or(SimError::UnknownView(initial))?;
    scene.camera(destination).ok_or(SimError::UnknownView(destination))?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(run_seed, 0x0011_111E));
    let online_noise = noise.with_seed(mix_seed(noise.seed, run_seed));
    let mut tracks = model.tracks.clone();
    let dict = &model.dictionary;

    let mut cam = start.clone();
    cam.id = ViewId(GUIDED_VIEW_BASE);
    tracks.register_view(&tap(render_view(&cam, &scene.points, &online_noise)), dict)?;
    let mut session = GuidanceSession::new(
        cam.id,
        destination,
        &[initial],
        cam.frame(),
        &tracks,
        &model.ranking,
        &cfg.planner,
        &mut rng,
    )?;
    while session.status == SessionStatus::InProgress {
        let step = match guidance_step(&mut session, &model.ranking, &tracks, &cfg.planner, &mut rng) {
            Ok(s) => s,
            Err(_) => break,
        };
        let prev = cam.id;
        cam = apply_rotation(&cam, &step.rotation, noise, &mut rng);
        cam.id = ViewId(GUIDED_VIEW_BASE + session.step_count as u32);
        tracks.unregister_view(prev);
        tracks.register_view(&tap(render_view(&cam, &scene.points, &online_noise)), dict)?;
        session.advance(cam.id, &tracks, &cfg.planner, &mut rng)?;
    }

    let target_point = majority_truth(&model.tracks, session.target_bin);
    let truth = target_point.and_then(|id| scene.points.iter().find(|p| p.id == id));
    let c = cam.frame().center();
    let (err, offset) = match truth.and_then(|p| oracle_projection(&cam, p)) {
        Some(p) => (p.distance(c), (p.x - c.x, p.y - c.y)),
        None => (f64::INFINITY, (f64::INFINITY, f64::INFINITY)),
    };
    let f = cfg.planner.center_region_fraction;
    let slack = 3.0 * noise.pixel_sigma;
    let within = offset.0.abs() <= f * cam.width as f64 / 2.0 + slack
        && offset.1.abs() <= f * cam.height as f64 / 2.0 + slack;
    Ok(RunReport {
        status: session.status,
        steps: session.step_count,
        waypoints: session.history.iter().map(|s| s.waypoint_bin).collect(),
        target_bin: session.target_bin,
        history: session.history,
        oracle_final_error_px: err,
        oracle_final_offset: offset,
        target_point,
        within_audit_bound: within,
        final_camera: cam,
    })
}

/// Offline and online phases in one call.
pub fn run_session(
    scene: &Scene,
    initial: ViewId,
    destination: ViewId,
    cfg: &PipelineConfig,
    noise: &NoiseModel,
    run_seed: u64,
) -> Result<RunReport, SimError> {
    let model = OfflineModel::build(scene, noise, cfg)?;
    run_online(&model, scene, initial, destination, noise, cfg, run_seed)
}
