//! JSON and JSON-lines file formats.
//!
//! Every type here is a plain serde mirror of a core type, with `From`
//! conversions for writing and fallible `into_*`/`to_*` methods for reading.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use camguide_core::correspondence::{Descriptor, Observation, Track};
use camguide_core::geometry::{HomogLine, Intrinsics, Pixel, Pose, RotationCommand};
use camguide_core::live::FrameState;
use camguide_core::planner::{GuidanceStep, Overlay, OverlayKind, SessionStatus};
use camguide_core::simulator::{mix_seed, NoiseModel, RunReport, Scene, ScenePoint, SceneConfig, Layout, VirtualCamera};
use camguide_core::sofa::{Axis, SofaRanking};
use camguide_core::{BinId, PointId, ViewId};
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("line {line}: {source}")]
    Line { line: usize, source: serde_json::Error },
    #[error("invalid {what}: {why}")]
    Invalid { what: &'static str, why: String },
}

fn invalid(what: &'static str, why: impl Into<String>) -> FormatError {
    FormatError::Invalid { what, why: why.into() }
}

pub fn status_str(s: SessionStatus) -> &'static str {
    match s {
        SessionStatus::InProgress => "InProgress",
        SessionStatus::Success => "Success",
        SessionStatus::NoOverlapFailure => "NoOverlapFailure",
        SessionStatus::CenterFailure => "CenterFailure",
        SessionStatus::StepLimit => "StepLimit",
    }
}

pub fn parse_status(s: &str) -> Option<SessionStatus> {
    Some(match s {
        "InProgress" => SessionStatus::InProgress,
        "Success" => SessionStatus::Success,
        "NoOverlapFailure" => SessionStatus::NoOverlapFailure,
        "CenterFailure" => SessionStatus::CenterFailure,
        "StepLimit" => SessionStatus::StepLimit,
        _ => return None,
    })
}

// Scene file

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointJson {
    pub id: u32,
    pub xyz: [f64; 3],
    /// Derived from the scene seed and the id when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub descriptor_seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KJson {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraJson {
    pub id: u32,
    #[serde(rename = "K")]
    pub k: KJson,
    /// World-to-camera rotation, row-major.
    #[serde(rename = "R")]
    pub r: [f64; 9],
    /// Camera center in world coordinates.
    #[serde(rename = "C")]
    pub c: [f64; 3],
    pub size: [u32; 2],
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseJson {
    pub pixel_sigma: f64,
    pub confusion_rate: f64,
    pub dropout_rate: f64,
    pub moving_fraction: f64,
    pub moving_jitter: f64,
    pub actuation_sigma: f64,
    pub descriptor_sigma: f64,
    pub descriptor_dim: usize,
    pub seed: u64,
}

impl Default for NoiseJson {
    fn default() -> Self {
        NoiseModel::default().into()
    }
}

impl From<NoiseModel> for NoiseJson {
    fn from(n: NoiseModel) -> Self {
        Self {
            pixel_sigma: n.pixel_sigma,
            confusion_rate: n.confusion_rate,
            dropout_rate: n.dropout_rate,
            moving_fraction: n.moving_fraction,
            moving_jitter: n.moving_jitter,
            actuation_sigma: n.actuation_sigma,
            descriptor_sigma: n.descriptor_sigma,
            descriptor_dim: n.descriptor_dim,
            seed: n.seed,
        }
    }
}

impl NoiseJson {
    pub fn to_model(&self) -> Result<NoiseModel, FormatError> {
        let n = NoiseModel {
            pixel_sigma: self.pixel_sigma,
            confusion_rate: self.confusion_rate,
            dropout_rate: self.dropout_rate,
            moving_fraction: self.moving_fraction,
            moving_jitter: self.moving_jitter,
            actuation_sigma: self.actuation_sigma,
            descriptor_sigma: self.descriptor_sigma,
            descriptor_dim: self.descriptor_dim,
            seed: self.seed,
        };
        if n.is_valid() {
            Ok(n)
        } else {
            Err(invalid("noise", "rates must lie in [0, 1], sigmas must be non-negative"))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub points: Vec<PointJson>,
    pub cameras: Vec<CameraJson>,
    #[serde(default)]
    pub noise: NoiseJson,
    pub seed: u64,
}

/// Seed the generators give point `id` of a scene with seed `scene_seed`.
pub fn default_descriptor_seed(scene_seed: u64, id: u32) -> u64 {
    mix_seed(scene_seed, 0x5EED_0000 + id as u64)
}

impl SceneFile {
    pub fn new(scene: &Scene, noise: &NoiseModel) -> Self {
        let points = scene
            .points
            .iter()
            .map(|p| PointJson {
                id: p.id.0,
                xyz: [p.position.x, p.position.y, p.position.z],
                descriptor_seed: (p.descriptor_seed != default_descriptor_seed(scene.seed, p.id.0))
                    .then_some(p.descriptor_seed),
            })
            .collect();
        let cameras = scene
            .cameras
            .iter()
            .map(|c| {
                let r = c.pose.rotation;
                CameraJson {
                    id: c.id.0,
                    k: KJson { fx: c.intrinsics.fx, fy: c.intrinsics.fy, cx: c.intrinsics.cx, cy: c.intrinsics.cy },
                    r: [r[(0, 0)], r[(0, 1)], r[(0, 2)], r[(1, 0)], r[(1, 1)], r[(1, 2)], r[(2, 0)], r[(2, 1)], r[(2, 2)]],
                    c: [c.pose.center.x, c.pose.center.y, c.pose.center.z],
                    size: [c.width, c.height],
                }
            })
            .collect();
        Self { points, cameras, noise: (*noise).into(), seed: scene.seed }
    }

    pub fn to_scene(&self) -> Result<(Scene, NoiseModel), FormatError> {
        let noise = self.noise.to_model()?;
        let mut ids = std::collections::BTreeSet::new();
        let points = self
            .points
            .iter()
            .map(|p| {
                if !ids.insert(p.id) {
                    return Err(invalid("scene", format!("duplicate point id {}", p.id)));
                }
                if !p.xyz.iter().all(|v| v.is_finite()) {
                    return Err(invalid("scene", format!("point {} is not finite", p.id)));
                }
                Ok(ScenePoint {
                    id: PointId(p.id),
                    position: Vector3::from(p.xyz),
                    descriptor_seed: p.descriptor_seed.unwrap_or_else(|| default_descriptor_seed(self.seed, p.id)),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut ids = std::collections::BTreeSet::new();
        let cameras = self
            .cameras
            .iter()
            .map(|c| {
                if !ids.insert(c.id) {
                    return Err(invalid("scene", format!("duplicate camera id {}", c.id)));
                }
                let k = Intrinsics::new(c.k.fx, c.k.fy, c.k.cx, c.k.cy);
                if !k.is_valid() || c.size[0] == 0 || c.size[1] == 0 {
                    return Err(invalid("scene", format!("camera {} has invalid intrinsics or size", c.id)));
                }
                let r = Matrix3::from_row_slice(&c.r);
                let orth = (r * r.transpose() - Matrix3::identity()).norm();
                if !(orth < 1e-6 && (r.determinant() - 1.0).abs() < 1e-6) {
                    return Err(invalid("scene", format!("camera {} R is not a rotation", c.id)));
                }
                if !c.c.iter().all(|v| v.is_finite()) {
                    return Err(invalid("scene", format!("camera {} center is not finite", c.id)));
                }
                Ok(VirtualCamera {
                    id: ViewId(c.id),
                    intrinsics: k,
                    pose: Pose::new(r, Vector3::from(c.c)),
                    width: c.size[0],
                    height: c.size[1],
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok((Scene { points, cameras, seed: self.seed }, noise))
    }
}

/// Scene generator settings; missing fields take the defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfigJson {
    pub n_points: usize,
    pub n_cameras: usize,
    /// `"one_sided_arc"` or `"ring"`.
    pub layout: String,
    pub arc_span_deg: f64,
    pub depth_range: [f64; 2],
    pub fov_deg: f64,
    pub seed: u64,
    pub image_size: [u32; 2],
}

impl Default for SceneConfigJson {
    fn default() -> Self {
        let d = SceneConfig::default();
        Self {
            n_points: d.n_points,
            n_cameras: d.n_cameras,
            layout: "one_sided_arc".into(),
            arc_span_deg: d.arc_span_deg,
            depth_range: [d.depth_range.0, d.depth_range.1],
            fov_deg: d.fov_deg,
            seed: d.seed,
            image_size: [d.image_size.0, d.image_size.1],
        }
    }
}

impl SceneConfigJson {
    pub fn to_config(&self) -> Result<SceneConfig, FormatError> {
        let layout = match self.layout.as_str() {
            "one_sided_arc" => Layout::OneSidedArc,
            "ring" => Layout::Ring,
            other => return Err(invalid("scene config", format!("unknown layout {other:?}"))),
        };
        Ok(SceneConfig {
            n_points: self.n_points,
            n_cameras: self.n_cameras,
            layout,
            arc_span_deg: self.arc_span_deg,
            depth_range: (self.depth_range[0], self.depth_range[1]),
            fov_deg: self.fov_deg,
            seed: self.seed,
            image_size: (self.image_size[0], self.image_size[1]),
            ..SceneConfig::default()
        })
    }
}

// Tracks

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObsJson {
    pub view: u32,
    pub x: f64,
    pub y: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackJson {
    pub bin: u32,
    pub obs: Vec<ObsJson>,
}

impl From<&Track> for TrackJson {
    fn from(t: &Track) -> Self {
        Self {
            bin: t.bin.0,
            obs: t.observations.iter().map(|o| ObsJson { view: o.view_id.0, x: o.pixel.x, y: o.pixel.y }).collect(),
        }
    }
}

impl TrackJson {
    /// Observations come back without descriptors or ground truth.
    pub fn to_track(&self) -> Track {
        let mut observations: Vec<Observation> = self
            .obs
            .iter()
            .map(|o| Observation {
                view_id: ViewId(o.view),
                pixel: Pixel::new(o.x, o.y),
                descriptor: Descriptor(Vec::new()),
                truth_point_id: None,
            })
            .collect();
        observations.sort_by_key(|o| o.view_id);
        Track { bin: BinId(self.bin), observations }
    }
}

pub fn write_tracks<W: Write>(mut w: W, tracks: &[Track]) -> Result<(), FormatError> {
    for t in tracks {
        serde_json::to_writer(&mut w, &TrackJson::from(t))?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads JSON-lines tracks; blank lines are skipped.
pub fn read_tracks<R: BufRead>(r: R) -> Result<Vec<Track>, FormatError> {
    let mut out = Vec::new();
    let mut bins = std::collections::BTreeSet::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let t: TrackJson = serde_json::from_str(&line).map_err(|source| FormatError::Line { line: i + 1, source })?;
        if !bins.insert(t.bin) {
            return Err(invalid("tracks", format!("duplicate bin {}", t.bin)));
        }
        if !t.obs.iter().all(|o| o.x.is_finite() && o.y.is_finite()) {
            return Err(invalid("tracks", format!("bin {} has a non-finite pixel", t.bin)));
        }
        out.push(t.to_track());
    }
    Ok(out)
}

// Ranking

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankingJson {
    pub axis: String,
    pub order: Vec<u32>,
    pub intervals: BTreeMap<u32, [usize; 2]>,
}

impl RankingJson {
    pub fn new(r: &SofaRanking, axis: Axis) -> Self {
        Self {
            axis: match axis {
                Axis::X => "x".into(),
                Axis::Y => "y".into(),
            },
            order: r.order(axis).iter().map(|b| b.0).collect(),
            intervals: r.intervals(axis).iter().map(|(v, i)| (v.0, [i.lo, i.hi])).collect(),
        }
    }
}

// Steps, transcripts and reports

fn px(p: Pixel) -> [f64; 2] {
    [p.x, p.y]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineJson {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seg: Option<[f64; 4]>,
    pub inlier: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlayJson {
    /// `"point"`, `"arrow"` or `"lines"`.
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<[f64; 2]>,
    pub lines: Vec<LineJson>,
}

impl From<&Overlay> for OverlayJson {
    fn from(o: &Overlay) -> Self {
        let kind = match o.kind {
            OverlayKind::PointMarker => "point",
            OverlayKind::DirectionArrow => "arrow",
            OverlayKind::EpipolarLines => "lines",
        };
        Self {
            kind: kind.into(),
            point: o.point.filter(|_| o.kind == OverlayKind::PointMarker).map(px),
            dir: o.arrow_direction.filter(|_| o.kind == OverlayKind::DirectionArrow),
            lines: o
                .lines
                .iter()
                .map(|l| LineJson {
                    a: l.line.a(),
                    b: l.line.b(),
                    c: l.line.c(),
                    seg: l.segment.map(|(p, q)| [p.x, p.y, q.x, q.y]),
                    inlier: l.inlier,
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureJson {
    pub bin: u32,
    pub x: f64,
    pub y: f64,
}

/// Wire form of a [`FrameState`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameStateJson {
    pub frame: u64,
    pub status: String,
    pub step: usize,
    pub features: Vec<FeatureJson>,
    pub overlay: OverlayJson,
    pub image_size: [u32; 2],
}

impl From<&FrameState> for FrameStateJson {
    fn from(s: &FrameState) -> Self {
        Self {
            frame: s.frame_index,
            status: status_str(s.status).into(),
            step: s.step_count,
            features: s.visible_features.iter().map(|(b, p)| FeatureJson { bin: b.0, x: p.x, y: p.y }).collect(),
            overlay: (&s.overlay).into(),
            image_size: [s.image_size.0, s.image_size.1],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotationJson {
    pub axis: [f64; 3],
    pub angle: f64,
}

impl From<&RotationCommand> for RotationJson {
    fn from(r: &RotationCommand) -> Self {
        Self { axis: [r.axis.x, r.axis.y, r.axis.z], angle: r.angle }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferJson {
    pub point: [f64; 2],
    pub inliers: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepJson {
    pub view: u32,
    pub waypoint_bin: u32,
    pub support_views: Vec<u32>,
    pub lines: Vec<[f64; 3]>,
    pub transfer: Option<TransferJson>,
    pub aim: [f64; 2],
    pub behind: bool,
    pub rotation: RotationJson,
    pub overlay: OverlayJson,
    pub blacklisted: Vec<u32>,
    pub deferred: Vec<u32>,
}

fn line3(l: &HomogLine) -> [f64; 3] {
    [l.a(), l.b(), l.c()]
}

impl From<&GuidanceStep> for StepJson {
    fn from(s: &GuidanceStep) -> Self {
        Self {
            view: s.view.0,
            waypoint_bin: s.waypoint_bin.0,
            support_views: s.support_views.iter().map(|v| v.0).collect(),
            lines: s.lines.iter().map(line3).collect(),
            transfer: s.transfer.as_ref().map(|t| TransferJson { point: px(t.point), inliers: t.inlier_flags.clone() }),
            aim: px(s.aim),
            behind: s.behind,
            rotation: (&s.rotation).into(),
            overlay: (&s.overlay).into(),
            blacklisted: s.blacklisted.iter().map(|b| b.0).collect(),
            deferred: s.deferred.iter().map(|b| b.0).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranscriptJson {
    pub status: String,
    pub steps: Vec<StepJson>,
}

impl From<&RunReport> for TranscriptJson {
    fn from(r: &RunReport) -> Self {
        Self { status: status_str(r.status).into(), steps: r.history.iter().map(Into::into).collect() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportJson {
    pub status: String,
    pub steps: usize,
    pub waypoints: Vec<u32>,
    pub target_bin: u32,
    pub target_point: Option<u32>,
    /// `null` when the target ends behind the camera.
    pub final_err_px: Option<f64>,
    pub final_offset_px: Option<[f64; 2]>,
    pub within_audit_bound: bool,
    pub offline_ms: f64,
    pub online_ms: f64,
}

impl ReportJson {
    pub fn new(r: &RunReport, offline_ms: f64, online_ms: f64) -> Self {
        let finite = r.oracle_final_error_px.is_finite();
        Self {
            status: status_str(r.status).into(),
            steps: r.steps,
            waypoints: r.waypoints.iter().map(|b| b.0).collect(),
            target_bin: r.target_bin.0,
            target_point: r.target_point.map(|p| p.0),
            final_err_px: finite.then_some(r.oracle_final_error_px),
            final_offset_px: finite.then_some([r.oracle_final_offset.0, r.oracle_final_offset.1]),
            within_audit_bound: r.within_audit_bound,
            offline_ms,
            online_ms,
        }
    }
}
