//! Steerable guidance session.
//!
//! The camera is rotated in small pan/tilt increments. Between steps the
//! overlay follows the camera by homography transfer of the current step's
//! aim point and epipolar lines, `H = K R_rel K⁻¹`. Once the aim point
//! enters the center region the planner advances and computes the next step
//! from a freshly rendered frame.

use alloc::sync::Arc;
use alloc::vec::Vec;
use nalgebra::{Matrix3, Rotation3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::geometry::{
    compose_homographies, rotation_to_ray, transfer_line, transfer_point, HomogLine,
    Homography, Pixel, RotationCommand,
};
use crate::planner::{
    guidance_step, locate_bin_with, BinLocation, GuidanceSession, GuidanceStep, Overlay, OverlayKind,
    SessionStatus,
};
use crate::simulator::{
    apply_rotation, mix_seed, render_view, NoiseModel, OfflineModel, PipelineConfig, Scene, SimError,
    VirtualCamera, GUIDED_VIEW_BASE,
};
use crate::correspondence::TrackSet;
use crate::{BinId, ViewId};

/// What a front end draws for one frame.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameState {
    pub frame_index: u64,
    pub status: SessionStatus,
    pub step_count: usize,
    pub visible_features: Vec<(BinId, Pixel)>,
    pub overlay: Overlay,
    pub image_size: (u32, u32),
}

#[derive(Clone, Debug)]
pub struct LiveSession {
    scene: Arc<Scene>,
    model: Arc<OfflineModel>,
    noise: NoiseModel,
    cfg: PipelineConfig,
    tracks: TrackSet,
    session: GuidanceSession,
    rng: ChaCha8Rng,
    camera: VirtualCamera,
    step: Option<GuidanceStep>,
    /// Body rotation accumulated since the current step was computed.
    r_rel: Matrix3<f64>,
    chain: Homography,
    frame_index: u64,
    state: FrameState,
}

/// Body rotation for a pan (positive turns right) followed by a tilt
/// (positive turns down).
pub fn pan_tilt_rotation(pan: f64, tilt: f64) -> Matrix3<f64> {
    let ry = Rotation3::from_axis_angle(&Vector3::y_axis(), pan);
    let rx = Rotation3::from_axis_angle(&Vector3::x_axis(), -tilt);
    (ry * rx).into_inner()
}

impl LiveSession {
    /// Starts at `initial`'s pose and computes the first step. `seed` drives
    /// rendering noise and RANSAC.
    pub fn new(
        scene: Arc<Scene>,
        model: Arc<OfflineModel>,
        initial: ViewId,
        destination: ViewId,
        noise: NoiseModel,
        cfg: PipelineConfig,
        seed: u64,
    ) -> Result<Self, SimError> {
        if initial == destination {
            return Err(SimError::SameView);
        }
        let start = scene.camera(initial).ok_or(SimError::UnknownView(initial))?.clone();
        scene.camera(destination).ok_or(SimError::UnknownView(destination))?;
        let noise = noise.with_seed(mix_seed(noise.seed, seed));
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x11FE));
        let mut tracks = model.tracks.clone();
        let mut camera = start;
        camera.id = ViewId(GUIDED_VIEW_BASE);
        tracks.register_view(&render_view(&camera, &scene.points, &noise), &model.dictionary)?;
        let session = GuidanceSession::new(
            camera.id,
            destination,
            &[initial],
            camera.frame(),
            &tracks,
            &model.ranking,
            &cfg.planner,
            &mut rng,
        )?;
        let state = FrameState {
            frame_index: 0,
            status: session.status,
            step_count: 0,
            visible_features: Vec::new(),
            overlay: empty_overlay(),
            image_size: (camera.width, camera.height),
        };
        let mut live = Self {
            scene,
            model,
            noise,
            cfg,
            tracks,
            session,
            rng,
            camera,
            step: None,
            r_rel: Matrix3::identity(),
            chain: Homography::identity(),
            frame_index: 0,
            state,
        };
        live.next_step();
        live.refresh_state();
        Ok(live)
    }

    pub fn state(&self) -> &FrameState {
        &self.state
    }

    pub fn status(&self) -> SessionStatus {
        self.session.status
    }

    pub fn session(&self) -> &GuidanceSession {
        &self.session
    }

    pub fn camera(&self) -> &VirtualCamera {
        &self.camera
    }

    pub fn current_step(&self) -> Option<&GuidanceStep> {
        self.step.as_ref()
    }

    /// Rotates the camera by exact pan/tilt increments and renders a frame.
    pub fn steer(&mut self, pan: f64, tilt: f64) -> Result<&FrameState, SimError> {
        if self.session.status.is_terminal() {
            return Err(SimError::Planner(crate::planner::PlannerError::SessionTerminal));
        }
        let rot = pan_tilt_rotation(pan, tilt);
        self.camera.pose.rotation = rot.transpose() * self.camera.pose.rotation;
        self.after_rotation(rot)?;
        Ok(&self.state)
    }

    /// Applies the rotation that centers the current aim point, with the
    /// noise model's actuation error, and renders a frame.
    pub fn autopilot_step(&mut self) -> Result<&FrameState, SimError> {
        if self.session.status.is_terminal() {
            return Err(SimError::Planner(crate::planner::PlannerError::SessionTerminal));
        }
        let cmd = match self.chained_aim() {
            Some((ray, _)) => rotation_to_ray(&self.camera.intrinsics, &ray),
            None => RotationCommand::identity(),
        };
        let before = self.camera.pose.rotation;
        self.camera = apply_rotation(&self.camera, &cmd, &self.noise, &mut self.rng);
        // Body rotation actually applied, noise included.
        let rot = (self.camera.pose.rotation * before.transpose()).transpose();
        self.after_rotation(rot)?;
        Ok(&self.state)
    }

    /// Runs autopilot steps until the session ends or `max_frames` frames
    /// have been rendered.
    pub fn run_autopilot(&mut self, max_frames: usize) -> Result<SessionStatus, SimError> {
        for _ in 0..max_frames {
            if self.session.status.is_terminal() {
                break;
            }
            self.autopilot_step()?;
        }
        Ok(self.session.status)
    }

    /// Locates the current waypoint in the latest frame from scratch, with
    /// the step's support views.
    pub fn fresh_transfer(&self) -> Option<BinLocation> {
        let step = self.step.as_ref()?;
        let mut s = self.session.clone();
        s.current_view = self.camera.id;
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(self.frame_index, 0xF5E5));
        locate_bin_with(&s, step.waypoint_bin, &step.support_views, &self.tracks, &self.cfg.planner, &mut rng).ok()
    }

    /// Ray toward the current step's aim in the camera frame.
    pub fn aim_ray(&self) -> Option<Vector3<f64>> {
        self.chained_aim().map(|(ray, _)| ray)
    }

    /// Ray of the step's aim in the current camera frame, and its pixel.
    fn chained_aim(&self) -> Option<(Vector3<f64>, Option<Pixel>)> {
        let step = self.step.as_ref()?;
        let k = &self.camera.intrinsics;
        let ray = k.ray(step.aim);
        let ray = self.r_rel * if step.behind { -ray } else { ray };
        Some((ray, transfer_point(&self.chain, step.aim).ok()))
    }

    fn after_rotation(&mut self, rot: Matrix3<f64>) -> Result<(), SimError> {
        // Ray directions in the new frame are Rotᵀ times the old ones.
        let inc = rot.transpose();
        self.r_rel = inc * self.r_rel;
        self.chain = compose_homographies(&self.chain, &Homography::from_rotation(&self.camera.intrinsics, &inc));
        let prev = self.camera.id;
        self.frame_index += 1;
        self.camera.id = ViewId(GUIDED_VIEW_BASE + self.frame_index as u32);
        self.tracks.unregister_view(prev);
        let view = render_view(&self.camera, &self.scene.points, &self.noise);
        self.tracks.register_view(&view, &self.model.dictionary)?;

        let reached = self.chained_aim().is_some_and(|(ray, px)| {
            ray.z > 0.0 && px.is_some_and(|p| self.session.frame.in_center_region(p, self.cfg.planner.center_region_fraction))
        });
        if (reached || self.step.is_none()) && !self.session.status.is_terminal() {
            self.session.advance(self.camera.id, &self.tracks, &self.cfg.planner, &mut self.rng)?;
            self.next_step();
        } else {
            // The planner's view follows the camera so support sets stay
            // excluded and fresh transfers use the latest frame.
            self.session.own_views.insert(self.camera.id);
        }
        self.refresh_state();
        Ok(())
    }

    fn next_step(&mut self) {
        self.step = None;
        self.r_rel = Matrix3::identity();
        self.chain = Homography::identity();
        if self.session.status != SessionStatus::InProgress {
            return;
        }
        if let Ok(step) = guidance_step(&mut self.session, &self.model.ranking, &self.tracks, &self.cfg.planner, &mut self.rng) {
            self.step = Some(step);
        }
    }

    fn refresh_state(&mut self) {
        let frame = self.session.frame;
        let overlay = match (&self.step, self.chained_aim()) {
            (Some(step), Some((ray, px))) => {
                let flags: Vec<(HomogLine, bool)> = step
                    .overlay
                    .lines
                    .iter()
                    .filter_map(|l| transfer_line(&self.chain, &l.line).ok().map(|t| (t, l.inlier)))
                    .collect();
                let point = if step.transfer.is_some() { px } else { None };
                Overlay::build(point, ray.z < 0.0, &flags, frame.width, frame.height)
            }
            _ => empty_overlay(),
        };
        self.state = FrameState {
            frame_index: self.frame_index,
            status: self.session.status,
            step_count: self.session.step_count,
            visible_features: self.tracks.view_bins(self.camera.id).collect(),
            overlay,
            image_size: (self.camera.width, self.camera.height),
        };
    }
}

pub fn empty_overlay() -> Overlay {
    Overlay { kind: OverlayKind::EpipolarLines, point: None, behind: false, arrow_direction: None, lines: Vec::new() }
}
