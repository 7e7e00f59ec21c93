//! Step planner for the guidance loop.
//!
//! A session starts at the view the camera currently shows and aims for the
//! bin at the center of the destination view. Each step picks a waypoint bin
//! that lies between the current center bin and the target in both global
//! orderings, locates it in the current view by epipolar point transfer from
//! a few support views, and emits the rotation that centers it.

mod overlay;
mod step;

pub use overlay::{inside_image, Overlay, OverlayKind, OverlayLine};
pub use step::{
    center_bin, find_support_set, guidance_step, locate_bin, locate_bin_with, next_waypoint, rank_discordance, BinLocation, GuidanceStep,
};

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use crate::correspondence::TrackSet;
use crate::geometry::{Intrinsics, Pixel, RansacConfig};
use crate::sofa::SofaRanking;
use crate::{BinId, ViewId};
use rand::Rng;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlannerConfig {
    /// Side of the central success box as a fraction of each image side.
    pub center_region_fraction: f64,
    pub min_shared_tracks: usize,
    pub max_support: usize,
    pub min_support: usize,
    pub max_steps: usize,
    pub ept_threshold_px: f64,
    /// An observation of the bin in the current view within this distance
    /// of two or more epipolar lines replaces the transfer.
    pub observation_agreement_px: f64,
    /// Transfers less certain than this do not count toward success.
    pub max_transfer_uncertainty_px: f64,
    /// Candidate bins whose transfer may fail before a step gives up.
    pub max_blacklisted: usize,
    /// Transfers with a larger angular error, radians, are deferred in
    /// favor of later candidates.
    pub max_angular_uncertainty: f64,
    /// Transfers farther off the optical axis than this, radians, are
    /// deferred as well.
    pub max_step_angle: f64,
    /// Largest tolerated [`rank_discordance`] of a transfer.
    pub max_rank_discordance: f64,
    /// Deferred candidates after which the least uncertain one is taken.
    pub max_deferred: usize,
    pub ransac: RansacConfig,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            center_region_fraction: 0.2,
            min_shared_tracks: 16,
            max_support: 4,
            min_support: 2,
            max_steps: 10,
            ept_threshold_px: 3.0,
            observation_agreement_px: 15.0,
            max_transfer_uncertainty_px: 24.0,
            max_blacklisted: 5,
            max_angular_uncertainty: 0.1,
            max_step_angle: 0.8,
            max_rank_discordance: 0.2,
            max_deferred: 8,
            ransac: RansacConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SessionStatus {
    InProgress,
    Success,
    NoOverlapFailure,
    CenterFailure,
    StepLimit,
}

impl SessionStatus {
    pub fn is_terminal(self) -> bool {
        self != SessionStatus::InProgress
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum PlannerError {
    #[error("view {0} observes no tracked bin")]
    EmptyView(ViewId),
    #[error("initial and destination views must differ and exist")]
    UnknownView,
    #[error("bin {0} is not ranked")]
    UnrankedBin(BinId),
    #[error("session already ended")]
    SessionTerminal,
    #[error("no candidate waypoint has a support set")]
    NoReachableWaypoint,
    #[error("point transfer failed for every tried candidate")]
    EptFailure,
}

/// Image geometry of the guided camera.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImageFrame {
    pub intrinsics: Intrinsics,
    pub width: f64,
    pub height: f64,
}

impl ImageFrame {
    pub fn center(&self) -> Pixel {
        Pixel::new(self.width / 2.0, self.height / 2.0)
    }

    /// Central box with sides `fraction` times the image sides.
    pub fn in_center_region(&self, p: Pixel, fraction: f64) -> bool {
        let c = self.center();
        (p.x - c.x).abs() <= fraction * self.width / 2.0 && (p.y - c.y).abs() <= fraction * self.height / 2.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GuidanceSession {
    pub current_view: ViewId,
    pub destination_view: ViewId,
    pub target_bin: BinId,
    pub center_bin: BinId,
    pub step_count: usize,
    pub history: Vec<GuidanceStep>,
    pub status: SessionStatus,
    pub frame: ImageFrame,
    /// Views captured by the guided camera itself. They share its center, so
    /// they never serve as support views.
    pub own_views: BTreeSet<ViewId>,
}

impl GuidanceSession {
    /// `current` is the guided camera's first frame, already registered in
    /// `tracks`. `excluded` lists further views taken from the guided
    /// camera's position.
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng + ?Sized>(
        current: ViewId,
        destination: ViewId,
        excluded: &[ViewId],
        frame: ImageFrame,
        tracks: &TrackSet,
        ranking: &SofaRanking,
        cfg: &PlannerConfig,
        rng: &mut R,
    ) -> Result<Self, PlannerError> {
        if current == destination || !tracks.contains_view(destination) {
            return Err(PlannerError::UnknownView);
        }
        // Auxiliary views share the guided camera's image size.
        let target_bin = center_bin(destination, tracks, frame.center())?;
        if ranking.ranks(target_bin).is_none() {
            return Err(PlannerError::UnrankedBin(target_bin));
        }
        let center = center_bin(current, tracks, frame.center())?;
        let mut own_views: BTreeSet<ViewId> = excluded.iter().copied().collect();
        own_views.insert(current);
        let mut s = Self {
            current_view: current,
            destination_view: destination,
            target_bin,
            center_bin: center,
            step_count: 0,
            history: Vec::new(),
            status: SessionStatus::InProgress,
            frame,
            own_views,
        };
        if s.target_centered(tracks, cfg, rng) {
            s.status = SessionStatus::Success;
        }
        Ok(s)
    }

    fn target_centered<R: Rng + ?Sized>(&self, tracks: &TrackSet, cfg: &PlannerConfig, rng: &mut R) -> bool {
        let centered = |p: Pixel| self.frame.in_center_region(p, cfg.center_region_fraction);
        // Either estimate may be wrong: the observation through descriptor
        // confusion, the transfer through a mismatched support track. Every
        // estimate present has to agree.
        let located = locate_bin(self, self.target_bin, tracks, cfg, rng)
            .ok()
            .filter(|l| l.point.is_some() && l.uncertainty_px <= cfg.max_transfer_uncertainty_px);
        let observed = tracks.observation(self.current_view, self.target_bin);
        if located.is_none() && observed.is_none() {
            return false;
        }
        located.is_none_or(|l| !l.behind && l.point.is_some_and(centered)) && observed.is_none_or(centered)
    }

    pub fn last_step(&self) -> Option<&GuidanceStep> {
        self.history.last()
    }

    /// Moves the session to `new_view`, the frame captured after the last
    /// rotation, and updates the status.
    pub fn advance<R: Rng + ?Sized>(
        &mut self,
        new_view: ViewId,
        tracks: &TrackSet,
        cfg: &PlannerConfig,
        rng: &mut R,
    ) -> Result<SessionStatus, PlannerError> {
        if self.status.is_terminal() {
            return Err(PlannerError::SessionTerminal);
        }
        self.current_view = new_view;
        self.own_views.insert(new_view);
        match center_bin(new_view, tracks, self.frame.center()) {
            Ok(b) => self.center_bin = b,
            Err(_) => {
                self.status = SessionStatus::NoOverlapFailure;
                return Ok(self.status);
            }
        }
        self.status = if self.target_centered(tracks, cfg, rng) {
            SessionStatus::Success
        } else if self.last_step().is_some_and(|s| s.waypoint_bin == self.target_bin && s.transfer.is_some()) {
            SessionStatus::CenterFailure
        } else if self.step_count >= cfg.max_steps {
            SessionStatus::StepLimit
        } else {
            SessionStatus::InProgress
        };
        Ok(self.status)
    }
}
