//! Synthetic pinhole scenes with ground truth.
//!
//! A scene is a facade-like slab of points photographed by auxiliary
//! cameras. Rendering adds pixel noise, dropout, descriptor confusion and a
//! few moving points. The guided camera starts at one auxiliary camera's
//! position and may only rotate. Oracle functions expose true projections
//! for auditing; the guidance pipeline never calls them.

mod render;
mod run;
mod scene;

pub use render::{apply_rotation, oracle_projection, render_view, NoiseModel};
pub use run::{
    majority_truth, run_online, run_online_with, run_session, OfflineModel, PipelineConfig, RunReport, SimError, GUIDED_VIEW_BASE,
};
pub use scene::{generate_scene, scenario, Layout, Scenario, ScenarioScene, Scene, SceneConfig, SceneError};

use nalgebra::Vector3;

use crate::geometry::{Intrinsics, Pixel, Pose};
use crate::planner::ImageFrame;
use crate::{PointId, ViewId};

#[derive(Clone, Debug, PartialEq)]
pub struct ScenePoint {
    pub id: PointId,
    pub position: Vector3<f64>,
    pub descriptor_seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VirtualCamera {
    pub id: ViewId,
    pub intrinsics: Intrinsics,
    pub pose: Pose,
    pub width: u32,
    pub height: u32,
}

impl VirtualCamera {
    pub fn frame(&self) -> ImageFrame {
        ImageFrame { intrinsics: self.intrinsics, width: self.width as f64, height: self.height as f64 }
    }

    pub fn in_bounds(&self, p: Pixel) -> bool {
        (0.0..=self.width as f64).contains(&p.x) && (0.0..=self.height as f64).contains(&p.y)
    }

    /// Optical axis in world coordinates.
    pub fn axis(&self) -> Vector3<f64> {
        self.pose.rotation.row(2).transpose()
    }
}

/// SplitMix64 finalizer, used to derive independent seeds.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x632B_E59B_D9B4_E019);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
