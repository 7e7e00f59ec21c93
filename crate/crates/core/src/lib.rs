//! Camera guidance on multi-view scenes without 3D reconstruction.
//!
//! The crate is `no_std` (it needs `alloc`). It contains the whole guidance
//! pipeline: two-view geometry and epipolar point transfer, a hierarchical
//! visual dictionary that groups feature observations into tracks, the
//! spatially ordered feature aggregation (global x/y orderings of tracks
//! obtained by Markov-chain rank aggregation), the step planner, a synthetic
//! pinhole scene simulator with ground-truth oracles, and a steerable live
//! session used by interactive front ends.

#![no_std]

extern crate alloc;

pub mod correspondence;
pub mod geometry;
mod ids;
pub mod live;
pub mod planner;
pub mod simulator;
pub mod sofa;

pub use ids::{BinId, PointId, ViewId};
