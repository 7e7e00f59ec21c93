//! Visual dictionary and per-bin observation tracks.
//!
//! Descriptors are clustered with hierarchical k-means; every leaf of the
//! tree is a bin that stands for one scene point, and the observations that
//! quantize to a bin form its track. This replaces pairwise matching.

mod dictionary;
mod tracks;

pub use dictionary::{DictionaryConfig, DictionaryError, VisualDictionary};
pub use tracks::{build_tracks, shared_tracks, Track, TrackSet};

use alloc::vec::Vec;

use crate::geometry::Pixel;
use crate::{PointId, ViewId};

/// Fixed-length feature descriptor.
#[derive(Clone, Debug, PartialEq)]
pub struct Descriptor(pub Vec<f64>);

impl Descriptor {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn squared_distance(&self, other: &[f64]) -> f64 {
        squared_distance(&self.0, other)
    }
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// One detected feature in one view.
///
/// `truth_point_id` is filled by the simulator for auditing only; nothing in
/// the guidance pipeline reads it.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub view_id: ViewId,
    pub pixel: Pixel,
    pub descriptor: Descriptor,
    pub truth_point_id: Option<PointId>,
}

/// Observations of a single view.
#[derive(Clone, Debug, PartialEq)]
pub struct ViewObservations {
    pub view_id: ViewId,
    pub observations: Vec<Observation>,
}
