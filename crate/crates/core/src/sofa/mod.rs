//! Spatially ordered feature aggregation.
//!
//! Every view ranks the bins it observes by image x and by image y. These
//! partial orders vote on a weighted directed graph (an edge `i → j` says
//! that `i` lies before `j`), and a Markov chain on that graph yields one
//! global ordering per axis. Each view is then summarized by the interval
//! of global ranks it covers.

mod graph;
mod intervals;
mod kendall;
mod markov;

pub use graph::{build_vote_graph, extract_partial_orders, Edge, VoteGraph};
pub use intervals::{image_intervals, interval_overlap, rank_map, RankInterval};
pub use kendall::{kendall_distance, normalized_kendall_distance};
pub use markov::{aggregate_ranks, stationary_distribution, transition_matrix, Aggregation, TransitionMatrix};

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::correspondence::Track;
use crate::{BinId, ViewId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Axis {
    X,
    Y,
}

/// Bins observed in one view, sorted by one image coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct PartialOrder {
    pub view_id: ViewId,
    pub axis: Axis,
    pub ranked_bins: Vec<BinId>,
    /// Coordinate of each entry of `ranked_bins`, ascending.
    pub coords: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum SofaError {
    #[error("bin {0} is not ranked")]
    UnknownBin(BinId),
    #[error("vote graph has no nodes")]
    EmptyGraph,
    #[error("view {0} observes no bins")]
    EmptyView(ViewId),
    #[error("damping {0} outside [0, 0.5)")]
    InvalidDamping(f64),
    #[error("power iteration did not converge (residual {residual})")]
    NotConverged { iterate: Vec<f64>, residual: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SofaConfig {
    pub damping: f64,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for SofaConfig {
    fn default() -> Self {
        Self { damping: 0.05, tol: 1e-9, max_iters: 1000 }
    }
}

/// Global orderings on both axes with per-view rank intervals.
#[derive(Clone, Debug, PartialEq)]
pub struct SofaRanking {
    pub sigma_x: Vec<BinId>,
    pub sigma_y: Vec<BinId>,
    pub intervals_x: BTreeMap<ViewId, RankInterval>,
    pub intervals_y: BTreeMap<ViewId, RankInterval>,
    rank_x: BTreeMap<BinId, usize>,
    rank_y: BTreeMap<BinId, usize>,
    /// Power-iteration rounds that hit the iteration cap, both axes.
    pub unconverged_rounds: usize,
}

impl SofaRanking {
    pub fn build(tracks: &[Track], views: &[ViewId], cfg: &SofaConfig) -> Result<Self, SofaError> {
        let partials = extract_partial_orders(tracks, views);
        let (px, py): (Vec<_>, Vec<_>) = partials.into_iter().partition(|p| p.axis == Axis::X);
        let px: Vec<_> = px.into_iter().filter(|p| !p.ranked_bins.is_empty()).collect();
        let py: Vec<_> = py.into_iter().filter(|p| !p.ranked_bins.is_empty()).collect();
        let ax = aggregate_ranks(&build_vote_graph(&px), cfg.damping, cfg.tol, cfg.max_iters)?;
        let ay = aggregate_ranks(&build_vote_graph(&py), cfg.damping, cfg.tol, cfg.max_iters)?;
        Ok(Self {
            intervals_x: image_intervals(&ax.order, &px)?,
            intervals_y: image_intervals(&ay.order, &py)?,
            rank_x: rank_map(&ax.order),
            rank_y: rank_map(&ay.order),
            sigma_x: ax.order,
            sigma_y: ay.order,
            unconverged_rounds: ax.unconverged_rounds + ay.unconverged_rounds,
        })
    }

    pub fn order(&self, axis: Axis) -> &[BinId] {
        match axis {
            Axis::X => &self.sigma_x,
            Axis::Y => &self.sigma_y,
        }
    }

    pub fn intervals(&self, axis: Axis) -> &BTreeMap<ViewId, RankInterval> {
        match axis {
            Axis::X => &self.intervals_x,
            Axis::Y => &self.intervals_y,
        }
    }

    /// 1-based rank of `bin` on `axis`.
    pub fn rank(&self, axis: Axis, bin: BinId) -> Option<usize> {
        match axis {
            Axis::X => self.rank_x.get(&bin).copied(),
            Axis::Y => self.rank_y.get(&bin).copied(),
        }
    }

    pub fn ranks(&self, bin: BinId) -> Option<(usize, usize)> {
        Some((self.rank(Axis::X, bin)?, self.rank(Axis::Y, bin)?))
    }

    pub fn len(&self) -> usize {
        self.sigma_x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma_x.is_empty()
    }
}
