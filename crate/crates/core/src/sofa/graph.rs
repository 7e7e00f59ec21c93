use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use super::{Axis, PartialOrder};
use crate::correspondence::Track;
use crate::{BinId, ViewId};

/// Per-view orders of the observed bins, one per (view, axis), views in the
/// given order with X before Y. Coordinate ties go to the lower bin id.
pub fn extract_partial_orders(tracks: &[Track], views: &[ViewId]) -> Vec<PartialOrder> {
    let wanted: BTreeSet<ViewId> = views.iter().copied().collect();
    let mut seen: BTreeMap<ViewId, Vec<(BinId, f64, f64)>> = BTreeMap::new();
    for t in tracks {
        for o in &t.observations {
            if wanted.contains(&o.view_id) {
                seen.entry(o.view_id).or_default().push((t.bin, o.pixel.x, o.pixel.y));
            }
        }
    }
    let mut out = Vec::with_capacity(2 * views.len());
    let mut emitted = BTreeSet::new();
    for &view in views {
        if !emitted.insert(view) {
            continue;
        }
        let obs = seen.remove(&view).unwrap_or_default();
        for axis in [Axis::X, Axis::Y] {
            out.push(order_along(view, axis, &obs));
        }
    }
    out
}

fn order_along(view: ViewId, axis: Axis, obs: &[(BinId, f64, f64)]) -> PartialOrder {
    let mut v: Vec<(BinId, f64)> =
        obs.iter().map(|&(b, x, y)| (b, if axis == Axis::X { x } else { y })).collect();
    v.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    PartialOrder {
        view_id: view,
        axis,
        ranked_bins: v.iter().map(|p| p.0).collect(),
        coords: v.iter().map(|p| p.1).collect(),
    }
}

/// Directed edge `from → to`: the votes that `from` precedes `to`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub from: BinId,
    pub to: BinId,
    pub weight: f64,
}

/// Weighted vote graph with at most one edge per unordered bin pair.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct VoteGraph {
    /// Sorted and unique.
    pub nodes: Vec<BinId>,
    /// Sorted by `(from, to)`.
    pub edges: Vec<Edge>,
}

impl VoteGraph {
    pub fn edge(&self, from: BinId, to: BinId) -> Option<&Edge> {
        self.edges
            .binary_search_by(|e| (e.from, e.to).cmp(&(from, to)))
            .ok()
            .map(|i| &self.edges[i])
    }

    /// Kahn's algorithm; `None` if the graph has a cycle.
    pub fn topological_order(&self) -> Option<Vec<BinId>> {
        let idx: BTreeMap<BinId, usize> = self.nodes.iter().enumerate().map(|(i, &b)| (b, i)).collect();
        let mut indeg = alloc::vec![0usize; self.nodes.len()];
        let mut out: Vec<Vec<usize>> = alloc::vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            out[idx[&e.from]].push(idx[&e.to]);
            indeg[idx[&e.to]] += 1;
        }
        let mut ready: BTreeSet<usize> = (0..self.nodes.len()).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(i) = ready.pop_first() {
            order.push(self.nodes[i]);
            for &j in &out[i] {
                indeg[j] -= 1;
                if indeg[j] == 0 {
                    ready.insert(j);
                }
            }
        }
        (order.len() == self.nodes.len()).then_some(order)
    }
}

/// Accumulates pairwise coordinate gaps over all partial orders of one axis
/// and keeps the heavier direction of every pair. Equal weights keep the
/// edge from the lower bin id; pairs whose votes are all zero get no edge.
pub fn build_vote_graph(partials: &[PartialOrder]) -> VoteGraph {
    // (lo, hi) -> (votes lo before hi, votes hi before lo)
    let mut votes: BTreeMap<(BinId, BinId), (f64, f64)> = BTreeMap::new();
    let mut nodes = BTreeSet::new();
    for p in partials {
        nodes.extend(p.ranked_bins.iter().copied());
        let n = p.ranked_bins.len();
        for i in 0..n {
            for j in i + 1..n {
                let (a, b) = (p.ranked_bins[i], p.ranked_bins[j]);
                let gap = p.coords[j] - p.coords[i];
                let entry = votes.entry((a.min(b), a.max(b))).or_insert((0.0, 0.0));
                if a < b {
                    entry.0 += gap;
                } else {
                    entry.1 += gap;
                }
            }
        }
    }
    let edges = votes
        .into_iter()
        .filter_map(|((lo, hi), (fwd, back))| {
            if fwd <= 0.0 && back <= 0.0 {
                None
            } else if fwd >= back {
                Some(Edge { from: lo, to: hi, weight: fwd })
            } else {
                Some(Edge { from: hi, to: lo, weight: back })
            }
        })
        .collect::<Vec<_>>();
    let mut edges = edges;
    edges.sort_by_key(|e| (e.from, e.to));
    VoteGraph { nodes: nodes.into_iter().collect(), edges }
}
