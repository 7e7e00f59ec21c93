#[allow(unused_imports)] // inherent float methods need std
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{squared_distance, Descriptor, Observation};
use crate::BinId;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DictionaryConfig {
    /// Tree depth.
    pub depth: usize,
    /// Total cluster count as a fraction of the feature count.
    pub t_k: f64,
    pub max_kmeans_iters: usize,
    pub seed: u64,
    /// k-means++ seeding stops once every descriptor of a node lies within
    /// this distance of a chosen center; such a node is one visual word.
    pub min_split_distance: f64,
}

impl Default for DictionaryConfig {
    fn default() -> Self {
        Self { depth: 3, t_k: 0.9, max_kmeans_iters: 50, seed: 0, min_split_distance: 0.25 }
    }
}

impl DictionaryConfig {
    /// Per-level branching `K = ⌈(t_k · w)^(1/depth)⌉` for `w` features.
    pub fn branching(&self, feature_count: usize) -> usize {
        let k = (self.t_k * feature_count as f64).max(1.0);
        let depth = self.depth.max(1) as u32;
        let mut b: usize = 1;
        while (b as f64).powi(depth as i32) < k {
            b += 1;
        }
        b
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
pub enum DictionaryError {
    #[error("no descriptors to cluster")]
    EmptyInput,
    #[error("descriptor dimension {got} does not match {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("depth must be at least 1")]
    InvalidDepth,
}

#[derive(Clone, Debug, PartialEq)]
struct Node {
    center: Vec<f64>,
    children: Vec<usize>,
    leaf: Option<BinId>,
}

/// Hierarchical k-means tree. Leaves are bins, numbered in depth-first order.
#[derive(Clone, Debug, PartialEq)]
pub struct VisualDictionary {
    nodes: Vec<Node>,
    leaves: Vec<usize>,
    dim: usize,
    branching: usize,
    depth: usize,
}

impl VisualDictionary {
    pub fn build(observations: &[Observation], cfg: &DictionaryConfig) -> Result<Self, DictionaryError> {
        let descriptors: Vec<&[f64]> = observations.iter().map(|o| o.descriptor.0.as_slice()).collect();
        Self::build_from_slices(&descriptors, cfg)
    }

    pub fn build_from_slices(descriptors: &[&[f64]], cfg: &DictionaryConfig) -> Result<Self, DictionaryError> {
        if cfg.depth == 0 {
            return Err(DictionaryError::InvalidDepth);
        }
        let first = descriptors.first().ok_or(DictionaryError::EmptyInput)?;
        let dim = first.len();
        if let Some(bad) = descriptors.iter().find(|d| d.len() != dim) {
            return Err(DictionaryError::DimensionMismatch { expected: dim, got: bad.len() });
        }
        let branching = cfg.branching(descriptors.len());
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let sep2 = cfg.min_split_distance * cfg.min_split_distance;

        let all: Vec<usize> = (0..descriptors.len()).collect();
        let mut nodes = vec![Node { center: mean(descriptors, &all, dim), children: Vec::new(), leaf: None }];
        let mut leaves = Vec::new();
        // (node, member indices, level)
        let mut stack = vec![(0usize, all, 0usize)];
        while let Some((node, members, level)) = stack.pop() {
            let clusters = if level < cfg.depth && members.len() > 1 {
                kmeans(descriptors, &members, branching, cfg.max_kmeans_iters, sep2, &mut rng)
            } else {
                Vec::new()
            };
            if clusters.len() <= 1 {
                nodes[node].leaf = Some(BinId(leaves.len() as u32));
                leaves.push(node);
                continue;
            }
            let mut children = Vec::with_capacity(clusters.len());
            let mut pending = Vec::with_capacity(clusters.len());
            for (center, idx) in clusters {
                let id = nodes.len();
                nodes.push(Node { center, children: Vec::new(), leaf: None });
                children.push(id);
                pending.push((id, idx, level + 1));
            }
            nodes[node].children = children;
            // Reverse so the first child is expanded first.
            stack.extend(pending.into_iter().rev());
        }
        Ok(Self { nodes, leaves, dim, branching, depth: cfg.depth })
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn branching(&self) -> usize {
        self.branching
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Center of a leaf in descriptor space.
    pub fn leaf_center(&self, bin: BinId) -> Option<&[f64]> {
        self.leaves.get(bin.0 as usize).map(|&n| self.nodes[n].center.as_slice())
    }

    /// Greedy nearest-child descent; ties go to the lower child index.
    pub fn quantize(&self, d: &Descriptor) -> Result<BinId, DictionaryError> {
        self.quantize_slice(&d.0)
    }

    pub fn quantize_slice(&self, d: &[f64]) -> Result<BinId, DictionaryError> {
        if d.len() != self.dim {
            return Err(DictionaryError::DimensionMismatch { expected: self.dim, got: d.len() });
        }
        let mut node = 0;
        loop {
            let n = &self.nodes[node];
            if let Some(bin) = n.leaf {
                return Ok(bin);
            }
            let mut best = n.children[0];
            let mut best_d = squared_distance(&self.nodes[best].center, d);
            for &c in &n.children[1..] {
                let dist = squared_distance(&self.nodes[c].center, d);
                if dist < best_d {
                    best = c;
                    best_d = dist;
                }
            }
            node = best;
        }
    }
}

fn mean(data: &[&[f64]], members: &[usize], dim: usize) -> Vec<f64> {
    let mut m = vec![0.0; dim];
    for &i in members {
        for (acc, v) in m.iter_mut().zip(data[i]) {
            *acc += v;
        }
    }
    let n = members.len().max(1) as f64;
    m.iter_mut().for_each(|v| *v /= n);
    m
}

fn nearest(centers: &[Vec<f64>], x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centers.iter().enumerate() {
        let d = squared_distance(c, x);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// k-means++ seeding then Lloyd iterations until the assignment stops
/// changing. Empty clusters are dropped. Returns `(center, members)` pairs.
fn kmeans(
    data: &[&[f64]],
    members: &[usize],
    k: usize,
    max_iters: usize,
    min_sep2: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<(Vec<f64>, Vec<usize>)> {
    let dim = data[members[0]].len();
    let k = k.min(members.len()).max(1);
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    centers.push(data[members[rng.random_range(0..members.len())]].to_vec());
    let mut d2: Vec<f64> = members.iter().map(|&i| squared_distance(&centers[0], data[i])).collect();
    while centers.len() < k {
        let max = d2.iter().cloned().fold(0.0, f64::max);
        if max <= min_sep2 {
            break;
        }
        // D² sampling restricted to descriptors farther than the separation.
        let weight = |w: f64| if w > min_sep2 { w } else { 0.0 };
        let total: f64 = d2.iter().map(|&w| weight(w)).sum();
        let mut target = rng.random::<f64>() * total;
        let mut pick = None;
        for (j, &w) in d2.iter().enumerate() {
            let w = weight(w);
            if w > 0.0 && target < w {
                pick = Some(j);
                break;
            }
            target -= w;
        }
        let pick = pick.unwrap_or_else(|| d2.iter().enumerate().fold(0, |b, (j, &w)| if w > d2[b] { j } else { b }));
        let c = data[members[pick]].to_vec();
        for (slot, &i) in d2.iter_mut().zip(members) {
            *slot = slot.min(squared_distance(&c, data[i]));
        }
        centers.push(c);
    }

    let mut assign: Vec<usize> = members.iter().map(|&i| nearest(&centers, data[i]).0).collect();
    for _ in 0..max_iters {
        let mut sums = vec![vec![0.0; dim]; centers.len()];
        let mut counts = vec![0usize; centers.len()];
        for (&a, &i) in assign.iter().zip(members) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(data[i]) {
                *s += v;
            }
        }
        let mut next_centers = Vec::with_capacity(centers.len());
        for (s, &c) in sums.into_iter().zip(&counts) {
            if c > 0 {
                next_centers.push(s.into_iter().map(|v| v / c as f64).collect::<Vec<f64>>());
            }
        }
        centers = next_centers;
        let next: Vec<usize> = members.iter().map(|&i| nearest(&centers, data[i]).0).collect();
        let done = next == assign;
        assign = next;
        if done {
            break;
        }
    }

    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); centers.len()];
    for (&a, &i) in assign.iter().zip(members) {
        groups[a].push(i);
    }
    // Centers are the means of their final members so the tree stays
    // consistent with greedy descent.
    centers
        .into_iter()
        .zip(groups)
        .filter(|(_, g)| !g.is_empty())
        .map(|(_, g)| (mean(data, &g, dim), g))
        .collect()
}
