use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use super::{SofaError, VoteGraph};
use crate::BinId;

/// Row-stochastic transition matrix of a vote graph, stored sparsely as the
/// raw normalized rows plus a uniform damping term.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionMatrix {
    states: Vec<BinId>,
    damping: f64,
    // CSR of the raw rows (sinks hold a self-loop).
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl TransitionMatrix {
    pub fn states(&self) -> &[BinId] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn damping(&self) -> f64 {
        self.damping
    }

    /// Entry `M[i][j]`.
    pub fn prob(&self, i: usize, j: usize) -> f64 {
        let raw = (self.row_ptr[i]..self.row_ptr[i + 1])
            .find(|&k| self.cols[k] == j)
            .map_or(0.0, |k| self.vals[k]);
        (1.0 - self.damping) * raw + self.damping / self.len() as f64
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.len()).map(|j| self.prob(i, j)).collect()
    }

    /// `Mᵀ y`.
    pub fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.apply_transpose_into(y, &mut out);
        out
    }

    fn apply_transpose_into(&self, y: &[f64], out: &mut [f64]) {
        let n = self.len();
        let total: f64 = y.iter().sum();
        out.fill(self.damping * total / n as f64);
        let keep = 1.0 - self.damping;
        for (i, &yi) in y.iter().enumerate() {
            let s = keep * yi;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                out[self.cols[k]] += s * self.vals[k];
            }
        }
    }
}

/// Builds the transition matrix of `g`. Each raw row holds the outgoing
/// weights normalized to sum 1; a bin with no outgoing weight keeps all its
/// mass. Rows are then mixed with the uniform distribution by `damping`.
pub fn transition_matrix(g: &VoteGraph, damping: f64) -> Result<TransitionMatrix, SofaError> {
    let edges = indexed_edges(g);
    transition_matrix_masked(g, &edges, damping, &vec![true; g.nodes.len()])
}

/// Edges as `(from, to, weight)` node indices.
fn indexed_edges(g: &VoteGraph) -> Vec<(usize, usize, f64)> {
    let node_index: BTreeMap<BinId, usize> = g.nodes.iter().enumerate().map(|(i, &b)| (b, i)).collect();
    g.edges.iter().map(|e| (node_index[&e.from], node_index[&e.to], e.weight)).collect()
}

fn transition_matrix_masked(
    g: &VoteGraph,
    edges: &[(usize, usize, f64)],
    damping: f64,
    active: &[bool],
) -> Result<TransitionMatrix, SofaError> {
    if !(0.0..0.5).contains(&damping) {
        return Err(SofaError::InvalidDamping(damping));
    }
    let mut new_index = vec![usize::MAX; g.nodes.len()];
    let mut states = Vec::new();
    for (i, &b) in g.nodes.iter().enumerate() {
        if active[i] {
            new_index[i] = states.len();
            states.push(b);
        }
    }
    if states.is_empty() {
        return Err(SofaError::EmptyGraph);
    }
    let n = states.len();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for &(f, t, w) in edges {
        let (f, t) = (new_index[f], new_index[t]);
        if f != usize::MAX && t != usize::MAX && w > 0.0 {
            rows[f].push((t, w));
        }
    }
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    row_ptr.push(0);
    for (i, row) in rows.into_iter().enumerate() {
        let sum: f64 = row.iter().map(|r| r.1).sum();
        if sum > 0.0 && sum.is_finite() {
            for (j, w) in row {
                cols.push(j);
                vals.push(w / sum);
            }
        } else {
            cols.push(i);
            vals.push(1.0);
        }
        row_ptr.push(cols.len());
    }
    Ok(TransitionMatrix { states, damping, row_ptr, cols, vals })
}

/// Power iteration `y ← Mᵀ y` from the uniform distribution until the L1
/// change drops below `tol`.
pub fn stationary_distribution(m: &TransitionMatrix, tol: f64, max_iters: usize) -> Result<Vec<f64>, SofaError> {
    let n = m.len();
    if n == 0 {
        return Err(SofaError::EmptyGraph);
    }
    let mut y = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for _ in 0..max_iters.max(1) {
        m.apply_transpose_into(&y, &mut next);
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= total);
        residual = y.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        core::mem::swap(&mut y, &mut next);
        if residual < tol {
            return Ok(y);
        }
    }
    Err(SofaError::NotConverged { iterate: y, residual })
}

/// Outcome of rank aggregation.
#[derive(Clone, Debug, PartialEq)]
pub struct Aggregation {
    /// Rank 1 first.
    pub order: Vec<BinId>,
    /// Rounds whose power iteration stopped at `max_iters`.
    pub unconverged_rounds: usize,
}

/// Markov-chain rank aggregation. The state with the most stationary mass
/// is ranked last among the remaining states and removed; this repeats until
/// the graph is empty. Equal masses remove the higher bin id first.
pub fn aggregate_ranks(g: &VoteGraph, damping: f64, tol: f64, max_iters: usize) -> Result<Aggregation, SofaError> {
    let n = g.nodes.len();
    if n == 0 {
        return Err(SofaError::EmptyGraph);
    }
    let mut active = vec![true; n];
    let mut reversed = Vec::with_capacity(n);
    let mut unconverged_rounds = 0;
    let position: BTreeMap<BinId, usize> = g.nodes.iter().enumerate().map(|(i, &b)| (b, i)).collect();
    let edges = indexed_edges(g);
    for _ in 0..n {
        let m = transition_matrix_masked(g, &edges, damping, &active)?;
        let y = match stationary_distribution(&m, tol, max_iters) {
            Ok(y) => y,
            Err(SofaError::NotConverged { iterate, .. }) => {
                unconverged_rounds += 1;
                iterate
            }
            Err(e) => return Err(e),
        };
        let mut best = 0;
        for (i, &v) in y.iter().enumerate() {
            // States are ascending by bin id, so `>=` prefers the higher id.
            if v >= y[best] {
                best = i;
            }
        }
        let bin = m.states()[best];
        active[position[&bin]] = false;
        reversed.push(bin);
    }
    reversed.reverse();
    Ok(Aggregation { order: reversed, unconverged_rounds })
}

#[cfg(test)]
mod tests {
    use super::super::Edge;
    use super::*;

    fn graph(n: u32, edges: &[(u32, u32, f64)]) -> VoteGraph {
        VoteGraph {
            nodes: (0..n).map(BinId).collect(),
            edges: edges.iter().map(|&(f, t, w)| Edge { from: BinId(f), to: BinId(t), weight: w }).collect(),
        }
    }

    #[test]
    fn single_edge_and_sink() {
        let m = transition_matrix(&graph(2, &[(0, 1, 5.0)]), 0.0).unwrap();
        assert_eq!(m.row(0), vec![0.0, 1.0]);
        assert_eq!(m.row(1), vec![0.0, 1.0]);
    }

    #[test]
    fn weights_normalize() {
        let m = transition_matrix(&graph(3, &[(0, 1, 1.0), (0, 2, 3.0)]), 0.0).unwrap();
        assert_eq!(m.row(0), vec![0.0, 0.25, 0.75]);
    }

    #[test]
    fn damping_floor() {
        let m = transition_matrix(&graph(4, &[(0, 1, 1.0), (1, 2, 2.0), (3, 0, 1.0)]), 0.05).unwrap();
        for i in 0..4 {
            let row = m.row(i);
            assert!(row.iter().all(|&p| p >= 0.05 / 4.0 - 1e-15));
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!(matches!(transition_matrix(&graph(0, &[]), 0.05), Err(SofaError::EmptyGraph)));
        assert!(matches!(transition_matrix(&graph(1, &[]), 0.5), Err(SofaError::InvalidDamping(_))));
    }

    #[test]
    fn identity_is_a_fixpoint() {
        let m = transition_matrix(&graph(3, &[]), 0.0).unwrap();
        let y = stationary_distribution(&m, 1e-9, 1).unwrap();
        assert_eq!(y, vec![1.0 / 3.0; 3]);
    }

    #[test]
    fn absorbing_state_takes_all_mass() {
        let m = transition_matrix(&graph(2, &[(0, 1, 1.0)]), 0.0).unwrap();
        let y = stationary_distribution(&m, 1e-9, 1000).unwrap();
        assert!(y[0].abs() < 1e-9 && (y[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn damped_residual_is_small() {
        let m = transition_matrix(&graph(4, &[(0, 1, 1.0), (1, 2, 2.0), (2, 0, 1.0), (3, 2, 4.0)]), 0.05).unwrap();
        let y = stationary_distribution(&m, 1e-9, 1000).unwrap();
        let r: f64 = m.apply_transpose(&y).iter().zip(&y).map(|(a, b)| (a - b).abs()).sum();
        assert!(r < 1e-8);
    }

    #[test]
    fn not_converged_carries_iterate() {
        // One iteration cannot drain a 3-chain.
        let m = transition_matrix(&graph(3, &[(0, 1, 1.0), (1, 2, 1.0)]), 0.0).unwrap();
        match stationary_distribution(&m, 1e-9, 1) {
            Err(SofaError::NotConverged { iterate, residual }) => {
                assert_eq!(iterate.len(), 3);
                assert!(residual > 0.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn chain_order_is_recovered() {
        let g = graph(4, &[(2, 0, 1.0), (0, 3, 1.0), (3, 1, 1.0), (2, 3, 1.0), (2, 1, 1.0), (0, 1, 1.0)]);
        let a = aggregate_ranks(&g, 0.05, 1e-9, 1000).unwrap();
        assert_eq!(a.order, vec![BinId(2), BinId(0), BinId(3), BinId(1)]);
        assert_eq!(a.unconverged_rounds, 0);
    }

    #[test]
    fn singleton_and_equal_mass() {
        assert_eq!(aggregate_ranks(&graph(1, &[]), 0.05, 1e-9, 1000).unwrap().order, vec![BinId(0)]);
        // No edges: every state has equal mass, so higher ids go last first.
        assert_eq!(
            aggregate_ranks(&graph(3, &[]), 0.05, 1e-9, 1000).unwrap().order,
            vec![BinId(0), BinId(1), BinId(2)]
        );
    }
}
