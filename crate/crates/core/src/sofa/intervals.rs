use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use super::{PartialOrder, SofaError};
use crate::{BinId, ViewId};

/// Closed interval of global ranks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RankInterval {
    pub lo: usize,
    pub hi: usize,
}

impl RankInterval {
    pub fn new(lo: usize, hi: usize) -> Self {
        Self { lo, hi }
    }

    /// Interval spanned by two ranks, in either order.
    pub fn between(a: usize, b: usize) -> Self {
        Self { lo: a.min(b), hi: a.max(b) }
    }

    pub fn contains(&self, r: usize) -> bool {
        self.lo <= r && r <= self.hi
    }
}

pub fn interval_overlap(a: RankInterval, b: RankInterval) -> Option<RankInterval> {
    let lo = a.lo.max(b.lo);
    let hi = a.hi.min(b.hi);
    (lo <= hi).then_some(RankInterval { lo, hi })
}

/// 1-based rank of every bin in `ranking`.
pub fn rank_map(ranking: &[BinId]) -> BTreeMap<BinId, usize> {
    ranking.iter().enumerate().map(|(i, &b)| (b, i + 1)).collect()
}

/// Per-view rank interval from the medians of the lowest and highest
/// deciles of the view's global ranks. The decile holds `⌈n/10⌉` ranks.
/// The low median rounds half up and the high median half down.
pub fn image_intervals(
    ranking: &[BinId],
    partials: &[PartialOrder],
) -> Result<BTreeMap<ViewId, RankInterval>, SofaError> {
    let ranks = rank_map(ranking);
    let mut out = BTreeMap::new();
    for p in partials {
        let mut r = p
            .ranked_bins
            .iter()
            .map(|b| ranks.get(b).copied().ok_or(SofaError::UnknownBin(*b)))
            .collect::<Result<Vec<_>, _>>()?;
        if r.is_empty() {
            return Err(SofaError::EmptyView(p.view_id));
        }
        r.sort_unstable();
        out.insert(p.view_id, decile_interval(&r));
    }
    Ok(out)
}

fn decile_interval(sorted: &[usize]) -> RankInterval {
    let n = sorted.len();
    let m = n.div_ceil(10).max(1);
    // Twice the median, to stay in integers.
    let twice_median = |s: &[usize]| {
        let k = s.len();
        if k % 2 == 1 {
            2 * s[k / 2]
        } else {
            s[k / 2 - 1] + s[k / 2]
        }
    };
    let lo = twice_median(&sorted[..m]).div_ceil(2);
    let hi = twice_median(&sorted[n - m..]) / 2;
    RankInterval { lo, hi }
}

#[cfg(test)]
mod tests {
    use super::super::Axis;
    use super::*;

    fn po(bins: Vec<BinId>) -> PartialOrder {
        let n = bins.len();
        PartialOrder { view_id: ViewId(3), axis: Axis::X, ranked_bins: bins, coords: (0..n).map(|i| i as f64).collect() }
    }

    #[test]
    fn hundred_ranks() {
        let ranking: Vec<BinId> = (0..100).map(BinId).collect();
        let iv = image_intervals(&ranking, &[po(ranking.clone())]).unwrap();
        assert_eq!(iv[&ViewId(3)], RankInterval::new(6, 95));
    }

    #[test]
    fn small_view_spans_min_to_max() {
        let ranking: Vec<BinId> = (0..30).map(BinId).collect();
        let iv = image_intervals(&ranking, &[po(alloc::vec![BinId(21), BinId(4), BinId(9)])]).unwrap();
        assert_eq!(iv[&ViewId(3)], RankInterval::new(5, 22));
    }

    #[test]
    fn empty_view_and_unknown_bin() {
        let ranking: Vec<BinId> = (0..3).map(BinId).collect();
        assert_eq!(image_intervals(&ranking, &[po(Vec::new())]), Err(SofaError::EmptyView(ViewId(3))));
        assert_eq!(image_intervals(&ranking, &[po(alloc::vec![BinId(8)])]), Err(SofaError::UnknownBin(BinId(8))));
    }

    #[test]
    fn overlaps() {
        let a = RankInterval::new(17, 356);
        assert_eq!(interval_overlap(a, RankInterval::new(46, 399)), Some(RankInterval::new(46, 356)));
        assert_eq!(interval_overlap(RankInterval::new(1, 5), RankInterval::new(6, 9)), None);
        assert_eq!(interval_overlap(a, a), Some(a));
    }
}
