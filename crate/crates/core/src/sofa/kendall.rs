use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use super::{PartialOrder, SofaError};
use crate::BinId;

/// Number of pairs ordered one way by `partial` and the other by `full`.
pub fn kendall_distance(full: &[BinId], partial: &PartialOrder) -> Result<u64, SofaError> {
    let pos: BTreeMap<BinId, usize> = full.iter().enumerate().map(|(i, &b)| (b, i)).collect();
    let mut seq = partial
        .ranked_bins
        .iter()
        .map(|b| pos.get(b).copied().ok_or(SofaError::UnknownBin(*b)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(count_inversions(&mut seq))
}

/// Kendall distance normalized by the number of pairs, in `[0, 1]`.
pub fn normalized_kendall_distance(full: &[BinId], partial: &PartialOrder) -> Result<f64, SofaError> {
    let n = partial.ranked_bins.len() as u64;
    if n < 2 {
        return Ok(0.0);
    }
    Ok(kendall_distance(full, partial)? as f64 / (n * (n - 1) / 2) as f64)
}

/// Inversions of `seq` by merge sort; `seq` ends up sorted.
pub(crate) fn count_inversions(seq: &mut [usize]) -> u64 {
    let mut buf = seq.to_vec();
    sort_count(seq, &mut buf)
}

fn sort_count(a: &mut [usize], buf: &mut [usize]) -> u64 {
    let n = a.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut inv = sort_count(&mut a[..mid], &mut buf[..mid]) + sort_count(&mut a[mid..], &mut buf[mid..]);
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if a[i] <= a[j] {
            buf[k] = a[i];
            i += 1;
        } else {
            buf[k] = a[j];
            inv += (mid - i) as u64;
            j += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&a[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&a[j..n]);
    a.copy_from_slice(&buf[..n]);
    inv
}
