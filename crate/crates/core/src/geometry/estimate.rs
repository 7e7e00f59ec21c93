#[allow(unused_imports)] // inherent float methods need std
use num_traits::Float;
use alloc::vec::Vec;
use nalgebra::{DMatrix, Matrix3, Vector3};
use rand::seq::index::sample;
use rand::Rng;

use super::{FundamentalMatrix, GeometryError, Pixel};

/// Sample-consensus parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RansacConfig {
    /// Inlier threshold in pixels.
    pub threshold_px: f64,
    pub max_iterations: usize,
    /// Probability of drawing at least one all-inlier sample; drives the
    /// adaptive iteration count.
    pub confidence: f64,
    /// Fewer consensus inliers than this is reported as `NoConsensus`.
    pub min_inliers: usize,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self { threshold_px: 3.0, max_iterations: 2000, confidence: 0.999, min_inliers: 16 }
    }
}

const MIN_SAMPLE: usize = 8;

/// Root-mean-square distance of the two points to each other's epipolar
/// lines, for `bᵀ F a = 0`.
pub fn symmetric_epipolar_distance(f: &Matrix3<f64>, a: Pixel, b: Pixel) -> f64 {
    let xa = a.homogeneous().0;
    let xb = b.homogeneous().0;
    let lb = f * xa;
    let la = f.transpose() * xb;
    let r = xb.dot(&lb);
    let na = la.x * la.x + la.y * la.y;
    let nb = lb.x * lb.x + lb.y * lb.y;
    if na <= 0.0 || nb <= 0.0 {
        return f64::INFINITY;
    }
    (0.5 * (r * r / na + r * r / nb)).sqrt()
}

/// Similarity moving the centroid to the origin with mean distance √2.
fn normalizing_transform<'a>(pts: impl Iterator<Item = &'a Pixel> + Clone) -> Matrix3<f64> {
    let n = pts.clone().count() as f64;
    let (sx, sy) = pts.clone().fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
    let (mx, my) = (sx / n, sy / n);
    let mean_dist = pts.map(|p| (p.x - mx).hypot(p.y - my)).sum::<f64>() / n;
    let s = if mean_dist > 1e-12 { core::f64::consts::SQRT_2 / mean_dist } else { 1.0 };
    Matrix3::new(s, 0.0, -s * mx, 0.0, s, -s * my, 0.0, 0.0, 1.0)
}

/// Normalized eight-point solution over all given matches.
fn eight_point(matches: &[(Pixel, Pixel)]) -> Option<FundamentalMatrix> {
    if matches.len() < MIN_SAMPLE {
        return None;
    }
    let ta = normalizing_transform(matches.iter().map(|(a, _)| a));
    let tb = normalizing_transform(matches.iter().map(|(_, b)| b));
    let rows = matches.len().max(9);
    let mut a_mat = DMatrix::<f64>::zeros(rows, 9);
    for (r, (pa, pb)) in matches.iter().enumerate() {
        let xa: Vector3<f64> = ta * pa.homogeneous().0;
        let xb: Vector3<f64> = tb * pb.homogeneous().0;
        let (u, v) = (xa.x / xa.z, xa.y / xa.z);
        let (up, vp) = (xb.x / xb.z, xb.y / xb.z);
        let row = [up * u, up * v, up, vp * u, vp * v, vp, u, v, 1.0];
        for (c, val) in row.iter().enumerate() {
            a_mat[(r, c)] = *val;
        }
    }
    let svd = a_mat.svd(false, true);
    let v_t = svd.v_t?;
    let imin = svd.singular_values.imin();
    let f = v_t.row(imin);
    if f.iter().any(|x| !x.is_finite()) {
        return None;
    }
    let f_norm = Matrix3::new(f[0], f[1], f[2], f[3], f[4], f[5], f[6], f[7], f[8]);
    // Rank-2 in normalized coordinates, then undo the normalization.
    let f_norm = FundamentalMatrix::from_matrix(f_norm).ok()?;
    FundamentalMatrix::from_matrix(tb.transpose() * f_norm.matrix() * ta).ok()
}

fn inlier_flags(f: &FundamentalMatrix, matches: &[(Pixel, Pixel)], threshold: f64) -> (Vec<bool>, usize) {
    let flags: Vec<bool> =
        matches.iter().map(|(a, b)| symmetric_epipolar_distance(f.matrix(), *a, *b) <= threshold).collect();
    let count = flags.iter().filter(|&&x| x).count();
    (flags, count)
}

fn required_iterations(inlier_ratio: f64, confidence: f64, cap: usize) -> usize {
    if inlier_ratio >= 1.0 {
        return 1;
    }
    let good = inlier_ratio.powi(MIN_SAMPLE as i32);
    if good <= 1e-12 {
        return cap;
    }
    let n = (1.0 - confidence).ln() / (1.0 - good).ln();
    if n.is_finite() { (n.ceil() as usize).clamp(1, cap) } else { cap }
}

/// Robust fundamental matrix with `bᵀ F a = 0` for matches `(a, b)`.
///
/// Eight-point hypotheses from random minimal samples are scored by the
/// number of matches whose symmetric epipolar distance is within
/// `threshold_px`; the best consensus set is refit with the normalized
/// eight-point algorithm until the set stops growing.
pub fn estimate_fundamental<R: Rng + ?Sized>(
    matches: &[(Pixel, Pixel)],
    cfg: &RansacConfig,
    rng: &mut R,
) -> Result<(FundamentalMatrix, Vec<bool>), GeometryError> {
    if matches.len() < MIN_SAMPLE {
        return Err(GeometryError::InsufficientMatches { needed: MIN_SAMPLE, got: matches.len() });
    }
    let n = matches.len();
    let mut best: Option<(FundamentalMatrix, usize)> = None;
    let mut needed = cfg.max_iterations.max(1);
    let mut iter = 0;
    let mut subset = [(Pixel::default(), Pixel::default()); MIN_SAMPLE];
    while iter < needed {
        iter += 1;
        let idx = sample(rng, n, MIN_SAMPLE);
        for (slot, i) in subset.iter_mut().zip(idx.iter()) {
            *slot = matches[i];
        }
        let Some(f) = eight_point(&subset) else { continue };
        let (_, count) = inlier_flags(&f, matches, cfg.threshold_px);
        if best.as_ref().is_none_or(|(_, c)| count > *c) {
            best = Some((f, count));
            needed = required_iterations(count as f64 / n as f64, cfg.confidence, cfg.max_iterations.max(1));
        }
    }
    let (mut f, _) = best.ok_or(GeometryError::NoConsensus)?;
    let (mut flags, mut count) = inlier_flags(&f, matches, cfg.threshold_px);
    for _ in 0..5 {
        let consensus: Vec<(Pixel, Pixel)> =
            matches.iter().zip(&flags).filter(|(_, &fl)| fl).map(|(m, _)| *m).collect();
        let Some(refit) = eight_point(&consensus) else { break };
        let (new_flags, new_count) = inlier_flags(&refit, matches, cfg.threshold_px);
        if new_count < count {
            break;
        }
        let grew = new_count > count || new_flags != flags;
        f = refit;
        flags = new_flags;
        count = new_count;
        if !grew {
            break;
        }
    }
    if count < cfg.min_inliers.max(MIN_SAMPLE) {
        return Err(GeometryError::NoConsensus);
    }
    Ok((f, flags))
}
