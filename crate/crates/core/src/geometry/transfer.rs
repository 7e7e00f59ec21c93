#[allow(unused_imports)] // inherent float methods need std
use num_traits::Float;
use alloc::vec::Vec;
use rand::Rng;

use super::{intersect_lines, GeometryError, HomogLine, Pixel, RansacConfig};

/// Outcome of epipolar point transfer.
#[derive(Clone, Debug, PartialEq)]
pub struct TransferResult {
    pub point: Pixel,
    pub inlier_flags: Vec<bool>,
    pub inlier_count: usize,
}

/// Above this many lines candidate pairs are sampled instead of enumerated.
const EXHAUSTIVE_MAX_LINES: usize = 6;

/// Locates a point as the intersection of its epipolar lines.
///
/// Every candidate is the intersection of a pair of lines; the candidate
/// supported by the most lines within `threshold_px` wins (first pair in
/// enumeration order on ties) and is refined by least squares over its
/// inliers.
pub fn epipolar_point_transfer<R: Rng + ?Sized>(
    lines: &[HomogLine],
    threshold_px: f64,
    ransac_cfg: &RansacConfig,
    rng: &mut R,
) -> Result<TransferResult, GeometryError> {
    if lines.len() < 2 {
        return Err(GeometryError::TooFewLines);
    }
    if lines.len() == 2 {
        let point = intersect_lines(&lines[0], &lines[1])?;
        return Ok(TransferResult { point, inlier_flags: alloc::vec![true, true], inlier_count: 2 });
    }

    let mut best: Option<(usize, Pixel)> = None;
    let mut any_pair = false;
    let mut consider = |i: usize, j: usize, best: &mut Option<(usize, Pixel)>| {
        let Ok(p) = intersect_lines(&lines[i], &lines[j]) else {
            return;
        };
        any_pair = true;
        let count = lines.iter().filter(|l| l.distance(p) <= threshold_px).count();
        if best.is_none_or(|(c, _)| count > c) {
            *best = Some((count, p));
        }
    };

    if lines.len() <= EXHAUSTIVE_MAX_LINES {
        for i in 0..lines.len() {
            for j in i + 1..lines.len() {
                consider(i, j, &mut best);
            }
        }
    } else {
        let n = lines.len();
        for _ in 0..ransac_cfg.max_iterations.max(1) {
            let i = rng.random_range(0..n);
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            consider(i.min(j), i.max(j), &mut best);
            if best.is_some_and(|(c, _)| c == n) {
                break;
            }
        }
    }

    if !any_pair {
        return Err(GeometryError::ParallelLines);
    }
    let (count, candidate) = best.ok_or(GeometryError::NoConsensus)?;
    if count < 2 {
        return Err(GeometryError::NoConsensus);
    }
    let inlier_flags: Vec<bool> = lines.iter().map(|l| l.distance(candidate) <= threshold_px).collect();
    let inliers: Vec<HomogLine> =
        lines.iter().zip(&inlier_flags).filter(|(_, &f)| f).map(|(l, _)| *l).collect();
    let point = least_squares_intersection(&inliers).unwrap_or(candidate);
    Ok(TransferResult { point, inlier_flags, inlier_count: count })
}

/// Gain from line error to intersection error for the least-squares
/// intersection of `lines`: `1/√λ_min` of `Σ n nᵀ` over the unit normals.
/// Two perpendicular lines give 1; parallel lines give infinity.
pub fn intersection_spread(lines: &[HomogLine]) -> f64 {
    let (mut saa, mut sab, mut sbb) = (0.0, 0.0, 0.0);
    for l in lines {
        saa += l.a() * l.a();
        sab += l.a() * l.b();
        sbb += l.b() * l.b();
    }
    let (tr, det) = (saa + sbb, saa * sbb - sab * sab);
    let lambda_min = (tr - (tr * tr - 4.0 * det).max(0.0).sqrt()) / 2.0;
    if lambda_min <= 1e-15 {
        f64::INFINITY
    } else {
        1.0 / lambda_min.sqrt()
    }
}

/// Point minimizing the sum of squared distances to the given lines.
/// `None` when the normal equations are singular (all lines parallel).
pub fn least_squares_intersection(lines: &[HomogLine]) -> Option<Pixel> {
    if lines.len() < 2 {
        return None;
    }
    let (mut saa, mut sab, mut sbb, mut sac, mut sbc) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for l in lines {
        let (a, b, c) = (l.a(), l.b(), l.c());
        saa += a * a;
        sab += a * b;
        sbb += b * b;
        sac += a * c;
        sbc += b * c;
    }
    let det = saa * sbb - sab * sab;
    if det.abs() <= 1e-12 * (saa + sbb).max(1.0) {
        return None;
    }
    let x = (-sac * sbb + sbc * sab) / det;
    let y = (-sbc * saa + sac * sab) / det;
    Some(Pixel::new(x, y))
}
