#[allow(unused_imports)] // inherent float methods need std
use num_traits::Float;
use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use nalgebra::Matrix3;
use rand::Rng;

use super::{GuidanceSession, Overlay, PlannerConfig, PlannerError, SessionStatus};
use crate::correspondence::TrackSet;
use crate::geometry::{
    epipolar_line, epipolar_point_transfer, estimate_fundamental, intersection_spread, rotation_to_ray, HomogLine, Intrinsics, OrientedFundamental,
    Pixel, RotationCommand, TransferResult,
};
use crate::sofa::{Axis, RankInterval, SofaRanking};
use crate::{BinId, ViewId};

/// One emitted guidance step.
#[derive(Clone, Debug, PartialEq)]
pub struct GuidanceStep {
    /// View the step was computed in.
    pub view: ViewId,
    pub waypoint_bin: BinId,
    pub support_views: Vec<ViewId>,
    /// Present when two or more support views produced a line.
    pub transfer: Option<TransferResult>,
    /// Epipolar line of the waypoint from each support view, same order.
    pub lines: Vec<HomogLine>,
    /// Pixel the rotation centers: the transferred point, or the point of the
    /// lone line nearest the image center.
    pub aim: Pixel,
    /// The waypoint lies behind the camera; `aim` is its antipode.
    pub behind: bool,
    pub rotation: RotationCommand,
    pub overlay: Overlay,
    /// Candidates skipped because their transfer failed.
    pub blacklisted: Vec<BinId>,
    /// Candidates passed over because their transfer was too uncertain.
    pub deferred: Vec<BinId>,
}

/// Where a bin lies in the session's current view.
#[derive(Clone, Debug, PartialEq)]
pub struct BinLocation {
    pub support_views: Vec<ViewId>,
    pub lines: Vec<HomogLine>,
    pub transfer: Option<TransferResult>,
    /// Transferred point, if there were at least two lines.
    pub point: Option<Pixel>,
    pub aim: Pixel,
    pub behind: bool,
    /// Expected error of `point`: the EPT threshold scaled by the spread of
    /// the inlier lines. Infinite without a point.
    pub uncertainty_px: f64,
}

impl BinLocation {
    /// Angular error, radians, of the transferred ray when each inlier line
    /// is off by `line_error_px`. Lines become planes through the camera
    /// center; the error grows as their normals approach each other around
    /// the ray. Infinite without a transfer.
    pub fn angular_uncertainty(&self, k: &Intrinsics, line_error_px: f64) -> f64 {
        let Some(t) = &self.transfer else {
            return f64::INFINITY;
        };
        let d = k.ray(self.aim).normalize();
        let kt = k.matrix().transpose();
        let mut m = Matrix3::zeros();
        for (l, _) in self.lines.iter().zip(&t.inlier_flags).filter(|(_, &i)| i) {
            let n = (kt * l.coeffs()).normalize();
            let n = n - d * n.dot(&d);
            m += n * n.transpose();
        }
        // One eigenvalue sits near zero along the ray itself.
        let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        if ev[1] <= 1e-15 {
            return f64::INFINITY;
        }
        line_error_px / k.fx.min(k.fy) / ev[1].sqrt()
    }

    fn line_flags(&self) -> Vec<(HomogLine, bool)> {
        match &self.transfer {
            Some(t) => self.lines.iter().copied().zip(t.inlier_flags.iter().copied()).collect(),
            None => self.lines.iter().map(|&l| (l, true)).collect(),
        }
    }
}

/// Bin observed nearest to `center` in `view`, lower bin id on ties.
pub fn center_bin(view: ViewId, tracks: &TrackSet, center: Pixel) -> Result<BinId, PlannerError> {
    let mut best: Option<(f64, BinId)> = None;
    for (bin, p) in tracks.view_bins(view) {
        let d = p.distance(center);
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, bin));
        }
    }
    best.map(|b| b.1).ok_or(PlannerError::EmptyView(view))
}

fn support_from_counts(
    bin: BinId,
    current: ViewId,
    counts: &BTreeMap<ViewId, usize>,
    tracks: &TrackSet,
    cfg: &PlannerConfig,
    excluded: &dyn Fn(ViewId) -> bool,
) -> Option<Vec<ViewId>> {
    let track = tracks.get(bin)?;
    let mut qualified: Vec<(usize, ViewId)> = track
        .views()
        .filter(|&v| v != current && !excluded(v))
        .filter_map(|v| counts.get(&v).map(|&c| (c, v)))
        .filter(|&(c, _)| c >= cfg.min_shared_tracks)
        .collect();
    if qualified.is_empty() {
        return None;
    }
    qualified.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let take = if qualified.len() < cfg.min_support { 1 } else { cfg.max_support.min(4) };
    Some(qualified.into_iter().take(take).map(|q| q.1).collect())
}

/// Views that observe `bin` and share enough tracks with `current`, most
/// shared first. Fewer than `min_support` qualifying views yields the single
/// best one.
pub fn find_support_set(
    bin: BinId,
    current: ViewId,
    tracks: &TrackSet,
    cfg: &PlannerConfig,
    excluded: &dyn Fn(ViewId) -> bool,
) -> Option<Vec<ViewId>> {
    support_from_counts(bin, current, &tracks.shared_counts(current), tracks, cfg, excluded)
}

/// Candidate bins sorted by rank distance to the target, ties by bin id.
/// The strict list holds the bins inside both rank intervals between the
/// center bin and the target. The relaxed list adds every other bin that is
/// rank-closer to the target than the center bin.
fn candidates(session: &GuidanceSession, ranking: &SofaRanking) -> Result<(Vec<BinId>, Vec<BinId>), PlannerError> {
    let target = session.target_bin;
    let (gx, gy) = ranking.ranks(target).ok_or(PlannerError::UnrankedBin(target))?;
    let (ax, ay) = ranking.ranks(session.center_bin).ok_or(PlannerError::UnrankedBin(session.center_bin))?;
    let (ix, iy) = (RankInterval::between(ax, gx), RankInterval::between(ay, gy));
    let d_center = ax.abs_diff(gx) + ay.abs_diff(gy);
    let mut strict: Vec<(usize, BinId)> = Vec::new();
    let mut relaxed: Vec<(usize, BinId)> = Vec::new();
    for &bin in ranking.order(Axis::X) {
        if bin == session.center_bin && bin != target {
            continue;
        }
        let (rx, ry) = ranking.ranks(bin).expect("ranked");
        let d = rx.abs_diff(gx) + ry.abs_diff(gy);
        if ix.contains(rx) && iy.contains(ry) {
            strict.push((d, bin));
        } else if d < d_center {
            relaxed.push((d, bin));
        }
    }
    strict.sort();
    relaxed.sort();
    Ok((strict.into_iter().map(|c| c.1).collect(), relaxed.into_iter().map(|c| c.1).collect()))
}

/// First candidate between the center bin and the target, closest to the
/// target in rank distance, that has a full support set and is not in
/// `skip`. Falls back to the first candidate with a single support view,
/// then to the relaxed candidate list.
pub fn next_waypoint(
    session: &GuidanceSession,
    ranking: &SofaRanking,
    tracks: &TrackSet,
    cfg: &PlannerConfig,
    skip: &[BinId],
) -> Result<(BinId, Vec<ViewId>), PlannerError> {
    let counts = tracks.shared_counts(session.current_view);
    let excluded = |v: ViewId| session.own_views.contains(&v);
    let (strict, relaxed) = candidates(session, ranking)?;
    for list in [strict, relaxed] {
        let mut single = None;
        for bin in list {
            if skip.contains(&bin) {
                continue;
            }
            if let Some(support) = support_from_counts(bin, session.current_view, &counts, tracks, cfg, &excluded) {
                if support.len() >= cfg.min_support.min(2) {
                    return Ok((bin, support));
                }
                single.get_or_insert((bin, support));
            }
        }
        if let Some(s) = single {
            return Ok(s);
        }
    }
    Err(PlannerError::NoReachableWaypoint)
}

/// Locates `bin` in the session's current view through the given support views.
pub fn locate_bin_with<R: Rng + ?Sized>(
    session: &GuidanceSession,
    bin: BinId,
    support: &[ViewId],
    tracks: &TrackSet,
    cfg: &PlannerConfig,
    rng: &mut R,
) -> Result<BinLocation, PlannerError> {
    let current = session.current_view;
    let mut views = Vec::new();
    let mut lines = Vec::new();
    let mut oriented = Vec::new();
    for &v in support {
        let Some(p) = tracks.observation(v, bin) else {
            continue;
        };
        // Matches as (support, current): F maps support pixels to lines in
        // the current view.
        let matches: Vec<(Pixel, Pixel)> = tracks.shared(v, current).into_iter().map(|(a, b, _)| (a, b)).collect();
        let Ok((f, inliers)) = estimate_fundamental(&matches, &cfg.ransac, rng) else {
            continue;
        };
        let kept: Vec<(Pixel, Pixel)> =
            matches.iter().zip(&inliers).filter(|(_, &i)| i).map(|(m, _)| *m).collect();
        if let Ok(line) = epipolar_line(&f, p) {
            views.push(v);
            lines.push(line);
            oriented.push(OrientedFundamental::orient(f, &kept).map(|o| (o, p)));
        }
    }
    let center = session.frame.center();
    match lines.len() {
        0 => Err(PlannerError::EptFailure),
        1 => Ok(BinLocation {
            support_views: views,
            aim: lines[0].closest_point(center),
            lines,
            transfer: None,
            point: None,
            behind: false,
            uncertainty_px: f64::INFINITY,
        }),
        _ => {
            // A direct observation that lies on two or more lines is taken
            // as the location.
            if let Some(obs) = tracks.observation(current, bin) {
                let flags: Vec<bool> = lines.iter().map(|l| l.distance(obs) <= cfg.observation_agreement_px).collect();
                let agreeing: Vec<HomogLine> = lines.iter().zip(&flags).filter(|(_, &a)| a).map(|(l, _)| *l).collect();
                if agreeing.len() >= 2 {
                    return Ok(BinLocation {
                        support_views: views,
                        lines,
                        point: Some(obs),
                        aim: obs,
                        transfer: Some(TransferResult { point: obs, inlier_count: agreeing.len(), inlier_flags: flags }),
                        behind: false,
                        uncertainty_px: cfg.ept_threshold_px,
                    });
                }
            }
            let t = epipolar_point_transfer(&lines, cfg.ept_threshold_px, &cfg.ransac, rng)
                .map_err(|_| PlannerError::EptFailure)?;
            if !t.point.is_finite() {
                return Err(PlannerError::EptFailure);
            }
            // Inlier views vote on which side of the camera the point is.
            let votes: i32 = oriented
                .iter()
                .zip(&t.inlier_flags)
                .filter_map(|(o, &inlier)| o.filter(|_| inlier))
                .map(|(o, p)| if o.side(p, t.point) < 0.0 { -1 } else { 1 })
                .sum();
            let behind = votes < 0;
            let inliers: Vec<HomogLine> =
                lines.iter().zip(&t.inlier_flags).filter(|(_, &i)| i).map(|(l, _)| *l).collect();
            let uncertainty_px = cfg.ept_threshold_px * intersection_spread(&inliers);
            Ok(BinLocation {
                support_views: views,
                lines,
                point: Some(t.point),
                aim: t.point,
                transfer: Some(t),
                behind,
                uncertainty_px,
            })
        }
    }
}

/// Locates `bin` in the session's current view through its support set.
pub fn locate_bin<R: Rng + ?Sized>(
    session: &GuidanceSession,
    bin: BinId,
    tracks: &TrackSet,
    cfg: &PlannerConfig,
    rng: &mut R,
) -> Result<BinLocation, PlannerError> {
    let excluded = |v: ViewId| session.own_views.contains(&v);
    let support = find_support_set(bin, session.current_view, tracks, cfg, &excluded)
        .ok_or(PlannerError::NoReachableWaypoint)?;
    locate_bin_with(session, bin, &support, tracks, cfg, rng)
}

/// Fraction of the bins seen in `view` whose side of `aim` disagrees with
/// their rank order relative to `bin`, the larger over both axes. Zero
/// when nothing ranked is visible.
pub fn rank_discordance(ranking: &SofaRanking, tracks: &TrackSet, view: ViewId, bin: BinId, aim: Pixel) -> f64 {
    let Some((wx, wy)) = ranking.ranks(bin) else {
        return 0.0;
    };
    let (mut n, mut dx, mut dy) = (0usize, 0usize, 0usize);
    for (b, p) in tracks.view_bins(view) {
        let Some((rx, ry)) = ranking.ranks(b).filter(|_| b != bin) else {
            continue;
        };
        n += 1;
        let disagrees = |r: usize, w: usize, d: f64| (r > w && d < 0.0) || (r < w && d > 0.0);
        dx += disagrees(rx, wx, p.x - aim.x) as usize;
        dy += disagrees(ry, wy, p.y - aim.y) as usize;
    }
    if n == 0 {
        return 0.0;
    }
    dx.max(dy) as f64 / n as f64
}

/// Above 1 a location is deferred: its ray is too uncertain, too far from
/// the optical axis where extrapolated epipolar lines lose accuracy, or at
/// odds with the global orders of the visible bins.
fn deferral_score(
    session: &GuidanceSession,
    ranking: &SofaRanking,
    tracks: &TrackSet,
    bin: BinId,
    loc: &BinLocation,
    cfg: &PlannerConfig,
) -> f64 {
    if loc.point.is_none() {
        return 0.0;
    }
    let k = &session.frame.intrinsics;
    let ray = k.ray(loc.aim).normalize();
    let z = if loc.behind { -ray.z } else { ray.z };
    let off_axis = z.clamp(-1.0, 1.0).acos();
    let mut score = (loc.angular_uncertainty(k, cfg.ept_threshold_px) / cfg.max_angular_uncertainty)
        .max(off_axis / cfg.max_step_angle);
    // The antipode of a point behind the camera mirrors both orders.
    if !loc.behind {
        let d = rank_discordance(ranking, tracks, session.current_view, bin, loc.aim);
        score = score.max(d / cfg.max_rank_discordance);
    }
    score
}

/// Computes the next step and appends it to the session history. A failure
/// to find any usable waypoint ends the session with `NoOverlapFailure`.
pub fn guidance_step<R: Rng + ?Sized>(
    session: &mut GuidanceSession,
    ranking: &SofaRanking,
    tracks: &TrackSet,
    cfg: &PlannerConfig,
    rng: &mut R,
) -> Result<GuidanceStep, PlannerError> {
    if session.status.is_terminal() {
        return Err(PlannerError::SessionTerminal);
    }
    let mut blacklisted = Vec::new();
    let mut deferred = Vec::new();
    // Lowest-scoring of the deferred locations.
    let mut fallback: Option<(f64, BinId, BinLocation)> = None;
    let (bin, loc) = loop {
        let skip: Vec<BinId> = blacklisted.iter().chain(&deferred).copied().collect();
        let (bin, support) = match next_waypoint(session, ranking, tracks, cfg, &skip) {
            Ok(w) => w,
            Err(e) => match fallback.take() {
                Some((_, bin, loc)) => break (bin, loc),
                None => {
                    session.status = SessionStatus::NoOverlapFailure;
                    return Err(e);
                }
            },
        };
        match locate_bin_with(session, bin, &support, tracks, cfg, rng) {
            // A deferred transfer still beats a single line.
            Ok(loc) if loc.point.is_none() && fallback.is_some() => {
                let (_, bin, loc) = fallback.take().expect("checked");
                break (bin, loc);
            }
            Ok(loc) => {
                let score = deferral_score(session, ranking, tracks, bin, &loc, cfg);
                if score <= 1.0 {
                    break (bin, loc);
                }
                deferred.push(bin);
                if fallback.as_ref().is_none_or(|f| score < f.0) {
                    fallback = Some((score, bin, loc));
                }
                if deferred.len() >= cfg.max_deferred {
                    let (_, bin, loc) = fallback.take().expect("just set");
                    break (bin, loc);
                }
            }
            Err(_) => {
                blacklisted.push(bin);
                if blacklisted.len() >= cfg.max_blacklisted {
                    if let Some((_, bin, loc)) = fallback.take() {
                        break (bin, loc);
                    }
                    session.status = SessionStatus::NoOverlapFailure;
                    return Err(PlannerError::EptFailure);
                }
            }
        }
    };
    deferred.retain(|&b| b != bin);
    let frame = session.frame;
    let overlay = Overlay::build(loc.point, loc.behind, &loc.line_flags(), frame.width, frame.height);
    let ray = frame.intrinsics.ray(loc.aim);
    let step = GuidanceStep {
        view: session.current_view,
        waypoint_bin: bin,
        rotation: rotation_to_ray(&frame.intrinsics, &if loc.behind { -ray } else { ray }),
        support_views: loc.support_views,
        transfer: loc.transfer,
        lines: loc.lines,
        aim: loc.aim,
        behind: loc.behind,
        overlay,
        blacklisted,
        deferred,
    };
    session.history.push(step.clone());
    session.step_count = session.history.len();
    Ok(step)
}
