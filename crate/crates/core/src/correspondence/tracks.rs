use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use super::{squared_distance, DictionaryError, Observation, ViewObservations, VisualDictionary};
use crate::geometry::Pixel;
use crate::{BinId, ViewId};

/// Observations of one bin, at most one per view, sorted by view id.
#[derive(Clone, Debug, PartialEq)]
pub struct Track {
    pub bin: BinId,
    pub observations: Vec<Observation>,
}

impl Track {
    pub fn observation(&self, view: ViewId) -> Option<&Observation> {
        self.observations
            .binary_search_by_key(&view, |o| o.view_id)
            .ok()
            .map(|i| &self.observations[i])
    }

    pub fn views(&self) -> impl Iterator<Item = ViewId> + '_ {
        self.observations.iter().map(|o| o.view_id)
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

/// Quantizes one view and keeps, per bin, the observation nearest the leaf
/// center. Earlier observations win exact ties.
fn quantize_view<'a>(
    view: &'a ViewObservations,
    dict: &VisualDictionary,
) -> Result<BTreeMap<BinId, (f64, &'a Observation)>, DictionaryError> {
    let mut best: BTreeMap<BinId, (f64, &Observation)> = BTreeMap::new();
    for obs in &view.observations {
        let bin = dict.quantize(&obs.descriptor)?;
        let center = dict.leaf_center(bin).expect("quantize returns a known leaf");
        let d = squared_distance(center, &obs.descriptor.0);
        match best.get(&bin) {
            Some(&(kept, _)) if kept <= d => {}
            _ => {
                best.insert(bin, (d, obs));
            }
        }
    }
    Ok(best)
}

/// Groups observations into per-bin tracks.
///
/// Tracks seen by fewer than two views are dropped. The result is sorted by
/// bin id.
pub fn build_tracks(views: &[ViewObservations], dict: &VisualDictionary) -> Result<Vec<Track>, DictionaryError> {
    let mut bins: BTreeMap<BinId, Vec<Observation>> = BTreeMap::new();
    for view in views {
        for (bin, (_, obs)) in quantize_view(view, dict)? {
            let mut obs = obs.clone();
            obs.view_id = view.view_id;
            bins.entry(bin).or_default().push(obs);
        }
    }
    Ok(bins
        .into_iter()
        .filter_map(|(bin, mut observations)| {
            observations.sort_by_key(|o| o.view_id);
            observations.dedup_by_key(|o| o.view_id);
            (observations.len() >= 2).then_some(Track { bin, observations })
        })
        .collect())
}

/// Correspondences between views `a` and `b`, ordered by bin id.
pub fn shared_tracks(a: ViewId, b: ViewId, tracks: &[Track]) -> Vec<(Pixel, Pixel, BinId)> {
    let mut out: Vec<_> = tracks
        .iter()
        .filter_map(|t| Some((t.observation(a)?.pixel, t.observation(b)?.pixel, t.bin)))
        .collect();
    out.sort_by_key(|&(_, _, bin)| bin);
    out
}

/// Tracks with per-bin and per-view indices.
///
/// Views registered after construction only attach to existing tracks; the
/// dictionary and the bin set stay frozen.
#[derive(Clone, Debug, Default)]
pub struct TrackSet {
    tracks: Vec<Track>,
    by_bin: BTreeMap<BinId, usize>,
    by_view: BTreeMap<ViewId, BTreeMap<BinId, Pixel>>,
}

impl TrackSet {
    pub fn new(mut tracks: Vec<Track>) -> Self {
        tracks.sort_by_key(|t| t.bin);
        let mut set = Self { tracks, ..Self::default() };
        set.reindex();
        set
    }

    pub fn from_views(views: &[ViewObservations], dict: &VisualDictionary) -> Result<Self, DictionaryError> {
        Ok(Self::new(build_tracks(views, dict)?))
    }

    fn reindex(&mut self) {
        self.by_bin.clear();
        self.by_view.clear();
        for (i, t) in self.tracks.iter().enumerate() {
            self.by_bin.insert(t.bin, i);
            for o in &t.observations {
                self.by_view.entry(o.view_id).or_default().insert(t.bin, o.pixel);
            }
        }
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn len(&self) -> usize {
        self.tracks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tracks.is_empty()
    }

    pub fn get(&self, bin: BinId) -> Option<&Track> {
        self.by_bin.get(&bin).map(|&i| &self.tracks[i])
    }

    pub fn contains_view(&self, view: ViewId) -> bool {
        self.by_view.contains_key(&view)
    }

    pub fn views(&self) -> impl Iterator<Item = ViewId> + '_ {
        self.by_view.keys().copied()
    }

    pub fn observation(&self, view: ViewId, bin: BinId) -> Option<Pixel> {
        self.by_view.get(&view)?.get(&bin).copied()
    }

    /// Bins observed in `view` with their pixels, ascending by bin id.
    pub fn view_bins(&self, view: ViewId) -> impl Iterator<Item = (BinId, Pixel)> + '_ {
        self.by_view.get(&view).into_iter().flat_map(|m| m.iter().map(|(&b, &p)| (b, p)))
    }

    /// Same result as [`shared_tracks`], using the view index.
    pub fn shared(&self, a: ViewId, b: ViewId) -> Vec<(Pixel, Pixel, BinId)> {
        let (Some(ma), Some(mb)) = (self.by_view.get(&a), self.by_view.get(&b)) else {
            return Vec::new();
        };
        ma.iter().filter_map(|(&bin, &pa)| Some((pa, *mb.get(&bin)?, bin))).collect()
    }

    /// Number of tracks `view` shares with every other view.
    pub fn shared_counts(&self, view: ViewId) -> BTreeMap<ViewId, usize> {
        let mut counts = BTreeMap::new();
        for bin in self.by_view.get(&view).into_iter().flat_map(|m| m.keys()) {
            for other in self.tracks[self.by_bin[bin]].views() {
                if other != view {
                    *counts.entry(other).or_insert(0) += 1;
                }
            }
        }
        counts
    }

    /// Attaches a new view's observations to existing tracks. Returns the
    /// number of observations attached. Any earlier registration of the same
    /// view id is replaced.
    pub fn register_view(&mut self, view: &ViewObservations, dict: &VisualDictionary) -> Result<usize, DictionaryError> {
        let best = quantize_view(view, dict)?;
        self.unregister_view(view.view_id);
        let mut attached = 0;
        let index = self.by_view.entry(view.view_id).or_default();
        for (bin, (_, obs)) in best {
            let Some(&i) = self.by_bin.get(&bin) else {
                continue;
            };
            let mut obs = obs.clone();
            obs.view_id = view.view_id;
            index.insert(bin, obs.pixel);
            let track = &mut self.tracks[i];
            let pos = track.observations.partition_point(|o| o.view_id < view.view_id);
            track.observations.insert(pos, obs);
            attached += 1;
        }
        if attached == 0 {
            self.by_view.remove(&view.view_id);
        }
        Ok(attached)
    }

    pub fn unregister_view(&mut self, view: ViewId) {
        let Some(bins) = self.by_view.remove(&view) else {
            return;
        };
        for bin in bins.keys() {
            let track = &mut self.tracks[self.by_bin[bin]];
            track.observations.retain(|o| o.view_id != view);
        }
    }
}
