//! Blob-to-track association across frames.
//!
//! Greedy nearest-neighbor assignment with a hard distance gate: every
//! (track, blob) pair within `max_match_distance` competes, closest pairs
//! win, and each track and blob is claimed at most once per frame. Greedy
//! matching is deterministic and linearithmic, which is adequate for sparse
//! doorway scenes; the assignment step is isolated in `assign_pairs` so an
//! optimal matcher could be swapped in.
//!
//! Tracker state is single-owner and updated strictly in frame order.

use crate::blob::Blob;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Association parameters. Names are the canonical config keys.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerParams {
    /// Maximum centroid distance for a blob to match a track, in pixels.
    /// `None` means 10% of the frame diagonal.
    pub max_match_distance: Option<f64>,
    /// Matched frames required before a track is confirmed.
    pub min_hits: u32,
    /// Consecutive unmatched frames a track survives.
    pub max_missed: u32,
}

impl Default for TrackerParams {
    fn default() -> Self {
        TrackerParams {
            max_match_distance: None,
            min_hits: 3,
            max_missed: 10,
        }
    }
}

impl TrackerParams {
    pub fn validate(&self) -> Result<()> {
        if let Some(d) = self.max_match_distance {
            if !d.is_finite() || d <= 0.0 {
                return Err(Error::invalid_param(
                    "tracker.max_match_distance",
                    format!("{d} must be > 0"),
                ));
            }
        }
        if self.min_hits < 1 {
            return Err(Error::invalid_param("tracker.min_hits", "must be >= 1"));
        }
        Ok(())
    }

    pub fn resolved_max_match_distance(&self, width: u32, height: u32) -> f64 {
        self.max_match_distance.unwrap_or_else(|| {
            0.1 * ((width as f64).powi(2) + (height as f64).powi(2)).sqrt()
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackState {
    Tentative,
    Confirmed,
    /// Exceeded `max_missed`; set just before removal from the active set.
    Lost,
}

impl TrackState {
    pub fn as_str(&self) -> &'static str {
        match self {
            TrackState::Tentative => "tentative",
            TrackState::Confirmed => "confirmed",
            TrackState::Lost => "lost",
        }
    }
}

/// A persistent identity built from matched blobs. Lost tracks are removed
/// from the active set; ids are never reused within a run.
#[derive(Debug, Clone)]
pub struct Track {
    pub id: u64,
    /// (frame_index, x, y) for every matched frame; indices strictly increase.
    pub centroid_history: Vec<(u64, f64, f64)>,
    pub state: TrackState,
    pub hits: u32,
    pub missed: u32,
}

impl Track {
    pub fn last_centroid(&self) -> (f64, f64) {
        let &(_, x, y) = self.centroid_history.last().expect("track has a centroid");
        (x, y)
    }

    /// The centroid observed at `frame_index`, if this track matched there.
    pub fn centroid_at(&self, frame_index: u64) -> Option<(f64, f64)> {
        match self.centroid_history.last() {
            Some(&(f, x, y)) if f == frame_index => Some((x, y)),
            _ => None,
        }
    }

    pub fn is_confirmed(&self) -> bool {
        self.state == TrackState::Confirmed
    }
}

pub struct Tracker {
    max_match_distance: f64,
    min_hits: u32,
    max_missed: u32,
    tracks: Vec<Track>,
    next_id: u64,
    last_frame: Option<u64>,
}

impl Tracker {
    /// `max_match_distance` must already be resolved against the frame size.
    pub fn new(max_match_distance: f64, min_hits: u32, max_missed: u32) -> Self {
        Tracker {
            max_match_distance,
            min_hits,
            max_missed,
            tracks: Vec::new(),
            next_id: 1,
            last_frame: None,
        }
    }

    pub fn from_params(params: &TrackerParams, width: u32, height: u32) -> Result<Self> {
        params.validate()?;
        Ok(Tracker::new(
            params.resolved_max_match_distance(width, height),
            params.min_hits,
            params.max_missed,
        ))
    }

    /// Ingests one frame of blobs and returns the active tracks.
    ///
    /// Matched tracks append the blob centroid; unmatched tracks accumulate
    /// misses and drop out once `missed > max_missed`; every unclaimed blob
    /// spawns a tentative track.
    pub fn update(&mut self, blobs: &[Blob], frame_index: u64) -> Result<&[Track]> {
        if let Some(last) = self.last_frame {
            if frame_index <= last {
                return Err(Error::invalid_param(
                    "frame_index",
                    format!("{frame_index} does not increase past {last}"),
                ));
            }
        }
        self.last_frame = Some(frame_index);

        let assignments = assign_pairs(&self.tracks, blobs, self.max_match_distance);
        let mut blob_claimed = vec![false; blobs.len()];
        let mut track_claimed = vec![false; self.tracks.len()];
        for &(ti, bi) in &assignments {
            track_claimed[ti] = true;
            blob_claimed[bi] = true;
            let track = &mut self.tracks[ti];
            let (cx, cy) = blobs[bi].centroid;
            track.centroid_history.push((frame_index, cx, cy));
            track.hits += 1;
            track.missed = 0;
            if track.hits >= self.min_hits {
                track.state = TrackState::Confirmed;
            }
        }

        for (ti, track) in self.tracks.iter_mut().enumerate() {
            if !track_claimed[ti] {
                track.missed += 1;
                if track.missed > self.max_missed {
                    track.state = TrackState::Lost;
                }
            }
        }
        self.tracks.retain(|t| t.state != TrackState::Lost);

        for (bi, blob) in blobs.iter().enumerate() {
            if blob_claimed[bi] {
                continue;
            }
            let mut track = Track {
                id: self.next_id,
                centroid_history: vec![(frame_index, blob.centroid.0, blob.centroid.1)],
                state: TrackState::Tentative,
                hits: 1,
                missed: 0,
            };
            if track.hits >= self.min_hits {
                track.state = TrackState::Confirmed;
            }
            self.next_id += 1;
            self.tracks.push(track);
        }

        Ok(&self.tracks)
    }

    pub fn active_tracks(&self) -> &[Track] {
        &self.tracks
    }
}

/// Greedy one-to-one assignment. Pairs within the gate are sorted by
/// (distance, track id, blob index) and accepted while both sides are free.
fn assign_pairs(tracks: &[Track], blobs: &[Blob], gate: f64) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(f64, u64, usize, usize)> = Vec::new();
    for (ti, track) in tracks.iter().enumerate() {
        let (tx, ty) = track.last_centroid();
        for (bi, blob) in blobs.iter().enumerate() {
            let dist = ((blob.centroid.0 - tx).powi(2) + (blob.centroid.1 - ty).powi(2)).sqrt();
            if dist <= gate {
                pairs.push((dist, track.id, ti, bi));
            }
        }
    }
    pairs.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .expect("distances are finite")
            .then(a.1.cmp(&b.1))
            .then(a.3.cmp(&b.3))
    });

    let mut track_used = vec![false; tracks.len()];
    let mut blob_used = vec![false; blobs.len()];
    let mut out = Vec::new();
    for (_, _, ti, bi) in pairs {
        if !track_used[ti] && !blob_used[bi] {
            track_used[ti] = true;
            blob_used[bi] = true;
            out.push((ti, bi));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blob_at(x: f64, y: f64) -> Blob {
        Blob {
            area: 100,
            centroid: (x, y),
            bounding_box: (0, 0, 10, 10),
        }
    }

    #[test]
    fn drifting_blob_keeps_one_id_and_confirms_on_third_frame() {
        let mut tracker = Tracker::new(50.0, 3, 10);
        for i in 0..5u64 {
            let tracks = tracker
                .update(&[blob_at(10.0 + 3.0 * i as f64, 20.0)], i)
                .unwrap();
            assert_eq!(tracks.len(), 1);
            assert_eq!(tracks[0].id, 1);
            let expect_confirmed = i >= 2;
            assert_eq!(tracks[0].is_confirmed(), expect_confirmed, "frame {i}");
        }
    }

    #[test]
    fn distant_stationary_blobs_never_swap() {
        let mut tracker = Tracker::new(50.0, 1, 10);
        for i in 0..20u64 {
            let tracks = tracker
                .update(&[blob_at(10.0, 10.0), blob_at(210.0, 10.0)], i)
                .unwrap();
            assert_eq!(tracks.len(), 2);
        }
        let tracks = tracker.active_tracks();
        assert_eq!(tracks[0].last_centroid(), (10.0, 10.0));
        assert_eq!(tracks[0].id, 1);
        assert_eq!(tracks[1].last_centroid(), (210.0, 10.0));
        assert_eq!(tracks[1].id, 2);
    }

    #[test]
    fn vanished_track_is_replaced_by_new_id() {
        let max_missed = 4u32;
        let mut tracker = Tracker::new(50.0, 1, max_missed);
        tracker.update(&[blob_at(10.0, 10.0)], 0).unwrap();
        let mut frame = 1u64;
        for _ in 0..max_missed + 1 {
            tracker.update(&[], frame).unwrap();
            frame += 1;
        }
        assert!(tracker.active_tracks().is_empty());
        let tracks = tracker.update(&[blob_at(10.0, 10.0)], frame).unwrap();
        assert_eq!(tracks.len(), 1);
        assert_eq!(tracks[0].id, 2);
    }

    #[test]
    fn track_survives_gaps_up_to_max_missed() {
        let mut tracker = Tracker::new(50.0, 1, 4);
        tracker.update(&[blob_at(10.0, 10.0)], 0).unwrap();
        for f in 1..=4u64 {
            tracker.update(&[], f).unwrap();
        }
        assert_eq!(tracker.active_tracks().len(), 1);
        let tracks = tracker.update(&[blob_at(12.0, 10.0)], 5).unwrap();
        assert_eq!(tracks[0].id, 1);
        assert_eq!(tracks[0].missed, 0);
    }

    #[test]
    fn non_monotonic_frame_index_is_rejected() {
        let mut tracker = Tracker::new(50.0, 3, 10);
        tracker.update(&[], 5).unwrap();
        assert!(tracker.update(&[], 5).is_err());
        assert!(tracker.update(&[], 4).is_err());
        assert!(tracker.update(&[], 6).is_ok());
    }

    #[test]
    fn blob_outside_gate_spawns_new_track() {
        let mut tracker = Tracker::new(20.0, 1, 10);
        tracker.update(&[blob_at(10.0, 10.0)], 0).unwrap();
        let tracks = tracker.update(&[blob_at(100.0, 10.0)], 1).unwrap();
        assert_eq!(tracks.len(), 2);
    }

    #[test]
    fn centroid_at_reports_only_current_frame() {
        let mut tracker = Tracker::new(50.0, 1, 10);
        tracker.update(&[blob_at(10.0, 10.0)], 0).unwrap();
        tracker.update(&[], 1).unwrap();
        let track = &tracker.active_tracks()[0];
        assert_eq!(track.centroid_at(0), Some((10.0, 10.0)));
        assert_eq!(track.centroid_at(1), None);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arb_blobs() -> impl Strategy<Value = Vec<Blob>> {
            proptest::collection::vec((0.0f64..320.0, 0.0f64..240.0), 0..8)
                .prop_map(|pts| pts.into_iter().map(|(x, y)| blob_at(x, y)).collect())
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            // One-to-one: no track or blob is claimed twice in a frame, and
            // matched centroids respect the gate.
            #[test]
            fn assignment_is_one_to_one(frames in proptest::collection::vec(arb_blobs(), 1..12)) {
                let gate = 40.0;
                let mut tracker = Tracker::new(gate, 3, 5);
                for (f, blobs) in frames.iter().enumerate() {
                    let before: Vec<(u64, (f64, f64))> = tracker
                        .active_tracks()
                        .iter()
                        .map(|t| (t.id, t.last_centroid()))
                        .collect();
                    let tracks = tracker.update(blobs, f as u64).unwrap();
                    let mut matched_ids = std::collections::HashSet::new();
                    let mut matched_pts = Vec::new();
                    for t in tracks {
                        if let Some(c) = t.centroid_at(f as u64) {
                            prop_assert!(matched_ids.insert(t.id));
                            if let Some(&(_, prev)) = before.iter().find(|&&(id, _)| id == t.id) {
                                let d = ((c.0 - prev.0).powi(2) + (c.1 - prev.1).powi(2)).sqrt();
                                prop_assert!(d <= gate + 1e-9);
                            }
                            matched_pts.push(c);
                        }
                    }
                    // Each blob claimed at most once: every matched centroid
                    // must be a distinct blob position.
                    matched_pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    for w in matched_pts.windows(2) {
                        prop_assert!(w[0] != w[1] || blobs.iter().filter(|b| b.centroid == w[0]).count() > 1);
                    }
                }
            }

            // Ids are never reused and grow monotonically.
            #[test]
            fn ids_are_unique_across_a_run(frames in proptest::collection::vec(arb_blobs(), 1..12)) {
                let mut tracker = Tracker::new(30.0, 2, 1);
                let mut seen = std::collections::HashSet::new();
                let mut active_prev: Vec<u64> = Vec::new();
                for (f, blobs) in frames.iter().enumerate() {
                    let tracks = tracker.update(blobs, f as u64).unwrap();
                    for t in tracks {
                        if !active_prev.contains(&t.id) {
                            prop_assert!(seen.insert(t.id), "id {} reused", t.id);
                        }
                    }
                    active_prev = tracks.iter().map(|t| t.id).collect();
                }
            }

            // With all pairwise distances distinct, permuting the blob list
            // does not change which (track, blob-position) pairs match.
            #[test]
            fn permutation_invariance(seed in 0u64..5000) {
                use rand_chacha::rand_core::{RngCore, SeedableRng};
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                let track_pts: Vec<(f64, f64)> = (0..4)
                    .map(|_| ((rng.next_u32() % 300) as f64 + 0.125, (rng.next_u32() % 200) as f64 + 0.375))
                    .collect();
                let blob_pts: Vec<(f64, f64)> = (0..4)
                    .map(|_| ((rng.next_u32() % 300) as f64 + 0.625, (rng.next_u32() % 200) as f64 + 0.875))
                    .collect();
                // The claim holds only for distinct distances; discard draws
                // with an exact pairwise tie.
                let mut dists: Vec<u64> = track_pts
                    .iter()
                    .flat_map(|&(tx, ty)| {
                        blob_pts.iter().map(move |&(bx, by)| {
                            (((bx - tx).powi(2) + (by - ty).powi(2)).sqrt()).to_bits()
                        })
                    })
                    .collect();
                dists.sort_unstable();
                prop_assume!(dists.windows(2).all(|w| w[0] != w[1]));

                // Matched (track, blob-position) pairs must not depend on
                // blob order; ids of freshly spawned tracks follow input
                // order by construction, so spawns compare as a set of
                // positions.
                let run = |order: &[usize]| {
                    let mut tracker = Tracker::new(60.0, 1, 5);
                    let seeds: Vec<Blob> = track_pts.iter().map(|&(x, y)| blob_at(x, y)).collect();
                    tracker.update(&seeds, 0).unwrap();
                    let blobs: Vec<Blob> =
                        order.iter().map(|&i| blob_at(blob_pts[i].0, blob_pts[i].1)).collect();
                    let tracks = tracker.update(&blobs, 1).unwrap();
                    let mut matched: Vec<(u64, (f64, f64))> = tracks
                        .iter()
                        .filter(|t| t.id <= track_pts.len() as u64)
                        .filter_map(|t| t.centroid_at(1).map(|c| (t.id, c)))
                        .collect();
                    matched.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    let mut spawned: Vec<(f64, f64)> = tracks
                        .iter()
                        .filter(|t| t.id > track_pts.len() as u64)
                        .map(|t| t.last_centroid())
                        .collect();
                    spawned.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    (matched, spawned)
                };

                let forward = run(&[0, 1, 2, 3]);
                let reversed = run(&[3, 2, 1, 0]);
                prop_assert_eq!(forward, reversed);
            }
        }
    }
}
