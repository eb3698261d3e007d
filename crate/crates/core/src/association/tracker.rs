use crate::assignment::solve_assignment;
use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::motion::KalmanFilter;
use crate::trackset::TrackRecord;

use super::{
    band, cost_from_similarity, similarity_matrix, AssociationConfig, Detection, Track, TrackStatus,
};

/// Online multi-object tracker. One instance per video sequence; frames must
/// be fed in increasing order.
#[derive(Debug, Clone)]
pub struct Tracker {
    cfg: AssociationConfig,
    kf: KalmanFilter,
    tracks: Vec<Track>,
    last_frame: Option<u32>,
    next_track_id: u32,
    next_output_id: u32,
}

impl Tracker {
    pub fn new(cfg: AssociationConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Tracker {
            kf: KalmanFilter::new(cfg.motion.noise),
            cfg,
            tracks: Vec::new(),
            last_frame: None,
            next_track_id: 1,
            next_output_id: 1,
        })
    }

    pub fn config(&self) -> &AssociationConfig {
        &self.cfg
    }

    /// Live tracks in spawn order.
    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn last_frame(&self) -> Option<u32> {
        self.last_frame
    }

    /// Processes the detections of `frame` and returns the confirmed boxes as
    /// `(output_id, box)`, sorted by id. Skipped frames in between are
    /// processed as empty frames.
    pub fn step(&mut self, frame: u32, dets: &[Detection]) -> Result<Vec<(u32, BBox)>> {
        if let Some(bad) = dets.iter().find(|d| d.frame != frame) {
            return Err(Error::ContractViolation(format!(
                "detection from frame {} passed to step for frame {frame}",
                bad.frame
            )));
        }
        if frame == 0 {
            return Err(Error::ContractViolation("frame indices start at 1".into()));
        }
        if let Some(last) = self.last_frame {
            if frame <= last {
                return Err(Error::ContractViolation(format!(
                    "frame {frame} does not follow frame {last}"
                )));
            }
            for _ in last + 1..frame {
                self.process(&[]);
            }
        }
        self.last_frame = Some(frame);
        Ok(self.process(dets))
    }

    fn process(&mut self, dets: &[Detection]) -> Vec<(u32, BBox)> {
        let cfg = self.cfg;
        let [gate1, gate2, gate3] = cfg.stage_gates();

        for t in &mut self.tracks {
            t.predict(&self.kf);
        }

        let bands = band(dets, &cfg.bands);
        let mut matched: Vec<(usize, Detection)> = Vec::new();
        let mut free_tracks: Vec<usize> = (0..self.tracks.len()).collect();

        // Stage 1: confident detections against every live track, with the direction term.
        let high_left: Vec<Detection> = {
            let pool: Vec<&Track> = free_tracks.iter().map(|&i| &self.tracks[i]).collect();
            let predicted: Vec<BBox> = pool.iter().map(|t| t.predicted_bbox()).collect();
            let boxes: Vec<BBox> = bands.high.iter().map(|d| d.bbox).collect();
            let sim = similarity_matrix(&predicted, &boxes, &cfg.sim);
            let cost = cost_from_similarity(&sim, &pool, &bands.high, &cfg, true);
            let a = solve_assignment(&cost, &sim, gate1).expect("finite association costs");
            for &(r, c) in &a.matches {
                matched.push((free_tracks[r], bands.high[c]));
            }
            free_tracks = a.unmatched_rows.iter().map(|&r| free_tracks[r]).collect();
            a.unmatched_cols.iter().map(|&c| bands.high[c]).collect()
        };

        // Stage 2: low-confidence detections rescue tracks left over by stage 1.
        if !bands.low.is_empty() && !free_tracks.is_empty() {
            let predicted: Vec<BBox> = free_tracks
                .iter()
                .map(|&i| self.tracks[i].predicted_bbox())
                .collect();
            let boxes: Vec<BBox> = bands.low.iter().map(|d| d.bbox).collect();
            let sim = similarity_matrix(&predicted, &boxes, &cfg.sim);
            let a = solve_assignment(&-&sim, &sim, gate2).expect("finite association costs");
            for &(r, c) in &a.matches {
                matched.push((free_tracks[r], bands.low[c]));
            }
            free_tracks = a.unmatched_rows.iter().map(|&r| free_tracks[r]).collect();
        }

        // Stage 3: recover with the tracks' last observed boxes.
        let high_left: Vec<Detection> = if !high_left.is_empty() && !free_tracks.is_empty() {
            let observed: Vec<BBox> = free_tracks
                .iter()
                .map(|&i| self.tracks[i].last_observation.bbox)
                .collect();
            let boxes: Vec<BBox> = high_left.iter().map(|d| d.bbox).collect();
            let sim = similarity_matrix(&observed, &boxes, &cfg.sim);
            let a = solve_assignment(&-&sim, &sim, gate3).expect("finite association costs");
            for &(r, c) in &a.matches {
                matched.push((free_tracks[r], high_left[c]));
            }
            free_tracks = a.unmatched_rows.iter().map(|&r| free_tracks[r]).collect();
            a.unmatched_cols.iter().map(|&c| high_left[c]).collect()
        } else {
            high_left
        };

        let alpha = cfg.motion.ema_alpha;
        for (idx, det) in &matched {
            self.tracks[*idx].observe(det, &self.kf, alpha, cfg.min_hits);
        }
        for &idx in &free_tracks {
            self.tracks[idx].miss(cfg.max_age);
        }
        self.tracks.retain(Track::is_live);

        for det in &high_left {
            let mut t = Track::new(self.next_track_id, det, &self.kf);
            self.next_track_id += 1;
            if cfg.min_hits <= 1 {
                t.status = TrackStatus::Confirmed;
            }
            self.tracks.push(t);
        }

        let mut out = Vec::new();
        for t in &mut self.tracks {
            if t.status != TrackStatus::Confirmed {
                continue;
            }
            let id = *t.output_id.get_or_insert_with(|| {
                let id = self.next_output_id;
                self.next_output_id += 1;
                id
            });
            out.push((id, t.kstate.bbox()));
        }
        out.sort_by_key(|(id, _)| *id);
        out
    }
}

/// Runs a fresh tracker over a whole sequence. Output rows are sorted by
/// `(frame, id)`; ids are dense and numbered in order of first confirmation.
pub fn run_sequence<I>(frames: I, cfg: &AssociationConfig) -> Result<Vec<TrackRecord>>
where
    I: IntoIterator<Item = (u32, Vec<Detection>)>,
{
    let mut tracker = Tracker::new(*cfg)?;
    let mut records = Vec::new();
    for (frame, dets) in frames {
        if let Some(last) = tracker.last_frame() {
            if frame <= last {
                return Err(Error::ContractViolation(format!(
                    "frames out of order: {frame} after {last}"
                )));
            }
        }
        for (id, bbox) in tracker.step(frame, &dets)? {
            records.push(TrackRecord { frame, id, bbox });
        }
    }
    Ok(records)
}
