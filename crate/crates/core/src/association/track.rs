use std::collections::VecDeque;

use crate::geometry::BBox;
use crate::motion::{ema_update, EmaVelocity, KalmanFilter, KalmanState};

use super::Detection;

/// Observations retained per track.
const HISTORY_LEN: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrackStatus {
    Tentative,
    Confirmed,
    Lost,
    Removed,
}

#[derive(Debug, Clone)]
pub struct Track {
    /// Spawn-order identifier, unique within a tracker.
    pub id: u32,
    /// Public identity, assigned the first time the track is confirmed.
    pub output_id: Option<u32>,
    pub kstate: KalmanState,
    pub ema: EmaVelocity,
    pub last_observation: Detection,
    pub history: VecDeque<Detection>,
    pub hits: u32,
    pub age_since_update: u32,
    pub status: TrackStatus,
}

impl Track {
    pub fn new(id: u32, det: &Detection, kf: &KalmanFilter) -> Self {
        let mut history = VecDeque::with_capacity(HISTORY_LEN);
        history.push_back(*det);
        Track {
            id,
            output_id: None,
            kstate: kf.init(&det.bbox),
            ema: EmaVelocity::default(),
            last_observation: *det,
            history,
            hits: 1,
            age_since_update: 0,
            status: TrackStatus::Tentative,
        }
    }

    pub fn predicted_bbox(&self) -> BBox {
        self.kstate.bbox()
    }

    pub fn is_live(&self) -> bool {
        self.status != TrackStatus::Removed
    }

    pub(crate) fn predict(&mut self, kf: &KalmanFilter) {
        self.kstate = kf.predict(&self.kstate);
    }

    /// Applies a matched observation: filter update, EMA step on the observed
    /// center displacement per frame, and lifecycle promotion.
    pub(crate) fn observe(
        &mut self,
        det: &Detection,
        kf: &KalmanFilter,
        alpha: f64,
        min_hits: u32,
    ) {
        let prev = self.last_observation;
        let gap = det.frame.saturating_sub(prev.frame).max(1) as f64;
        let (px, py) = prev.bbox.center();
        let (cx, cy) = det.bbox.center();
        self.ema = ema_update(&self.ema, ((cx - px) / gap, (cy - py) / gap), alpha);

        self.kstate = kf.update(&self.kstate, &det.bbox);
        self.last_observation = *det;
        if self.history.len() == HISTORY_LEN {
            self.history.pop_front();
        }
        self.history.push_back(*det);
        self.hits += 1;
        self.age_since_update = 0;
        self.status = match self.status {
            TrackStatus::Tentative if self.hits >= min_hits => TrackStatus::Confirmed,
            TrackStatus::Tentative => TrackStatus::Tentative,
            _ => TrackStatus::Confirmed,
        };
    }

    pub(crate) fn miss(&mut self, max_age: u32) {
        self.age_since_update += 1;
        self.status = match self.status {
            TrackStatus::Tentative => TrackStatus::Removed,
            TrackStatus::Confirmed | TrackStatus::Lost if self.age_since_update > max_age => {
                TrackStatus::Removed
            }
            TrackStatus::Confirmed | TrackStatus::Lost => TrackStatus::Lost,
            TrackStatus::Removed => TrackStatus::Removed,
        };
    }
}
