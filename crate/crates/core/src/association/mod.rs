//! Appearance-free association: confidence banding, cost construction and the
//! three-stage matching cascade.

mod track;
mod tracker;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use track::{Track, TrackStatus};
pub use tracker::{run_sequence, Tracker};

use crate::error::{Error, Result};
use crate::geometry::{similarity, BBox, SimilarityConfig};
use crate::motion::{direction_cost, MotionConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub frame: u32,
    pub bbox: BBox,
    pub score: f64,
}

impl Detection {
    pub fn new(frame: u32, bbox: BBox, score: f64) -> Self {
        Detection { frame, bbox, score }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceBands {
    pub threshold_high: f64,
    pub threshold_low: f64,
}

impl Default for ConfidenceBands {
    fn default() -> Self {
        ConfidenceBands {
            threshold_high: 0.25,
            threshold_low: 0.1,
        }
    }
}

impl ConfidenceBands {
    pub fn validate(&self) -> Result<()> {
        let ok = 0.0 <= self.threshold_low
            && self.threshold_low <= self.threshold_high
            && self.threshold_high <= 1.0;
        if !ok {
            return Err(Error::InvalidParameter(format!(
                "confidence bands need 0 <= threshold_low ({}) <= threshold_high ({}) <= 1",
                self.threshold_low, self.threshold_high
            )));
        }
        Ok(())
    }
}

/// Detections split by confidence, input order preserved within each band.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Bands {
    pub high: Vec<Detection>,
    pub low: Vec<Detection>,
    pub discard: Vec<Detection>,
}

pub fn band(dets: &[Detection], bands: &ConfidenceBands) -> Bands {
    let mut out = Bands::default();
    for d in dets {
        if d.score >= bands.threshold_high {
            out.high.push(*d);
        } else if d.score >= bands.threshold_low {
            out.low.push(*d);
        } else {
            out.discard.push(*d);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssociationConfig {
    /// Similarity gate of the first stage.
    pub match_threshold: f64,
    /// Gate reduction per later stage: stage `k` (0-based) uses `match_threshold - k * stage_decrement`.
    pub stage_decrement: f64,
    pub min_hits: u32,
    pub max_age: u32,
    pub bands: ConfidenceBands,
    pub sim: SimilarityConfig,
    pub motion: MotionConfig,
}

impl Default for AssociationConfig {
    fn default() -> Self {
        AssociationConfig {
            match_threshold: 0.25,
            stage_decrement: 0.08,
            min_hits: 3,
            max_age: 30,
            bands: ConfidenceBands::default(),
            sim: SimilarityConfig::default(),
            motion: MotionConfig::default(),
        }
    }
}

impl AssociationConfig {
    /// The OC-SORT-style baseline: IoU similarity, direction from the latest
    /// observed step only.
    pub fn plain_iou() -> Self {
        AssociationConfig {
            sim: SimilarityConfig::plain_iou(),
            motion: MotionConfig {
                ema_alpha: 0.0,
                ..MotionConfig::default()
            },
            ..AssociationConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.match_threshold) {
            return Err(Error::InvalidParameter(format!(
                "match_threshold must lie in [0, 1], got {}",
                self.match_threshold
            )));
        }
        if !(self.stage_decrement >= 0.0
            && self.match_threshold - 2.0 * self.stage_decrement >= 0.0)
        {
            return Err(Error::InvalidParameter(format!(
                "stage_decrement must satisfy 0 <= 2 * decrement ({}) <= match_threshold ({})",
                self.stage_decrement, self.match_threshold
            )));
        }
        if self.min_hits == 0 {
            return Err(Error::InvalidParameter("min_hits must be >= 1".into()));
        }
        self.bands.validate()?;
        self.sim.validate()?;
        self.motion.validate()
    }

    /// Gates of the three matching stages.
    pub fn stage_gates(&self) -> [f64; 3] {
        [
            self.match_threshold,
            self.match_threshold - self.stage_decrement,
            self.match_threshold - 2.0 * self.stage_decrement,
        ]
    }
}

/// Pairwise similarity between two box lists.
pub fn similarity_matrix(rows: &[BBox], cols: &[BBox], cfg: &SimilarityConfig) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| {
        similarity(&rows[i], &cols[j], cfg)
    })
}

/// Association cost of each (predicted track, detection) pair:
/// negated similarity plus, optionally, the weighted direction inconsistency.
/// Tracks must already be predicted to the detections' frame.
pub fn cost_matrix(
    tracks: &[&Track],
    dets: &[Detection],
    cfg: &AssociationConfig,
    use_direction: bool,
) -> DMatrix<f64> {
    let predicted: Vec<BBox> = tracks.iter().map(|t| t.predicted_bbox()).collect();
    let boxes: Vec<BBox> = dets.iter().map(|d| d.bbox).collect();
    let sim = similarity_matrix(&predicted, &boxes, &cfg.sim);
    cost_from_similarity(&sim, tracks, dets, cfg, use_direction)
}

pub(crate) fn cost_from_similarity(
    sim: &DMatrix<f64>,
    tracks: &[&Track],
    dets: &[Detection],
    cfg: &AssociationConfig,
    use_direction: bool,
) -> DMatrix<f64> {
    let weight = cfg.motion.direction_cost_weight;
    DMatrix::from_fn(tracks.len(), dets.len(), |i, j| {
        let mut c = -sim[(i, j)];
        if use_direction && weight > 0.0 {
            let t = tracks[i];
            c += weight
                * direction_cost(
                    &t.ema,
                    t.last_observation.bbox.center(),
                    dets[j].bbox.center(),
                );
        }
        c
    })
}
