//! Synthetic multi-target scenarios with known ground truth.
//!
//! All randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with
//! [`ScenarioSpec::seed`] through `SeedableRng::seed_from_u64`, so a spec
//! always produces the same sequence.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::association::Detection;
use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::io::mot::DetsByFrame;
use crate::trackset::TrackSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionModel {
    /// Constant velocity.
    Linear,
    /// Constant speed, heading rotating by `turn_rate` rad/frame (random sense per target).
    Turn,
    /// Targets in pairs whose paths meet at the middle frame; heading turns by `turn_rate`.
    Crossing,
}

/// Scenario description. Every field has a default, so a spec file only needs
/// the keys it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSpec {
    pub n_targets: u32,
    pub n_frames: u32,
    pub image_w: f64,
    pub image_h: f64,
    pub motion: MotionModel,
    pub turn_rate: f64,
    /// Box side lengths are drawn uniformly from `[box_min, box_max]`.
    pub box_min: f64,
    pub box_max: f64,
    /// Speed in px/frame, drawn uniformly from `[speed_min, speed_max]`.
    pub speed_min: f64,
    pub speed_max: f64,
    /// Std of the Gaussian jitter added to each detection coordinate (px).
    pub noise_std: f64,
    pub dropout: f64,
    pub score_mean: f64,
    pub score_std: f64,
    /// Fraction of true detections scored from the low-confidence distribution.
    pub low_fraction: f64,
    pub low_mean: f64,
    pub low_std: f64,
    /// Mean number of false detections per frame.
    pub clutter_rate: f64,
    pub clutter_score_mean: f64,
    pub clutter_score_std: f64,
    pub seed: u64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec {
            n_targets: 10,
            n_frames: 100,
            image_w: 1920.0,
            image_h: 1080.0,
            motion: MotionModel::Linear,
            turn_rate: 0.0,
            box_min: 8.0,
            box_max: 24.0,
            speed_min: 1.0,
            speed_max: 5.0,
            noise_std: 0.0,
            dropout: 0.0,
            score_mean: 0.8,
            score_std: 0.1,
            low_fraction: 0.0,
            low_mean: 0.18,
            low_std: 0.03,
            clutter_rate: 0.0,
            clutter_score_mean: 0.2,
            clutter_score_std: 0.1,
            seed: 0,
        }
    }
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter(msg()))
    }
}

impl ScenarioSpec {
    pub fn from_toml_str(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
                .unwrap_or(0),
            message: e.message().to_string(),
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path)
    }

    pub fn validate(&self) -> Result<()> {
        let probs = [
            ("dropout", self.dropout),
            ("low_fraction", self.low_fraction),
        ];
        for (name, p) in probs {
            check((0.0..=1.0).contains(&p), || {
                format!("{name} must lie in [0, 1], got {p}")
            })?;
        }
        check(self.n_frames >= 1, || "n_frames must be >= 1".into())?;
        check(self.box_min >= 1.0 && self.box_min <= self.box_max, || {
            format!(
                "need 1 <= box_min ({}) <= box_max ({})",
                self.box_min, self.box_max
            )
        })?;
        check(self.box_max <= self.image_w.min(self.image_h), || {
            format!(
                "box_max {} does not fit in a {}x{} image",
                self.box_max, self.image_w, self.image_h
            )
        })?;
        check(
            0.0 <= self.speed_min && self.speed_min <= self.speed_max,
            || {
                format!(
                    "need 0 <= speed_min ({}) <= speed_max ({})",
                    self.speed_min, self.speed_max
                )
            },
        )?;
        let nonneg = [
            ("noise_std", self.noise_std),
            ("score_std", self.score_std),
            ("low_std", self.low_std),
            ("clutter_rate", self.clutter_rate),
            ("clutter_score_std", self.clutter_score_std),
            ("turn_rate", self.turn_rate.abs()),
        ];
        for (name, v) in nonneg {
            check(v.is_finite() && v >= 0.0, || {
                format!("{name} must be finite and >= 0, got {v}")
            })?;
        }
        Ok(())
    }
}

/// Output of [`generate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub gt: TrackSet,
    pub dets: DetsByFrame,
}

struct Path2 {
    /// Center offsets per frame, relative to the anchor frame.
    offsets: Vec<(f64, f64)>,
}

impl Path2 {
    fn new(n_frames: u32, speed: f64, heading: f64, turn: f64, anchor: usize) -> Self {
        let mut offsets = Vec::with_capacity(n_frames as usize);
        let (mut x, mut y, mut theta) = (0.0, 0.0, heading);
        for _ in 0..n_frames {
            offsets.push((x, y));
            x += speed * theta.cos();
            y += speed * theta.sin();
            theta += turn;
        }
        let (ax, ay) = offsets[anchor];
        for o in &mut offsets {
            o.0 -= ax;
            o.1 -= ay;
        }
        Path2 { offsets }
    }

    fn scale(&mut self, k: f64) {
        for o in &mut self.offsets {
            o.0 *= k;
            o.1 *= k;
        }
    }

    fn extent(&self) -> (f64, f64, f64, f64) {
        self.offsets.iter().fold(
            (
                f64::INFINITY,
                f64::NEG_INFINITY,
                f64::INFINITY,
                f64::NEG_INFINITY,
            ),
            |(x0, x1, y0, y1), &(x, y)| (x0.min(x), x1.max(x), y0.min(y), y1.max(y)),
        )
    }
}

/// Places a group of paths sharing one anchor so every box (`w`x`h`) stays
/// inside the image, shrinking the paths uniformly when they cannot fit.
fn place(
    paths: &mut [Path2],
    w: f64,
    h: f64,
    spec: &ScenarioSpec,
    rng: &mut ChaCha8Rng,
) -> (f64, f64) {
    let extent = |paths: &[Path2]| {
        paths.iter().map(Path2::extent).fold(
            (
                f64::INFINITY,
                f64::NEG_INFINITY,
                f64::INFINITY,
                f64::NEG_INFINITY,
            ),
            |a, b| (a.0.min(b.0), a.1.max(b.1), a.2.min(b.2), a.3.max(b.3)),
        )
    };
    let (x0, x1, y0, y1) = extent(paths);
    let (room_x, room_y) = (spec.image_w - w, spec.image_h - h);
    let k = [(x1 - x0, room_x), (y1 - y0, room_y)]
        .iter()
        .map(|&(span, room)| if span > room { room / span } else { 1.0 })
        .fold(1.0, f64::min);
    if k < 1.0 {
        for p in paths.iter_mut() {
            p.scale(k);
        }
    }
    let (x0, x1, y0, y1) = extent(paths);
    let lo_x = w / 2.0 - x0;
    let hi_x = (spec.image_w - w / 2.0 - x1).max(lo_x);
    let lo_y = h / 2.0 - y0;
    let hi_y = (spec.image_h - h / 2.0 - y1).max(lo_y);
    (rng.random_range(lo_x..=hi_x), rng.random_range(lo_y..=hi_y))
}

fn clipped_normal(rng: &mut ChaCha8Rng, mean: f64, std: f64) -> f64 {
    let v = if std > 0.0 {
        Normal::new(mean, std).expect("validated std").sample(rng)
    } else {
        mean
    };
    v.clamp(0.0, 1.0)
}

fn clamp_to_image(b: BBox, spec: &ScenarioSpec) -> BBox {
    let w = b.w.clamp(1.0, spec.image_w);
    let h = b.h.clamp(1.0, spec.image_h);
    BBox::new(
        b.x.clamp(0.0, spec.image_w - w),
        b.y.clamp(0.0, spec.image_h - h),
        w,
        h,
    )
}

/// Ground truth (ids `1..=n_targets`, frames `1..=n_frames`) and noisy detections.
/// Box size and center per frame of one target.
type TargetPath = ((f64, f64), Vec<(f64, f64)>);

pub fn generate(spec: &ScenarioSpec) -> Result<Scenario> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n_targets as usize;
    let frames = spec.n_frames;
    let mid = (frames as usize - 1) / 2;
    let turn_rate = match spec.motion {
        MotionModel::Linear => 0.0,
        _ => spec.turn_rate,
    };

    // (size, center per frame) per target
    let mut targets: Vec<TargetPath> = Vec::with_capacity(n);
    let mut i = 0;
    while i < n {
        let pair = spec.motion == MotionModel::Crossing && i + 1 < n;
        let group = if pair { 2 } else { 1 };
        let w = rng.random_range(spec.box_min..=spec.box_max);
        let h = rng.random_range(spec.box_min..=spec.box_max);
        let heading = rng.random_range(0.0..2.0 * PI);
        let mut paths = Vec::with_capacity(group);
        for k in 0..group {
            let speed = rng.random_range(spec.speed_min..=spec.speed_max);
            let sense = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let theta = if k == 0 {
                heading
            } else {
                heading + sense * rng.random_range(PI / 3.0..=PI)
            };
            let turn = if rng.random::<bool>() {
                turn_rate
            } else {
                -turn_rate
            };
            let anchor = if pair { mid } else { 0 };
            paths.push(Path2::new(frames, speed, theta, turn, anchor));
        }
        let (ax, ay) = place(&mut paths, w, h, spec, &mut rng);
        for p in paths {
            let centers = p
                .offsets
                .iter()
                .map(|&(dx, dy)| (ax + dx, ay + dy))
                .collect();
            targets.push(((w, h), centers));
        }
        i += group;
    }

    let mut gt = TrackSet::new();
    let mut dets = DetsByFrame::new();
    let jitter =
        (spec.noise_std > 0.0).then(|| Normal::new(0.0, spec.noise_std).expect("validated std"));
    let clutter =
        (spec.clutter_rate > 0.0).then(|| Poisson::new(spec.clutter_rate).expect("validated rate"));
    for t in 0..frames as usize {
        let frame = t as u32 + 1;
        let mut frame_dets = Vec::new();
        for (id, ((w, h), centers)) in targets.iter().enumerate() {
            let (cx, cy) = centers[t];
            let b = BBox::from_center(cx, cy, *w, *h);
            gt.push(frame, id as u32 + 1, b);
            if rng.random::<f64>() < spec.dropout {
                continue;
            }
            let noisy = match &jitter {
                Some(j) => clamp_to_image(
                    BBox::new(
                        b.x + j.sample(&mut rng),
                        b.y + j.sample(&mut rng),
                        b.w + j.sample(&mut rng),
                        b.h + j.sample(&mut rng),
                    ),
                    spec,
                ),
                None => b,
            };
            let score = if rng.random::<f64>() < spec.low_fraction {
                clipped_normal(&mut rng, spec.low_mean, spec.low_std)
            } else {
                clipped_normal(&mut rng, spec.score_mean, spec.score_std)
            };
            frame_dets.push(Detection::new(frame, noisy, score));
        }
        if let Some(c) = &clutter {
            let k = c.sample(&mut rng) as usize;
            for _ in 0..k {
                let w = rng.random_range(spec.box_min..=spec.box_max);
                let h = rng.random_range(spec.box_min..=spec.box_max);
                let x = rng.random_range(0.0..=spec.image_w - w);
                let y = rng.random_range(0.0..=spec.image_h - h);
                let score =
                    clipped_normal(&mut rng, spec.clutter_score_mean, spec.clutter_score_std);
                frame_dets.push(Detection::new(frame, BBox::new(x, y, w, h), score));
            }
        }
        frame_dets.shuffle(&mut rng);
        if !frame_dets.is_empty() {
            dets.insert(frame, frame_dets);
        }
    }
    Ok(Scenario { gt, dets })
}

/// Two targets whose paths cross at the middle frame.
pub fn crossing_pair(spec: &ScenarioSpec) -> Result<Scenario> {
    if spec.n_frames < 10 {
        return Err(Error::InvalidParameter(format!(
            "a crossing scenario needs at least 10 frames, got {}",
            spec.n_frames
        )));
    }
    generate(&ScenarioSpec {
        n_targets: 2,
        motion: MotionModel::Crossing,
        ..spec.clone()
    })
}

/// The fixed 20-scenario benchmark used for configuration ablations:
/// crossing pairs on turning paths, 10% dropout and injected low-score
/// detections. Seeds are `1..=20`.
pub fn benchmark_suite() -> Vec<ScenarioSpec> {
    (1..=20)
        .map(|seed| ScenarioSpec {
            n_targets: 12,
            n_frames: 120,
            image_w: 1280.0,
            image_h: 720.0,
            motion: MotionModel::Crossing,
            turn_rate: 0.05,
            box_min: 6.0,
            box_max: 16.0,
            speed_min: 1.0,
            speed_max: 4.0,
            noise_std: 1.0,
            dropout: 0.1,
            score_mean: 0.7,
            score_std: 0.15,
            low_fraction: 0.15,
            low_mean: 0.18,
            low_std: 0.03,
            clutter_rate: 0.0,
            clutter_score_mean: 0.2,
            clutter_score_std: 0.1,
            seed,
        })
        .collect()
}
