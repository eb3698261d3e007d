//! Ground-truth motion statistics: velocity-ratio stability, inter-frame
//! displacement relative to box size, and the four-way similarity percentile
//! study.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{center_distance, similarity, BBox, SimilarityConfig};
use crate::trackset::TrackSet;

/// Pairs moving less than this fraction of the shorter box side count as still.
pub const STILL_FRACTION: f64 = 0.3;

/// Velocity ratios within this closed band count as near-uniform motion.
pub const UNIFORM_BAND: (f64, f64) = (0.8, 1.2);

/// Reference speeds below this (px/frame) make the ratio undefined.
pub const MIN_REFERENCE_SPEED: f64 = 1e-6;

pub const PERCENTILES: [u32; 5] = [10, 30, 50, 70, 90];

/// Fixed-width histogram starting at zero, `bins_per_unit` bins per unit of value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub bins_per_unit: u32,
    pub counts: Vec<usize>,
    /// Values at or beyond the last bin edge.
    pub overflow: usize,
}

impl Histogram {
    pub fn new(bins_per_unit: u32, bins: usize) -> Self {
        Histogram {
            bins_per_unit,
            counts: vec![0; bins],
            overflow: 0,
        }
    }

    pub fn bin_width(&self) -> f64 {
        1.0 / self.bins_per_unit as f64
    }

    pub fn add(&mut self, value: f64) {
        let idx = (value * self.bins_per_unit as f64).floor();
        if idx >= 0.0 && (idx as usize) < self.counts.len() {
            self.counts[idx as usize] += 1;
        } else {
            self.overflow += 1;
        }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum::<usize>() + self.overflow
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VelocityRatioReport {
    pub window: usize,
    pub samples: usize,
    pub in_range: usize,
    /// Samples whose reference speed was (near) zero.
    pub excluded: usize,
    pub fraction_in_range: f64,
    pub histogram: Histogram,
}

/// Runs of strictly consecutive frames for every identity.
fn consecutive_runs(gt: &TrackSet) -> Vec<Vec<BBox>> {
    let mut runs = Vec::new();
    for (_, obs) in gt.trajectories() {
        let mut run: Vec<BBox> = Vec::new();
        let mut prev_frame = None;
        for (frame, b) in obs {
            if prev_frame.is_some_and(|p: u32| frame != p + 1) {
                runs.push(std::mem::take(&mut run));
            }
            run.push(b);
            prev_frame = Some(frame);
        }
        runs.push(run);
    }
    runs.retain(|r| r.len() >= 2);
    runs
}

/// Ratio of the current speed to the mean speed over the `window` preceding
/// inter-frame steps, for every position with enough history.
pub fn velocity_ratios(gt: &TrackSet, window: usize) -> Result<VelocityRatioReport> {
    if window == 0 {
        return Err(Error::InvalidParameter(
            "velocity window must be >= 1".into(),
        ));
    }
    let mut report = VelocityRatioReport {
        window,
        samples: 0,
        in_range: 0,
        excluded: 0,
        fraction_in_range: 0.0,
        histogram: Histogram::new(10, 30),
    };
    for run in consecutive_runs(gt) {
        let speeds: Vec<f64> = run
            .windows(2)
            .map(|w| center_distance(&w[0], &w[1]))
            .collect();
        for t in window..speeds.len() {
            let reference = speeds[t - window..t].iter().sum::<f64>() / window as f64;
            if reference < MIN_REFERENCE_SPEED {
                report.excluded += 1;
                continue;
            }
            let ratio = speeds[t] / reference;
            report.samples += 1;
            report.histogram.add(ratio);
            if (UNIFORM_BAND.0..=UNIFORM_BAND.1).contains(&ratio) {
                report.in_range += 1;
            }
        }
    }
    if report.samples > 0 {
        report.fraction_in_range = report.in_range as f64 / report.samples as f64;
    }
    Ok(report)
}

/// True when the in-range fraction never grows with the window length.
pub fn fractions_non_increasing(reports: &[VelocityRatioReport]) -> bool {
    reports
        .windows(2)
        .all(|w| w[1].fraction_in_range <= w[0].fraction_in_range)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DisplacementReport {
    /// `(|dcx| / w, |dcy| / h)` for every moving pair.
    pub ratios: Vec<(f64, f64)>,
    pub horizontal: Histogram,
    pub vertical: Histogram,
    pub still: usize,
}

impl DisplacementReport {
    /// Share of moving pairs whose displacement stays within `k` box sizes on both axes.
    pub fn fraction_within(&self, k: f64) -> f64 {
        if self.ratios.is_empty() {
            return 0.0;
        }
        let n = self
            .ratios
            .iter()
            .filter(|(x, y)| *x <= k && *y <= k)
            .count();
        n as f64 / self.ratios.len() as f64
    }
}

fn is_still(prev: &BBox, next: &BBox) -> bool {
    center_distance(prev, next) < STILL_FRACTION * prev.w.min(prev.h)
}

/// Consecutive-frame box pairs of the same identity.
fn consecutive_pairs(gt: &TrackSet) -> impl Iterator<Item = (BBox, BBox)> {
    consecutive_runs(gt)
        .into_iter()
        .flat_map(|run| run.windows(2).map(|w| (w[0], w[1])).collect::<Vec<_>>())
}

pub fn displacement_size_ratios(gt: &TrackSet) -> DisplacementReport {
    let mut report = DisplacementReport {
        ratios: Vec::new(),
        horizontal: Histogram::new(4, 20),
        vertical: Histogram::new(4, 20),
        still: 0,
    };
    for (prev, next) in consecutive_pairs(gt) {
        if is_still(&prev, &next) {
            report.still += 1;
            continue;
        }
        let (pcx, pcy) = prev.center();
        let (ncx, ncy) = next.center();
        let rx = (ncx - pcx).abs() / prev.w;
        let ry = (ncy - pcy).abs() / prev.h;
        report.horizontal.add(rx);
        report.vertical.add(ry);
        report.ratios.push((rx, ry));
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DisplacementFilter {
    /// Only pairs moving less than the still threshold.
    KeepLow,
    /// Only pairs moving at least the still threshold.
    DropLow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum IouMethod {
    Default,
    Expansion,
    Distance,
    Both,
}

impl IouMethod {
    pub const ALL: [IouMethod; 4] = [
        IouMethod::Default,
        IouMethod::Expansion,
        IouMethod::Distance,
        IouMethod::Both,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            IouMethod::Default => "default",
            IouMethod::Expansion => "expansion",
            IouMethod::Distance => "distance",
            IouMethod::Both => "both",
        }
    }

    pub fn config(&self, scale: f64) -> SimilarityConfig {
        let (use_expansion, use_distance_penalty) = match self {
            IouMethod::Default => (false, false),
            IouMethod::Expansion => (true, false),
            IouMethod::Distance => (false, true),
            IouMethod::Both => (true, true),
        };
        SimilarityConfig {
            expansion_scale: scale,
            use_expansion,
            use_distance_penalty,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IoUPercentileReport {
    pub samples: usize,
    /// Values at [`PERCENTILES`] for each method, in [`IouMethod::ALL`] order.
    pub methods: Vec<(IouMethod, [f64; 5])>,
}

impl IoUPercentileReport {
    pub fn get(&self, method: IouMethod) -> [f64; 5] {
        self.methods
            .iter()
            .find(|(m, _)| *m == method)
            .map(|(_, v)| *v)
            .expect("all methods present")
    }
}

/// Nearest-rank percentile of an ascending slice.
pub fn nearest_rank(sorted: &[f64], pct: u32) -> f64 {
    let n = sorted.len();
    let rank = ((pct as f64 / 100.0) * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Percentiles of the four similarity variants over consecutive gt pairs.
/// The expansion scale comes from `cfg`; its toggles are ignored.
pub fn iou_method_percentiles(
    gt: &TrackSet,
    cfg: &SimilarityConfig,
    filter: DisplacementFilter,
) -> Result<IoUPercentileReport> {
    let pairs: Vec<(BBox, BBox)> = consecutive_pairs(gt)
        .filter(|(p, n)| match filter {
            DisplacementFilter::KeepLow => is_still(p, n),
            DisplacementFilter::DropLow => !is_still(p, n),
        })
        .collect();
    if pairs.len() < 10 {
        return Err(Error::Validation(format!(
            "need at least 10 box pairs for percentiles, found {}",
            pairs.len()
        )));
    }
    let methods = IouMethod::ALL
        .iter()
        .map(|m| {
            let c = m.config(cfg.expansion_scale);
            let mut scores: Vec<f64> = pairs.iter().map(|(a, b)| similarity(a, b, &c)).collect();
            scores.sort_by(f64::total_cmp);
            (*m, PERCENTILES.map(|p| nearest_rank(&scores, p)))
        })
        .collect();
    Ok(IoUPercentileReport {
        samples: pairs.len(),
        methods,
    })
}
