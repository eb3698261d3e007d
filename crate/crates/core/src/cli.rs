//! Command-line front end.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analysis::{
    displacement_size_ratios, iou_method_percentiles, velocity_ratios, DisplacementFilter,
    Histogram, IouMethod, PERCENTILES,
};
use crate::association::run_sequence;
use crate::error::{Error, Result};
use crate::eval::{aggregate, compute_s_norm, evaluate, SequenceEval};
use crate::io::{
    discover_gt, parse_mot_dets, parse_mot_tracks, write_mot_dets, write_mot_tracks, CocoDataset,
    ConfigLayer, RunConfig,
};
use crate::sim::{generate, ScenarioSpec};
use crate::slicing::{slice_dataset, Transform};
use crate::trackset::TrackSet;

pub const THREADS_ENV: &str = "SMOTKIT_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "smotkit",
    version,
    about = "Small multi-object tracking toolkit"
)]
struct Cli {
    /// Flat key = value settings file; explicit flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Track MOT-format detections.
    Track(TrackArgs),
    /// Cut a COCO dataset into overlapping tiles.
    Slice(SliceArgs),
    /// Score predictions against ground truth (DotD-based HOTA).
    Eval(EvalArgs),
    /// Ground-truth motion statistics.
    Analyze(AnalyzeArgs),
    /// Generate a synthetic scenario.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args, Default)]
struct AssocFlags {
    #[arg(long)]
    match_threshold: Option<f64>,
    #[arg(long)]
    stage_decrement: Option<f64>,
    #[arg(long)]
    min_hits: Option<u32>,
    #[arg(long)]
    max_age: Option<u32>,
    #[arg(long)]
    threshold_high: Option<f64>,
    #[arg(long)]
    threshold_low: Option<f64>,
    #[arg(long)]
    expansion_scale: Option<f64>,
    #[arg(long, value_name = "BOOL")]
    use_expansion: Option<bool>,
    #[arg(long, value_name = "BOOL")]
    use_distance_penalty: Option<bool>,
    #[arg(long)]
    ema_alpha: Option<f64>,
    #[arg(long)]
    direction_cost_weight: Option<f64>,
}

#[derive(Debug, Args)]
struct TrackArgs {
    /// Detections, `frame,-1,x,y,w,h,score,...` per line.
    #[arg(long)]
    dets: Option<PathBuf>,
    /// Output track file.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    assoc: AssocFlags,
}

#[derive(Debug, Args)]
struct SliceArgs {
    #[arg(long)]
    images: Option<PathBuf>,
    /// COCO annotation JSON.
    #[arg(long)]
    ann: Option<PathBuf>,
    #[arg(long)]
    tile: Option<u32>,
    #[arg(long)]
    overlap: Option<f64>,
    #[arg(long)]
    min_visibility: Option<f64>,
    /// Tile transform: none or horizontal_flip.
    #[arg(long, default_value = "none")]
    augment: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Ground-truth file, or a directory of `<seq>/gt/gt.txt` or `<seq>.txt`.
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Prediction file, or a directory of `<seq>.txt`.
    #[arg(long)]
    pred: Option<PathBuf>,
    /// DotD normalizer in pixels; defaults to the mean sqrt(w*h) of the ground truth.
    #[arg(long)]
    s_norm: Option<f64>,
    /// Also write the scores as CSV to this file (otherwise CSV goes to stdout after the table).
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[command(subcommand)]
    kind: AnalyzeKind,
}

#[derive(Debug, Subcommand)]
enum AnalyzeKind {
    /// Share of speeds within [0.8, 1.2] of the mean of the previous N.
    Velocity {
        #[arg(long)]
        gt: Option<PathBuf>,
        /// A window `N` or an inclusive range `A..B`.
        #[arg(long, default_value = "1..5")]
        window: String,
        /// CSV destination (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write per-window ratio histograms as CSV.
        #[arg(long)]
        histogram_out: Option<PathBuf>,
    },
    /// Histograms of displacement over box size.
    Displacement {
        #[arg(long)]
        gt: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Percentiles of four similarity variants over consecutive boxes.
    IouMethods {
        #[arg(long)]
        gt: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = FilterArg::KeepLow)]
        filter: FilterArg,
        #[arg(long)]
        expansion_scale: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FilterArg {
    KeepLow,
    DropLow,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Scenario file (`key = value`); unspecified keys use defaults.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Output directory; receives `gt/gt.txt` and `det/det.txt`.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl AssocFlags {
    fn layer(&self) -> ConfigLayer {
        ConfigLayer {
            match_threshold: self.match_threshold,
            stage_decrement: self.stage_decrement,
            min_hits: self.min_hits,
            max_age: self.max_age,
            threshold_high: self.threshold_high,
            threshold_low: self.threshold_low,
            expansion_scale: self.expansion_scale,
            use_expansion: self.use_expansion,
            use_distance_penalty: self.use_distance_penalty,
            ema_alpha: self.ema_alpha,
            direction_cost_weight: self.direction_cost_weight,
            ..Default::default()
        }
    }
}

impl Command {
    fn layer(&self) -> ConfigLayer {
        match self {
            Command::Track(a) => ConfigLayer {
                dets: a.dets.clone(),
                out: a.out.clone(),
                ..a.assoc.layer()
            },
            Command::Slice(a) => ConfigLayer {
                images: a.images.clone(),
                ann: a.ann.clone(),
                tile: a.tile,
                overlap: a.overlap,
                min_visibility: a.min_visibility,
                out: a.out.clone(),
                ..Default::default()
            },
            Command::Eval(a) => ConfigLayer {
                gt: a.gt.clone(),
                pred: a.pred.clone(),
                s_norm: a.s_norm,
                ..Default::default()
            },
            Command::Analyze(a) => match &a.kind {
                AnalyzeKind::Velocity { gt, .. } | AnalyzeKind::Displacement { gt, .. } => {
                    ConfigLayer {
                        gt: gt.clone(),
                        ..Default::default()
                    }
                }
                AnalyzeKind::IouMethods {
                    gt,
                    expansion_scale,
                    ..
                } => ConfigLayer {
                    gt: gt.clone(),
                    expansion_scale: *expansion_scale,
                    ..Default::default()
                },
            },
            Command::Simulate(a) => ConfigLayer {
                spec: a.spec.clone(),
                out: a.out.clone(),
                ..Default::default()
            },
        }
    }
}

/// Exit status for a failed run: 2 for filesystem/image I/O, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_io() {
        2
    } else {
        1
    }
}

fn required<'a>(value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    value
        .as_deref()
        .ok_or_else(|| Error::Validation(format!("missing required --{flag} (flag or config key)")))
}

fn emit(text: &str, dest: Option<&Path>, stdout: &mut dyn Write) -> Result<()> {
    match dest {
        Some(path) => crate::io::mot::write_file(path, text),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

/// Ground-truth sequences from a file or a MOTChallenge-style directory.
fn load_gt(path: &Path) -> Result<Vec<(String, TrackSet)>> {
    if path.is_dir() {
        let seqs = discover_gt(path)?;
        if seqs.is_empty() {
            return Err(Error::Validation(format!(
                "no ground-truth sequences under {}",
                path.display()
            )));
        }
        seqs.into_iter()
            .map(|(name, p)| Ok((name, parse_mot_tracks(&p)?.value)))
            .collect()
    } else {
        let name = path
            .file_stem()
            .unwrap_or_default()
            .to_string_lossy()
            .into_owned();
        Ok(vec![(name, parse_mot_tracks(path)?.value)])
    }
}

/// Joins sequences into one set with disjoint identities.
fn merge(seqs: &[(String, TrackSet)]) -> TrackSet {
    let mut merged = TrackSet::new();
    let mut base = 0u32;
    for (_, set) in seqs {
        let mut max_id = 0;
        for r in set.to_records() {
            max_id = max_id.max(r.id);
            merged.push(r.frame, base + r.id, r.bbox);
        }
        base += max_id + 1;
    }
    merged
}

fn parse_windows(spec: &str) -> Result<Vec<usize>> {
    let bad = || {
        Error::Validation(format!(
            "--window expects N or A..B with 1 <= A <= B, got {spec:?}"
        ))
    };
    let (lo, hi) = match spec.split_once("..") {
        Some((a, b)) => (
            a.trim().parse().map_err(|_| bad())?,
            b.trim().parse().map_err(|_| bad())?,
        ),
        None => {
            let n = spec.trim().parse().map_err(|_| bad())?;
            (n, n)
        }
    };
    if lo == 0 || lo > hi {
        return Err(bad());
    }
    Ok((lo..=hi).collect())
}

fn histogram_rows(out: &mut String, label: &str, h: &Histogram) {
    let width = h.bin_width();
    for (i, c) in h.counts.iter().enumerate() {
        let _ = writeln!(
            out,
            "{label},{:.4},{:.4},{c}",
            i as f64 * width,
            (i + 1) as f64 * width
        );
    }
    let _ = writeln!(
        out,
        "{label},{:.4},inf,{}",
        h.counts.len() as f64 * width,
        h.overflow
    );
}

fn cmd_track(cfg: &RunConfig) -> Result<()> {
    let dets_path = required(&cfg.paths.dets, "dets")?;
    let out_path = required(&cfg.paths.out, "out")?;
    let parsed = parse_mot_dets(dets_path)?;
    if !parsed.rejected.is_empty() {
        log::warn!(
            "{}: skipped {} malformed rows",
            dets_path.display(),
            parsed.rejected.len()
        );
    }
    let records = run_sequence(parsed.value, &cfg.association)?;
    log::info!("{} track rows", records.len());
    write_mot_tracks(&records, out_path)
}

fn cmd_slice(cfg: &RunConfig, augment: &str, stdout: &mut dyn Write) -> Result<()> {
    let transform: Transform = augment.parse()?;
    let images = required(&cfg.paths.images, "images")?;
    let ann = required(&cfg.paths.ann, "ann")?;
    let out = required(&cfg.paths.out, "out")?;
    let coco = CocoDataset::read(ann)?;
    let summary = slice_dataset(images, &coco, &cfg.slicing, &transform, out)?;
    let _ = writeln!(
        stdout,
        "{} tiles, {} annotations from {} images",
        summary.dataset.images.len(),
        summary.dataset.annotations.len(),
        coco.images.len() - summary.errors.len()
    );
    if let Some(first) = summary.errors.first() {
        return Err(Error::Io {
            path: first.path.clone(),
            source: std::io::Error::other(format!(
                "{} of {} images could not be sliced (first: {})",
                summary.errors.len(),
                coco.images.len(),
                first.message
            )),
        });
    }
    Ok(())
}

fn score_row(name: &str, e: &SequenceEval) -> (String, String) {
    (
        format!(
            "{name},{:.3},{:.3},{:.3}\n",
            e.so_hota, e.so_det_a, e.so_ass_a
        ),
        format!(
            "{name:<24} {:>8.3} {:>8.3} {:>8.3}\n",
            e.so_hota, e.so_det_a, e.so_ass_a
        ),
    )
}

fn cmd_eval(cfg: &RunConfig, csv_path: Option<&Path>, stdout: &mut dyn Write) -> Result<()> {
    let gt_path = required(&cfg.paths.gt, "gt")?;
    let pred_path = required(&cfg.paths.pred, "pred")?;
    let gts = load_gt(gt_path)?;
    let s_norm = match cfg.s_norm {
        Some(s) => s,
        None => compute_s_norm(&merge(&gts))?,
    };
    log::info!("s_norm = {s_norm:.4}");
    let mut evals = Vec::with_capacity(gts.len());
    for (name, gt) in &gts {
        let pred_file = if pred_path.is_dir() {
            pred_path.join(format!("{name}.txt"))
        } else {
            pred_path.to_path_buf()
        };
        let pred = parse_mot_tracks(&pred_file)?.value;
        evals.push((name.clone(), evaluate(gt, &pred, s_norm)?));
    }
    let combined = aggregate(&evals.iter().map(|(_, e)| e.clone()).collect::<Vec<_>>())?;

    let mut csv = String::from("sequence,so_hota,so_deta,so_assa\n");
    let mut table = format!(
        "{:<24} {:>8} {:>8} {:>8}\n",
        "sequence", "SO-HOTA", "SO-DetA", "SO-AssA"
    );
    for (name, e) in evals
        .iter()
        .map(|(n, e)| (n.as_str(), e))
        .chain([("COMBINED", &combined)])
    {
        let (c, t) = score_row(name, e);
        csv += &c;
        table += &t;
    }
    emit(&table, None, stdout)?;
    match csv_path {
        Some(p) => emit(&csv, Some(p), stdout),
        None => emit(&format!("\n{csv}"), None, stdout),
    }
}

fn cmd_analyze(kind: &AnalyzeKind, cfg: &RunConfig, stdout: &mut dyn Write) -> Result<()> {
    let gt = merge(&load_gt(required(&cfg.paths.gt, "gt")?)?);
    match kind {
        AnalyzeKind::Velocity {
            window,
            out,
            histogram_out,
            ..
        } => {
            let mut csv = String::from("window,samples,in_range,excluded,percent_in_range\n");
            let mut hist = String::from("window,bin_lo,bin_hi,count\n");
            for n in parse_windows(window)? {
                let r = velocity_ratios(&gt, n)?;
                let _ = writeln!(
                    csv,
                    "{n},{},{},{},{:.2}",
                    r.samples,
                    r.in_range,
                    r.excluded,
                    100.0 * r.fraction_in_range
                );
                histogram_rows(&mut hist, &n.to_string(), &r.histogram);
            }
            if let Some(p) = histogram_out {
                emit(&hist, Some(p), stdout)?;
            }
            emit(&csv, out.as_deref(), stdout)
        }
        AnalyzeKind::Displacement { out, .. } => {
            let r = displacement_size_ratios(&gt);
            let mut csv = String::from("axis,bin_lo,bin_hi,count\n");
            histogram_rows(&mut csv, "x", &r.horizontal);
            histogram_rows(&mut csv, "y", &r.vertical);
            let _ = writeln!(csv, "still,,,{}", r.still);
            emit(&csv, out.as_deref(), stdout)
        }
        AnalyzeKind::IouMethods { filter, out, .. } => {
            let filter = match filter {
                FilterArg::KeepLow => DisplacementFilter::KeepLow,
                FilterArg::DropLow => DisplacementFilter::DropLow,
            };
            let r = iou_method_percentiles(&gt, &cfg.association.sim, filter)?;
            let mut csv = String::from("percentile");
            for m in IouMethod::ALL {
                csv += ",";
                csv += m.name();
            }
            csv += "\n";
            for (i, p) in PERCENTILES.iter().enumerate() {
                let _ = write!(csv, "{p}");
                for m in IouMethod::ALL {
                    let _ = write!(csv, ",{:.3}", r.get(m)[i]);
                }
                csv += "\n";
            }
            emit(&csv, out.as_deref(), stdout)
        }
    }
}

fn cmd_simulate(cfg: &RunConfig) -> Result<()> {
    let spec = ScenarioSpec::read(required(&cfg.paths.spec, "spec")?)?;
    let out = required(&cfg.paths.out, "out")?;
    let s = generate(&spec)?;
    write_mot_tracks(&s.gt.to_records(), &out.join("gt").join("gt.txt"))?;
    write_mot_dets(&s.dets, &out.join("det").join("det.txt"))
}

fn dispatch(cli: Cli, stdout: &mut dyn Write) -> Result<()> {
    let file = cli.config.as_deref().map(ConfigLayer::read).transpose()?;
    let cfg = RunConfig::resolve(file.as_ref(), &cli.command.layer())?;
    match &cli.command {
        Command::Track(_) => cmd_track(&cfg),
        Command::Slice(a) => cmd_slice(&cfg, &a.augment, stdout),
        Command::Eval(a) => cmd_eval(&cfg, a.csv.as_deref(), stdout),
        Command::Analyze(a) => cmd_analyze(&a.kind, &cfg, stdout),
        Command::Simulate(_) => cmd_simulate(&cfg),
    }
}

fn thread_cap() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(Error::InvalidParameter(format!(
                "{THREADS_ENV} must be a positive integer, got {v:?}"
            ))),
        },
    }
}

/// Runs the CLI and returns the process exit status.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                stdout.write_all(text.as_bytes())
            } else {
                stderr.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .try_init();

    let mut buf: Vec<u8> = Vec::new();
    let result = thread_cap().and_then(|cap| match cap {
        None => dispatch(cli, &mut buf),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("cannot build thread pool: {e}")))?
            .install(|| dispatch(cli, &mut buf)),
    });
    let _ = stdout.write_all(&buf);
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}
