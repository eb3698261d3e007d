//! Flat `key = value` run configuration (TOML syntax, top-level keys only).
//!
//! Values are layered: built-in defaults, then a config file, then explicit
//! command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::association::AssociationConfig;
use crate::error::{Error, Result};
use crate::slicing::SliceParams;

/// One layer of settings; `None` leaves the lower layer's value in place.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigLayer {
    pub match_threshold: Option<f64>,
    pub stage_decrement: Option<f64>,
    pub min_hits: Option<u32>,
    pub max_age: Option<u32>,
    pub threshold_high: Option<f64>,
    pub threshold_low: Option<f64>,
    pub expansion_scale: Option<f64>,
    pub use_expansion: Option<bool>,
    pub use_distance_penalty: Option<bool>,
    pub ema_alpha: Option<f64>,
    pub direction_cost_weight: Option<f64>,
    pub std_weight_position: Option<f64>,
    pub std_weight_velocity: Option<f64>,
    pub init_weight_velocity: Option<f64>,
    pub tile: Option<u32>,
    pub overlap: Option<f64>,
    pub min_visibility: Option<f64>,
    pub s_norm: Option<f64>,
    pub dets: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub gt: Option<PathBuf>,
    pub pred: Option<PathBuf>,
    pub images: Option<PathBuf>,
    pub ann: Option<PathBuf>,
    pub spec: Option<PathBuf>,
}

impl ConfigLayer {
    pub fn from_toml_str(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
                .unwrap_or(0);
            Error::Parse {
                path: path.to_path_buf(),
                line,
                message: e.message().to_string(),
            }
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Paths {
    pub dets: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub gt: Option<PathBuf>,
    pub pred: Option<PathBuf>,
    pub images: Option<PathBuf>,
    pub ann: Option<PathBuf>,
    pub spec: Option<PathBuf>,
}

/// Fully resolved settings for one CLI run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    pub association: AssociationConfig,
    pub slicing: SliceParams,
    /// DotD normalizer; `None` derives it from the ground truth.
    pub s_norm: Option<f64>,
    pub paths: Paths,
}

fn set<T: Clone>(dst: &mut T, src: &Option<T>) {
    if let Some(v) = src {
        *dst = v.clone();
    }
}

fn set_opt<T: Clone>(dst: &mut Option<T>, src: &Option<T>) {
    if src.is_some() {
        *dst = src.clone();
    }
}

impl RunConfig {
    pub fn apply(&mut self, layer: &ConfigLayer) {
        let a = &mut self.association;
        set(&mut a.match_threshold, &layer.match_threshold);
        set(&mut a.stage_decrement, &layer.stage_decrement);
        set(&mut a.min_hits, &layer.min_hits);
        set(&mut a.max_age, &layer.max_age);
        set(&mut a.bands.threshold_high, &layer.threshold_high);
        set(&mut a.bands.threshold_low, &layer.threshold_low);
        set(&mut a.sim.expansion_scale, &layer.expansion_scale);
        set(&mut a.sim.use_expansion, &layer.use_expansion);
        set(&mut a.sim.use_distance_penalty, &layer.use_distance_penalty);
        set(&mut a.motion.ema_alpha, &layer.ema_alpha);
        set(
            &mut a.motion.direction_cost_weight,
            &layer.direction_cost_weight,
        );
        set(
            &mut a.motion.noise.std_weight_position,
            &layer.std_weight_position,
        );
        set(
            &mut a.motion.noise.std_weight_velocity,
            &layer.std_weight_velocity,
        );
        set(
            &mut a.motion.noise.init_weight_velocity,
            &layer.init_weight_velocity,
        );
        set(&mut self.slicing.tile, &layer.tile);
        set(&mut self.slicing.overlap, &layer.overlap);
        set(&mut self.slicing.min_visibility, &layer.min_visibility);
        set_opt(&mut self.s_norm, &layer.s_norm);
        let p = &mut self.paths;
        set_opt(&mut p.dets, &layer.dets);
        set_opt(&mut p.out, &layer.out);
        set_opt(&mut p.gt, &layer.gt);
        set_opt(&mut p.pred, &layer.pred);
        set_opt(&mut p.images, &layer.images);
        set_opt(&mut p.ann, &layer.ann);
        set_opt(&mut p.spec, &layer.spec);
    }

    /// Defaults, overridden by `file`, overridden by `flags`; then validated.
    pub fn resolve(file: Option<&ConfigLayer>, flags: &ConfigLayer) -> Result<Self> {
        let mut cfg = RunConfig::default();
        if let Some(file) = file {
            cfg.apply(file);
        }
        cfg.apply(flags);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.association.validate()?;
        self.slicing.validate()?;
        if let Some(s) = self.s_norm {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "s_norm must be positive, got {s}"
                )));
            }
        }
        Ok(())
    }
}
