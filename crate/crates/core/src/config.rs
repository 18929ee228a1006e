//! Flat `key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored; unknown keys are errors so that
//! typos never silently fall back to defaults. Later assignments win, which is
//! how command-line overrides are layered on top of a file.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::trainer::{BatchTargets, TrainConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    #[default]
    F64,
    F32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TrainMode {
    #[default]
    Full,
    Mini,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub mode: TrainMode,
    pub precision: Precision,
    /// Dataset directory.
    pub data: Option<PathBuf>,
    /// Output directory for metrics and artifacts.
    pub out: Option<PathBuf>,
    /// Seed for the default split when the dataset has no split file.
    pub split_seed: u64,
    /// Tolerance of the converged evaluation.
    pub fixed_point_tol: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            mode: TrainMode::Full,
            precision: Precision::F64,
            data: None,
            out: None,
            split_seed: 0,
            fixed_point_tol: 1e-6,
        }
    }
}

/// Every accepted key, in the order [`RunConfig::to_text`] writes them.
pub const KEYS: &[&str] = &[
    "mode",
    "precision",
    "data",
    "out",
    "split_seed",
    "epochs",
    "batch_size",
    "batch_targets",
    "lr",
    "weight_decay",
    "dropout",
    "seed",
    "hidden",
    "alpha",
    "beta",
    "gamma",
    "layers",
    "inference_layers",
    "eval_every",
    "probe_size",
    "fixed_point_tol",
];

fn num<V: FromStr>(key: &str, value: &str) -> Result<V> {
    value.parse().map_err(|_| Error::Config(format!("invalid value {value:?} for `{key}`")))
}

impl RunConfig {
    /// Reads a config file on top of the defaults.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) =
                line.split_once('=').ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            self.set(k.trim(), v.trim()).map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let t = &mut self.train;
        match key {
            "mode" => {
                self.mode = match value {
                    "full" => TrainMode::Full,
                    "mini" => TrainMode::Mini,
                    _ => return Err(Error::Config(format!("mode must be `full` or `mini`, got {value:?}"))),
                }
            }
            "precision" => {
                self.precision = match value {
                    "f64" | "64" => Precision::F64,
                    "f32" | "32" => Precision::F32,
                    _ => return Err(Error::Config(format!("precision must be `f64` or `f32`, got {value:?}"))),
                }
            }
            "data" => self.data = (!value.is_empty()).then(|| PathBuf::from(value)),
            "out" => self.out = (!value.is_empty()).then(|| PathBuf::from(value)),
            "split_seed" => self.split_seed = num(key, value)?,
            "epochs" => t.epochs = num(key, value)?,
            "batch_size" => t.batch_size = num(key, value)?,
            "batch_targets" => {
                t.batch_targets = match value {
                    "train" => BatchTargets::Train,
                    "all" => BatchTargets::All,
                    _ => return Err(Error::Config(format!("batch_targets must be `train` or `all`, got {value:?}"))),
                }
            }
            "lr" => t.lr = num(key, value)?,
            "weight_decay" => t.weight_decay = num(key, value)?,
            "dropout" => t.dropout = num(key, value)?,
            "seed" => t.seed = num(key, value)?,
            "hidden" => {
                t.hidden = if value.is_empty() {
                    Vec::new()
                } else {
                    value.split(',').map(|s| num(key, s.trim())).collect::<Result<_>>()?
                }
            }
            "alpha" => t.hp.alpha = num(key, value)?,
            "beta" => t.hp.beta = num(key, value)?,
            "gamma" => t.hp.gamma = num(key, value)?,
            "layers" => t.hp.layers = num(key, value)?,
            "inference_layers" => t.inference_layers = if value == "auto" { None } else { Some(num(key, value)?) },
            "eval_every" => t.eval_every = num(key, value)?,
            "probe_size" => t.probe_size = num(key, value)?,
            "fixed_point_tol" => self.fixed_point_tol = num(key, value)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.mode == TrainMode::Mini && self.train.batch_size == 0 {
            return Err(Error::Config("mode = mini needs batch_size >= 1".into()));
        }
        if self.fixed_point_tol.is_nan() || self.fixed_point_tol <= 0.0 {
            return Err(Error::Config("fixed_point_tol must be positive".into()));
        }
        Ok(())
    }

    /// The fully resolved configuration in the same `key = value` format.
    pub fn to_text(&self) -> String {
        let t = &self.train;
        let mut s = String::new();
        let path = |p: &Option<PathBuf>| p.as_ref().map_or(String::new(), |p| p.display().to_string());
        for &key in KEYS {
            let value = match key {
                "mode" => match self.mode {
                    TrainMode::Full => "full".into(),
                    TrainMode::Mini => "mini".into(),
                },
                "precision" => match self.precision {
                    Precision::F64 => "f64".into(),
                    Precision::F32 => "f32".into(),
                },
                "data" => path(&self.data),
                "out" => path(&self.out),
                "split_seed" => self.split_seed.to_string(),
                "epochs" => t.epochs.to_string(),
                "batch_size" => t.batch_size.to_string(),
                "batch_targets" => match t.batch_targets {
                    BatchTargets::Train => "train".into(),
                    BatchTargets::All => "all".into(),
                },
                "lr" => format!("{:?}", t.lr),
                "weight_decay" => format!("{:?}", t.weight_decay),
                "dropout" => format!("{:?}", t.dropout),
                "seed" => t.seed.to_string(),
                "hidden" => t.hidden.iter().map(|h| h.to_string()).collect::<Vec<_>>().join(","),
                "alpha" => format!("{:?}", t.hp.alpha),
                "beta" => format!("{:?}", t.hp.beta),
                "gamma" => format!("{:?}", t.hp.gamma),
                "layers" => t.hp.layers.to_string(),
                "inference_layers" => t.inference_layers.map_or("auto".into(), |l| l.to_string()),
                "eval_every" => t.eval_every.to_string(),
                "probe_size" => t.probe_size.to_string(),
                "fixed_point_tol" => format!("{:?}", self.fixed_point_tol),
                _ => unreachable!("every key in KEYS is rendered"),
            };
            let _ = writeln!(s, "{key} = {value}");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_overrides() {
        let mut cfg = RunConfig::default();
        cfg.apply_text("# comment\nepochs = 7\nbeta=0.25 # trailing\n\nhidden = 32, 16\nmode = mini\nbatch_size = 8\n")
            .unwrap();
        assert_eq!(cfg.train.epochs, 7);
        assert_eq!(cfg.train.hp.beta, 0.25);
        assert_eq!(cfg.train.hidden, vec![32, 16]);
        assert_eq!(cfg.mode, TrainMode::Mini);
        cfg.set("epochs", "9").unwrap();
        assert_eq!(cfg.train.epochs, 9);
        cfg.validate().unwrap();
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        let mut cfg = RunConfig::default();
        assert!(cfg.apply_text("epoch = 3").is_err());
        assert!(cfg.apply_text("epochs 3").is_err());
        assert!(cfg.apply_text("lr = fast").is_err());
        assert!(RunConfig::from_file(Path::new("/nonexistent/run.cfg")).is_err());
    }

    #[test]
    fn resolved_text_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.apply_text("lr = 0.003\nprecision = f32\ninference_layers = 5\ndata = /tmp/d\nhidden =").unwrap();
        let mut back = RunConfig::default();
        back.apply_text(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
    }
}
