use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::model::{DEFAULT_EMBED_DIM, DEFAULT_HIDDEN_DIM};
use crate::numeric::Precision;

/// Which teacher-forced passes the coverage penalty is applied to.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoverageMode {
    /// Average of the content and style passes.
    #[default]
    Both,
    Content,
    Style,
}

/// What the coverage penalty aggregates per record slot.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CopyMass {
    /// The copy distribution itself, `Σ_t P_x[t][j]`.
    #[default]
    Distribution,
    /// Copy probability after the gate, `Σ_t (1 - g_t) P_x[t][j]`: the
    /// expected number of times slot `j` is copied.
    Gated,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Pretrain,
    Full,
}

/// Weights of one loss evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    /// Share of the content objective; the style objective gets `1 - lambda`.
    pub lambda: f64,
    /// Weight of the coverage penalty.
    pub eta: f64,
    pub coverage: CoverageMode,
    pub copy_mass: CopyMass,
    /// Per-step probabilities below this are clamped (no gradient).
    pub prob_floor: f64,
}

impl LossWeights {
    pub fn new(lambda: f64, eta: f64) -> Self {
        LossWeights {
            lambda,
            eta,
            coverage: CoverageMode::Both,
            copy_mass: CopyMass::Distribution,
            prob_floor: DEFAULT_PROB_FLOOR,
        }
    }
}

pub const DEFAULT_PROB_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lambda: f64,
    pub eta: f64,
    pub learning_rate: f64,
    pub epochs_pretrain: usize,
    pub epochs_full: usize,
    pub batch_size: usize,
    pub beam_width: usize,
    pub max_len: usize,
    pub max_distance: usize,
    pub prefer_equal_size: bool,
    pub seed: u64,
    pub precision: Precision,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub min_count: usize,
    pub coverage: CoverageMode,
    pub coverage_mass: CopyMass,
    pub prob_floor: f64,
    /// Retrieve exemplars once instead of re-drawing them every epoch.
    pub frozen_triples: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: 0.2,
            eta: 1.0,
            learning_rate: 0.001,
            epochs_pretrain: 10,
            epochs_full: 10,
            batch_size: 16,
            beam_width: 5,
            max_len: 50,
            max_distance: 5,
            prefer_equal_size: true,
            seed: 0,
            precision: Precision::F64,
            embed_dim: DEFAULT_EMBED_DIM,
            hidden_dim: DEFAULT_HIDDEN_DIM,
            min_count: 1,
            coverage: CoverageMode::Both,
            coverage_mass: CopyMass::Distribution,
            prob_floor: DEFAULT_PROB_FLOOR,
            frozen_triples: false,
        }
    }
}

const KEYS: &[&str] = &[
    "lambda",
    "eta",
    "learning_rate",
    "epochs_pretrain",
    "epochs_full",
    "batch_size",
    "beam_width",
    "max_len",
    "max_distance",
    "prefer_equal_size",
    "seed",
    "precision",
    "embed_dim",
    "hidden_dim",
    "min_count",
    "coverage",
    "coverage_mass",
    "prob_floor",
    "frozen_triples",
];

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return bad("lambda must lie in (0, 1)");
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return bad("eta must be a finite value >= 0");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be > 0");
        }
        if self.batch_size == 0 || self.beam_width == 0 || self.max_len == 0 {
            return bad("batch_size, beam_width and max_len must be >= 1");
        }
        if self.embed_dim == 0 || self.hidden_dim == 0 || self.min_count == 0 {
            return bad("embed_dim, hidden_dim and min_count must be >= 1");
        }
        if !(self.prob_floor > 0.0 && self.prob_floor < 1.0) {
            return bad("prob_floor must lie in (0, 1)");
        }
        Ok(())
    }

    /// Pretraining reconstructs the exemplar only; full training uses the
    /// configured balance and coverage weight.
    pub fn weights(&self, phase: Phase) -> LossWeights {
        let (lambda, eta) = match phase {
            Phase::Pretrain => (0.0, 0.0),
            Phase::Full => (self.lambda, self.eta),
        };
        LossWeights {
            lambda,
            eta,
            coverage: self.coverage,
            copy_mass: self.coverage_mass,
            prob_floor: self.prob_floor,
        }
    }

    pub fn phase_of_epoch(&self, epoch: usize) -> Phase {
        if epoch < self.epochs_pretrain {
            Phase::Pretrain
        } else {
            Phase::Full
        }
    }

    pub fn total_epochs(&self) -> usize {
        self.epochs_pretrain + self.epochs_full
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), TrainError> {
        fn parse<V: std::str::FromStr>(key: &str, value: &str) -> Result<V, TrainError> {
            value
                .parse()
                .map_err(|_| TrainError::Config(format!("bad value {value:?} for {key}")))
        }
        match key {
            "lambda" => self.lambda = parse(key, value)?,
            "eta" => self.eta = parse(key, value)?,
            "learning_rate" | "lr" => self.learning_rate = parse(key, value)?,
            "epochs_pretrain" => self.epochs_pretrain = parse(key, value)?,
            "epochs_full" => self.epochs_full = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "beam_width" => self.beam_width = parse(key, value)?,
            "max_len" => self.max_len = parse(key, value)?,
            "max_distance" => self.max_distance = parse(key, value)?,
            "prefer_equal_size" => self.prefer_equal_size = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "precision" => self.precision = value.parse().map_err(TrainError::Config)?,
            "embed_dim" => self.embed_dim = parse(key, value)?,
            "hidden_dim" => self.hidden_dim = parse(key, value)?,
            "min_count" => self.min_count = parse(key, value)?,
            "coverage" => {
                self.coverage = match value {
                    "both" => CoverageMode::Both,
                    "content" => CoverageMode::Content,
                    "style" => CoverageMode::Style,
                    _ => return Err(TrainError::Config(format!("bad coverage mode {value:?}"))),
                }
            }
            "coverage_mass" => {
                self.coverage_mass = match value {
                    "distribution" => CopyMass::Distribution,
                    "gated" => CopyMass::Gated,
                    _ => return Err(TrainError::Config(format!("bad coverage mass {value:?}"))),
                }
            }
            "prob_floor" => self.prob_floor = parse(key, value)?,
            "frozen_triples" => self.frozen_triples = parse(key, value)?,
            _ => return Err(TrainError::Config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Parses flat `key = value` text; `#` starts a comment. Unset keys keep
    /// their defaults.
    pub fn parse(text: &str) -> Result<Self, TrainError> {
        let mut cfg = TrainConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| TrainError::Config(format!("line {}: expected key = value", i + 1)))?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let v = match *key {
                "lambda" => self.lambda.to_string(),
                "eta" => self.eta.to_string(),
                "learning_rate" => self.learning_rate.to_string(),
                "epochs_pretrain" => self.epochs_pretrain.to_string(),
                "epochs_full" => self.epochs_full.to_string(),
                "batch_size" => self.batch_size.to_string(),
                "beam_width" => self.beam_width.to_string(),
                "max_len" => self.max_len.to_string(),
                "max_distance" => self.max_distance.to_string(),
                "prefer_equal_size" => self.prefer_equal_size.to_string(),
                "seed" => self.seed.to_string(),
                "precision" => self.precision.to_string(),
                "embed_dim" => self.embed_dim.to_string(),
                "hidden_dim" => self.hidden_dim.to_string(),
                "min_count" => self.min_count.to_string(),
                "coverage" => format!("{:?}", self.coverage).to_lowercase(),
                "coverage_mass" => format!("{:?}", self.coverage_mass).to_lowercase(),
                "prob_floor" => self.prob_floor.to_string(),
                "frozen_triples" => self.frozen_triples.to_string(),
                _ => unreachable!(),
            };
            let _ = writeln!(out, "{key} = {v}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_roundtrip_and_defaults() {
        let d = TrainConfig::default();
        assert_eq!((d.lambda, d.eta, d.learning_rate, d.beam_width, d.max_len), (0.2, 1.0, 0.001, 5, 50));
        assert_eq!(TrainConfig::parse(&d.to_text()).unwrap(), d);
        let c = TrainConfig::parse("# comment\nlambda = 0.5\nprecision=f32\ncoverage = style\ncoverage_mass = gated\n").unwrap();
        assert_eq!(c.lambda, 0.5);
        assert_eq!(c.precision, Precision::F32);
        assert_eq!(c.coverage, CoverageMode::Style);
        assert_eq!(c.coverage_mass, CopyMass::Gated);
        assert_eq!(TrainConfig::parse(&c.to_text()).unwrap(), c);
        assert!(TrainConfig::parse("nope = 1").is_err());
        assert!(TrainConfig::parse("lambda").is_err());
    }

    #[test]
    fn validation_and_phases() {
        let mut c = TrainConfig::default();
        c.validate().unwrap();
        c.lambda = 1.0;
        assert!(c.validate().is_err());
        c.lambda = 0.2;
        c.learning_rate = 0.0;
        assert!(c.validate().is_err());
        let c = TrainConfig { epochs_pretrain: 2, ..TrainConfig::default() };
        assert_eq!(c.phase_of_epoch(1), Phase::Pretrain);
        assert_eq!(c.phase_of_epoch(2), Phase::Full);
        let w = c.weights(Phase::Pretrain);
        assert_eq!((w.lambda, w.eta), (0.0, 0.0));
        let w = c.weights(Phase::Full);
        assert_eq!((w.lambda, w.eta), (0.2, 1.0));
    }
}
