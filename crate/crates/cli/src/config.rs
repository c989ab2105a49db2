//! Run settings: TOML file, command-line flags and per-experiment defaults.
//!
//! Flags override the file; unset values fall back to the defaults of the
//! chosen experiment.

use std::path::Path;

use anyhow::Context;
use clap::Args;
use serde::Deserialize;

#[derive(Debug, Clone, Default, PartialEq, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Settings {
    /// Hurst index of the path, or of the first sheet coordinate
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Hurst index of the second sheet coordinate
    #[arg(long)]
    pub beta: Option<f64>,
    /// Noise coefficient
    #[arg(long)]
    pub a: Option<f64>,
    /// Drift coefficient
    #[arg(long)]
    pub b: Option<f64>,
    /// Horizon (window side for the sheet experiments)
    #[arg(long = "T")]
    #[serde(rename = "T")]
    pub horizon: Option<f64>,
    /// Cells per axis
    #[arg(long)]
    pub grid_n: Option<usize>,
    /// Monte Carlo replicas
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Chaos truncation order
    #[arg(long)]
    pub truncation: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Depth below zero that defines the negativity region
    #[arg(long)]
    pub delta: Option<f64>,
    /// Replicas for the mean identity of exact-vs-chaos
    #[arg(long)]
    pub mean_samples: Option<usize>,
    /// Worker threads (all cores when unset)
    #[arg(long)]
    pub threads: Option<usize>,
    /// Use ungraded quadrature in operator-check (harness sensitivity)
    #[arg(long, hide = true)]
    #[serde(default)]
    pub corrupt_grading: bool,
}

impl Settings {
    pub fn from_toml_str(text: &str) -> anyhow::Result<Self> {
        toml::from_str(text).context("parsing configuration")
    }

    pub fn from_file(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml_str(&text)
    }

    /// `self` with unset values taken from `base`.
    pub fn over(self, base: Settings) -> Settings {
        Settings {
            alpha: self.alpha.or(base.alpha),
            beta: self.beta.or(base.beta),
            a: self.a.or(base.a),
            b: self.b.or(base.b),
            horizon: self.horizon.or(base.horizon),
            grid_n: self.grid_n.or(base.grid_n),
            samples: self.samples.or(base.samples),
            seed: self.seed.or(base.seed),
            truncation: self.truncation.or(base.truncation),
            epsilon: self.epsilon.or(base.epsilon),
            delta: self.delta.or(base.delta),
            mean_samples: self.mean_samples.or(base.mean_samples),
            threads: self.threads.or(base.threads),
            corrupt_grading: self.corrupt_grading || base.corrupt_grading,
        }
    }
}

pub const DEFAULT_SEED: u64 = 20_240_601;
