//! Unit mean of the Girsanov density and centring of the shifted sheet.

use std::time::Instant;

use fbm_chaos_core::fields::{SheetFactor, SheetPairing};
use fbm_chaos_core::operators::{calibrated_kinv_norm_sq, girsanov_log_density, girsanov_log_density_paired};
use fbm_chaos_core::{Grid2D, MonteCarloResult, RngStreamSpec};

use crate::config::{Settings, DEFAULT_SEED};
use crate::montecarlo::{replicate, with_threads};
use crate::report::{ExperimentReport, Metric, Tolerance};

#[derive(Debug, Clone, PartialEq)]
pub struct GirsanovConfig {
    pub alpha: f64,
    pub beta: f64,
    pub horizon: f64,
    pub epsilon: f64,
    pub grid_n: usize,
    pub samples: usize,
    pub seed: u64,
    pub threads: Option<usize>,
}

impl GirsanovConfig {
    pub fn from_settings(s: &Settings) -> Self {
        let alpha = s.alpha.unwrap_or(0.3);
        Self {
            alpha,
            beta: s.beta.unwrap_or(alpha),
            horizon: s.horizon.unwrap_or(1.0),
            epsilon: s.epsilon.unwrap_or(1.0),
            grid_n: s.grid_n.unwrap_or(4),
            samples: s.samples.unwrap_or(100_000),
            seed: s.seed.unwrap_or(DEFAULT_SEED),
            threads: s.threads,
        }
    }
}

pub fn run(c: &GirsanovConfig) -> anyhow::Result<ExperimentReport> {
    let started = Instant::now();
    let mut r = ExperimentReport::new("girsanov-check");
    r.param("alpha", c.alpha);
    r.param("beta", c.beta);
    r.param("T", c.horizon);
    r.param("epsilon", c.epsilon);
    r.param("grid_n", c.grid_n);
    r.param("samples", c.samples);
    r.param("seed", c.seed);
    let norm = calibrated_kinv_norm_sq(c.alpha, c.beta, c.horizon)?;
    let grid = Grid2D::square(c.grid_n, c.horizon)?;
    let factor = SheetFactor::new(c.alpha, c.beta, grid)?;
    let pairing = SheetPairing::new(&factor, norm)?;
    let shift = c.horizon * c.horizon / c.epsilon;
    let draws = with_threads(c.threads, || {
        replicate(c.seed, c.samples, |s| -> anyhow::Result<[f64; 3]> {
            let (field, g) = pairing.sample(&factor, s);
            let d = girsanov_log_density_paired(c.epsilon, g, norm).exp();
            let literal = girsanov_log_density(c.epsilon, &field, norm)?.exp();
            Ok([d, d * (field.terminal() - shift), literal])
        })
    })?
    .into_iter()
    .collect::<anyhow::Result<Vec<_>>>()?;
    let spec = RngStreamSpec::new(c.seed, 0);
    let col = |k: usize| draws.iter().map(|d| d[k]).collect::<Vec<_>>();
    let density = col(0);
    let mean = MonteCarloResult::from_samples(&density, spec);
    r.metric(Metric::monte_carlo("density_mean", &mean, Tolerance::StdErrors { target: 1.0, k: 4.0 }));
    let shifted = MonteCarloResult::from_samples(&col(1), spec);
    r.metric(Metric::monte_carlo("reweighted_shifted_terminal_mean", &shifted, Tolerance::StdErrors { target: 0.0, k: 4.0 }));
    let sum: f64 = density.iter().sum();
    let sum_sq: f64 = density.iter().map(|d| d * d).sum();
    r.metric(Metric::deterministic("effective_sample_fraction", sum * sum / sum_sq / c.samples as f64, Tolerance::Info));
    r.metric(Metric::deterministic("kinv_f_norm_sq", norm, Tolerance::Info));
    let literal = MonteCarloResult::from_samples(&col(2), spec);
    r.metric(Metric::monte_carlo("terminal_pairing_density_mean", &literal, Tolerance::Info));
    let var_w = c.horizon.powf(2.0 * (c.alpha + c.beta));
    r.metric(Metric::deterministic(
        "terminal_pairing_density_mean_exact",
        ((var_w - norm) / (2.0 * c.epsilon * c.epsilon)).exp(),
        Tolerance::Info,
    ));
    r.note("the density pairs the sheet with the Gaussian variable of variance ||K^{-1}F||^2 and covariance st with W(s,t)");
    r.note("terminal_pairing_density uses W(T,T) in place of that variable; its mean is not one");
    Ok(r.finish(started))
}
