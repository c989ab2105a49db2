//! Truncated chaos expansion against the exponential solution, the mean
//! identity, and the decay of the chaos norms.

use std::time::Instant;

use fbm_chaos_core::chaos::{chaos_norm_decay, chaos_path_1d, exact_solution_1d};
use fbm_chaos_core::fields::{factor_covariance, sample_fbm};
use fbm_chaos_core::{validate_params, HurstPair, ModelParams, MonteCarloResult, RngStreamSpec, TimeGrid};

use crate::config::{Settings, DEFAULT_SEED};
use crate::montecarlo::{replicate, with_threads};
use crate::report::{num, ExperimentReport, Metric, Table, Tolerance};

pub const SUP_ERROR_TOL: f64 = 1e-8;
pub const DECAY_ORDERS: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct ExactConfig {
    pub alpha: f64,
    pub a: f64,
    pub b: f64,
    pub horizon: f64,
    pub grid_n: usize,
    pub samples: usize,
    pub mean_samples: usize,
    pub truncation: usize,
    pub seed: u64,
    pub threads: Option<usize>,
    pub with_decay: bool,
}

impl ExactConfig {
    pub fn from_settings(s: &Settings) -> Self {
        Self {
            alpha: s.alpha.unwrap_or(0.7),
            a: s.a.unwrap_or(1.0),
            b: s.b.unwrap_or(0.5),
            horizon: s.horizon.unwrap_or(1.0),
            grid_n: s.grid_n.unwrap_or(64),
            samples: s.samples.unwrap_or(100),
            mean_samples: s.mean_samples.unwrap_or(100_000),
            truncation: s.truncation.unwrap_or(20),
            seed: s.seed.unwrap_or(DEFAULT_SEED),
            threads: s.threads,
            with_decay: true,
        }
    }

    pub fn params(&self) -> anyhow::Result<ModelParams> {
        Ok(validate_params(ModelParams {
            hurst: HurstPair::path(self.alpha)?,
            a: self.a,
            b: self.b,
            horizon: self.horizon,
        })?)
    }
}

pub fn run(c: &ExactConfig) -> anyhow::Result<ExperimentReport> {
    let started = Instant::now();
    let p = c.params()?;
    let mut r = ExperimentReport::new("exact-vs-chaos");
    r.param("alpha", c.alpha);
    r.param("a", c.a);
    r.param("b", c.b);
    r.param("T", c.horizon);
    r.param("grid_n", c.grid_n);
    r.param("samples", c.samples);
    r.param("mean_samples", c.mean_samples);
    r.param("truncation", c.truncation);
    r.param("seed", c.seed);

    let grid = TimeGrid::new(c.grid_n, c.horizon)?;
    let factor = factor_covariance(c.alpha, grid)?;
    let per_path = with_threads(c.threads, || {
        replicate(c.seed, c.samples, |s| -> anyhow::Result<(f64, f64)> {
            let field = sample_fbm(&factor, s);
            let chaos = chaos_path_1d(&p, &field, c.truncation)?;
            let mut worst = 0.0f64;
            let mut lowest = f64::INFINITY;
            for (k, &b_t) in field.values.iter().enumerate() {
                let exact = exact_solution_1d(p.a, p.b, c.alpha, grid.point(k), b_t);
                worst = worst.max((chaos.total[k] - exact).abs());
                lowest = lowest.min(exact);
            }
            Ok((worst, lowest))
        })
    })?
    .into_iter()
    .collect::<anyhow::Result<Vec<_>>>()?;
    let sup = per_path.iter().map(|x| x.0).fold(0.0, f64::max);
    let lowest = per_path.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
    r.metric(Metric::deterministic("sup_node_error", sup, Tolerance::Below { bound: SUP_ERROR_TOL }).with_seed(c.seed, c.samples));
    r.metric(Metric::deterministic("min_exact_value", lowest, Tolerance::Above { bound: 0.0 }).with_seed(c.seed, c.samples));
    let mut errors = Table::new("path_errors", &["path", "sup_error"]);
    for (i, x) in per_path.iter().enumerate() {
        errors.push([i.to_string(), num(x.0)]);
    }
    r.tables.push(errors);

    let mean_seed = c.seed.wrapping_add(1);
    let terminal = with_threads(c.threads, || {
        replicate(mean_seed, c.mean_samples, |s| {
            let b_t = sample_fbm(&factor, s).terminal();
            exact_solution_1d(p.a, p.b, c.alpha, c.horizon, b_t)
        })
    })?;
    let mean = MonteCarloResult::from_samples(&terminal, RngStreamSpec::new(mean_seed, 0));
    let target = (p.b * c.horizon).exp();
    r.metric(Metric::monte_carlo("terminal_mean", &mean, Tolerance::StdErrors { target, k: 4.0 }));

    if c.with_decay {
        decay_metrics(&mut r, &p)?;
    }
    Ok(r.finish(started))
}

/// Norms of orders `0..=6` against `|a|ⁿ T^{α(2n+1)} / n!`, with the constant
/// fitted at order zero.
pub fn decay_metrics(r: &mut ExperimentReport, p: &ModelParams) -> anyhow::Result<()> {
    let norms = chaos_norm_decay(p, DECAY_ORDERS)?;
    let alpha = p.hurst.alpha;
    let mut fact = 1.0;
    let bounds: Vec<f64> = (0..=DECAY_ORDERS)
        .map(|n| {
            if n > 0 {
                fact *= n as f64;
            }
            p.a.abs().powi(n as i32) * p.horizon.powf(alpha * (2 * n + 1) as f64) / fact
        })
        .collect();
    let fitted = norms[0] / bounds[0];
    let mut table = Table::new("chaos_norm_decay", &["n", "norm", "bound"]);
    let mut worst = 0.0f64;
    for n in 0..=DECAY_ORDERS {
        table.push([n.to_string(), num(norms[n]), num(fitted * bounds[n])]);
        if bounds[n] > 0.0 {
            worst = worst.max(norms[n] / (fitted * bounds[n]));
        }
    }
    r.tables.push(table);
    r.metric(Metric::deterministic("decay_fitted_constant", fitted, Tolerance::Info));
    r.metric(Metric::deterministic(
        "decay_norm_over_fitted_bound",
        worst,
        Tolerance::Below { bound: 1.0 + 1e-9 },
    ));
    let ratio = (3..DECAY_ORDERS)
        .map(|n| if norms[n] > 0.0 { norms[n + 1] / norms[n] } else { 0.0 })
        .fold(0.0, f64::max);
    r.metric(Metric::deterministic("decay_max_ratio_from_order_3", ratio, Tolerance::Below { bound: 1.0 }));
    Ok(())
}
