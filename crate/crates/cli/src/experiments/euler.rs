//! Mean-square error of the Wick–Euler scheme under grid refinement.

use std::time::Instant;

use anyhow::bail;
use fbm_chaos_core::chaos::{exact_solution_1d, wick_euler_1d};
use fbm_chaos_core::fields::{factor_covariance, sample_fbm, FieldGrid, GaussianField};
use fbm_chaos_core::{HurstPair, ModelParams, MonteCarloResult, RngStreamSpec, TimeGrid};

use crate::config::{Settings, DEFAULT_SEED};
use crate::montecarlo::{replicate, with_threads};
use crate::report::{num, ExperimentReport, Metric, Table, Tolerance};

pub const STEP_COUNTS: [usize; 5] = [8, 16, 32, 64, 128];
/// The scheme counts as converging when the error at the finest grid is
/// below this fraction of the error at the coarsest.
pub const CONVERGENCE_RATIO: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct EulerConfig {
    pub alphas: Vec<f64>,
    pub a: f64,
    pub horizon: f64,
    pub steps: Vec<usize>,
    pub samples: usize,
    pub seed: u64,
    pub threads: Option<usize>,
}

impl EulerConfig {
    pub fn from_settings(s: &Settings) -> anyhow::Result<Self> {
        if s.b.is_some_and(|b| b != 0.0) {
            bail!("euler-study needs b = 0");
        }
        let finest = s.grid_n.unwrap_or(128);
        let steps: Vec<usize> = STEP_COUNTS.iter().copied().filter(|&n| n <= finest && finest % n == 0).collect();
        if steps.len() < 2 {
            bail!("--grid-n must be a multiple of 8 and at least 16");
        }
        Ok(Self {
            alphas: s.alpha.map_or_else(|| vec![0.3, 0.5, 0.7], |a| vec![a]),
            a: s.a.unwrap_or(1.0),
            horizon: s.horizon.unwrap_or(1.0),
            steps,
            samples: s.samples.unwrap_or(10_000),
            seed: s.seed.unwrap_or(DEFAULT_SEED),
            threads: s.threads,
        })
    }
}

/// Verdict for one Hurst index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trend {
    Converges,
    DoesNotConverge,
}

pub fn run(c: &EulerConfig) -> anyhow::Result<ExperimentReport> {
    let started = Instant::now();
    let mut r = ExperimentReport::new("euler-study");
    r.param("alphas", &c.alphas);
    r.param("a", c.a);
    r.param("T", c.horizon);
    r.param("steps", &c.steps);
    r.param("samples", c.samples);
    r.param("seed", c.seed);
    r.note("error is E|X_n - exp(a B_T - a^2 T^(2 alpha) / 2)|^2 at the terminal node");
    let finest = *c.steps.last().expect("at least two grids");
    let mut table = Table::new("euler_errors", &["alpha", "n", "mse", "std_error", "rms", "verdict"]);
    for (ai, &alpha) in c.alphas.iter().enumerate() {
        let p = ModelParams {
            hurst: HurstPair::path(alpha)?,
            a: c.a,
            b: 0.0,
            horizon: c.horizon,
        };
        let fine = TimeGrid::new(finest, c.horizon)?;
        let factor = factor_covariance(alpha, fine)?;
        let seed = c.seed.wrapping_add(ai as u64);
        let errs = with_threads(c.threads, || {
            replicate(seed, c.samples, |s| -> anyhow::Result<Vec<f64>> {
                let field = sample_fbm(&factor, s);
                let target = exact_solution_1d(c.a, 0.0, alpha, c.horizon, field.terminal());
                c.steps
                    .iter()
                    .map(|&n| {
                        let stride = finest / n;
                        let coarse = GaussianField {
                            grid: FieldGrid::Path(TimeGrid::new(n, c.horizon)?),
                            values: field.values.iter().step_by(stride).copied().collect(),
                            white_noise: Vec::new(),
                        };
                        let x = wick_euler_1d(&p, &coarse)?;
                        let e = x[n] - target;
                        Ok(e * e)
                    })
                    .collect()
            })
        })?
        .into_iter()
        .collect::<anyhow::Result<Vec<_>>>()?;
        let spec = RngStreamSpec::new(seed, 0);
        let mses: Vec<MonteCarloResult> = (0..c.steps.len())
            .map(|k| {
                let col: Vec<f64> = errs.iter().map(|e| e[k]).collect();
                MonteCarloResult::from_samples(&col, spec)
            })
            .collect();
        let first = mses[0].estimate;
        let last = mses[mses.len() - 1].estimate;
        let ratio = if first > 0.0 { last / first } else { 0.0 };
        let trend = if ratio < CONVERGENCE_RATIO { Trend::Converges } else { Trend::DoesNotConverge };
        let verdict = match trend {
            Trend::Converges => "CONVERGES",
            Trend::DoesNotConverge => "DOES-NOT-CONVERGE",
        };
        for (k, m) in mses.iter().enumerate() {
            table.push([num(alpha), c.steps[k].to_string(), num(m.estimate), num(m.std_error), num(m.estimate.sqrt()), verdict.to_owned()]);
        }
        let name = format!("mse_ratio_n{finest}_over_n{}_alpha_{alpha}", c.steps[0]);
        let tol = if alpha > 0.5 {
            Tolerance::Below { bound: CONVERGENCE_RATIO }
        } else if alpha < 0.5 {
            Tolerance::Above { bound: CONVERGENCE_RATIO }
        } else {
            Tolerance::Info
        };
        let tol = if c.a == 0.0 { Tolerance::Info } else { tol };
        r.metric(Metric::deterministic(name, ratio, tol).with_seed(seed, c.samples));
        r.metric(Metric::deterministic(format!("mse_n{finest}_alpha_{alpha}"), last, Tolerance::Info).with_seed(seed, c.samples));
        r.note(format!("alpha = {alpha}: {verdict}"));
    }
    r.tables.push(table);
    Ok(r.finish(started))
}
