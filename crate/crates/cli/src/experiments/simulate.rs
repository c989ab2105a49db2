//! Field sampling with empirical covariance checks and CSV dumps.

use std::time::Instant;

use fbm_chaos_core::fields::{cov_fbm, factor_covariance, increment_cov, sample_fbm, SheetFactor};
use fbm_chaos_core::{Grid2D, MonteCarloResult, RngStreamSpec, TimeGrid};

use crate::config::{Settings, DEFAULT_SEED};
use crate::montecarlo::{replicate, with_threads};
use crate::report::{num, ExperimentReport, Metric, Table, Tolerance};

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateConfig {
    pub alpha: f64,
    pub beta: f64,
    pub horizon: f64,
    pub grid_n: usize,
    pub samples: usize,
    pub seed: u64,
    pub threads: Option<usize>,
}

impl SimulateConfig {
    pub fn from_settings(s: &Settings) -> Self {
        let alpha = s.alpha.unwrap_or(0.5);
        Self {
            alpha,
            beta: s.beta.unwrap_or(alpha),
            horizon: s.horizon.unwrap_or(1.0),
            grid_n: s.grid_n.unwrap_or(8),
            samples: s.samples.unwrap_or(200_000),
            seed: s.seed.unwrap_or(DEFAULT_SEED),
            threads: s.threads,
        }
    }
}

pub fn run(c: &SimulateConfig) -> anyhow::Result<ExperimentReport> {
    let started = Instant::now();
    let mut r = ExperimentReport::new("simulate");
    r.param("alpha", c.alpha);
    r.param("beta", c.beta);
    r.param("T", c.horizon);
    r.param("grid_n", c.grid_n);
    r.param("samples", c.samples);
    r.param("seed", c.seed);

    let grid = TimeGrid::new(c.grid_n, c.horizon)?;
    let factor = factor_covariance(c.alpha, grid)?;
    let paths = with_threads(c.threads, || replicate(c.seed, c.samples, |s| sample_fbm(&factor, s).values))?;
    let mut cov_table = Table::new("path_covariance", &["i", "j", "empirical", "exact", "std_error", "z"]);
    let mut worst_z = 0.0f64;
    let n = c.grid_n;
    for i in 1..=n {
        for j in i..=n {
            let prods: Vec<f64> = paths.iter().map(|p| p[i] * p[j]).collect();
            let m = MonteCarloResult::from_samples(&prods, RngStreamSpec::new(c.seed, 0));
            let exact = cov_fbm(c.alpha, grid.point(i), grid.point(j));
            let z = m.z_score(exact);
            worst_z = worst_z.max(z);
            cov_table.push([i.to_string(), j.to_string(), num(m.estimate), num(exact), num(m.std_error), num(z)]);
        }
    }
    r.metric(Metric::deterministic("path_covariance_max_z", worst_z, Tolerance::Below { bound: 5.0 }).with_seed(c.seed, c.samples));
    r.tables.push(cov_table);
    let mut dump = Table::new("path_sample", &["t", "X"]);
    for (k, x) in paths[0].iter().enumerate() {
        dump.push([num(grid.point(k)), num(*x)]);
    }
    r.tables.push(dump);

    let sheet_grid = Grid2D::square(c.grid_n, c.horizon)?;
    let sheet = SheetFactor::new(c.alpha, c.beta, sheet_grid)?;
    let sheet_seed = c.seed.wrapping_add(1);
    let corners = with_threads(c.threads, || {
        replicate(sheet_seed, c.samples, |s| {
            let f = sheet.sample(s);
            let v = |i, j| f.values[sheet_grid.node(i, j)];
            let first = v(1, 1);
            let diag = v(2, 2) - v(1, 2) - v(2, 1) + v(1, 1);
            (f.terminal(), first, diag)
        })
    })?;
    let spec = RngStreamSpec::new(sheet_seed, 0);
    let sq: Vec<f64> = corners.iter().map(|x| x.0 * x.0).collect();
    let var = MonteCarloResult::from_samples(&sq, spec);
    let target = c.horizon.powf(2.0 * c.alpha + 2.0 * c.beta);
    r.metric(Metric::monte_carlo("sheet_terminal_variance", &var, Tolerance::StdErrors { target, k: 4.0 }));
    let cross: Vec<f64> = corners.iter().map(|x| x.1 * x.2).collect();
    let cross = MonteCarloResult::from_samples(&cross, spec);
    let target = increment_cov(c.alpha, &sheet_grid.s_axis, 0, 1) * increment_cov(c.beta, &sheet_grid.t_axis, 0, 1);
    r.metric(Metric::monte_carlo("sheet_increment_covariance", &cross, Tolerance::StdErrors { target, k: 4.0 }));
    let f = sheet.sample(RngStreamSpec::new(sheet_seed, 0));
    let mut dump = Table::new("sheet_sample", &["s", "t", "X"]);
    for i in 0..=c.grid_n {
        for j in 0..=c.grid_n {
            dump.push([num(sheet_grid.s_axis.point(i)), num(sheet_grid.t_axis.point(j)), num(f.values[sheet_grid.node(i, j)])]);
        }
    }
    r.tables.push(dump);
    Ok(r.finish(started))
}
