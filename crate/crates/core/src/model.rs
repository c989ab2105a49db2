//! Problem statement, discretisations and result containers shared by every
//! other module.

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::stats;
use crate::{Error, Result};

/// Hurst parameters: `alpha` always, `beta` only for the two-parameter sheet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HurstPair {
    pub alpha: f64,
    pub beta: Option<f64>,
}

impl HurstPair {
    pub fn path(alpha: f64) -> Result<Self> {
        check_hurst(alpha)?;
        Ok(Self { alpha, beta: None })
    }

    pub fn sheet(alpha: f64, beta: f64) -> Result<Self> {
        check_hurst(alpha)?;
        check_hurst(beta)?;
        Ok(Self {
            alpha,
            beta: Some(beta),
        })
    }

    pub fn is_sheet(&self) -> bool {
        self.beta.is_some()
    }
}

fn check_hurst(h: f64) -> Result<()> {
    if h > 0.0 && h < 1.0 {
        Ok(())
    } else {
        Err(Error::HurstOutOfRange(h))
    }
}

/// Coefficients of `X = 1 + ∫ a X δB + ∫ b X dt` on `[0, T]` (or `[0, T]^2`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub hurst: HurstPair,
    pub a: f64,
    pub b: f64,
    pub horizon: f64,
}

/// Checks every invariant of `p` and hands it back unchanged.
pub fn validate_params(p: ModelParams) -> Result<ModelParams> {
    check_hurst(p.hurst.alpha)?;
    if let Some(beta) = p.hurst.beta {
        check_hurst(beta)?;
    }
    if !p.a.is_finite() {
        return Err(Error::NonFiniteCoefficient("a"));
    }
    if !p.b.is_finite() {
        return Err(Error::NonFiniteCoefficient("b"));
    }
    if !(p.horizon > 0.0) || !p.horizon.is_finite() {
        return Err(Error::NonPositiveHorizon(p.horizon));
    }
    Ok(p)
}

/// Uniform grid `t_k = k T / n`, `k = 0..=n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    n_steps: usize,
    horizon: f64,
}

pub fn build_grid(n: usize, horizon: f64) -> Result<TimeGrid> {
    TimeGrid::new(n, horizon)
}

impl TimeGrid {
    pub fn new(n_steps: usize, horizon: f64) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::InvalidGrid("at least one step is required"));
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidGrid("horizon must be positive and finite"));
        }
        Ok(Self { n_steps, horizon })
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    /// `k T / n`; the last node is `T` bit for bit.
    #[inline]
    pub fn point(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.horizon
        } else {
            k as f64 * self.horizon / self.n_steps as f64
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| self.point(k)).collect()
    }

    /// Midpoint of cell `k`, i.e. of `(t_k, t_{k+1}]`.
    #[inline]
    pub fn midpoint(&self, k: usize) -> f64 {
        0.5 * (self.point(k) + self.point(k + 1))
    }
}

/// Tensor grid on `[0, T]^2` with `n_s` cells along `s` and `n_t` along `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    pub s_axis: TimeGrid,
    pub t_axis: TimeGrid,
}

impl Grid2D {
    pub fn new(n_s: usize, n_t: usize, horizon: f64) -> Result<Self> {
        Ok(Self {
            s_axis: TimeGrid::new(n_s, horizon)?,
            t_axis: TimeGrid::new(n_t, horizon)?,
        })
    }

    pub fn square(n: usize, horizon: f64) -> Result<Self> {
        Self::new(n, n, horizon)
    }

    pub fn n_s(&self) -> usize {
        self.s_axis.n_steps()
    }

    pub fn n_t(&self) -> usize {
        self.t_axis.n_steps()
    }

    pub fn horizon(&self) -> f64 {
        self.s_axis.horizon()
    }

    pub fn n_cells(&self) -> usize {
        self.n_s() * self.n_t()
    }

    /// Row-major node index of `(s_i, t_j)`.
    #[inline]
    pub fn node(&self, i: usize, j: usize) -> usize {
        i * (self.n_t() + 1) + j
    }

    /// Row-major cell index of `(s_i, s_{i+1}] x (t_j, t_{j+1}]`.
    #[inline]
    pub fn cell(&self, i: usize, j: usize) -> usize {
        i * self.n_t() + j
    }

    pub fn cell_midpoint(&self, cell: usize) -> (f64, f64) {
        let (i, j) = (cell / self.n_t(), cell % self.n_t());
        (self.s_axis.midpoint(i), self.t_axis.midpoint(j))
    }
}

/// Seed of one Monte Carlo replica.
///
/// The master seed keys a ChaCha12 generator and the replica index selects
/// its stream, so replicas are independent of evaluation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStreamSpec {
    pub master_seed: u64,
    pub replica_index: u64,
}

impl RngStreamSpec {
    pub fn new(master_seed: u64, replica_index: u64) -> Self {
        Self {
            master_seed,
            replica_index,
        }
    }

    pub fn rng(&self) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.replica_index);
        rng
    }

    pub fn replica(&self, index: u64) -> Self {
        Self::new(self.master_seed, index)
    }
}

/// Monte Carlo estimate with its sampling error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloResult {
    pub estimate: f64,
    pub std_error: f64,
    pub n_replicas: usize,
    pub ci95: (f64, f64),
    pub seed: RngStreamSpec,
}

impl MonteCarloResult {
    /// Summarises replica outputs; `seed` records the master seed with
    /// `replica_index` set to the first replica.
    pub fn from_samples(samples: &[f64], seed: RngStreamSpec) -> Self {
        let n = samples.len();
        let estimate = stats::mean(samples);
        let std_error = if n > 1 {
            stats::sample_std(samples) / libm::sqrt(n as f64)
        } else {
            0.0
        };
        let half = 1.959_963_984_540_054 * std_error;
        Self {
            estimate,
            std_error,
            n_replicas: n,
            ci95: (estimate - half, estimate + half),
            seed,
        }
    }

    /// `|estimate - target|` in units of the standard error.
    pub fn z_score(&self, target: f64) -> f64 {
        let gap = libm::fabs(self.estimate - target);
        if self.std_error > 0.0 {
            gap / self.std_error
        } else if gap == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }

    pub fn within(&self, target: f64, n_se: f64) -> bool {
        self.z_score(target) <= n_se
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    fn params(alpha: f64, horizon: f64) -> ModelParams {
        ModelParams {
            hurst: HurstPair { alpha, beta: None },
            a: 1.0,
            b: 0.0,
            horizon,
        }
    }

    #[test]
    fn validate_params_examples() {
        assert!(validate_params(params(0.7, 1.0)).is_ok());
        assert_eq!(
            validate_params(params(1.0, 1.0)),
            Err(Error::HurstOutOfRange(1.0))
        );
        assert_eq!(
            validate_params(params(0.3, 0.0)),
            Err(Error::NonPositiveHorizon(0.0))
        );
        let mut p = params(0.3, 1.0);
        p.hurst.beta = Some(0.0);
        assert_eq!(validate_params(p), Err(Error::HurstOutOfRange(0.0)));
    }

    #[test]
    fn build_grid_examples() {
        assert_eq!(build_grid(2, 1.0).unwrap().points(), [0.0, 0.5, 1.0]);
        assert_eq!(build_grid(1, 2.0).unwrap().points(), [0.0, 2.0]);
        assert!(matches!(build_grid(0, 1.0), Err(Error::InvalidGrid(_))));
        assert!(matches!(build_grid(3, -1.0), Err(Error::InvalidGrid(_))));
    }

    #[test]
    fn last_point_is_horizon_bit_exact() {
        for n in 1..500 {
            for &h in &[0.1, 1.0 / 3.0, 2.7, 7.0] {
                let g = build_grid(n, h).unwrap();
                assert_eq!(g.point(n), h);
                assert_eq!(g.point(0), 0.0);
            }
        }
    }

    #[test]
    fn equal_streams_are_identical_distinct_streams_differ() {
        let a = RngStreamSpec::new(7, 3);
        let mut r1 = a.rng();
        let mut r2 = a.rng();
        let mut r3 = RngStreamSpec::new(7, 4).rng();
        let x: Vec<u64> = (0..16).map(|_| r1.next_u64()).collect();
        let y: Vec<u64> = (0..16).map(|_| r2.next_u64()).collect();
        let z: Vec<u64> = (0..16).map(|_| r3.next_u64()).collect();
        assert_eq!(x, y);
        assert_ne!(x, z);
    }

    #[test]
    fn monte_carlo_summary() {
        let r = MonteCarloResult::from_samples(&[1.0, 2.0, 3.0, 4.0], RngStreamSpec::new(1, 0));
        assert_eq!(r.estimate, 2.5);
        let sd = libm::sqrt(5.0 / 3.0);
        assert!((r.std_error - sd / 2.0).abs() < 1e-15);
        assert!(r.ci95.0 <= r.estimate && r.estimate <= r.ci95.1);
    }
}
