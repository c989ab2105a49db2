//! Deterministic sheet equation `g(s,t) = 1 + a ∫_0^s ∫_0^t g` and the
//! decay monitor of one-parameter chaos norms.

use alloc::vec::Vec;

use crate::linalg::Matrix;
use crate::operators::GridFunction2D;
use crate::quadrature::Quadrature;
use crate::special::{h0, VolterraKernel};
use crate::{Error, Grid2D, ModelParams, Result, TimeGrid};

/// Exact solution `h0(a s t)`.
pub fn deterministic_sheet_solution(a: f64, s: f64, t: f64) -> Result<f64> {
    h0(a * s * t)
}

/// Row `k` holds weights for `∫_0^{t_k}` over the nodes of `grid`.
///
/// Fourth-order Gregory weights from `k = 5` on, Newton–Cotes rules below.
/// Grids with fewer than three steps use the trapezoid rule.
pub fn cumulative_weights(grid: &TimeGrid) -> Matrix {
    let n = grid.n_steps();
    let h = grid.step();
    let mut w = Matrix::zeros(n + 1, n + 1);
    if n < 3 {
        for k in 1..=n {
            for j in 0..=k {
                w[(k, j)] = if j == 0 || j == k { 0.5 * h } else { h };
            }
        }
        return w;
    }
    let mut set = |k: usize, coef: &[f64], scale: f64| {
        for (j, c) in coef.iter().enumerate() {
            w[(k, j)] = c * scale * h;
        }
    };
    set(1, &[9.0, 19.0, -5.0, 1.0], 1.0 / 24.0);
    set(2, &[1.0, 4.0, 1.0], 1.0 / 3.0);
    set(3, &[1.0, 3.0, 3.0, 1.0], 3.0 / 8.0);
    if n >= 4 {
        set(4, &[1.0, 4.0, 2.0, 4.0, 1.0], 1.0 / 3.0);
    }
    for k in 5..=n {
        for j in 0..=k {
            w[(k, j)] = h;
        }
        for (j, c) in [(0, 3.0 / 8.0), (1, 7.0 / 6.0), (2, 23.0 / 24.0)] {
            w[(k, j)] = c * h;
            w[(k, k - j)] = c * h;
        }
    }
    w
}

#[derive(Debug, Clone, PartialEq)]
pub struct PicardSolution {
    pub values: GridFunction2D,
    pub iterations: usize,
    pub last_change: f64,
    pub converged: bool,
}

pub const PICARD_MAX_ITER: usize = 200;
pub const PICARD_TOL: f64 = 1e-10;

/// Picard iteration `g ← 1 + a W_s g W_tᵀ` with cumulative weights `W`.
pub fn picard_sheet(a: f64, grid: Grid2D) -> Result<PicardSolution> {
    if !a.is_finite() {
        return Err(Error::NonFiniteCoefficient("a"));
    }
    let ws = cumulative_weights(&grid.s_axis);
    let wt_t = cumulative_weights(&grid.t_axis).transpose();
    let (rs, rt) = (grid.n_s() + 1, grid.n_t() + 1);
    let mut g = Matrix::from_fn(rs, rt, |_, _| 1.0);
    let mut last_change = f64::INFINITY;
    let mut iterations = 0;
    while iterations < PICARD_MAX_ITER {
        iterations += 1;
        let image = ws.matmul(&g).matmul(&wt_t);
        let next = Matrix::from_fn(rs, rt, |i, j| 1.0 + a * image[(i, j)]);
        last_change = next.max_abs_diff(&g);
        g = next;
        if !last_change.is_finite() || last_change < PICARD_TOL {
            break;
        }
    }
    Ok(PicardSolution {
        values: GridFunction2D::new(grid, g.as_slice().to_vec())?,
        iterations,
        last_change,
        converged: last_change < PICARD_TOL,
    })
}

/// Grid used by [`chaos_norm_decay`].
pub const DECAY_GRID_STEPS: usize = 16;

/// Per-order norms `(∫_0^T ‖K*^{⊗n} f_n(·, t)‖²_{L²} dt)^{1/2}`, `n = 0..=N`,
/// for the one-parameter kernels `f_n(·, t) = aⁿ/n! e^{bt} 1_{[0,t]}^{⊗n}`.
///
/// `‖K* 1_{[0,t]}‖²` is computed by quadrature at the nodes of a
/// [`DECAY_GRID_STEPS`]-step grid; the `t`-integral uses the trapezoid rule
/// with an exact power law on the first cell.
pub fn chaos_norm_decay(p: &ModelParams, truncation: usize) -> Result<Vec<f64>> {
    if p.hurst.is_sheet() {
        return Err(Error::FieldMismatch("chaos norm decay is defined for the one-parameter equation"));
    }
    let alpha = p.hurst.alpha;
    let horizon = p.horizon;
    let grid = TimeGrid::new(DECAY_GRID_STEPS, horizon)?;
    let kernel = VolterraKernel::new(alpha)?;
    let quad = Quadrature::default();
    let mut sq = [0.0; DECAY_GRID_STEPS + 1];
    for (k, q) in sq.iter_mut().enumerate().skip(1) {
        let t = grid.point(k);
        *q = crate::operators::kstar_indicator_inner(&kernel, t, t, horizon, &quad)?;
    }
    let h = grid.step();
    let mut out = Vec::with_capacity(truncation + 1);
    let mut coef = 1.0;
    for n in 0..=truncation {
        if n > 0 {
            coef *= p.a / n as f64;
        }
        let f = |k: usize| libm::exp(2.0 * p.b * grid.point(k)) * libm::pow(sq[k], n as f64);
        let e = 2.0 * alpha * n as f64;
        let mut acc = f(1) * h / (e + 1.0);
        for k in 1..DECAY_GRID_STEPS {
            acc += 0.5 * h * (f(k) + f(k + 1));
        }
        out.push(libm::fabs(coef) * libm::sqrt(acc));
    }
    Ok(out)
}
