//! One-parameter equation `X_t = 1 + ∫ b X dr + ∫ a X δB`.

use alloc::vec;
use alloc::vec::Vec;

use crate::fields::GaussianField;
use crate::{Error, ModelParams, Result, TimeGrid};

/// Per-order values of a truncated chaos expansion at a set of nodes.
///
/// `orders[n][k]` is the order-`n` term at node `k`; `total[k]` sums them.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedChaosSolution {
    pub truncation: usize,
    pub orders: Vec<Vec<f64>>,
    pub total: Vec<f64>,
}

impl TruncatedChaosSolution {
    pub(crate) fn from_orders(orders: Vec<Vec<f64>>) -> Self {
        let nodes = orders.first().map_or(0, Vec::len);
        let total = (0..nodes).map(|k| orders.iter().map(|o| o[k]).sum()).collect();
        Self {
            truncation: orders.len().saturating_sub(1),
            orders,
            total,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.total.len()
    }
}

/// `e^{bt} exp(a B_t - a² t^{2α} / 2)`.
pub fn exact_solution_1d(a: f64, b: f64, alpha: f64, t: f64, b_t: f64) -> f64 {
    libm::exp(b * t + a * b_t - 0.5 * a * a * libm::pow(t, 2.0 * alpha))
}

/// Terms `e^{bt} aⁿ/n! tⁿᵅ Hₙ(B_t / tᵅ)`, `n = 0..=N`.
///
/// Uses `uₙ₊₁ = (a B uₙ - a² t^{2α} uₙ₋₁) / (n + 1)`, which needs no
/// division by `tᵅ`.
pub fn chaos_terms_1d(a: f64, b: f64, alpha: f64, t: f64, b_t: f64, truncation: usize) -> Vec<f64> {
    let var = libm::pow(t, 2.0 * alpha);
    let mut u = vec![0.0; truncation + 1];
    u[0] = 1.0;
    if truncation >= 1 {
        u[1] = a * b_t;
    }
    for n in 1..truncation {
        u[n + 1] = (a * b_t * u[n] - a * a * var * u[n - 1]) / (n + 1) as f64;
    }
    let drift = libm::exp(b * t);
    u.iter_mut().for_each(|x| *x *= drift);
    u
}

/// Truncated chaos expansion at a single time.
pub fn chaos_sum_1d(a: f64, b: f64, alpha: f64, t: f64, b_t: f64, truncation: usize) -> TruncatedChaosSolution {
    let terms = chaos_terms_1d(a, b, alpha, t, b_t, truncation);
    TruncatedChaosSolution::from_orders(terms.into_iter().map(|x| vec![x]).collect())
}

/// Truncated chaos expansion at every node of a sampled path.
pub fn chaos_path_1d(p: &ModelParams, field: &GaussianField, truncation: usize) -> Result<TruncatedChaosSolution> {
    let grid = field.path_grid()?;
    let mut orders: Vec<Vec<f64>> = (0..=truncation).map(|_| Vec::with_capacity(grid.n_steps() + 1)).collect();
    for (k, &b_t) in field.values.iter().enumerate() {
        let terms = chaos_terms_1d(p.a, p.b, p.hurst.alpha, grid.point(k), b_t, truncation);
        for (o, x) in orders.iter_mut().zip(terms) {
            o.push(x);
        }
    }
    Ok(TruncatedChaosSolution::from_orders(orders))
}

/// `t_{k+1}^{2α} - t_k^{2α} - h^{2α}`: the Wick correction of step `k`.
pub fn euler_bracket(alpha: f64, grid: &TimeGrid, k: usize) -> f64 {
    let e = 2.0 * alpha;
    libm::pow(grid.point(k + 1), e) - libm::pow(grid.point(k), e) - libm::pow(grid.step(), e)
}

/// Wick–Euler scheme `X̂_{k+1} = X̂_k (1 + a ΔB_k - a²/2 [t_{k+1}^{2α} - t_k^{2α} - h^{2α}])`
/// at every node of the path grid.
pub fn wick_euler_1d(p: &ModelParams, field: &GaussianField) -> Result<Vec<f64>> {
    if p.b != 0.0 {
        return Err(Error::DomainError("the Wick-Euler scheme is defined for b = 0"));
    }
    let grid = field.path_grid()?;
    let alpha = p.hurst.alpha;
    let a = p.a;
    let mut out = Vec::with_capacity(grid.n_steps() + 1);
    let mut x = 1.0;
    out.push(x);
    for (k, w) in field.values.windows(2).enumerate() {
        x *= 1.0 + a * (w[1] - w[0]) - 0.5 * a * a * euler_bracket(alpha, &grid, k);
        out.push(x);
    }
    Ok(out)
}
