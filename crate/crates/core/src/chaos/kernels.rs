//! Explicit chaos kernels of the linear equations.

use alloc::vec::Vec;

use crate::special::h0_unchecked;

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `f_n(t_1..t_n, t) = aⁿ/n! e^{bt} 1_{[0,t]}^{⊗n}` of the one-parameter
/// equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChaosKernel1D {
    pub order: usize,
    pub a: f64,
    pub b: f64,
    pub t: f64,
}

impl ChaosKernel1D {
    pub fn eval(&self, args: &[f64]) -> f64 {
        kernel_1d_eval(self.order, self.a, self.b, self.t, args)
    }
}

pub fn kernel_1d_eval(n: usize, a: f64, b: f64, t: f64, args: &[f64]) -> f64 {
    debug_assert_eq!(args.len(), n);
    if args.iter().any(|&x| !(0.0..=t).contains(&x)) {
        return 0.0;
    }
    libm::pow(a, n as f64) / factorial(n) * libm::exp(b * t)
}

/// Order-`n` kernel of the sheet equation evaluated at `z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SheetChaosKernel {
    pub order: usize,
    pub a: f64,
    pub b: f64,
    pub z: (f64, f64),
}

impl SheetChaosKernel {
    pub fn eval(&self, args: &[(f64, f64)]) -> f64 {
        kernel_sheet_eval(self.order, self.a, self.b, self.z, args)
    }
}

/// Sorts `args` into a chain of the quadrant order; `None` if two points are
/// incomparable.
pub fn sort_chain(args: &[(f64, f64)]) -> Option<Vec<(f64, f64)>> {
    let mut pts = args.to_vec();
    pts.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.total_cmp(&q.1)));
    pts.windows(2).all(|w| w[0].1 <= w[1].1).then_some(pts)
}

/// Chain kernel `aⁿ/n! Π h0(b Δs_j Δt_j) h0(b (s - s_n)(t - t_n))` on ordered
/// chains inside `[0, z]`, zero elsewhere.
///
/// At `b = 0` every `h0` factor is one and the kernel is
/// `aⁿ/n! 1_{chain} 1_{[0,z]}^{⊗n}`.
pub fn kernel_sheet_eval(n: usize, a: f64, b: f64, z: (f64, f64), args: &[(f64, f64)]) -> f64 {
    debug_assert_eq!(args.len(), n);
    if args.iter().any(|&(s, t)| !(0.0..=z.0).contains(&s) || !(0.0..=z.1).contains(&t)) {
        return 0.0;
    }
    let Some(chain) = sort_chain(args) else {
        return 0.0;
    };
    let mut prev = (0.0, 0.0);
    let mut w = libm::pow(a, n as f64) / factorial(n);
    for &p in chain.iter().chain(core::iter::once(&z)) {
        w *= h0_unchecked(b * (p.0 - prev.0) * (p.1 - prev.1));
        prev = p;
    }
    w
}

/// `aⁿ/n! Σ_i 1_{[0,ρ_i]}^{⊗n-1}(ρ̂_i) 1_{[0,z]}(ρ_i)`: the kernel obtained
/// by treating each lower-order kernel as a full indicator.
///
/// Agrees with [`kernel_sheet_eval`] at `b = 0` for `n ≤ 2`. From `n = 3`
/// on it is also positive on configurations with two incomparable points
/// below a third.
pub fn kernel_sheet_star(n: usize, a: f64, z: (f64, f64), args: &[(f64, f64)]) -> f64 {
    debug_assert_eq!(args.len(), n);
    if n == 0 {
        return 1.0;
    }
    let below = |p: (f64, f64), q: (f64, f64)| p.0 <= q.0 && p.1 <= q.1;
    let count = (0..n)
        .filter(|&i| {
            below(args[i], z) && (0..n).all(|j| j == i || below(args[j], args[i]))
        })
        .count();
    libm::pow(a, n as f64) / factorial(n) * count as f64
}
