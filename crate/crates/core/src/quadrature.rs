//! Gauss-Legendre quadrature with power-graded substitutions for integrands
//! that behave like `(x - a)^e` or `(b - x)^e` at an endpoint.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::stats::NeumaierSum;
use crate::{Error, Result};

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = alloc::vec![0.0; n];
        let mut weights = alloc::vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = libm::cos(PI * (i as f64 + 0.75) / (nf + 0.5));
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if libm::fabs(dx) < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (c + h * x, h * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64) -> f64 {
        let mut acc = NeumaierSum::new();
        for (x, w) in self.mapped(a, b) {
            acc.add(w * f(x));
        }
        acc.value()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Endpoint behaviour of an integrand: `Some(e)` means it scales like
/// `distance^e` near that endpoint, `None` means it is smooth there.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Endpoints {
    pub left: Option<f64>,
    pub right: Option<f64>,
}

impl Endpoints {
    pub const SMOOTH: Self = Self {
        left: None,
        right: None,
    };

    pub fn left(e: f64) -> Self {
        Self {
            left: Some(e),
            right: None,
        }
    }

    pub fn right(e: f64) -> Self {
        Self {
            left: None,
            right: Some(e),
        }
    }

    pub fn both(l: f64, r: f64) -> Self {
        Self {
            left: Some(l),
            right: Some(r),
        }
    }
}

const MAX_GRADING: f64 = 40.0;

/// Integer grading power `p` with `p (e + 1) ≥ 6`, so the graded integrand
/// `u^(p(e+1)-1)` and the Jacobian `u^(p-1)` are both smooth enough.
pub fn grading_power(exponent: Option<f64>) -> f64 {
    match exponent {
        Some(e) if e > -1.0 => libm::ceil(6.0 / (e + 1.0) - 1e-9).clamp(1.0, MAX_GRADING),
        Some(_) => MAX_GRADING,
        None => 1.0,
    }
}

/// Composite, endpoint-graded Gauss-Legendre integrator.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature {
    rule: GaussLegendre,
    pub tol: f64,
    pub min_panels: usize,
    pub max_panels: usize,
    /// When false the grading substitutions are skipped. Only useful to show
    /// that results degrade without them.
    pub graded: bool,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self::new(20)
    }
}

impl Quadrature {
    pub fn new(order: usize) -> Self {
        Self {
            rule: GaussLegendre::new(order),
            tol: 1e-12,
            min_panels: 1,
            max_panels: 1 << 10,
            graded: true,
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_panels(mut self, min_panels: usize, max_panels: usize) -> Self {
        self.min_panels = min_panels.max(1);
        self.max_panels = max_panels.max(self.min_panels);
        self
    }

    pub fn ungraded(mut self) -> Self {
        self.graded = false;
        self
    }

    pub fn rule(&self) -> &GaussLegendre {
        &self.rule
    }

    /// Integral over `[a, b]` with `panels` equal panels per graded half.
    pub fn fixed<F: FnMut(f64) -> f64>(
        &self,
        mut f: F,
        a: f64,
        b: f64,
        ends: Endpoints,
        panels: usize,
    ) -> f64 {
        self.fixed_gap(|x, _, _| f(x), a, b, ends, panels)
    }

    /// Like [`Quadrature::fixed`], but the integrand also receives the
    /// distances `x - a` and `b - x`, computed without cancellation at the
    /// graded end.
    pub fn fixed_gap<F: FnMut(f64, f64, f64) -> f64>(
        &self,
        mut f: F,
        a: f64,
        b: f64,
        ends: Endpoints,
        panels: usize,
    ) -> f64 {
        if !(b > a) {
            return 0.0;
        }
        let (pl, pr) = if self.graded {
            (grading_power(ends.left), grading_power(ends.right))
        } else {
            (1.0, 1.0)
        };
        let w = b - a;
        let mut acc = NeumaierSum::new();
        match (pl > 1.0, pr > 1.0) {
            (_, false) => self.graded_piece(&mut f, a, b, w, pl, false, panels, &mut acc),
            (false, true) => self.graded_piece(&mut f, a, b, w, pr, true, panels, &mut acc),
            (true, true) => {
                let half = 0.5 * w;
                self.graded_piece(&mut f, a, b, half, pl, false, panels, &mut acc);
                self.graded_piece(&mut f, a, b, half, pr, true, panels, &mut acc);
            }
        }
        acc.value()
    }

    /// Integrates over the piece of length `len` attached to `a` (or to `b`
    /// when `from_right`), with nodes at distance `len * u^p` from it.
    #[allow(clippy::too_many_arguments)]
    fn graded_piece<F: FnMut(f64, f64, f64) -> f64>(
        &self,
        f: &mut F,
        a: f64,
        b: f64,
        len: f64,
        p: f64,
        from_right: bool,
        panels: usize,
        acc: &mut NeumaierSum,
    ) {
        let width = b - a;
        let h = 1.0 / panels as f64;
        for k in 0..panels {
            let (u0, u1) = (k as f64 * h, (k + 1) as f64 * h);
            for (u, wt) in self.rule.mapped(u0, u1) {
                let off = len * libm::pow(u, p);
                if off == 0.0 {
                    continue;
                }
                let jac = len * p * libm::pow(u, p - 1.0);
                let v = if from_right {
                    f(b - off, width - off, off)
                } else {
                    f(a + off, off, width - off)
                };
                acc.add(wt * jac * v);
            }
        }
    }

    /// Doubles the panel count until two successive values agree to
    /// `tol * max(1, |I|)`.
    pub fn adaptive<F: FnMut(f64) -> f64>(
        &self,
        mut f: F,
        a: f64,
        b: f64,
        ends: Endpoints,
    ) -> Result<f64> {
        self.adaptive_gap(|x, _, _| f(x), a, b, ends)
    }

    /// Adaptive version of [`Quadrature::fixed_gap`].
    pub fn adaptive_gap<F: FnMut(f64, f64, f64) -> f64>(
        &self,
        mut f: F,
        a: f64,
        b: f64,
        ends: Endpoints,
    ) -> Result<f64> {
        let mut panels = self.min_panels;
        let mut prev = self.fixed_gap(&mut f, a, b, ends, panels);
        let mut last_change = f64::INFINITY;
        while panels < self.max_panels {
            panels *= 2;
            let cur = self.fixed_gap(&mut f, a, b, ends, panels);
            if !cur.is_finite() {
                return Err(Error::QuadratureDiverged(cur));
            }
            last_change = libm::fabs(cur - prev);
            if last_change <= self.tol * libm::fabs(cur).max(1.0) {
                return Ok(cur);
            }
            prev = cur;
        }
        Err(Error::QuadratureDiverged(last_change))
    }

    /// Adaptive integral over consecutive pieces `[x_k, x_{k+1}]`, each with
    /// its own endpoint behaviour.
    pub fn adaptive_pieces<F: FnMut(f64) -> f64>(
        &self,
        mut f: F,
        pieces: &[(f64, f64, Endpoints)],
    ) -> Result<f64> {
        let mut acc = NeumaierSum::new();
        for &(a, b, ends) in pieces {
            acc.add(self.adaptive(&mut f, a, b, ends)?);
        }
        Ok(acc.value())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        for n in 1..12 {
            let gl = GaussLegendre::new(n);
            let ws: f64 = gl.weights().iter().sum();
            assert!((ws - 2.0).abs() < 1e-14, "n={n}");
            for k in 0..2 * n {
                let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
                let got = gl.integrate(|x| libm::pow(x, k as f64), -1.0, 1.0);
                assert!((got - exact).abs() < 1e-13, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn nodes_are_sorted_and_symmetric() {
        let gl = GaussLegendre::new(17);
        for w in gl.nodes().windows(2) {
            assert!(w[0] < w[1]);
        }
        for i in 0..17 {
            assert!((gl.nodes()[i] + gl.nodes()[16 - i]).abs() < 1e-15);
        }
    }

    #[test]
    fn graded_rule_handles_endpoint_singularities() {
        let q = Quadrature::default();
        for &e in &[-0.9, -0.5, -0.2, 0.3] {
            let exact = 1.0 / (e + 1.0);
            let l = q.adaptive(|x| libm::pow(x, e), 0.0, 1.0, Endpoints::left(e)).unwrap();
            let r = q
                .adaptive_gap(|_, _, db| libm::pow(db, e), 0.0, 1.0, Endpoints::right(e))
                .unwrap();
            assert!((l - exact).abs() < 1e-9 * exact, "e={e} left {l}");
            assert!((r - exact).abs() < 1e-9 * exact, "e={e} right {r}");
        }
        // Beta(0.6, 0.3)
        let both = q
            .adaptive_gap(
                |_, da, db| libm::pow(da, -0.4) * libm::pow(db, -0.7),
                0.0,
                1.0,
                Endpoints::both(-0.4, -0.7),
            )
            .unwrap();
        let beta = libm::tgamma(0.6) * libm::tgamma(0.3) / libm::tgamma(0.9);
        assert!((both - beta).abs() < 1e-8 * beta);
    }

    #[test]
    fn ungraded_rule_is_visibly_worse() {
        let q = Quadrature::default();
        let f = |x: f64| libm::pow(x, -0.7);
        let g = q.fixed(f, 0.0, 1.0, Endpoints::left(-0.7), 4);
        let u = q.clone().ungraded().fixed(f, 0.0, 1.0, Endpoints::left(-0.7), 4);
        let exact = 1.0 / 0.3;
        assert!((g - exact).abs() < 1e-6);
        assert!((u - exact).abs() > 1e-2);
    }

    #[test]
    fn adaptive_reports_divergence() {
        let q = Quadrature::default().with_panels(1, 8);
        let r = q.adaptive(|x| 1.0 / x, 0.0, 1.0, Endpoints::SMOOTH);
        assert!(matches!(r, Err(Error::QuadratureDiverged(_))));
    }
}
