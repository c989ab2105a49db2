//! Scalar special functions: `h0`, its negativity interval, probabilists'
//! Hermite polynomials and the Volterra kernel of fractional Brownian motion.

use alloc::vec::Vec;

use crate::quadrature::{Endpoints, Quadrature};
use crate::stats::NeumaierSum;
use crate::{Error, Result};

/// `h0(x) = Σ x^n / (n!)^2`, i.e. `I0(2√x)` for `x ≥ 0` and `J0(2√-x)` for
/// `x < 0`.
pub fn h0(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Overflow(x));
    }
    let mut acc = NeumaierSum::new();
    let mut term = 1.0;
    acc.add(term);
    let ax = libm::fabs(x);
    let mut n = 0usize;
    loop {
        n += 1;
        let nf = n as f64;
        term *= x / (nf * nf);
        acc.add(term);
        let s = acc.value();
        if !s.is_finite() {
            return Err(Error::Overflow(x));
        }
        if nf > ax && (libm::fabs(term) < 1e-16 * libm::fabs(s) || term == 0.0) {
            return Ok(s);
        }
    }
}

/// `h0` for arguments known to be in range (grid kernels, small products).
#[inline]
pub(crate) fn h0_unchecked(x: f64) -> f64 {
    h0(x).unwrap_or(f64::NAN)
}

/// Open interval `(lo, hi)` of the negative axis on which `h0 < -depth`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NegativityInterval {
    pub lo: f64,
    pub hi: f64,
    pub depth: f64,
}

impl NegativityInterval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo < x && x < self.hi
    }
}

/// Location of the global minimum of `h0` on the negative axis.
pub const H0_ARGMIN: f64 = -3.670_493_774_064_131_5;

fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let r = 0.5 * (libm::sqrt(5.0) - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-12 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if (fm < 0.0) == (fa < 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Maximal interval around the global minimum of `h0` on which
/// `h0 < -delta`.
///
/// The first negative lobe lies between the first two zeros of
/// `J0(2√-x)`; on each side of the minimum `h0` is monotone up to the
/// neighbouring maxima, so plain bisection brackets both ends.
pub fn negativity_interval(delta: f64) -> Result<NegativityInterval> {
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::DomainError("delta must be a finite non-negative number"));
    }
    let g = |x: f64| h0_unchecked(x) + delta;
    let xmin = golden_min(h0_unchecked, -7.0, -2.0);
    if g(xmin) >= 0.0 {
        return Err(Error::NoInterval(delta));
    }
    // h0(-12.3) is the next local maximum (≈ 0.30), h0(0) = 1.
    let lo = bisect(g, -12.0, xmin);
    let hi = bisect(g, xmin, 0.0);
    Ok(NegativityInterval {
        lo,
        hi,
        depth: delta,
    })
}

/// Probabilists' Hermite polynomial `He_n(x)`.
pub fn hermite(n: usize, x: f64) -> f64 {
    let (mut h0, mut h1) = (1.0, x);
    if n == 0 {
        return h0;
    }
    for k in 1..n {
        let h2 = x * h1 - k as f64 * h0;
        h0 = h1;
        h1 = h2;
    }
    h1
}

/// `He_0(x), ..., He_n(x)`.
pub fn hermite_all(n: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(1.0);
    if n >= 1 {
        out.push(x);
    }
    for k in 1..n {
        let v = x * out[k] - k as f64 * out[k - 1];
        out.push(v);
    }
    out
}

/// Volterra kernel `K(t, s)` with `B_t = ∫_0^t K(t, s) dW_s`.
///
/// `K(t,s) = d (t-s)^c + d s^c (1/2-α) J(t/s - 1)` with `c = α - 1/2` and
/// `J(u) = ∫_0^u θ^(c-1) (1 - (1+θ)^c) dθ`. The constant `d` is fixed so
/// that `∫_0^t K(t,s)^2 ds = t^(2α)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VolterraKernel {
    alpha: f64,
    d_alpha: f64,
    quad: Quadrature,
}

/// Alias under which the calibrated kernel is usually passed around.
pub type VolterraKernelSpec = VolterraKernel;

impl VolterraKernel {
    pub fn new(alpha: f64) -> Result<Self> {
        Self::with_quadrature(alpha, Quadrature::new(20).with_tol(1e-13))
    }

    pub fn with_quadrature(alpha: f64, quad: Quadrature) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::HurstOutOfRange(alpha));
        }
        let mut k = Self {
            alpha,
            d_alpha: 1.0,
            quad,
        };
        let raw = k.square_integral(1.0)?;
        if !(raw > 0.0) || !raw.is_finite() {
            return Err(Error::CalibrationFailed(alpha));
        }
        k.d_alpha = 1.0 / libm::sqrt(raw);
        Ok(k)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn d_alpha(&self) -> f64 {
        self.d_alpha
    }

    pub fn quadrature_n(&self) -> usize {
        self.quad.rule().len()
    }

    fn j_integral(&self, u: f64) -> Result<f64> {
        let c = self.alpha - 0.5;
        let f = |th: f64| libm::pow(th, c - 1.0) * -libm::expm1(c * libm::log1p(th));
        let head = self.quad.adaptive(f, 0.0, u.min(1.0), Endpoints::left(c))?;
        if u <= 1.0 {
            return Ok(head);
        }
        let g = |w: f64| {
            let th = libm::exp(w);
            libm::pow(th, c) * -libm::expm1(c * libm::log1p(th))
        };
        let tail = self.quad.adaptive(g, 0.0, libm::log(u), Endpoints::SMOOTH)?;
        Ok(head + tail)
    }

    /// `F1(z) = d (1/2 - α) J(z - 1)` for `z > 1`.
    pub fn f1(&self, z: f64) -> Result<f64> {
        if !(z > 1.0) {
            return Err(Error::DomainError("F1 needs z > 1"));
        }
        self.f1_shifted(z - 1.0)
    }

    fn f1_shifted(&self, u: f64) -> Result<f64> {
        if self.alpha == 0.5 {
            return Ok(0.0);
        }
        Ok(self.d_alpha * (0.5 - self.alpha) * self.j_integral(u)?)
    }

    /// `K(t, s)` for `0 < s < t`.
    pub fn eval(&self, t: f64, s: f64) -> Result<f64> {
        if !(s > 0.0) || !(s < t) {
            return Err(Error::DomainError("kernel needs 0 < s < t"));
        }
        self.eval_gap(s, t - s)
    }

    /// `K(s + gap, s)`; pass the gap directly when it is known more
    /// accurately than `t - s`.
    pub fn eval_gap(&self, s: f64, gap: f64) -> Result<f64> {
        if !(s > 0.0) || !(gap > 0.0) {
            return Err(Error::DomainError("kernel needs 0 < s < t"));
        }
        let c = self.alpha - 0.5;
        Ok(self.d_alpha * libm::pow(gap, c) + libm::pow(s, c) * self.f1_shifted(gap / s)?)
    }

    /// `∂K/∂t (t, s) = d (α - 1/2) (t/s)^(α-1/2) (t-s)^(α-3/2)`.
    pub fn dk_dt(&self, t: f64, s: f64) -> Result<f64> {
        if !(s > 0.0) || !(s < t) {
            return Err(Error::DomainError("kernel needs 0 < s < t"));
        }
        Ok(self.dk_dt_gap(s, t - s))
    }

    /// `∂K/∂t (s + gap, s)`.
    pub fn dk_dt_gap(&self, s: f64, gap: f64) -> f64 {
        let c = self.alpha - 0.5;
        self.d_alpha * c * libm::pow(1.0 + gap / s, c) * libm::pow(gap, c - 1.0)
    }

    /// Endpoint exponent of `s ↦ K(t, s)^2` at both ends of `(0, t)`.
    pub(crate) fn square_exponent(&self) -> f64 {
        -libm::fabs(2.0 * self.alpha - 1.0)
    }

    /// `∫_0^t K(t, s)^2 ds`.
    pub fn square_integral(&self, t: f64) -> Result<f64> {
        self.covariance(t, t)
    }

    /// `∫_0^{min(t,u)} K(t, r) K(u, r) dr`, which should reproduce the fBm
    /// covariance.
    pub fn covariance(&self, t: f64, u: f64) -> Result<f64> {
        let (lo, hi) = if t <= u { (t, u) } else { (u, t) };
        if !(lo > 0.0) {
            return Ok(0.0);
        }
        let e = self.square_exponent();
        let q = self.quad.clone().with_tol(1e-11).with_panels(2, 1 << 9);
        let ends = if lo == hi {
            Endpoints::both(e, e)
        } else {
            Endpoints::both(e, (self.alpha - 0.5).min(0.0))
        };
        let spread = hi - lo;
        let mut err = None;
        let v = q.adaptive_gap(
            |r, _, gap| match (self.eval_gap(r, gap), self.eval_gap(r, gap + spread)) {
                (Ok(x), Ok(y)) => x * y,
                (Err(e1), _) | (_, Err(e1)) => {
                    err = Some(e1);
                    0.0
                }
            },
            0.0,
            lo,
            ends,
        );
        if let Some(e1) = err {
            return Err(e1);
        }
        v
    }
}

/// `K(t, s)` for a calibrated kernel.
pub fn volterra_kernel(spec: &VolterraKernelSpec, t: f64, s: f64) -> Result<f64> {
    spec.eval(t, s)
}

/// Constant `d` with `∫_0^1 K(1, s)^2 ds = 1`. The kernel is linear in `d`,
/// so the calibration equation has the explicit positive root
/// `d = (∫_0^1 K_1(1, s)^2 ds)^(-1/2)` where `K_1` is the kernel with `d = 1`.
pub fn calibrate_d_alpha(alpha: f64) -> Result<f64> {
    Ok(VolterraKernel::new(alpha)?.d_alpha())
}

/// `Γ(x)` via `libm`.
#[inline]
pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}
