//! Compensated summation and small sample statistics.

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if libm::fabs(self.sum) >= libm::fabs(x) {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl Extend<f64> for NeumaierSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for x in iter {
            self.add(x);
        }
    }
}

pub fn sum(xs: &[f64]) -> f64 {
    let mut acc = NeumaierSum::new();
    acc.extend(xs.iter().copied());
    acc.value()
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    sum(xs) / xs.len() as f64
}

/// Unbiased sample standard deviation (two-pass).
pub fn sample_std(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let mut acc = NeumaierSum::new();
    acc.extend(xs.iter().map(|&x| (x - m) * (x - m)));
    libm::sqrt(acc.value() / (n - 1) as f64)
}

/// Sample covariance of paired samples and the standard error of that
/// estimate (the standard error of the mean of the centred products).
pub fn covariance_with_se(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len().min(y.len());
    if n < 2 {
        return (0.0, 0.0);
    }
    let (mx, my) = (mean(&x[..n]), mean(&y[..n]));
    let mut prods = alloc::vec::Vec::with_capacity(n);
    prods.extend((0..n).map(|i| (x[i] - mx) * (y[i] - my)));
    let c = sum(&prods) / (n - 1) as f64;
    (c, sample_std(&prods) / libm::sqrt(n as f64))
}

/// Lower end of the Wilson score interval for `successes` out of `n`.
pub fn wilson_lower(successes: usize, n: usize, z: f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let centre = p + z2 / (2.0 * nf);
    let half = z * libm::sqrt(p * (1.0 - p) / nf + z2 / (4.0 * nf * nf));
    ((centre - half) / (1.0 + z2 / nf)).max(0.0)
}

/// Least-squares slope of `y` against `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let mut num = NeumaierSum::new();
    let mut den = NeumaierSum::new();
    for (&a, &b) in x.iter().zip(y) {
        num.add((a - mx) * (b - my));
        den.add((a - mx) * (a - mx));
    }
    num.value() / den.value()
}
