//! Discrete multiple Wiener–Itô integrals over the cells of a path or sheet
//! grid.
//!
//! A kernel is evaluated at cell midpoints and summed over tuples of
//! distinct cells. Two schemes are available:
//!
//! * [`IntegralScheme::Wick`]: `Σ f(c) :ΔW_{c_1} ⋯ ΔW_{c_n}:` with the Wick
//!   product taken under the exact increment covariance. This is the
//!   multiple integral of the piecewise-constant kernel.
//! * [`IntegralScheme::WhiteNoise`]: the kernel is pushed through the
//!   increment transfer matrix (`ΔW = M z`) in every coordinate and summed
//!   against distinct products of the underlying standard normals.

use alloc::vec;
use alloc::vec::Vec;

use crate::fields::{factor_covariance, increment_cov, FieldGrid, GaussianField};
use crate::linalg::Matrix;
use crate::{Error, HurstPair, Result};

/// Largest supported chaos order.
pub const MAX_ORDER: usize = 4;
/// Largest number of kernel tuples evaluated by the exhaustive schemes.
pub const MAX_TUPLES: usize = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IntegralScheme {
    #[default]
    Wick,
    WhiteNoise,
}

/// Cell midpoints, increment covariance and transfer matrix of a grid.
///
/// Path cells have midpoints `(t_k, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSpace {
    pub grid: FieldGrid,
    pub points: Vec<(f64, f64)>,
    pub cov: Matrix,
    pub transfer: Matrix,
}

fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (br, bc) = (b.rows(), b.cols());
    Matrix::from_fn(a.rows() * br, a.cols() * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// Covariance of the increments over the cells of one axis.
pub fn axis_increment_cov(hurst: f64, grid: &crate::TimeGrid) -> Matrix {
    let n = grid.n_steps();
    Matrix::from_fn(n, n, |k, l| increment_cov(hurst, grid, k, l))
}

impl CellSpace {
    pub fn new(grid: FieldGrid, hurst: HurstPair) -> Result<Self> {
        match grid {
            FieldGrid::Path(g) => {
                if hurst.is_sheet() {
                    return Err(Error::FieldMismatch("sheet Hurst pair for a path grid"));
                }
                let factor = factor_covariance(hurst.alpha, g)?;
                Ok(Self {
                    grid,
                    points: (0..g.n_steps()).map(|k| (g.midpoint(k), 0.0)).collect(),
                    cov: axis_increment_cov(hurst.alpha, &g),
                    transfer: factor.increment_transfer(),
                })
            }
            FieldGrid::Sheet(g) => {
                let beta = hurst
                    .beta
                    .ok_or(Error::FieldMismatch("path Hurst parameter for a sheet grid"))?;
                let ms = factor_covariance(hurst.alpha, g.s_axis)?.increment_transfer();
                let mt = factor_covariance(beta, g.t_axis)?.increment_transfer();
                Ok(Self {
                    grid,
                    points: (0..g.n_cells()).map(|c| g.cell_midpoint(c)).collect(),
                    cov: kron(
                        &axis_increment_cov(hurst.alpha, &g.s_axis),
                        &axis_increment_cov(beta, &g.t_axis),
                    ),
                    transfer: kron(&ms, &mt),
                })
            }
        }
    }

    pub fn n_cells(&self) -> usize {
        self.points.len()
    }
}

/// Increments of `field` over its cells: path differences or rectangular
/// sheet increments (row-major, see [`crate::Grid2D::cell`]).
pub fn cell_increments(field: &GaussianField) -> Vec<f64> {
    match field.grid {
        FieldGrid::Path(_) => field.values.windows(2).map(|w| w[1] - w[0]).collect(),
        FieldGrid::Sheet(g) => {
            let v = |i, j| field.values[g.node(i, j)];
            let mut out = Vec::with_capacity(g.n_cells());
            for i in 0..g.n_s() {
                for j in 0..g.n_t() {
                    out.push(v(i + 1, j + 1) - v(i, j + 1) - v(i + 1, j) + v(i, j));
                }
            }
            out
        }
    }
}

/// `:x_{i_1} ⋯ x_{i_n}:` for a centred Gaussian vector with covariance `cov`.
pub fn wick_product(idx: &[usize], x: &[f64], cov: &Matrix) -> f64 {
    let Some((&first, rest)) = idx.split_first() else {
        return 1.0;
    };
    let mut out = x[first] * wick_product(rest, x, cov);
    let mut reduced = [0usize; MAX_ORDER];
    for j in 0..rest.len() {
        let c = cov[(first, rest[j])];
        if c == 0.0 {
            continue;
        }
        let mut m = 0;
        for (k, &r) in rest.iter().enumerate() {
            if k != j {
                reduced[m] = r;
                m += 1;
            }
        }
        out -= c * wick_product(&reduced[..m], x, cov);
    }
    out
}

fn check_order(n: usize, cells: usize) -> Result<usize> {
    if n > MAX_ORDER {
        return Err(Error::OrderTooHigh(n));
    }
    let tuples = cells.checked_pow(n as u32).filter(|&t| t <= MAX_TUPLES);
    tuples.ok_or(Error::GridTooLarge(cells))
}

/// Calls `visit` with every tuple of `n` distinct indices below `cells`.
fn for_each_distinct(n: usize, cells: usize, mut visit: impl FnMut(&[usize])) {
    let mut idx = [0usize; MAX_ORDER];
    let total = cells.pow(n as u32);
    'tuples: for flat in 0..total {
        let mut r = flat;
        for slot in idx[..n].iter_mut().rev() {
            *slot = r % cells;
            r /= cells;
        }
        for i in 0..n {
            for j in 0..i {
                if idx[i] == idx[j] {
                    continue 'tuples;
                }
            }
        }
        visit(&idx[..n]);
    }
}

/// Discrete `n`-th multiple integral of `kernel` against `field`, Wick scheme.
pub fn discrete_multiple_integral<F>(kernel: F, n: usize, field: &GaussianField, hurst: HurstPair) -> Result<f64>
where
    F: Fn(&[(f64, f64)]) -> f64,
{
    let space = CellSpace::new(field.grid, hurst)?;
    discrete_multiple_integral_with(&space, kernel, n, field, IntegralScheme::Wick)
}

pub fn discrete_multiple_integral_with<F>(
    space: &CellSpace,
    kernel: F,
    n: usize,
    field: &GaussianField,
    scheme: IntegralScheme,
) -> Result<f64>
where
    F: Fn(&[(f64, f64)]) -> f64,
{
    let cells = space.n_cells();
    if field.grid != space.grid {
        return Err(Error::FieldMismatch("field grid differs from the cell space"));
    }
    check_order(n, cells)?;
    if n == 0 {
        return Ok(kernel(&[]));
    }
    let mut pts = [(0.0, 0.0); MAX_ORDER];
    let mut eval = |idx: &[usize]| {
        for (p, &c) in pts.iter_mut().zip(idx) {
            *p = space.points[c];
        }
        kernel(&pts[..idx.len()])
    };
    match scheme {
        IntegralScheme::Wick => {
            let x = cell_increments(field);
            let mut acc = crate::stats::NeumaierSum::new();
            for_each_distinct(n, cells, |idx| {
                let f = eval(idx);
                if f != 0.0 {
                    acc.add(f * wick_product(idx, &x, &space.cov));
                }
            });
            Ok(acc.value())
        }
        IntegralScheme::WhiteNoise => {
            let mut tensor = vec![0.0; cells.pow(n as u32)];
            let flat = |idx: &[usize]| idx.iter().fold(0, |acc, &i| acc * cells + i);
            for_each_distinct(n, cells, |idx| tensor[flat(idx)] = eval(idx));
            for mode in 0..n {
                tensor = contract_mode(&tensor, cells, n, mode, &space.transfer);
            }
            let z = &field.white_noise;
            let mut acc = crate::stats::NeumaierSum::new();
            for_each_distinct(n, cells, |idx| {
                let g = tensor[flat(idx)];
                if g != 0.0 {
                    acc.add(g * idx.iter().map(|&k| z[k]).product::<f64>());
                }
            });
            Ok(acc.value())
        }
    }
}

/// `E[I_n(f)²] = n! ⟨f, C^{⊗n} f⟩` of the Wick-scheme integral of a
/// symmetric kernel, with `C` the increment covariance.
pub fn integral_variance<F>(space: &CellSpace, kernel: F, n: usize) -> Result<f64>
where
    F: Fn(&[(f64, f64)]) -> f64,
{
    let cells = space.n_cells();
    check_order(n, cells)?;
    if n == 0 {
        let k = kernel(&[]);
        return Ok(k * k);
    }
    let mut tensor = vec![0.0; cells.pow(n as u32)];
    let mut pts = [(0.0, 0.0); MAX_ORDER];
    for_each_distinct(n, cells, |idx| {
        for (p, &c) in pts.iter_mut().zip(idx) {
            *p = space.points[c];
        }
        tensor[idx.iter().fold(0, |acc, &i| acc * cells + i)] = kernel(&pts[..n]);
    });
    let mut image = tensor.clone();
    for mode in 0..n {
        image = contract_mode(&image, cells, n, mode, &space.cov);
    }
    let fact: f64 = (1..=n).map(|k| k as f64).product();
    Ok(fact * tensor.iter().zip(&image).map(|(a, b)| a * b).sum::<f64>())
}

/// `out[.., k, ..] = Σ_c t[.., c, ..] M[c][k]` along axis `mode`.
fn contract_mode(t: &[f64], cells: usize, n: usize, mode: usize, m: &Matrix) -> Vec<f64> {
    let right = cells.pow((n - 1 - mode) as u32);
    let left = cells.pow(mode as u32);
    let mut out = vec![0.0; t.len()];
    for l in 0..left {
        for c in 0..cells {
            let src = &t[(l * cells + c) * right..(l * cells + c + 1) * right];
            if src.iter().all(|&v| v == 0.0) {
                continue;
            }
            for k in 0..cells {
                let w = m[(c, k)];
                if w == 0.0 {
                    continue;
                }
                let dst = &mut out[(l * cells + k) * right..(l * cells + k + 1) * right];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += w * s;
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{fbm_from_noise, SheetFactor};
    use crate::stats::covariance_with_se;
    use crate::{Grid2D, RngStreamSpec, TimeGrid};

    fn brownian_two_cells() -> GaussianField {
        let g = TimeGrid::new(2, 1.0).unwrap();
        let f = factor_covariance(0.5, g).unwrap();
        let h = libm::sqrt(0.5);
        fbm_from_noise(&f, vec![0.5 / h, -0.3 / h])
    }

    #[test]
    fn spec_examples() {
        let field = brownian_two_cells();
        let bm = HurstPair::path(0.5).unwrap();
        for scheme in [IntegralScheme::Wick, IntegralScheme::WhiteNoise] {
            let space = CellSpace::new(field.grid, bm).unwrap();
            let i0 = discrete_multiple_integral_with(&space, |_| 2.5, 0, &field, scheme).unwrap();
            assert_eq!(i0, 2.5);
            let i1 = discrete_multiple_integral_with(&space, |p| (p[0].0 <= 1.0) as u8 as f64, 1, &field, scheme).unwrap();
            assert!((i1 - 0.2).abs() < 1e-12);
            let i2 = discrete_multiple_integral_with(&space, |_| 1.0, 2, &field, scheme).unwrap();
            assert!((i2 + 0.3).abs() < 1e-12, "{scheme:?}: {i2}");
        }
    }

    #[test]
    fn order_guard() {
        let field = brownian_two_cells();
        let bm = HurstPair::path(0.5).unwrap();
        assert_eq!(discrete_multiple_integral(|_| 1.0, 5, &field, bm), Err(Error::OrderTooHigh(5)));
    }

    #[test]
    fn wick_products_of_low_order() {
        let cov = Matrix::from_rows(3, 3, vec![2.0, 0.5, 0.1, 0.5, 1.0, 0.3, 0.1, 0.3, 1.5]);
        let x = [0.7, -1.1, 0.4];
        assert_eq!(wick_product(&[1], &x, &cov), -1.1);
        assert!((wick_product(&[0, 1], &x, &cov) - (0.7 * -1.1 - 0.5)).abs() < 1e-15);
        let want = 0.7 * -1.1 * 0.4 - 0.5 * 0.4 - 0.1 * -1.1 - 0.3 * 0.7;
        assert!((wick_product(&[0, 1, 2], &x, &cov) - want).abs() < 1e-15);
        let want4 = {
            let (a, b, c, d) = (0, 1, 2, 0);
            let p = |i: usize, j: usize| cov[(i, j)];
            x[a] * x[b] * x[c] * x[d] - p(a, b) * x[c] * x[d] - p(a, c) * x[b] * x[d] - p(a, d) * x[b] * x[c]
                - p(b, c) * x[a] * x[d]
                - p(b, d) * x[a] * x[c]
                - p(c, d) * x[a] * x[b]
                + p(a, b) * p(c, d)
                + p(a, c) * p(b, d)
                + p(a, d) * p(b, c)
        };
        assert!((wick_product(&[0, 1, 2, 0], &x, &cov) - want4).abs() < 1e-14);
    }

    #[test]
    fn schemes_agree_for_brownian_sheets() {
        let g = Grid2D::new(3, 2, 1.0).unwrap();
        let hp = HurstPair::sheet(0.5, 0.5).unwrap();
        let factor = SheetFactor::new(0.5, 0.5, g).unwrap();
        let field = factor.sample(RngStreamSpec::new(5, 0));
        let space = CellSpace::new(field.grid, hp).unwrap();
        let k = |p: &[(f64, f64)]| p.iter().map(|q| 1.0 + q.0 - q.1 * q.0).product::<f64>();
        for n in 1..=3 {
            let w = discrete_multiple_integral_with(&space, k, n, &field, IntegralScheme::Wick).unwrap();
            let z = discrete_multiple_integral_with(&space, k, n, &field, IntegralScheme::WhiteNoise).unwrap();
            assert!((w - z).abs() < 1e-10, "n = {n}: {w} vs {z}");
        }
    }

    #[test]
    fn distinct_orders_are_uncorrelated() {
        let g = TimeGrid::new(5, 1.0).unwrap();
        let hp = HurstPair::path(0.3).unwrap();
        let factor = factor_covariance(0.3, g).unwrap();
        let space = CellSpace::new(crate::fields::FieldGrid::Path(g), hp).unwrap();
        let k = |p: &[(f64, f64)]| p.iter().map(|q| 1.0 + q.0).product::<f64>();
        for scheme in [IntegralScheme::Wick, IntegralScheme::WhiteNoise] {
            let mut draws = vec![Vec::new(); 3];
            for r in 0..10_000 {
                let field = crate::fields::sample_fbm(&factor, RngStreamSpec::new(17, r));
                for (n, d) in draws.iter_mut().enumerate() {
                    d.push(discrete_multiple_integral_with(&space, k, n + 1, &field, scheme).unwrap());
                }
            }
            for n in 0..3 {
                for m in 0..n {
                    let (c, se) = covariance_with_se(&draws[n], &draws[m]);
                    assert!(c.abs() < 4.0 * se, "{scheme:?} ({n},{m}): {c} ± {se}");
                }
            }
        }
    }
}
