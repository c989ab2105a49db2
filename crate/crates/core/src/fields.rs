//! Exact-in-law samplers for fBm paths and fractional Brownian sheets.
//!
//! A path on `t_1..t_n` is `B = L z` with `L Lᵀ = [R(t_i, t_j)]`; a sheet is
//! `W = L_α Z L_βᵀ`. Both keep the standard normal draws, so chaos functionals
//! can be evaluated against the same noise that produced the field.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{cholesky, solve_lower, Matrix};
use crate::quadrature::{Endpoints, Quadrature};
use crate::special::VolterraKernel;
use crate::{Error, Grid2D, Result, RngStreamSpec, TimeGrid};

/// `R(s, u) = (s^{2α} + u^{2α} - |s-u|^{2α}) / 2`.
pub fn cov_fbm(alpha: f64, s: f64, u: f64) -> f64 {
    let h = 2.0 * alpha;
    0.5 * (libm::pow(s, h) + libm::pow(u, h) - libm::pow(libm::fabs(s - u), h))
}

/// Product covariance `R^α(s, u) R^β(t, v)` of the sheet.
pub fn cov_sheet(alpha: f64, beta: f64, s: f64, t: f64, u: f64, v: f64) -> f64 {
    cov_fbm(alpha, s, u) * cov_fbm(beta, t, v)
}

/// Covariance of the increments over cells `k` and `l` of `grid`.
pub fn increment_cov(alpha: f64, grid: &TimeGrid, k: usize, l: usize) -> f64 {
    let p = |i| grid.point(i);
    cov_fbm(alpha, p(k + 1), p(l + 1)) - cov_fbm(alpha, p(k + 1), p(l)) - cov_fbm(alpha, p(k), p(l + 1))
        + cov_fbm(alpha, p(k), p(l))
}

/// Cholesky factor of `[R(t_i, t_j)]_{i,j=1..n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceFactor {
    pub alpha: f64,
    pub grid: TimeGrid,
    pub lower_triangular: Matrix,
}

pub fn factor_covariance(alpha: f64, grid: TimeGrid) -> Result<CovarianceFactor> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::HurstOutOfRange(alpha));
    }
    let n = grid.n_steps();
    let cov = Matrix::from_fn(n, n, |i, j| cov_fbm(alpha, grid.point(i + 1), grid.point(j + 1)));
    Ok(CovarianceFactor {
        alpha,
        grid,
        lower_triangular: cholesky(&cov)?,
    })
}

impl CovarianceFactor {
    pub fn dim(&self) -> usize {
        self.grid.n_steps()
    }

    /// Path values at `t_0..t_n` for the given noise vector.
    pub fn path_from_noise(&self, z: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(z.len() + 1);
        out.push(0.0);
        out.extend(self.lower_triangular.matvec(z));
        out
    }

    /// `M` with `ΔB_k = Σ_j M[k][j] z_j`; lower triangular.
    pub fn increment_transfer(&self) -> Matrix {
        let l = &self.lower_triangular;
        let n = self.dim();
        Matrix::from_fn(n, n, |k, j| {
            if k == 0 {
                l[(0, j)]
            } else {
                l[(k, j)] - l[(k - 1, j)]
            }
        })
    }

    /// Entrywise distance between `L Lᵀ` and the exact covariance.
    pub fn reconstruction_error(&self) -> f64 {
        let l = &self.lower_triangular;
        let rebuilt = l.matmul(&l.transpose());
        let g = self.grid;
        let exact = Matrix::from_fn(self.dim(), self.dim(), |i, j| {
            cov_fbm(self.alpha, g.point(i + 1), g.point(j + 1))
        });
        rebuilt.max_abs_diff(&exact)
    }
}

/// Grid a [`GaussianField`] lives on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldGrid {
    Path(TimeGrid),
    Sheet(Grid2D),
}

/// A sampled path or sheet together with the standard normals behind it.
///
/// Path values are indexed by node `k = 0..=n`. Sheet values are row-major
/// over nodes (see [`Grid2D::node`]) and the noise is row-major over cells
/// (see [`Grid2D::cell`]).
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianField {
    pub grid: FieldGrid,
    pub values: Vec<f64>,
    pub white_noise: Vec<f64>,
}

impl GaussianField {
    pub fn path_grid(&self) -> Result<TimeGrid> {
        match self.grid {
            FieldGrid::Path(g) => Ok(g),
            FieldGrid::Sheet(_) => Err(Error::FieldMismatch("expected a path, got a sheet")),
        }
    }

    pub fn sheet_grid(&self) -> Result<Grid2D> {
        match self.grid {
            FieldGrid::Sheet(g) => Ok(g),
            FieldGrid::Path(_) => Err(Error::FieldMismatch("expected a sheet, got a path")),
        }
    }

    /// Sheet value at node `(i, j)`.
    pub fn sheet_value(&self, i: usize, j: usize) -> Result<f64> {
        let g = self.sheet_grid()?;
        Ok(self.values[g.node(i, j)])
    }

    /// Value at the far corner (`B_T` or `W_{T,T}`).
    pub fn terminal(&self) -> f64 {
        *self.values.last().unwrap_or(&0.0)
    }
}

pub(crate) fn standard_normals<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Samples one fBm path using the stream `rng`.
pub fn sample_fbm(factor: &CovarianceFactor, rng: RngStreamSpec) -> GaussianField {
    let z = standard_normals(&mut rng.rng(), factor.dim());
    fbm_from_noise(factor, z)
}

pub fn fbm_from_noise(factor: &CovarianceFactor, z: Vec<f64>) -> GaussianField {
    assert_eq!(z.len(), factor.dim(), "noise length must equal the cell count");
    GaussianField {
        grid: FieldGrid::Path(factor.grid),
        values: factor.path_from_noise(&z),
        white_noise: z,
    }
}

/// Pair of per-axis factors of the sheet covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct SheetFactor {
    pub grid: Grid2D,
    pub s_factor: CovarianceFactor,
    pub t_factor: CovarianceFactor,
}

impl SheetFactor {
    pub fn new(alpha: f64, beta: f64, grid: Grid2D) -> Result<Self> {
        Ok(Self {
            grid,
            s_factor: factor_covariance(alpha, grid.s_axis)?,
            t_factor: factor_covariance(beta, grid.t_axis)?,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.s_factor.alpha
    }

    pub fn beta(&self) -> f64 {
        self.t_factor.alpha
    }

    pub fn sample(&self, rng: RngStreamSpec) -> GaussianField {
        let z = standard_normals(&mut rng.rng(), self.grid.n_cells());
        self.from_noise(z)
    }

    /// `V = L_α Z L_βᵀ` padded with the zero first row and column.
    pub fn from_noise(&self, z: Vec<f64>) -> GaussianField {
        let g = self.grid;
        let (ns, nt) = (g.n_s(), g.n_t());
        assert_eq!(z.len(), ns * nt, "noise length must equal the cell count");
        let la = &self.s_factor.lower_triangular;
        let lb = &self.t_factor.lower_triangular;
        // Y = Z L_βᵀ, row p: Y[p][j] = Σ_q Z[p][q] L_β[j][q]
        let mut y = vec![0.0; ns * nt];
        for p in 0..ns {
            let zrow = &z[p * nt..(p + 1) * nt];
            for j in 0..nt {
                y[p * nt + j] = lb.row(j)[..=j].iter().zip(zrow).map(|(a, b)| a * b).sum();
            }
        }
        let mut values = vec![0.0; (ns + 1) * (nt + 1)];
        for i in 0..ns {
            for j in 0..nt {
                let mut acc = 0.0;
                for p in 0..=i {
                    acc += la[(i, p)] * y[p * nt + j];
                }
                values[g.node(i + 1, j + 1)] = acc;
            }
        }
        GaussianField {
            grid: FieldGrid::Sheet(g),
            values,
            white_noise: z,
        }
    }
}

/// Samples one fBm sheet on `grid` using the stream `rng`.
pub fn sample_sheet(alpha: f64, beta: f64, grid: Grid2D, rng: RngStreamSpec) -> Result<GaussianField> {
    Ok(SheetFactor::new(alpha, beta, grid)?.sample(rng))
}

/// Discretised Volterra sampler `B_{t_k} ≈ Σ_m A[k][m] z_m` with
/// `A[k][m] = h^{-1/2} ∫_{cell m} K(t_k, r) dr`.
///
/// Only used to cross-check the Cholesky sampler: its covariance `A Aᵀ`
/// converges to `[R(t_i, t_j)]` as the grid is refined.
#[derive(Debug, Clone, PartialEq)]
pub struct VolterraSampler {
    pub grid: TimeGrid,
    pub weights: Matrix,
}

impl VolterraSampler {
    pub fn new(kernel: &VolterraKernel, grid: TimeGrid) -> Result<Self> {
        let n = grid.n_steps();
        let h = grid.step();
        let quad = Quadrature::new(16).with_tol(1e-10).with_panels(1, 1 << 8);
        let c = kernel.alpha() - 0.5;
        let e0 = -libm::fabs(c);
        let mut w = Matrix::zeros(n, n);
        for k in 0..n {
            let t = grid.point(k + 1);
            for m in 0..=k {
                let (a, b) = (grid.point(m), grid.point(m + 1));
                let left = if m == 0 { Some(e0) } else { None };
                let right = if m == k { Some(c.min(0.0)) } else { None };
                let mut err = None;
                let v = quad.adaptive_gap(
                    |r, _, db| {
                        let gap = if m == k { db } else { t - r };
                        kernel.eval_gap(r, gap).unwrap_or_else(|e| {
                            err = Some(e);
                            0.0
                        })
                    },
                    a,
                    b,
                    Endpoints { left, right },
                )?;
                if let Some(e) = err {
                    return Err(e);
                }
                w[(k, m)] = v / libm::sqrt(h);
            }
        }
        Ok(Self { grid, weights: w })
    }

    pub fn covariance(&self) -> Matrix {
        self.weights.matmul(&self.weights.transpose())
    }

    pub fn sample(&self, rng: RngStreamSpec) -> GaussianField {
        let z = standard_normals(&mut rng.rng(), self.grid.n_steps());
        let mut values = vec![0.0];
        values.extend(self.weights.matvec(&z));
        GaussianField {
            grid: FieldGrid::Path(self.grid),
            values,
            white_noise: z,
        }
    }
}

/// Coefficients that realise a Gaussian variable `G` jointly with a sheet:
/// `G = Σ a_p b_q Z_pq + σ z'` with `Cov(G, W_{s_i,t_j}) = s_i t_j` and
/// `Var(G) = target_var`.
///
/// With `target_var = ∫ h^2` for the `h` satisfying `K h = F`,
/// `F(s,t) = st`, this is the exact joint law of `(W, ∫ h dW)` at the grid
/// nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct SheetPairing {
    pub grid: Grid2D,
    pub s_coeffs: Vec<f64>,
    pub t_coeffs: Vec<f64>,
    pub residual_sd: f64,
}

impl SheetPairing {
    pub fn new(factor: &SheetFactor, target_var: f64) -> Result<Self> {
        let g = factor.grid;
        let s: Vec<f64> = (1..=g.n_s()).map(|i| g.s_axis.point(i)).collect();
        let t: Vec<f64> = (1..=g.n_t()).map(|j| g.t_axis.point(j)).collect();
        let a = solve_lower(&factor.s_factor.lower_triangular, &s);
        let b = solve_lower(&factor.t_factor.lower_triangular, &t);
        let na: f64 = a.iter().map(|x| x * x).sum();
        let nb: f64 = b.iter().map(|x| x * x).sum();
        let resid = target_var - na * nb;
        if resid < -1e-9 * target_var.max(1.0) {
            return Err(Error::DomainError(
                "pairing variance is smaller than its projection on the grid",
            ));
        }
        Ok(Self {
            grid: g,
            s_coeffs: a,
            t_coeffs: b,
            residual_sd: libm::sqrt(resid.max(0.0)),
        })
    }

    /// `G` for a sheet sampled with this grid and one extra normal draw.
    pub fn pair(&self, field: &GaussianField, extra_normal: f64) -> Result<f64> {
        let g = field.sheet_grid()?;
        if g != self.grid {
            return Err(Error::FieldMismatch("pairing grid differs from field grid"));
        }
        let nt = g.n_t();
        let mut acc = 0.0;
        for (p, &ap) in self.s_coeffs.iter().enumerate() {
            let row = &field.white_noise[p * nt..(p + 1) * nt];
            acc += ap * row.iter().zip(&self.t_coeffs).map(|(z, b)| z * b).sum::<f64>();
        }
        Ok(acc + self.residual_sd * extra_normal)
    }

    /// Samples the sheet and the paired variable from one stream.
    pub fn sample(&self, factor: &SheetFactor, rng: RngStreamSpec) -> (GaussianField, f64) {
        let mut r = rng.rng();
        let z = standard_normals(&mut r, factor.grid.n_cells());
        let extra: f64 = r.sample(StandardNormal);
        let field = factor.from_noise(z);
        let g = self.pair(&field, extra).unwrap_or(f64::NAN);
        (field, g)
    }
}
