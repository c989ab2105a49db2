//! Truncated chaos solution of the sheet equation
//! `X_z = 1 + ∫_{[0,z]} b X dr + ∫_{[0,z]} a X δW`.
//!
//! Orders up to three are evaluated by a recursion over chains of cells:
//! the order-`n` term at node `z` is
//! `aⁿ Σ_{c_1 ≺ ⋯ ≺ c_n ≤ z} w(c; z) :ΔW_{c_1} ⋯ ΔW_{c_n}:` where `w` is the
//! product of `h0` factors along the chain and `≺` is the quadrant order of
//! distinct cells. Products are built incrementally along the chain and the
//! Wick corrections, which only involve the increment covariance, are
//! computed once per grid. Order four falls back to exhaustive summation.

use alloc::vec;
use alloc::vec::Vec;

use super::kernels::{kernel_sheet_eval, kernel_sheet_star};
use super::multiple::{
    cell_increments, discrete_multiple_integral_with, integral_variance, CellSpace, IntegralScheme,
};
use super::one_param::TruncatedChaosSolution;
use crate::fields::{FieldGrid, GaussianField};
use crate::linalg::Matrix;
use crate::special::h0;
use crate::{Error, Grid2D, ModelParams, Result};

/// Highest order handled by the chain recursion.
pub const CHAIN_MAX_ORDER: usize = 3;

/// Precomputed chain weights and Wick corrections for one grid and one set
/// of coefficients.
#[derive(Debug, Clone)]
pub struct SheetChainSolver {
    grid: Grid2D,
    a: f64,
    b: f64,
    truncation: usize,
    space: CellSpace,
    /// `h0(b s_c t_c)`.
    from_origin: Vec<f64>,
    /// `h0(b Δs Δt)` for `c ≺ c'`, row `c'`, column `c`.
    link: Matrix,
    /// `h0(b (s - s_c)(t - t_c))` for `c ≤ z`, row `c`, column `z`.
    to_node: Matrix,
    order0: Vec<f64>,
    pair_shift: Vec<f64>,
    triple_shift: Vec<f64>,
    triple_linear: Matrix,
}

impl SheetChainSolver {
    pub fn new(p: &ModelParams, grid: Grid2D, truncation: usize) -> Result<Self> {
        if truncation > super::multiple::MAX_ORDER {
            return Err(Error::OrderTooHigh(truncation));
        }
        let space = CellSpace::new(FieldGrid::Sheet(grid), p.hurst)?;
        let (ns, nt) = (grid.n_s(), grid.n_t());
        let cells = grid.n_cells();
        let nodes = (ns + 1) * (nt + 1);
        let b = p.b;
        let mid = |c: usize| grid.cell_midpoint(c);
        let from_origin = (0..cells)
            .map(|c| {
                let (s, t) = mid(c);
                h0(b * s * t)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut link = Matrix::zeros(cells, cells);
        for c2 in 0..cells {
            let (s2, t2) = mid(c2);
            for c1 in predecessors(grid, c2) {
                let (s1, t1) = mid(c1);
                link[(c2, c1)] = h0(b * (s2 - s1) * (t2 - t1))?;
            }
        }
        let mut to_node = Matrix::zeros(cells, nodes);
        let mut order0 = vec![0.0; nodes];
        for pi in 0..=ns {
            for qj in 0..=nt {
                let z = grid.node(pi, qj);
                let (s, t) = (grid.s_axis.point(pi), grid.t_axis.point(qj));
                order0[z] = h0(b * s * t)?;
                for i in 0..pi {
                    for j in 0..qj {
                        let c = grid.cell(i, j);
                        let (sc, tc) = mid(c);
                        to_node[(c, z)] = h0(b * (s - sc) * (t - tc))?;
                    }
                }
            }
        }
        let mut solver = Self {
            grid,
            a: p.a,
            b,
            truncation,
            space,
            from_origin,
            link,
            to_node,
            order0,
            pair_shift: vec![0.0; nodes],
            triple_shift: vec![0.0; cells],
            triple_linear: Matrix::zeros(cells, nodes),
        };
        solver.precompute_wick();
        Ok(solver)
    }

    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    fn cov(&self, c: usize, d: usize) -> f64 {
        self.space.cov[(c, d)]
    }

    /// Nodes `z` with `c ≤ z`.
    fn nodes_above(&self, c: usize) -> impl Iterator<Item = usize> + '_ {
        let g = self.grid;
        let (i, j) = (c / g.n_t(), c % g.n_t());
        (i + 1..=g.n_s()).flat_map(move |p| (j + 1..=g.n_t()).map(move |q| g.node(p, q)))
    }

    fn precompute_wick(&mut self) {
        let g = self.grid;
        let cells = g.n_cells();
        // q2(c2) = Σ_{c1≺c2} φ0(c1) Φ(c1,c2) C(c1,c2)
        let q2: Vec<f64> = (0..cells)
            .map(|c2| {
                predecessors(g, c2)
                    .map(|c1| self.from_origin[c1] * self.link[(c2, c1)] * self.cov(c1, c2))
                    .sum()
            })
            .collect();
        for c2 in 0..cells {
            let zs: Vec<usize> = self.nodes_above(c2).collect();
            for z in zs {
                self.pair_shift[z] += self.to_node[(c2, z)] * q2[c2];
            }
        }
        if self.truncation < 3 {
            return;
        }
        for c3 in 0..cells {
            self.triple_shift[c3] = predecessors(g, c3).map(|c2| self.link[(c3, c2)] * q2[c2]).sum();
        }
        // U(c2, z) = Σ_{c2≺c3≤z} Φ(c2,c3) Ψ(c3,z) C(c2,c3)
        let nodes = self.order0.len();
        let mut tail = Matrix::zeros(cells, nodes);
        for c2 in 0..cells {
            for c3 in successors(g, c2) {
                let w = self.link[(c3, c2)] * self.cov(c2, c3);
                if w == 0.0 {
                    continue;
                }
                for z in self.nodes_above(c3) {
                    tail[(c2, z)] += w * self.to_node[(c3, z)];
                }
            }
        }
        let mut lin = Matrix::zeros(cells, nodes);
        // covariance between the first and second links of the chain
        for c1 in 0..cells {
            for c2 in successors(g, c1) {
                let w = self.from_origin[c1] * self.link[(c2, c1)];
                for z in self.nodes_above(c2) {
                    lin[(c1, z)] += w * tail[(c2, z)];
                }
            }
        }
        // covariance between the first and third links, skipping the middle
        let mut v = vec![0.0; cells];
        for c2 in 0..cells {
            v.iter_mut().for_each(|x| *x = 0.0);
            for c1 in predecessors(g, c2) {
                let w = self.from_origin[c1] * self.link[(c2, c1)];
                for c3 in successors(g, c2) {
                    v[c3] += w * self.cov(c1, c3);
                }
            }
            for c3 in successors(g, c2) {
                let w = self.link[(c3, c2)] * v[c3];
                if w == 0.0 {
                    continue;
                }
                for z in self.nodes_above(c3) {
                    lin[(c2, z)] += w * self.to_node[(c3, z)];
                }
            }
        }
        self.triple_linear = lin;
    }

    /// Per-order values at every node of the grid.
    pub fn solve(&self, field: &GaussianField) -> Result<TruncatedChaosSolution> {
        if field.grid != FieldGrid::Sheet(self.grid) {
            return Err(Error::FieldMismatch("field grid differs from the solver grid"));
        }
        let g = self.grid;
        let cells = g.n_cells();
        let x = cell_increments(field);
        let mut orders = vec![self.order0.clone()];
        let chain_orders = self.truncation.min(CHAIN_MAX_ORDER);
        let mut prev: Vec<f64> = (0..cells).map(|c| self.from_origin[c] * x[c]).collect();
        for n in 1..=chain_orders {
            if n > 1 {
                prev = (0..cells)
                    .map(|c| {
                        let s: f64 = predecessors(g, c).map(|d| self.link[(c, d)] * prev[d]).sum();
                        let shift = if n == 3 { self.triple_shift[c] } else { 0.0 };
                        x[c] * (s - shift)
                    })
                    .collect();
            }
            let mut level = vec![0.0; self.order0.len()];
            for c in 0..cells {
                if prev[c] == 0.0 {
                    continue;
                }
                for z in self.nodes_above(c) {
                    level[z] += self.to_node[(c, z)] * prev[c];
                }
            }
            if n == 2 {
                level.iter_mut().zip(&self.pair_shift).for_each(|(l, s)| *l -= s);
            }
            if n == 3 {
                for c in 0..cells {
                    for z in self.nodes_above(c) {
                        level[z] -= x[c] * self.triple_linear[(c, z)];
                    }
                }
            }
            let an = libm::pow(self.a, n as f64);
            level.iter_mut().for_each(|l| *l *= an);
            orders.push(level);
        }
        if self.truncation == 4 {
            let mut level = vec![0.0; self.order0.len()];
            for p in 1..=g.n_s() {
                for q in 1..=g.n_t() {
                    let z = (g.s_axis.point(p), g.t_axis.point(q));
                    let k = |pts: &[(f64, f64)]| kernel_sheet_eval(4, self.a, self.b, z, pts);
                    level[g.node(p, q)] = discrete_multiple_integral_with(&self.space, k, 4, field, IntegralScheme::Wick)?;
                }
            }
            orders.push(level);
        }
        Ok(TruncatedChaosSolution::from_orders(orders))
    }
}

/// Cells `c ≺ c2`: weakly below and to the left, excluding `c2`.
fn predecessors(g: Grid2D, c2: usize) -> impl Iterator<Item = usize> {
    let nt = g.n_t();
    let (i2, j2) = (c2 / nt, c2 % nt);
    (0..=i2).flat_map(move |i| (0..=j2).map(move |j| i * nt + j)).filter(move |&c| c != c2)
}

/// Cells `c ≻ c1`.
fn successors(g: Grid2D, c1: usize) -> impl Iterator<Item = usize> {
    let (ns, nt) = (g.n_s(), g.n_t());
    let (i1, j1) = (c1 / nt, c1 % nt);
    (i1..ns).flat_map(move |i| (j1..nt).map(move |j| i * nt + j)).filter(move |&c| c != c1)
}

/// Truncated chaos solution of the sheet equation at every grid node.
pub fn solve_sheet_chaos(
    p: &ModelParams,
    grid: Grid2D,
    field: &GaussianField,
    truncation: usize,
) -> Result<TruncatedChaosSolution> {
    SheetChainSolver::new(p, grid, truncation)?.solve(field)
}

/// Standard deviations at `b = 0` of the discrete order-`n` integral of the
/// chain kernel at `z`, and of the integral of the star form minus the
/// chain kernel.
pub fn star_form_discrepancy(space: &CellSpace, n: usize, a: f64, z: (f64, f64)) -> Result<(f64, f64)> {
    let chain = |p: &[(f64, f64)]| kernel_sheet_eval(n, a, 0.0, z, p);
    let diff = |p: &[(f64, f64)]| kernel_sheet_star(n, a, z, p) - chain(p);
    Ok((
        libm::sqrt(integral_variance(space, chain, n)?),
        libm::sqrt(integral_variance(space, diff, n)?),
    ))
}
