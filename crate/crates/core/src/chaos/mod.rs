//! Chaos kernels, discrete multiple integrals and solution schemes.

pub mod deterministic;
pub mod kernels;
pub mod multiple;
pub mod one_param;
pub mod sheet;

pub use deterministic::{chaos_norm_decay, deterministic_sheet_solution, picard_sheet, PicardSolution};
pub use kernels::{kernel_1d_eval, kernel_sheet_eval, kernel_sheet_star, ChaosKernel1D, SheetChaosKernel};
pub use multiple::{discrete_multiple_integral, discrete_multiple_integral_with, CellSpace, IntegralScheme};
pub use one_param::{
    chaos_path_1d, chaos_sum_1d, exact_solution_1d, wick_euler_1d, TruncatedChaosSolution,
};
pub use sheet::{solve_sheet_chaos, SheetChainSolver};
