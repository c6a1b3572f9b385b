//! Conic problems and the built-in interior-point solver.
//!
//! The solver works on the homogeneous self-dual embedding of
//!
//! ```text
//!   min c'x  s.t.  A x = b,  F_j(x) >= 0        (primal, x free)
//!   max b'mu s.t.  A'mu + sum_j F_j*(Z_j) = c,  Z_j >= 0   (dual)
//! ```
//!
//! so that a primal infeasible problem ends with a Farkas ray
//! `A'mu + sum_j F_j*(Z_j) = 0`, `Z_j >= 0`, `b'mu > 0` instead of a stalled
//! iteration.

mod ipm;
mod problem;
mod verify;

use nalgebra::DMatrix;

pub use ipm::InteriorPointSolver;
pub use problem::{ConicProblem, PsdBlock, Sense};
pub use verify::{verify_solution, Check, VerificationReport};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub max_iter: usize,
    pub eps_feas: f64,
    pub eps_gap: f64,
    /// Infeasibility needs `tau / kappa` below this ratio as well as a valid ray.
    pub infeas_ratio: f64,
    /// Diagonal regularization of the reduced KKT system, relative to its largest pivot.
    pub static_reg: f64,
    /// Fraction of the distance to the cone boundary taken per step.
    pub step_fraction: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iter: 200,
            eps_feas: 1e-8,
            eps_gap: 1e-8,
            infeas_ratio: 1e-8,
            static_reg: 1e-10,
            step_fraction: 0.98,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    Inaccurate,
    IterationLimit,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::PrimalInfeasible => "primal-infeasible",
            SolveStatus::DualInfeasible => "dual-infeasible",
            SolveStatus::Inaccurate => "inaccurate",
            SolveStatus::IterationLimit => "iteration-limit",
        }
    }
}

/// A Farkas ray proving that no `x` satisfies `A x = b`, `F_j(x) >= 0`.
///
/// Normalized so that `b'mu = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct FarkasCertificate {
    pub eq_mult: Vec<f64>,
    pub blocks: Vec<DMatrix<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveMetrics {
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub rel_gap: f64,
    pub iterations: usize,
    pub tau: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicSolution {
    pub status: SolveStatus,
    /// Primal point (meaningful for `Optimal` and `Inaccurate`).
    pub x: Vec<f64>,
    /// Objective in the problem's own sense.
    pub objective: f64,
    pub dual_objective: f64,
    /// Dual multipliers, in the minimization form above.
    pub eq_duals: Vec<f64>,
    pub block_duals: Vec<DMatrix<f64>>,
    pub certificate: Option<FarkasCertificate>,
    pub metrics: SolveMetrics,
}

impl ConicSolution {
    pub fn has_point(&self) -> bool {
        matches!(self.status, SolveStatus::Optimal | SolveStatus::Inaccurate)
    }
}

/// Anything that can solve a [`ConicProblem`].
pub trait ConicSolver: Send + Sync {
    fn solve(&self, problem: &ConicProblem, opts: &SolverOptions) -> ConicSolution;
}
