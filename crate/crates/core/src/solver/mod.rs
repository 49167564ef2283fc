//! Numeric kernel: dense simplex LP, active-set QP and a projected-gradient
//! method for smooth convex programs over polyhedra.

mod lp;
mod qp;
mod smooth;

pub use lp::{FarkasCertificate, LinearProgram, LpError, LpOutcome, LpSolution};
pub use qp::{QpError, QpProblem, QpSolution};
pub use smooth::{Metric, Objective, SmoothError, SmoothOutcome, SmoothProgram, SmoothSolution};

use serde::{Deserialize, Serialize};

/// All solver tolerances in one place. Acceptance runs use the defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Primal/dual residual accepted by the simplex method.
    pub lp_tol: f64,
    /// Smallest admissible simplex pivot magnitude.
    pub lp_pivot_tol: f64,
    pub lp_max_pivots: usize,
    /// Stop when the projected-gradient norm is at most `pg_tol * (1 + |f|)`.
    pub pg_tol: f64,
    pub armijo_c: f64,
    pub armijo_beta: f64,
    pub max_iter: usize,
    /// Iterates with a larger sup-norm are reported as a recession direction.
    pub unbounded_norm: f64,
    /// Strict-positivity margin used for the no-arbitrage certificate.
    pub eps_strict: f64,
    /// Slack used for cone membership tests.
    pub cone_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lp_tol: 1e-9,
            lp_pivot_tol: 1e-9,
            lp_max_pivots: 200_000,
            pg_tol: 1e-9,
            armijo_c: 1e-4,
            armijo_beta: 0.5,
            max_iter: 2_000,
            unbounded_norm: 1e9,
            eps_strict: 1e-7,
            cone_tol: 1e-9,
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}
