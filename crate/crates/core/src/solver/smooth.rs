//! Projected-gradient method with Armijo backtracking for smooth convex
//! objectives over `{A x = b, G x >= h, x_j >= 0 on a mask}`.
//!
//! Each iteration projects a gradient step in a metric `H`: either a caller
//! supplied positive definite matrix (a Newton-type scaling) or a spectral
//! multiple of the identity. The projection is the exact solution of a small
//! QP, so with `H = I / alpha` this is the textbook projected-gradient step.

use nalgebra::DMatrix;
use thiserror::Error;

use super::qp::{QpError, QpProblem};
use super::{dot, norm_inf, LinearProgram, LpOutcome, SolverConfig};

/// Objective callback returning value and gradient.
pub type Objective<'a> = dyn Fn(&[f64]) -> (f64, Vec<f64>) + Sync + 'a;
/// Optional metric callback; must return a symmetric positive semidefinite matrix.
pub type Metric<'a> = dyn Fn(&[f64]) -> DMatrix<f64> + Sync + 'a;

pub struct SmoothProgram<'a> {
    pub objective: &'a Objective<'a>,
    pub metric: Option<&'a Metric<'a>>,
    pub nonneg: Vec<bool>,
    pub eq_rows: Vec<Vec<f64>>,
    pub eq_rhs: Vec<f64>,
    pub ineq_rows: Vec<Vec<f64>>,
    pub ineq_rhs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothSolution {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    /// Sup-norm of `x - P(x - grad f(x))` at the returned point.
    pub pg_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SmoothOutcome {
    Optimal(SmoothSolution),
    /// The objective kept decreasing along a feasible ray.
    Unbounded {
        direction: Vec<f64>,
        last: SmoothSolution,
    },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SmoothError {
    #[error("iteration limit reached (projected gradient {:.3e})", best.pg_norm)]
    MaxIterations { best: SmoothSolution },
    #[error("line search stalled (projected gradient {:.3e})", best.pg_norm)]
    Stalled { best: SmoothSolution },
    #[error("no feasible starting point")]
    Infeasible,
    #[error("objective is not finite at the starting point")]
    NonFinite,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Qp(#[from] QpError),
}

impl SmoothOutcome {
    pub fn solution(&self) -> &SmoothSolution {
        match self {
            SmoothOutcome::Optimal(s) => s,
            SmoothOutcome::Unbounded { last, .. } => last,
        }
    }
}

impl<'a> SmoothProgram<'a> {
    pub fn new(n: usize, objective: &'a Objective<'a>) -> Self {
        Self {
            objective,
            metric: None,
            nonneg: vec![false; n],
            eq_rows: Vec::new(),
            eq_rhs: Vec::new(),
            ineq_rows: Vec::new(),
            ineq_rhs: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.nonneg.len()
    }

    fn violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (row, &b) in self.eq_rows.iter().zip(&self.eq_rhs) {
            worst = worst.max((dot(row, x) - b).abs() / (1.0 + b.abs()));
        }
        for (row, &h) in self.ineq_rows.iter().zip(&self.ineq_rhs) {
            worst = worst.max((h - dot(row, x)) / (1.0 + h.abs()));
        }
        for (j, &v) in x.iter().enumerate() {
            if self.nonneg[j] {
                worst = worst.max(-v);
            }
        }
        worst
    }

    fn feasible_point(&self, cfg: &SolverConfig) -> Result<Vec<f64>, SmoothError> {
        let n = self.n();
        let mut lp = LinearProgram::new(n);
        for j in 0..n {
            if !self.nonneg[j] {
                lp.set_free(j);
            }
        }
        for (row, &b) in self.eq_rows.iter().zip(&self.eq_rhs) {
            lp.add_eq(row.clone(), b);
        }
        for (row, &h) in self.ineq_rows.iter().zip(&self.ineq_rhs) {
            lp.add_geq(row.clone(), h);
        }
        match lp.solve(cfg) {
            Ok(LpOutcome::Optimal(sol)) => Ok(sol.x),
            _ => Err(SmoothError::Infeasible),
        }
    }

    /// `argmin_u 1/2 u'Hu + q'u` over the feasible set, from feasible `x`.
    fn project(
        &self,
        h: &DMatrix<f64>,
        q: &[f64],
        x: &[f64],
        hint: &[usize],
    ) -> Result<(Vec<f64>, Vec<usize>), QpError> {
        let qp = QpProblem {
            h,
            q,
            eq_rows: &self.eq_rows,
            eq_rhs: &self.eq_rhs,
            ineq_rows: &self.ineq_rows,
            ineq_rhs: &self.ineq_rhs,
            nonneg: &self.nonneg,
        };
        let sol = qp.solve(x, hint)?;
        Ok((sol.x, sol.working_rows))
    }

    fn has_rows(&self) -> bool {
        !self.eq_rows.is_empty() || !self.ineq_rows.is_empty()
    }

    /// Euclidean projected-gradient residual `|x - P(x - g)|_inf`.
    fn pg_norm(&self, x: &[f64], g: &[f64], hint: &[usize]) -> Result<f64, QpError> {
        if !self.has_rows() {
            let r = x
                .iter()
                .zip(g)
                .enumerate()
                .map(|(j, (&xi, &gi))| {
                    let mut v = xi - gi;
                    if self.nonneg[j] {
                        v = v.max(0.0);
                    }
                    (xi - v).abs()
                })
                .fold(0.0, f64::max);
            return Ok(r);
        }
        let n = self.n();
        let eye = DMatrix::identity(n, n);
        let q: Vec<f64> = x.iter().zip(g).map(|(xi, gi)| gi - xi).collect();
        let (p, _) = self.project(&eye, &q, x, hint)?;
        Ok(x.iter()
            .zip(&p)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub fn solve(&self, x_init: &[f64], cfg: &SolverConfig) -> Result<SmoothOutcome, SmoothError> {
        let n = self.n();
        if x_init.len() != n {
            return Err(SmoothError::Dimension(format!(
                "start has {} entries, expected {n}",
                x_init.len()
            )));
        }
        let mut x = if self.violation(x_init) <= 1e-9 {
            x_init.to_vec()
        } else {
            self.feasible_point(cfg)?
        };
        let x_start = x.clone();
        let (mut f, mut g) = (self.objective)(&x);
        if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(SmoothError::NonFinite);
        }
        let mut step = 1.0 / norm_inf(&g).max(1.0);
        let mut hint: Vec<usize> = Vec::new();
        let mut pg = f64::INFINITY;

        for iter in 0..cfg.max_iter {
            pg = self.pg_norm(&x, &g, &hint)?;
            let tol = cfg.pg_tol * (1.0 + f.abs());
            let snapshot = |pg: f64| SmoothSolution {
                x: x.clone(),
                value: f,
                iterations: iter,
                pg_norm: pg,
            };
            if pg <= tol {
                return Ok(SmoothOutcome::Optimal(snapshot(pg)));
            }

            let h = match self.metric {
                Some(metric) => {
                    let mut h = metric(&x);
                    let diag_max = (0..n).map(|j| h[(j, j)].abs()).fold(0.0, f64::max);
                    let reg = 1e-12 * diag_max.max(1e-300) + 1e-300;
                    for j in 0..n {
                        h[(j, j)] += reg;
                    }
                    h
                }
                None => DMatrix::identity(n, n) / step,
            };
            let hx = &h * nalgebra::DVector::from_column_slice(&x);
            let q: Vec<f64> = (0..n).map(|j| g[j] - hx[j]).collect();
            let (u, working) = self.project(&h, &q, &x, &hint)?;
            hint = working;
            let d: Vec<f64> = u.iter().zip(&x).map(|(a, b)| a - b).collect();
            let slope = dot(&g, &d);
            if slope >= 0.0 || norm_inf(&d) == 0.0 {
                // The scaled step vanished before the Euclidean test passed.
                return self.stalled(snapshot(pg), tol);
            }

            let mut t = 1.0;
            let accepted = loop {
                let trial: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + t * b).collect();
                let (ft, gt) = (self.objective)(&trial);
                if ft.is_finite() && ft <= f + cfg.armijo_c * t * slope {
                    break Some((trial, ft, gt));
                }
                t *= cfg.armijo_beta;
                if t < 1e-20 {
                    break None;
                }
            };
            let Some((xn, fnew, gnew)) = accepted else {
                return self.stalled(snapshot(pg), tol);
            };
            debug_assert!(fnew <= f, "objective increased: {f} -> {fnew}");
            if fnew >= f {
                // The step rounds away to nothing.
                return self.stalled(snapshot(pg), tol);
            }

            let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
            let yv: Vec<f64> = gnew.iter().zip(&g).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &yv);
            step = if sy > 0.0 {
                (dot(&s, &s) / sy).clamp(1e-12, 1e12)
            } else {
                1e12
            };
            x = xn;
            f = fnew;
            g = gnew;

            if norm_inf(&x) > cfg.unbounded_norm {
                let mut dir: Vec<f64> = x.iter().zip(&x_start).map(|(a, b)| a - b).collect();
                let nrm = dot(&dir, &dir).sqrt();
                for v in &mut dir {
                    *v /= nrm;
                }
                return Ok(SmoothOutcome::Unbounded {
                    direction: dir,
                    last: SmoothSolution {
                        x,
                        value: f,
                        iterations: iter + 1,
                        pg_norm: f64::NAN,
                    },
                });
            }
        }
        Err(SmoothError::MaxIterations {
            best: SmoothSolution {
                x,
                value: f,
                iterations: cfg.max_iter,
                pg_norm: pg,
            },
        })
    }

    /// Accepts a point where no further decrease is numerically possible if
    /// it is within a relaxed stationarity band, otherwise reports a stall.
    fn stalled(&self, best: SmoothSolution, tol: f64) -> Result<SmoothOutcome, SmoothError> {
        if best.pg_norm <= 1e3 * tol {
            Ok(SmoothOutcome::Optimal(best))
        } else {
            Err(SmoothError::Stalled { best })
        }
    }
}
