//! Weighted-sum scalarizations of the vector utility maximization problem,
//! their conjugate duals, and polyhedral bounds on the upper image.
//!
//! For a weight `z*` the primal value is
//!
//! ```text
//! p(z*) = inf { <z*, E[-U(x)]> : x in A_T(x0) }
//! ```
//!
//! and the dual value is
//!
//! ```text
//! d(z*) = sup { E[ sum_i phi_i(y_i, z*_i) - y_i x0_i ] : y feasible }
//! ```
//!
//! where feasibility means `E[y | v]` lies in the polar of the solvency cone at
//! every node `v`.

use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::market::{
    AttainableSet, DualVariable, MarketError, NoArbitrageOutcome, PricingProcess, TransferPlan,
};
use crate::solver::{
    dot, LinearProgram, LpError, LpOutcome, SmoothError, SmoothOutcome, SmoothProgram, SolverConfig,
};
use crate::tree::TerminalPosition;
use crate::utility::{ScalarUtility, UtilityError, UtilitySpec};
use crate::ExtReal;

/// Default distance of grid weights from the boundary of the simplex.
pub const GRID_EPS: f64 = 0.02;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DualityError {
    #[error("invalid weight: {0}")]
    InvalidWeight(String),
    #[error("empty weight grid")]
    EmptyGrid,
    #[error("utility has {got} assets, market has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error(transparent)]
    Utility(#[from] UtilityError),
    #[error("solver failure: {0}")]
    SolverFailure(String),
    #[error("weak duality violated at weight {weight:?}: primal {primal}, dual {dual}")]
    WeakDualityViolation {
        weight: Vec<f64>,
        primal: f64,
        dual: f64,
    },
    #[error("no separating functional found for a point outside the attainable set")]
    SeparationFailure,
}

impl From<LpError> for DualityError {
    fn from(e: LpError) -> Self {
        DualityError::SolverFailure(e.to_string())
    }
}

impl From<SmoothError> for DualityError {
    fn from(e: SmoothError) -> Self {
        DualityError::SolverFailure(e.to_string())
    }
}

/// A nonnegative weight normalized to unit sum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Weight {
    z: Vec<f64>,
    interior: bool,
}

impl Weight {
    /// Normalizes `z`; `interior` records whether every entry is at least `eps`
    /// after normalization.
    pub fn new(z: &[f64], eps: f64) -> Result<Self, DualityError> {
        if z.is_empty() || z.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(DualityError::InvalidWeight(format!(
                "entries must be finite and nonnegative: {z:?}"
            )));
        }
        let s: f64 = z.iter().sum();
        if !(s > 0.0) {
            return Err(DualityError::InvalidWeight("weight is zero".into()));
        }
        let z: Vec<f64> = z.iter().map(|v| v / s).collect();
        let interior = z.iter().all(|&v| v >= eps - 1e-15);
        Ok(Self { z, interior })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.z
    }

    pub fn dim(&self) -> usize {
        self.z.len()
    }

    pub fn is_interior(&self) -> bool {
        self.interior
    }
}

/// Interior simplex grid `z = eps + (1 - d eps) k / (points - 1)` over all
/// compositions `k` of `points - 1` into `d` parts, in lexicographic order.
/// A single point means the centroid.
pub fn weight_grid(d: usize, points: usize, eps: f64) -> Result<Vec<Weight>, DualityError> {
    if d == 0 || points == 0 {
        return Err(DualityError::EmptyGrid);
    }
    if d as f64 * eps >= 1.0 {
        return Err(DualityError::InvalidWeight(format!(
            "grid margin {eps} leaves no room in dimension {d}"
        )));
    }
    if points == 1 {
        return Ok(vec![Weight::new(&vec![1.0; d], eps)?]);
    }
    let n = points - 1;
    let mut out = Vec::new();
    let mut k = vec![0usize; d];
    compositions(n, 0, &mut k, &mut |k| {
        let z: Vec<f64> = k
            .iter()
            .map(|&ki| eps + (1.0 - d as f64 * eps) * ki as f64 / n as f64)
            .collect();
        out.push(z);
    });
    out.into_iter().map(|z| Weight::new(&z, eps)).collect()
}

fn compositions(rest: usize, pos: usize, k: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
    if pos + 1 == k.len() {
        k[pos] = rest;
        f(k);
        return;
    }
    for v in (0..=rest).rev() {
        k[pos] = v;
        compositions(rest - v, pos + 1, k, f);
    }
}

/// `{z : support <= <normal, z>}`; `-inf` support is all of `R^d`, `+inf`
/// the empty set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HalfSpace {
    pub normal: Weight,
    pub support: ExtReal,
}

impl HalfSpace {
    pub fn contains(&self, z: &[f64], tol: f64) -> bool {
        match self.support {
            ExtReal::NegInf => true,
            ExtReal::PosInf => false,
            ExtReal::Finite(s) => dot(self.normal.as_slice(), z) >= s - tol * (1.0 + s.abs()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PrimalStatus {
    Optimal,
    /// The iterates ran off along a feasible descent direction.
    Unbounded,
    /// The iteration budget ran out without meeting the stationarity test.
    Unattained,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DualStatus {
    Optimal,
    /// No strictly positive feasible density exists (the market admits
    /// arbitrage); the value is the one at `y = 0`.
    NoInteriorPoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrimalSolve {
    pub value: ExtReal,
    pub status: PrimalStatus,
    pub x: TerminalPosition,
    pub plan: TransferPlan,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualSolve {
    pub value: ExtReal,
    pub status: DualStatus,
    pub y: DualVariable,
    pub iterations: usize,
}

/// Both sides of one scalarization.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarSolveReport {
    pub weight: Weight,
    pub primal: PrimalSolve,
    pub dual: DualSolve,
    /// `p - d`.
    pub gap: f64,
    pub seconds: f64,
}

impl ScalarSolveReport {
    /// `|p - d| / (1 + |p|)`.
    pub fn relative_gap(&self) -> f64 {
        let p = self.primal.value.to_f64();
        self.gap.abs() / (1.0 + p.abs())
    }
}

fn check_dims(a: &AttainableSet, u: &UtilitySpec, z: &[f64]) -> Result<(), DualityError> {
    let d = a.dim();
    for got in [u.dim(), z.len()] {
        if got != d {
            return Err(DualityError::DimensionMismatch { expected: d, got });
        }
    }
    Ok(())
}

/// `(-u(x), -u'(x), -u''(x))`, with exponent underflow read as zero and
/// overflow as `None`.
fn disutility_terms(u: &impl ScalarUtility, x: f64) -> Option<(f64, f64, f64)> {
    match (u.eval(x), u.deriv(x), u.neg_second_deriv(x)) {
        (Ok(v), Ok(d1), Ok(d2)) => Some((-v, -d1, d2)),
        (Err(UtilityError::Overflow(e)), _, _) if e < 0.0 => Some((0.0, 0.0, 0.0)),
        _ => None,
    }
}

struct PrimalProblem<'a> {
    a: &'a AttainableSet,
    u: &'a UtilitySpec,
    cols: Vec<Vec<(usize, f64)>>,
    /// `mass(leaf) * z_i` per flat row.
    row_weight: Vec<f64>,
}

impl<'a> PrimalProblem<'a> {
    fn new(a: &'a AttainableSet, u: &'a UtilitySpec, z: &'a [f64]) -> Self {
        let d = a.dim();
        let tree = a.tree();
        let row_weight = (0..d * tree.num_leaves())
            .map(|r| tree.leaf_mass(r / d) * z[r % d])
            .collect();
        Self {
            a,
            u,
            cols: a.market.plan_columns(),
            row_weight,
        }
    }

    fn positions(&self, lam: &[f64]) -> Vec<f64> {
        let d = self.a.dim();
        let mut x: Vec<f64> = (0..self.row_weight.len())
            .map(|r| self.a.x0[r % d])
            .collect();
        for (col, &l) in self.cols.iter().zip(lam) {
            if l != 0.0 {
                for &(r, v) in col {
                    x[r] += v * l;
                }
            }
        }
        x
    }

    /// Per-row `(value, d/dx, d2/dx2)` of `mass * z_i * (-u_i(x))`.
    fn row_terms(&self, x: &[f64]) -> Option<Vec<(f64, f64, f64)>> {
        let d = self.a.dim();
        x.iter()
            .enumerate()
            .map(|(r, &xr)| {
                let w = self.row_weight[r];
                disutility_terms(self.u.asset(r % d), xr).map(|(v, d1, d2)| (w * v, w * d1, w * d2))
            })
            .collect()
    }

    fn value_grad(&self, lam: &[f64]) -> (f64, Vec<f64>) {
        let Some(terms) = self.row_terms(&self.positions(lam)) else {
            return (f64::INFINITY, vec![0.0; lam.len()]);
        };
        let f = terms.iter().map(|t| t.0).sum();
        let g = self
            .cols
            .iter()
            .map(|col| col.iter().map(|&(r, v)| v * terms[r].1).sum())
            .collect();
        (f, g)
    }

    fn hessian(&self, lam: &[f64]) -> DMatrix<f64> {
        let n = lam.len();
        let rows = self.row_weight.len();
        let terms = self
            .row_terms(&self.positions(lam))
            .unwrap_or_else(|| vec![(0.0, 0.0, 0.0); rows]);
        let mut m = DMatrix::<f64>::zeros(rows, n);
        let mut dm = DMatrix::<f64>::zeros(rows, n);
        for (j, col) in self.cols.iter().enumerate() {
            for &(r, v) in col {
                m[(r, j)] = v;
                dm[(r, j)] = v * terms[r].2;
            }
        }
        let mut h = m.transpose() * dm;
        // Plan coefficients are not unique; a small ridge keeps the metric
        // positive definite along the redundant directions.
        let ridge = 1e-4 * (0..n).map(|j| h[(j, j)]).fold(0.0, f64::max).max(1e-12);
        for j in 0..n {
            h[(j, j)] += ridge;
        }
        h
    }
}

fn primal_raw(
    a: &AttainableSet,
    u: &UtilitySpec,
    z: &[f64],
    cfg: &SolverConfig,
) -> Result<PrimalSolve, DualityError> {
    check_dims(a, u, z)?;
    let prob = PrimalProblem::new(a, u, z);
    let n = a.market.num_plan_vars();
    let obj = |lam: &[f64]| prob.value_grad(lam);
    let metric = |lam: &[f64]| prob.hessian(lam);
    let mut sp = SmoothProgram::new(n, &obj);
    sp.nonneg = vec![true; n];
    sp.metric = Some(&metric);
    let (sol, status) = match sp.solve(&vec![0.0; n], cfg) {
        Ok(SmoothOutcome::Optimal(s)) => (s, PrimalStatus::Optimal),
        Ok(SmoothOutcome::Unbounded { last, .. }) => (last, PrimalStatus::Unbounded),
        Err(SmoothError::MaxIterations { best }) | Err(SmoothError::Stalled { best }) => {
            (best, PrimalStatus::Unattained)
        }
        Err(e) => return Err(e.into()),
    };
    let plan = TransferPlan::from_flat(&a.market, &sol.x);
    let x = TerminalPosition::from_flat(a.dim(), prob.positions(&sol.x));
    Ok(PrimalSolve {
        value: ExtReal::Finite(sol.value),
        status,
        x,
        plan,
        iterations: sol.iterations,
    })
}

/// Minimizes `E[<z*, -U(x)>]` over the attainable set, in plan coefficients.
///
/// Utilities bounded above (such as the exponential family) keep the value
/// finite even when the market admits arbitrage; such runs end with status
/// [`PrimalStatus::Unbounded`] or [`PrimalStatus::Unattained`] and the best
/// value seen.
pub fn primal_scalarize(
    a: &AttainableSet,
    u: &UtilitySpec,
    w: &Weight,
    cfg: &SolverConfig,
) -> Result<PrimalSolve, DualityError> {
    primal_raw(a, u, w.as_slice(), cfg)
}

struct DualProblem<'a> {
    a: &'a AttainableSet,
    u: &'a UtilitySpec,
    z: &'a [f64],
    mass: Vec<f64>,
}

impl<'a> DualProblem<'a> {
    fn new(a: &'a AttainableSet, u: &'a UtilitySpec, z: &'a [f64]) -> Self {
        let d = a.dim();
        let tree = a.tree();
        Self {
            a,
            u,
            z,
            mass: (0..d * tree.num_leaves())
                .map(|r| tree.leaf_mass(r / d))
                .collect(),
        }
    }

    /// The dual objective `E[sum_i phi_i(y_i, z_i) - y_i x0_i]`.
    fn value(&self, y: &[f64]) -> Result<ExtReal, UtilityError> {
        let d = self.a.dim();
        let mut total = 0.0;
        for (r, &yr) in y.iter().enumerate() {
            let i = r % d;
            match self.u.asset(i).conjugate_kernel(yr, self.z[i])? {
                ExtReal::Finite(phi) => total += self.mass[r] * (phi - yr * self.a.x0[i]),
                other => return Ok(other),
            }
        }
        Ok(ExtReal::Finite(total))
    }

    /// Negated objective and gradient; `+inf` outside the open orthant.
    fn neg_value_grad(&self, y: &[f64]) -> (f64, Vec<f64>) {
        let d = self.a.dim();
        let mut f = 0.0;
        let mut g = vec![0.0; y.len()];
        for (r, &yr) in y.iter().enumerate() {
            let i = r % d;
            let u = self.u.asset(i);
            let (Ok(ExtReal::Finite(phi)), Ok(xs)) = (
                u.conjugate_kernel(yr, self.z[i]),
                u.conjugate_argmin(yr, self.z[i]),
            ) else {
                return (f64::INFINITY, g);
            };
            f -= self.mass[r] * (phi - yr * self.a.x0[i]);
            g[r] = -self.mass[r] * (xs - self.a.x0[i]);
        }
        (f, g)
    }

    fn hessian(&self, y: &[f64]) -> DMatrix<f64> {
        let d = self.a.dim();
        let diag = y.iter().enumerate().map(|(r, &yr)| {
            let i = r % d;
            self.mass[r]
                * self
                    .u
                    .asset(i)
                    .conjugate_curvature(yr.max(1e-300), self.z[i])
                    .unwrap_or(1.0)
        });
        DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(y.len(), diag))
    }

    /// Scale `s` maximizing the objective along the ray through `y`.
    fn best_scale(&self, y: &[f64]) -> f64 {
        let d = self.a.dim();
        let slope = |s: f64| -> f64 {
            y.iter()
                .enumerate()
                .map(|(r, &yr)| {
                    let i = r % d;
                    let xs = self
                        .u
                        .asset(i)
                        .conjugate_argmin(s * yr, self.z[i])
                        .unwrap_or(0.0);
                    self.mass[r] * yr * (xs - self.a.x0[i])
                })
                .sum()
        };
        let (mut lo, mut hi) = (-60.0f64, 60.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if slope(mid.exp()) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (0.5 * (lo + hi)).exp()
    }
}

fn dual_raw(
    a: &AttainableSet,
    u: &UtilitySpec,
    z: &[f64],
    certificate: Option<&PricingProcess>,
    cfg: &SolverConfig,
) -> Result<DualSolve, DualityError> {
    check_dims(a, u, z)?;
    if let Some(&bad) = z.iter().find(|v| !(**v > 0.0)) {
        return Err(UtilityError::NegativeWeight(bad).into());
    }
    let d = a.dim();
    let tree = a.tree();
    let prob = DualProblem::new(a, u, z);
    let owned;
    let cert = match certificate {
        Some(c) => c,
        None => match a.market.check_no_arbitrage(cfg)? {
            NoArbitrageOutcome::NoArbitrage { certificate, .. } => {
                owned = certificate;
                &owned
            }
            NoArbitrageOutcome::Arbitrage { .. } => {
                let y = DualVariable::zeros(d, tree.num_leaves());
                let value = prob.value(y.y.as_flat())?;
                return Ok(DualSolve {
                    value,
                    status: DualStatus::NoInteriorPoint,
                    y,
                    iterations: 0,
                });
            }
        },
    };
    let start = cert.leaf_density(tree).y;
    let s = prob.best_scale(start.as_flat());
    let y0: Vec<f64> = start.as_flat().iter().map(|v| s * v).collect();

    let n = y0.len();
    let obj = |y: &[f64]| prob.neg_value_grad(y);
    let metric = |y: &[f64]| prob.hessian(y);
    let mut sp = SmoothProgram::new(n, &obj);
    sp.nonneg = vec![true; n];
    sp.metric = Some(&metric);
    for row in a.market.dual_cone_rows() {
        sp.ineq_rows.push(row);
        sp.ineq_rhs.push(0.0);
    }
    let sol = match sp.solve(&y0, cfg)? {
        SmoothOutcome::Optimal(s) => s,
        SmoothOutcome::Unbounded { .. } => {
            return Err(DualityError::SolverFailure(
                "dual objective unbounded above".into(),
            ))
        }
    };
    let y = DualVariable {
        y: TerminalPosition::from_flat(d, sol.x.clone()),
    };
    Ok(DualSolve {
        value: prob.value(&sol.x)?,
        status: DualStatus::Optimal,
        y,
        iterations: sol.iterations,
    })
}

/// Maximizes the conjugate dual objective over feasible pricing densities,
/// starting from the (rescaled) leaf values of a consistent pricing process.
/// Without a certificate one is computed first.
pub fn dual_scalarize(
    a: &AttainableSet,
    u: &UtilitySpec,
    w: &Weight,
    certificate: Option<&PricingProcess>,
    cfg: &SolverConfig,
) -> Result<DualSolve, DualityError> {
    dual_raw(a, u, w.as_slice(), certificate, cfg)
}

/// `E[-U(x)]`.
pub fn expected_disutility(
    a: &AttainableSet,
    u: &UtilitySpec,
    x: &TerminalPosition,
) -> Result<Vec<f64>, DualityError> {
    let tree = a.tree();
    let mut out = vec![0.0; a.dim()];
    for k in 0..tree.num_leaves() {
        let w = tree.leaf_mass(k);
        for (o, v) in out.iter_mut().zip(u.disutility(x.leaf(k))?) {
            *o += w * v;
        }
    }
    Ok(out)
}

/// The halfspace `{z : s <= <z*, z>}` with
/// `s = <z*, E[-U(x)]> + E<y, x> - E<y, x0>` for feasible `y`, and all of
/// `R^d` otherwise.
pub fn lagrangian_halfspace(
    a: &AttainableSet,
    u: &UtilitySpec,
    x: &TerminalPosition,
    y: &DualVariable,
    w: &Weight,
    cfg: &SolverConfig,
) -> Result<HalfSpace, DualityError> {
    check_dims(a, u, w.as_slice())?;
    if !a.dual_feasibility(y, cfg.cone_tol) {
        return Ok(HalfSpace {
            normal: w.clone(),
            support: ExtReal::NegInf,
        });
    }
    let f = expected_disutility(a, u, x)?;
    let tree = a.tree();
    let s = dot(w.as_slice(), &f) + y.pairing(tree, x) - y.pairing(tree, &a.endowment());
    Ok(HalfSpace {
        normal: w.clone(),
        support: ExtReal::Finite(s),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum RecoveryOutcome {
    /// `x` is attainable; every sampled halfspace contains `E[-U(x)]`.
    RecoveredF {
        point: Vec<f64>,
        /// Smallest `<z*, F> - s` over the samples (nonnegative up to rounding).
        min_slack: f64,
    },
    /// `x` is not attainable: along `t * y` the support grows like
    /// `t * slope`, so the intersection over duals is empty.
    CertifiedInfeasible {
        y: DualVariable,
        weight: Weight,
        slope: f64,
    },
}

/// Checks that the supremum over dual halfspaces recovers the objective at
/// attainable `x`, or produces a separating density when `x` is not
/// attainable.
pub fn primal_recovery_check(
    a: &AttainableSet,
    u: &UtilitySpec,
    x: &TerminalPosition,
    samples: &[(DualVariable, Weight)],
    cfg: &SolverConfig,
) -> Result<RecoveryOutcome, DualityError> {
    let Some((_, w0)) = samples.first() else {
        return Err(DualityError::EmptyGrid);
    };
    if a.membership(x, cfg.cone_tol, cfg)?.is_some() {
        let point = expected_disutility(a, u, x)?;
        let mut min_slack = f64::INFINITY;
        for (y, w) in samples {
            let h = lagrangian_halfspace(a, u, x, y, w, cfg)?;
            if let ExtReal::Finite(s) = h.support {
                min_slack = min_slack.min(dot(w.as_slice(), &point) - s);
            }
        }
        return Ok(RecoveryOutcome::RecoveredF { point, min_slack });
    }
    let (y, slope) = separate(a, x, cfg)?;
    if slope <= cfg.eps_strict {
        return Err(DualityError::SeparationFailure);
    }
    Ok(RecoveryOutcome::CertifiedInfeasible {
        y,
        weight: w0.clone(),
        slope,
    })
}

/// Maximizes `E<y, x - x0>` over feasible densities with `E[sum_i y_i] = 1`.
fn separate(
    a: &AttainableSet,
    x: &TerminalPosition,
    cfg: &SolverConfig,
) -> Result<(DualVariable, f64), DualityError> {
    let d = a.dim();
    let tree = a.tree();
    let n = d * tree.num_leaves();
    let mut c = vec![0.0; n];
    let mut norm = vec![0.0; n];
    for r in 0..n {
        let m = tree.leaf_mass(r / d);
        c[r] = -m * (x.as_flat()[r] - a.x0[r % d]);
        norm[r] = m;
    }
    let mut lp = LinearProgram::new(n).minimize(c);
    for row in a.market.dual_cone_rows() {
        lp.add_geq(row, 0.0);
    }
    lp.add_eq(norm, 1.0);
    match lp.solve(cfg)? {
        LpOutcome::Optimal(sol) => Ok((
            DualVariable {
                y: TerminalPosition::from_flat(d, sol.x),
            },
            -sol.value,
        )),
        _ => Err(DualityError::SeparationFailure),
    }
}

/// Outer (halfspace) and inner (points plus the orthant) polyhedral bounds
/// of the upper image.
#[derive(Debug, Clone, PartialEq)]
pub struct UpperImage {
    pub outer: Vec<HalfSpace>,
    pub inner: Vec<Vec<f64>>,
    /// `inner support - outer support` at each outer normal.
    pub gaps: Vec<f64>,
    /// Weights whose solve failed, with the reason.
    pub skipped: Vec<(Weight, String)>,
}

/// Outcome of one primal solve: value and `E[-U(x)]`, or why it was skipped.
pub type PrimalPoint = Result<(ExtReal, Vec<f64>), String>;

impl UpperImage {
    pub fn from_solves(solves: &[(Weight, PrimalPoint)]) -> Result<Self, DualityError> {
        let mut img = UpperImage {
            outer: Vec::new(),
            inner: Vec::new(),
            gaps: Vec::new(),
            skipped: Vec::new(),
        };
        for (w, res) in solves {
            match res {
                Ok((p, point)) => {
                    img.outer.push(HalfSpace {
                        normal: w.clone(),
                        support: *p,
                    });
                    img.inner.push(point.clone());
                }
                Err(e) => img.skipped.push((w.clone(), e.clone())),
            }
        }
        let normals: Vec<Weight> = img.outer.iter().map(|h| h.normal.clone()).collect();
        img.gaps = normals
            .iter()
            .map(|w| img.gap_at(w))
            .collect::<Result<_, _>>()?;
        Ok(img)
    }

    /// `min_j <w, q_j>` over inner points.
    pub fn inner_support(&self, w: &Weight) -> f64 {
        self.inner
            .iter()
            .map(|q| dot(w.as_slice(), q))
            .fold(f64::INFINITY, f64::min)
    }

    /// `min <w, z>` over the outer polyhedron, by LP.
    pub fn outer_support(&self, w: &Weight) -> Result<ExtReal, DualityError> {
        if self.outer.iter().any(|h| h.support == ExtReal::PosInf) {
            return Ok(ExtReal::PosInf);
        }
        let d = w.dim();
        let mut lp = LinearProgram::new(d).minimize(w.as_slice().to_vec());
        for j in 0..d {
            lp.set_free(j);
        }
        for h in &self.outer {
            if let ExtReal::Finite(s) = h.support {
                lp.add_geq(h.normal.as_slice().to_vec(), s);
            }
        }
        Ok(match lp.solve(&SolverConfig::default())? {
            LpOutcome::Optimal(sol) => ExtReal::Finite(sol.value),
            LpOutcome::Unbounded { .. } => ExtReal::NegInf,
            LpOutcome::Infeasible(_) => ExtReal::PosInf,
        })
    }

    pub fn gap_at(&self, w: &Weight) -> Result<f64, DualityError> {
        Ok(self.inner_support(w) - self.outer_support(w)?.to_f64())
    }

    /// Smallest `<n, q> - s` over all outer halfspaces and inner points,
    /// relative to `1 + |s|`.
    pub fn sandwich_slack(&self) -> f64 {
        let mut worst = f64::INFINITY;
        for h in &self.outer {
            if let ExtReal::Finite(s) = h.support {
                for q in &self.inner {
                    worst = worst.min((dot(h.normal.as_slice(), q) - s) / (1.0 + s.abs()));
                }
            }
        }
        worst
    }
}

/// Primal solves over a grid, assembled into outer and inner bounds.
pub fn upper_image(
    a: &AttainableSet,
    u: &UtilitySpec,
    grid: &[Weight],
    cfg: &SolverConfig,
) -> Result<UpperImage, DualityError> {
    if grid.is_empty() {
        return Err(DualityError::EmptyGrid);
    }
    let solves: Vec<_> = grid
        .par_iter()
        .map(|w| {
            let res = primal_scalarize(a, u, w, cfg)
                .map_err(|e| e.to_string())
                .and_then(|p| match p.status {
                    PrimalStatus::Optimal => expected_disutility(a, u, &p.x)
                        .map(|q| (p.value, q))
                        .map_err(|e| e.to_string()),
                    other => Err(format!("primal {other:?}")),
                });
            (w.clone(), res)
        })
        .collect();
    UpperImage::from_solves(&solves)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualityReport {
    pub reports: Vec<ScalarSolveReport>,
    pub upper: UpperImage,
    /// `max |p - d| / (1 + |p|)` over the reports.
    pub max_relative_gap: f64,
    /// `x0 - 1` is attainable, so `x - A_T(x0)` meets the interior of the
    /// orthant somewhere.
    pub slater: bool,
    pub no_arbitrage: bool,
    pub seconds: f64,
}

/// Runs both scalarizations at every weight, checks weak duality and
/// collects the strong duality residual.
pub fn duality_report(
    a: &AttainableSet,
    u: &UtilitySpec,
    grid: &[Weight],
    cfg: &SolverConfig,
) -> Result<DualityReport, DualityError> {
    let clock = Instant::now();
    if grid.is_empty() {
        return Err(DualityError::EmptyGrid);
    }
    check_dims(a, u, grid[0].as_slice())?;
    u.validate()?;
    let slater_point: Vec<f64> = a.x0.iter().map(|v| v - 1.0).collect();
    let slater = a
        .membership(
            &TerminalPosition::constant(&slater_point, a.tree().num_leaves()),
            cfg.cone_tol,
            cfg,
        )?
        .is_some();
    let (certificate, no_arbitrage) = match a.market.check_no_arbitrage(cfg)? {
        NoArbitrageOutcome::NoArbitrage { certificate, .. } => (Some(certificate), true),
        NoArbitrageOutcome::Arbitrage { .. } => (None, false),
    };

    let reports: Vec<ScalarSolveReport> = grid
        .par_iter()
        .map(|w| -> Result<ScalarSolveReport, DualityError> {
            let t = Instant::now();
            let primal = primal_scalarize(a, u, w, cfg)?;
            let dual = dual_scalarize(a, u, w, certificate.as_ref(), cfg)?;
            let (p, dv) = (primal.value.to_f64(), dual.value.to_f64());
            if dv > p + 1e-7 * (1.0 + p.abs()) {
                return Err(DualityError::WeakDualityViolation {
                    weight: w.as_slice().to_vec(),
                    primal: p,
                    dual: dv,
                });
            }
            Ok(ScalarSolveReport {
                weight: w.clone(),
                gap: p - dv,
                primal,
                dual,
                seconds: t.elapsed().as_secs_f64(),
            })
        })
        .collect::<Result<_, _>>()?;

    let solves: Vec<_> = reports
        .iter()
        .map(|r| {
            let res = match r.primal.status {
                PrimalStatus::Optimal => expected_disutility(a, u, &r.primal.x)
                    .map(|q| (r.primal.value, q))
                    .map_err(|e| e.to_string()),
                other => Err(format!("primal {other:?}")),
            };
            (r.weight.clone(), res)
        })
        .collect();
    let upper = UpperImage::from_solves(&solves)?;
    let max_relative_gap = reports
        .iter()
        .map(ScalarSolveReport::relative_gap)
        .fold(0.0, f64::max);
    Ok(DualityReport {
        reports,
        upper,
        max_relative_gap,
        slater,
        no_arbitrage,
        seconds: clock.elapsed().as_secs_f64(),
    })
}
