//! Two-phase dense tableau simplex with a lexicographic ratio test.
//!
//! Problems are stated as
//!
//! ```text
//! minimize c'x  s.t.  A x = b,  G x >= h,  x_j >= 0 unless free
//! ```
//!
//! Free variables are split into positive and negative parts and every
//! inequality gets a surplus column, so the tableau only ever sees the
//! standard form `A x = b, x >= 0`.

use thiserror::Error;

use super::{dot, SolverConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("simplex exceeded {pivots} pivots")]
    MaxIterations { pivots: usize },
    #[error("malformed linear program: {0}")]
    Malformed(String),
    #[error("simplex lost feasibility: final point violates a constraint by {violation:e}")]
    Numerical { violation: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub c: Vec<f64>,
    pub eq_rows: Vec<Vec<f64>>,
    pub eq_rhs: Vec<f64>,
    /// Rows of `G x >= h`.
    pub ineq_rows: Vec<Vec<f64>>,
    pub ineq_rhs: Vec<f64>,
    pub free: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub value: f64,
    pub eq_duals: Vec<f64>,
    /// Nonnegative multipliers of the `G x >= h` rows.
    pub ineq_duals: Vec<f64>,
}

/// Multipliers `(y, w)`, `w >= 0`, with `A'y + G'w <= 0` on nonnegative
/// variables, `= 0` on free ones, and `b'y + h'w > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct FarkasCertificate {
    pub eq: Vec<f64>,
    pub ineq: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible(FarkasCertificate),
    Unbounded { ray: Vec<f64> },
}

impl LpOutcome {
    pub fn optimal(self) -> Option<LpSolution> {
        match self {
            LpOutcome::Optimal(s) => Some(s),
            _ => None,
        }
    }
}

impl LinearProgram {
    /// Feasibility problem in `n` nonnegative variables.
    pub fn new(n: usize) -> Self {
        Self {
            c: vec![0.0; n],
            eq_rows: Vec::new(),
            eq_rhs: Vec::new(),
            ineq_rows: Vec::new(),
            ineq_rhs: Vec::new(),
            free: vec![false; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn minimize(mut self, c: Vec<f64>) -> Self {
        self.c = c;
        self
    }

    pub fn add_eq(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        self.eq_rows.push(row);
        self.eq_rhs.push(rhs);
        self
    }

    pub fn add_geq(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        self.ineq_rows.push(row);
        self.ineq_rhs.push(rhs);
        self
    }

    pub fn add_leq(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        self.add_geq(row.into_iter().map(|v| -v).collect(), -rhs)
    }

    pub fn set_free(&mut self, j: usize) -> &mut Self {
        self.free[j] = true;
        self
    }

    fn check(&self) -> Result<(), LpError> {
        let n = self.c.len();
        if self.free.len() != n {
            return Err(LpError::Malformed("free mask length".into()));
        }
        if self.eq_rows.len() != self.eq_rhs.len() || self.ineq_rows.len() != self.ineq_rhs.len() {
            return Err(LpError::Malformed("row/rhs count mismatch".into()));
        }
        let rows = self.eq_rows.iter().chain(&self.ineq_rows);
        for row in rows {
            if row.len() != n {
                return Err(LpError::Malformed(format!(
                    "row has {} entries, expected {n}",
                    row.len()
                )));
            }
        }
        let all = self
            .c
            .iter()
            .chain(self.eq_rhs.iter())
            .chain(self.ineq_rhs.iter())
            .chain(self.eq_rows.iter().flatten())
            .chain(self.ineq_rows.iter().flatten());
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(LpError::Malformed("non-finite entry".into()));
        }
        Ok(())
    }

    pub fn solve(&self, cfg: &SolverConfig) -> Result<LpOutcome, LpError> {
        self.check()?;
        Tableau::build(self).run(self, cfg)
    }

    /// Largest violation of the constraints at `x` (bounds included).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (row, &b) in self.eq_rows.iter().zip(&self.eq_rhs) {
            worst = worst.max((dot(row, x) - b).abs());
        }
        for (row, &h) in self.ineq_rows.iter().zip(&self.ineq_rhs) {
            worst = worst.max(h - dot(row, x));
        }
        for (j, &v) in x.iter().enumerate() {
            if !self.free[j] {
                worst = worst.max(-v);
            }
        }
        worst
    }
}

struct Tableau {
    m: usize,
    /// Structural + surplus columns.
    ncols: usize,
    width: usize,
    t: Vec<f64>,
    basis: Vec<usize>,
    row_sign: Vec<f64>,
    /// For each original variable, its (positive, negative) standard-form columns.
    var_cols: Vec<(usize, Option<usize>)>,
    cost: Vec<f64>,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let n = lp.c.len();
        let m_eq = lp.eq_rows.len();
        let m = m_eq + lp.ineq_rows.len();
        let mut var_cols = Vec::with_capacity(n);
        let mut col = 0;
        for j in 0..n {
            if lp.free[j] {
                var_cols.push((col, Some(col + 1)));
                col += 2;
            } else {
                var_cols.push((col, None));
                col += 1;
            }
        }
        let surplus0 = col;
        let ncols = col + lp.ineq_rows.len();
        let width = ncols + m + 1;
        let mut t = vec![0.0; (m + 1) * width];
        let mut row_sign = vec![1.0; m];
        for i in 0..m {
            let (row, rhs) = if i < m_eq {
                (&lp.eq_rows[i], lp.eq_rhs[i])
            } else {
                (&lp.ineq_rows[i - m_eq], lp.ineq_rhs[i - m_eq])
            };
            let s = if rhs < 0.0 { -1.0 } else { 1.0 };
            row_sign[i] = s;
            let r = &mut t[i * width..(i + 1) * width];
            for (j, &(p, neg)) in var_cols.iter().enumerate() {
                r[p] = s * row[j];
                if let Some(q) = neg {
                    r[q] = -s * row[j];
                }
            }
            if i >= m_eq {
                r[surplus0 + i - m_eq] = -s;
            }
            r[ncols + i] = 1.0;
            r[width - 1] = s * rhs;
        }
        let mut cost = vec![0.0; ncols];
        for (j, &(p, neg)) in var_cols.iter().enumerate() {
            cost[p] = lp.c[j];
            if let Some(q) = neg {
                cost[q] = -lp.c[j];
            }
        }
        Self {
            m,
            ncols,
            width,
            t,
            basis: (ncols..ncols + m).collect(),
            row_sign,
            var_cols,
            cost,
        }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.width + j]
    }

    fn pivot(&mut self, r: usize, s: usize) {
        let w = self.width;
        let p = self.t[r * w + s];
        for v in &mut self.t[r * w..(r + 1) * w] {
            *v /= p;
        }
        let pivot_row: Vec<f64> = self.t[r * w..(r + 1) * w].to_vec();
        for i in 0..=self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * w + s];
            if f != 0.0 {
                let row = &mut self.t[i * w..(i + 1) * w];
                for (v, &pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[s] = 0.0;
            }
        }
        self.basis[r] = s;
    }

    /// Loads the objective row for the given column costs.
    fn set_objective(&mut self, costs: &[f64]) {
        let w = self.width;
        let m = self.m;
        let mut obj = vec![0.0; w];
        obj[..costs.len()].copy_from_slice(costs);
        for i in 0..m {
            let cb = costs.get(self.basis[i]).copied().unwrap_or(0.0);
            if cb != 0.0 {
                for (o, &v) in obj.iter_mut().zip(&self.t[i * w..(i + 1) * w]) {
                    *o -= cb * v;
                }
            }
        }
        self.t[m * w..(m + 1) * w].copy_from_slice(&obj);
    }

    /// Runs the simplex over columns `0..allowed`: most negative reduced cost
    /// enters, ties in the ratio test are broken lexicographically on the
    /// rows of the basis inverse. Returns `Some(col)` if that column proves
    /// unboundedness.
    fn iterate(
        &mut self,
        allowed: usize,
        cfg: &SolverConfig,
        pivots: &mut usize,
    ) -> Result<Option<usize>, LpError> {
        let m = self.m;
        // Columns whose only positive entries are below the pivot tolerance
        // are skipped until the next pivot changes the tableau.
        let mut blocked = vec![false; allowed];
        loop {
            let mut entering = None;
            let mut most = -cfg.lp_tol * 1e-2;
            for j in 0..allowed {
                let rc = self.at(m, j);
                if !blocked[j] && rc < most {
                    most = rc;
                    entering = Some(j);
                }
            }
            let Some(s) = entering else {
                return Ok(None);
            };
            let Some(r) = self.leaving_row(s, cfg) else {
                if (0..m).any(|i| self.at(i, s) > 0.0) {
                    blocked[s] = true;
                    continue;
                }
                return Ok(Some(s));
            };
            *pivots += 1;
            if *pivots > cfg.lp_max_pivots {
                return Err(LpError::MaxIterations { pivots: *pivots });
            }
            self.pivot(r, s);
            blocked.fill(false);
        }
    }

    fn leaving_row(&self, s: usize, cfg: &SolverConfig) -> Option<usize> {
        let m = self.m;
        let rhs = self.width - 1;
        let mut cand: Vec<(usize, f64)> = (0..m)
            .filter_map(|i| {
                let a = self.at(i, s);
                (a > cfg.lp_pivot_tol).then(|| (i, self.at(i, rhs).max(0.0) / a))
            })
            .collect();
        let best = cand.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
        if !best.is_finite() {
            return None;
        }
        cand.retain(|c| c.1 <= best + 1e-12 * (1.0 + best));
        let mut k = 0;
        while cand.len() > 1 && k < m {
            let key = |i: usize| self.at(i, self.ncols + k) / self.at(i, s);
            let lo = cand.iter().map(|c| key(c.0)).fold(f64::INFINITY, f64::min);
            cand.retain(|c| key(c.0) <= lo + 1e-12 * (1.0 + lo.abs()));
            k += 1;
        }
        cand.iter().map(|c| c.0).min_by_key(|&i| self.basis[i])
    }

    fn run(mut self, lp: &LinearProgram, cfg: &SolverConfig) -> Result<LpOutcome, LpError> {
        let m = self.m;
        let ncols = self.ncols;
        let rhs = self.width - 1;
        let mut pivots = 0;
        let n_eq = lp.eq_rows.len();

        // Phase I: minimize the sum of artificials.
        let mut phase1 = vec![0.0; ncols + m];
        for c in &mut phase1[ncols..] {
            *c = 1.0;
        }
        self.set_objective(&phase1);
        self.iterate(ncols, cfg, &mut pivots)?;
        let infeas = -self.at(m, rhs);
        let scale = 1.0
            + (0..m)
                .map(|i| self.row_sign[i] * self.at(i, rhs))
                .fold(0.0f64, |a, v| a.max(v.abs()));
        if infeas > cfg.lp_tol * scale {
            // Phase-I simplex multipliers certify infeasibility.
            let pi: Vec<f64> = (0..m).map(|i| 1.0 - self.at(m, ncols + i)).collect();
            let y: Vec<f64> = pi.iter().zip(&self.row_sign).map(|(p, s)| p * s).collect();
            return Ok(LpOutcome::Infeasible(FarkasCertificate {
                eq: y[..n_eq].to_vec(),
                ineq: y[n_eq..].iter().map(|v| v.max(0.0)).collect(),
            }));
        }

        // Drive zero-level artificials out of the basis where possible.
        for i in 0..m {
            if self.basis[i] >= ncols {
                if let Some(j) = (0..ncols).find(|&j| self.at(i, j).abs() > 1e-9) {
                    self.pivot(i, j);
                }
            }
        }

        // Phase II.
        let mut costs = self.cost.clone();
        costs.resize(ncols + m, 0.0);
        self.set_objective(&costs);
        if let Some(s) = self.iterate(ncols, cfg, &mut pivots)? {
            let mut dir = vec![0.0; ncols];
            dir[s] = 1.0;
            for i in 0..m {
                let b = self.basis[i];
                if b < ncols {
                    dir[b] = -self.at(i, s);
                }
            }
            return Ok(LpOutcome::Unbounded {
                ray: self.to_original(&dir),
            });
        }

        let mut xs = vec![0.0; ncols];
        for i in 0..m {
            let b = self.basis[i];
            if b < ncols {
                xs[b] = self.at(i, rhs).max(0.0);
            }
        }
        let x = self.to_original(&xs);
        let violation = lp.max_violation(&x);
        let rhs_scale = lp
            .eq_rhs
            .iter()
            .chain(&lp.ineq_rhs)
            .fold(1.0f64, |a, v| a.max(v.abs()));
        if violation > 1e-6 * rhs_scale {
            return Err(LpError::Numerical { violation });
        }
        let value = dot(&lp.c, &x);
        let pi: Vec<f64> = (0..m)
            .map(|i| {
                (0..m)
                    .map(|k| {
                        let cb = costs.get(self.basis[k]).copied().unwrap_or(0.0);
                        cb * self.at(k, ncols + i)
                    })
                    .sum::<f64>()
            })
            .collect();
        let y: Vec<f64> = pi.iter().zip(&self.row_sign).map(|(p, s)| p * s).collect();
        Ok(LpOutcome::Optimal(LpSolution {
            x,
            value,
            eq_duals: y[..n_eq].to_vec(),
            ineq_duals: y[n_eq..].to_vec(),
        }))
    }

    fn to_original(&self, cols: &[f64]) -> Vec<f64> {
        self.var_cols
            .iter()
            .map(|&(p, neg)| cols[p] - neg.map_or(0.0, |q| cols[q]))
            .collect()
    }
}
