//! Primal active-set method for strictly convex quadratic programs
//!
//! ```text
//! minimize 1/2 u'Hu + q'u  s.t.  A u = b,  G u >= h,  u_j >= 0 on a mask
//! ```
//!
//! started from a feasible point. Bound constraints are handled by fixing
//! variables rather than carrying them as KKT rows.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use super::{dot, norm_inf};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpError {
    #[error("KKT system is singular")]
    Singular,
    #[error("active-set iteration limit reached")]
    MaxIterations,
}

pub struct QpProblem<'a> {
    pub h: &'a DMatrix<f64>,
    pub q: &'a [f64],
    pub eq_rows: &'a [Vec<f64>],
    pub eq_rhs: &'a [f64],
    pub ineq_rows: &'a [Vec<f64>],
    pub ineq_rhs: &'a [f64],
    pub nonneg: &'a [bool],
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: Vec<f64>,
    /// Inequality rows in the final working set.
    pub working_rows: Vec<usize>,
    pub iterations: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Con {
    Bound(usize),
    Row(usize),
}

/// Incremental Gram-Schmidt basis used to keep working-set normals independent.
struct SpanBasis {
    vecs: Vec<Vec<f64>>,
}

impl SpanBasis {
    fn try_add(&mut self, v: &[f64]) -> bool {
        let scale = norm_inf(v);
        if scale == 0.0 {
            return false;
        }
        let mut w: Vec<f64> = v.iter().map(|x| x / scale).collect();
        for _ in 0..2 {
            for b in &self.vecs {
                let c = dot(&w, b);
                for (wi, bi) in w.iter_mut().zip(b) {
                    *wi -= c * bi;
                }
            }
        }
        let nrm = dot(&w, &w).sqrt();
        if nrm < 1e-9 {
            return false;
        }
        for wi in &mut w {
            *wi /= nrm;
        }
        self.vecs.push(w);
        true
    }
}

impl QpProblem<'_> {
    fn n(&self) -> usize {
        self.q.len()
    }

    fn slack(&self, c: Con, u: &[f64]) -> f64 {
        match c {
            Con::Bound(j) => u[j],
            Con::Row(k) => dot(&self.ineq_rows[k], u) - self.ineq_rhs[k],
        }
    }

    fn normal(&self, c: Con) -> Vec<f64> {
        match c {
            Con::Bound(j) => {
                let mut e = vec![0.0; self.n()];
                e[j] = 1.0;
                e
            }
            Con::Row(k) => self.ineq_rows[k].clone(),
        }
    }

    /// Solves from the feasible point `start`. `hint_rows` are preferred when
    /// seeding the working set among the constraints active at `start`.
    pub fn solve(&self, start: &[f64], hint_rows: &[usize]) -> Result<QpSolution, QpError> {
        let n = self.n();
        let mut u = start.to_vec();
        let act_tol = |rhs: f64| 1e-10 * (1.0 + rhs.abs());

        let mut basis = SpanBasis { vecs: Vec::new() };
        for row in self.eq_rows {
            basis.try_add(row);
        }
        let mut candidates: Vec<Con> = Vec::new();
        for &k in hint_rows {
            if k < self.ineq_rows.len() {
                candidates.push(Con::Row(k));
            }
        }
        for j in 0..n {
            if self.nonneg[j] {
                candidates.push(Con::Bound(j));
            }
        }
        for k in 0..self.ineq_rows.len() {
            if !hint_rows.contains(&k) {
                candidates.push(Con::Row(k));
            }
        }
        let mut fixed = vec![false; n];
        let mut rows_in: Vec<usize> = Vec::new();
        for c in candidates {
            let rhs = match c {
                Con::Bound(_) => 0.0,
                Con::Row(k) => self.ineq_rhs[k],
            };
            if self.slack(c, &u) <= act_tol(rhs) && basis.try_add(&self.normal(c)) {
                match c {
                    Con::Bound(j) => {
                        fixed[j] = true;
                        u[j] = 0.0;
                    }
                    Con::Row(k) => rows_in.push(k),
                }
            }
        }

        let max_iter = 20 * (n + self.ineq_rows.len() + 10);
        // Set after a full unblocked step: the iterate already minimizes over
        // the current working set, whatever rounding says about the next step.
        let mut at_subspace_min = false;
        for iter in 0..max_iter {
            let hu = self.h * DVector::from_column_slice(&u);
            let g: Vec<f64> = (0..n).map(|j| hu[j] + self.q[j]).collect();
            let (p, mu) = self.eqp(&g, &fixed, &rows_in)?;
            let scale = 1.0 + norm_inf(&u);
            if at_subspace_min || norm_inf(&p) <= 1e-13 * scale {
                at_subspace_min = false;
                // Multipliers of the working inequalities; equality multipliers come first.
                let n_eq = self.eq_rows.len();
                let gscale = 1.0 + norm_inf(&g);
                let mut worst: Option<(Con, f64)> = None;
                for (idx, &k) in rows_in.iter().enumerate() {
                    let m = mu[n_eq + idx];
                    if m < worst.map_or(-1e-11 * gscale, |w| w.1) {
                        worst = Some((Con::Row(k), m));
                    }
                }
                for j in 0..n {
                    if fixed[j] {
                        let mut nu = g[j];
                        for (r, row) in self.eq_rows.iter().enumerate() {
                            nu -= row[j] * mu[r];
                        }
                        for (idx, &k) in rows_in.iter().enumerate() {
                            nu -= self.ineq_rows[k][j] * mu[n_eq + idx];
                        }
                        if nu < worst.map_or(-1e-11 * gscale, |w| w.1) {
                            worst = Some((Con::Bound(j), nu));
                        }
                    }
                }
                match worst {
                    None => {
                        return Ok(QpSolution {
                            x: u,
                            working_rows: rows_in,
                            iterations: iter,
                        })
                    }
                    Some((Con::Row(k), _)) => rows_in.retain(|&r| r != k),
                    Some((Con::Bound(j), _)) => fixed[j] = false,
                }
                continue;
            }

            let mut alpha = 1.0;
            let mut blocking: Option<Con> = None;
            for j in 0..n {
                if self.nonneg[j] && !fixed[j] && p[j] < -1e-15 * scale {
                    let a = (-u[j] / p[j]).max(0.0);
                    if a < alpha {
                        alpha = a;
                        blocking = Some(Con::Bound(j));
                    }
                }
            }
            for (k, row) in self.ineq_rows.iter().enumerate() {
                if rows_in.contains(&k) {
                    continue;
                }
                let gp = dot(row, &p);
                if gp < -1e-15 * norm_inf(row) * (1.0 + norm_inf(&p)) {
                    let a = ((self.ineq_rhs[k] - dot(row, &u)) / gp).max(0.0);
                    if a < alpha {
                        alpha = a;
                        blocking = Some(Con::Row(k));
                    }
                }
            }
            for j in 0..n {
                u[j] += alpha * p[j];
            }
            match blocking {
                Some(Con::Bound(j)) => {
                    fixed[j] = true;
                    u[j] = 0.0;
                }
                Some(Con::Row(k)) => rows_in.push(k),
                None => at_subspace_min = true,
            }
        }
        Err(QpError::MaxIterations)
    }

    /// Equality-constrained step from the current point: returns the step and
    /// the multipliers of `[eq rows; working rows]`.
    fn eqp(
        &self,
        g: &[f64],
        fixed: &[bool],
        rows_in: &[usize],
    ) -> Result<(Vec<f64>, Vec<f64>), QpError> {
        let n = self.n();
        let free: Vec<usize> = (0..n).filter(|&j| !fixed[j]).collect();
        let cons: Vec<&Vec<f64>> = self
            .eq_rows
            .iter()
            .chain(rows_in.iter().map(|&k| &self.ineq_rows[k]))
            .collect();
        let nf = free.len();
        let nc = cons.len();
        let dim = nf + nc;
        let mut p = vec![0.0; n];
        if dim == 0 {
            return Ok((p, Vec::new()));
        }
        let mut kkt = DMatrix::<f64>::zeros(dim, dim);
        let mut rhs = DVector::<f64>::zeros(dim);
        for (a, &i) in free.iter().enumerate() {
            for (b, &j) in free.iter().enumerate() {
                kkt[(a, b)] = self.h[(i, j)];
            }
            rhs[a] = -g[i];
        }
        for (r, row) in cons.iter().enumerate() {
            for (a, &i) in free.iter().enumerate() {
                kkt[(nf + r, a)] = row[i];
                kkt[(a, nf + r)] = -row[i];
            }
        }
        let sol = kkt.lu().solve(&rhs).ok_or(QpError::Singular)?;
        if sol.iter().any(|v| !v.is_finite()) {
            return Err(QpError::Singular);
        }
        for (a, &i) in free.iter().enumerate() {
            p[i] = sol[a];
        }
        let mu = (0..nc).map(|r| sol[nf + r]).collect();
        Ok((p, mu))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_onto_orthant() {
        let h = DMatrix::identity(3, 3);
        let v = [1.0, -2.0, 0.5];
        let q: Vec<f64> = v.iter().map(|x| -x).collect();
        let prob = QpProblem {
            h: &h,
            q: &q,
            eq_rows: &[],
            eq_rhs: &[],
            ineq_rows: &[],
            ineq_rhs: &[],
            nonneg: &[true, true, true],
        };
        let sol = prob.solve(&[0.0, 0.0, 0.0], &[]).unwrap();
        assert!((sol.x[0] - 1.0).abs() < 1e-12);
        assert!(sol.x[1].abs() < 1e-12);
        assert!((sol.x[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn projection_onto_halfplane_with_equality() {
        // project (2, 2, 0) onto {x + y >= 5, z = 1}
        let h = DMatrix::identity(3, 3);
        let q = [-2.0, -2.0, 0.0];
        let eq = [vec![0.0, 0.0, 1.0]];
        let ineq = [vec![1.0, 1.0, 0.0]];
        let prob = QpProblem {
            h: &h,
            q: &q,
            eq_rows: &eq,
            eq_rhs: &[1.0],
            ineq_rows: &ineq,
            ineq_rhs: &[5.0],
            nonneg: &[false, false, false],
        };
        let sol = prob.solve(&[5.0, 0.0, 1.0], &[]).unwrap();
        assert!((sol.x[0] - 2.5).abs() < 1e-12);
        assert!((sol.x[1] - 2.5).abs() < 1e-12);
        assert!((sol.x[2] - 1.0).abs() < 1e-12);
        assert_eq!(sol.working_rows, vec![0]);
    }

    #[test]
    fn degenerate_vertex_start() {
        // Three constraints active at the origin in the plane.
        let h = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0]));
        let q = [-1.0, -1.0];
        let ineq = [vec![1.0, 1.0], vec![1.0, 2.0], vec![2.0, 1.0]];
        let prob = QpProblem {
            h: &h,
            q: &q,
            eq_rows: &[],
            eq_rhs: &[],
            ineq_rows: &ineq,
            ineq_rhs: &[0.0, 0.0, 0.0],
            nonneg: &[true, true],
        };
        let sol = prob.solve(&[0.0, 0.0], &[1]).unwrap();
        assert!((sol.x[0] - 1.0).abs() < 1e-12);
        assert!((sol.x[1] - 0.25).abs() < 1e-12);
    }
}
