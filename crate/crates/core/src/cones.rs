//! Bid-ask matrices, solvency cones and polyhedral cone arithmetic in `R^d`.
//!
//! Every [`PolyCone`] carries both descriptions: unit generators and unit
//! halfspace normals. Conversion between them is the double description
//! method, restricted to small `d`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::solver::{dot, LinearProgram, LpError, LpOutcome, SolverConfig};
use crate::tree::ScenarioTree;

/// Largest asset count the double description step accepts.
pub const MAX_DD_DIM: usize = 8;

/// Relative slack for the triangle axiom.
pub const TRIANGLE_TOL: f64 = 1e-12;

const TIGHT_TOL: f64 = 1e-10;
const PARALLEL_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConeError {
    #[error("bid-ask matrix is not square (row {row} has {len} entries, expected {d})")]
    NotSquare { row: usize, len: usize, d: usize },
    #[error("empty bid-ask matrix")]
    Empty,
    #[error("NonPositiveEntry: pi[{i}][{j}] = {value}")]
    NonPositiveEntry { i: usize, j: usize, value: f64 },
    #[error("DiagonalNotOne: pi[{i}][{i}] = {value}")]
    DiagonalNotOne { i: usize, value: f64 },
    #[error("TriangleViolation: pi[{i}][{j}] > pi[{i}][{k}] * pi[{k}][{j}]")]
    TriangleViolation { i: usize, k: usize, j: usize },
    #[error("dimension {0} exceeds the double description limit of 8")]
    DimensionTooLarge(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// Terms of trade between `d` assets: `pi[i][j]` units of asset `i` buy one
/// unit of asset `j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(into = "Vec<Vec<f64>>")]
pub struct BidAskMatrix {
    d: usize,
    entries: Vec<f64>,
}

impl ConeError {
    /// Short name of the violated condition.
    pub fn kind(&self) -> &'static str {
        match self {
            ConeError::NotSquare { .. } => "NotSquare",
            ConeError::Empty => "Empty",
            ConeError::NonPositiveEntry { .. } => "NonPositiveEntry",
            ConeError::DiagonalNotOne { .. } => "DiagonalNotOne",
            ConeError::TriangleViolation { .. } => "TriangleViolation",
            ConeError::DimensionTooLarge(_) => "DimensionTooLarge",
            ConeError::DimensionMismatch { .. } => "DimensionMismatch",
            ConeError::Lp(_) => "SolverFailure",
        }
    }
}

impl From<BidAskMatrix> for Vec<Vec<f64>> {
    fn from(m: BidAskMatrix) -> Self {
        m.rows()
    }
}

impl BidAskMatrix {
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.d + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.d).map(<[f64]>::to_vec).collect()
    }

    /// True when every round trip `i -> j -> i` is free, up to rounding.
    pub fn is_frictionless(&self, tol: f64) -> bool {
        (0..self.d)
            .all(|i| (0..self.d).all(|j| (self.get(i, j) * self.get(j, i) - 1.0).abs() <= tol))
    }
}

/// Checks positivity, the unit diagonal and `pi_ij <= pi_ik * pi_kj`.
pub fn validate_bidask(rows: &[Vec<f64>]) -> Result<BidAskMatrix, ConeError> {
    let d = rows.len();
    if d == 0 {
        return Err(ConeError::Empty);
    }
    for (row, r) in rows.iter().enumerate() {
        if r.len() != d {
            return Err(ConeError::NotSquare {
                row,
                len: r.len(),
                d,
            });
        }
    }
    for i in 0..d {
        for j in 0..d {
            let v = rows[i][j];
            if !(v > 0.0) || !v.is_finite() {
                return Err(ConeError::NonPositiveEntry { i, j, value: v });
            }
        }
    }
    for (i, row) in rows.iter().enumerate() {
        if row[i] != 1.0 {
            return Err(ConeError::DiagonalNotOne { i, value: row[i] });
        }
    }
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                if rows[i][j] > rows[i][k] * rows[k][j] * (1.0 + TRIANGLE_TOL) {
                    return Err(ConeError::TriangleViolation { i, k, j });
                }
            }
        }
    }
    Ok(BidAskMatrix {
        d,
        entries: rows.concat(),
    })
}

/// A polyhedral convex cone `cone(generators) = {x : <n, x> >= 0 for all n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyCone {
    d: usize,
    generators: Vec<Vec<f64>>,
    halfspaces: Vec<Vec<f64>>,
}

impl PolyCone {
    /// Builds the cone spanned by `gens`, pruning redundant generators and
    /// deriving the halfspace description through the polar.
    pub fn from_generators(d: usize, gens: &[Vec<f64>]) -> Result<Self, ConeError> {
        check_dim(d)?;
        if let Some(g) = gens.iter().find(|g| g.len() != d) {
            return Err(ConeError::DimensionMismatch {
                expected: d,
                got: g.len(),
            });
        }
        let generators = prune_generators(gens)?;
        let halfspaces = extreme_rays(d, &generators)?;
        Ok(Self {
            d,
            generators,
            halfspaces,
        })
    }

    pub fn orthant(d: usize) -> Result<Self, ConeError> {
        Self::from_generators(d, &unit_vectors(d))
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn generators(&self) -> &[Vec<f64>] {
        &self.generators
    }

    pub fn halfspaces(&self) -> &[Vec<f64>] {
        &self.halfspaces
    }

    /// `<n, x> >= -tol * (1 + |x|)` for every halfspace normal `n`.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        let slack = tol * (1.0 + dot(x, x).sqrt());
        self.halfspaces.iter().all(|n| dot(n, x) >= -slack)
    }

    /// The positive polar `{w : <v, w> >= 0 for all v in K}`.
    pub fn polar(&self) -> Result<Self, ConeError> {
        polar_cone(self)
    }
}

fn check_dim(d: usize) -> Result<(), ConeError> {
    if d > MAX_DD_DIM {
        Err(ConeError::DimensionTooLarge(d))
    } else {
        Ok(())
    }
}

pub fn polar_cone(k: &PolyCone) -> Result<PolyCone, ConeError> {
    check_dim(k.d)?;
    Ok(PolyCone {
        d: k.d,
        generators: extreme_rays(k.d, &k.generators)?,
        halfspaces: k.generators.clone(),
    })
}

pub fn contains(k: &PolyCone, x: &[f64], tol: f64) -> bool {
    k.contains(x, tol)
}

/// Solvency cone generated by `e^i` and `pi_ij e^i - e^j`.
pub fn solvency_cone(pi: &BidAskMatrix) -> Result<PolyCone, ConeError> {
    let d = pi.dim();
    let mut gens = unit_vectors(d);
    for i in 0..d {
        for j in 0..d {
            if i != j {
                let mut g = vec![0.0; d];
                g[i] = pi.get(i, j);
                g[j] = -1.0;
                gens.push(g);
            }
        }
    }
    PolyCone::from_generators(d, &gens)
}

fn unit_vectors(d: usize) -> Vec<Vec<f64>> {
    (0..d)
        .map(|i| {
            let mut e = vec![0.0; d];
            e[i] = 1.0;
            e
        })
        .collect()
}

fn normalized(v: &[f64]) -> Option<Vec<f64>> {
    let n = dot(v, v).sqrt();
    (n > 1e-14).then(|| v.iter().map(|x| x / n).collect())
}

fn parallel(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= PARALLEL_TOL)
}

/// Drops zero vectors, duplicates and every generator lying in the cone of
/// the ones still kept.
fn prune_generators(gens: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, ConeError> {
    let mut kept: Vec<Vec<f64>> = Vec::new();
    for g in gens.iter().filter_map(|g| normalized(g)) {
        if !kept.iter().any(|k| parallel(k, &g)) {
            kept.push(g);
        }
    }
    let mut k = 0;
    while k < kept.len() {
        let others: Vec<Vec<f64>> = kept
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != k)
            .map(|(_, v)| v.clone())
            .collect();
        if !others.is_empty() && cone_hull_contains(&others, &kept[k], 1e-10)? {
            kept.remove(k);
        } else {
            k += 1;
        }
    }
    Ok(kept)
}

/// LP test: is `x` within `tol * (1 + |x|)` (in l1) of `cone(gens)`?
pub fn cone_hull_contains(gens: &[Vec<f64>], x: &[f64], tol: f64) -> Result<bool, ConeError> {
    let d = x.len();
    let m = gens.len();
    // variables: mu (m), r+ (d), r- (d)
    let mut c = vec![0.0; m + 2 * d];
    for v in &mut c[m..] {
        *v = 1.0;
    }
    let mut lp = LinearProgram::new(m + 2 * d).minimize(c);
    for i in 0..d {
        let mut row = vec![0.0; m + 2 * d];
        for (k, g) in gens.iter().enumerate() {
            row[k] = g[i];
        }
        row[m + i] = 1.0;
        row[m + d + i] = -1.0;
        lp.add_eq(row, x[i]);
    }
    match lp.solve(&SolverConfig::default())? {
        LpOutcome::Optimal(sol) => Ok(sol.value <= tol * (1.0 + dot(x, x).sqrt())),
        _ => Ok(false),
    }
}

#[derive(Clone)]
struct Ray {
    v: Vec<f64>,
    tight: Vec<bool>,
}

/// Double description: generators of `{x : <a, x> >= 0 for all a in normals}`.
///
/// The cone is kept as lineality space plus extreme rays; lineality
/// directions are returned as `+l` and `-l`. All output vectors have unit
/// length.
pub fn extreme_rays(d: usize, normals: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, ConeError> {
    check_dim(d)?;
    let mut lin: Vec<Vec<f64>> = unit_vectors(d);
    let mut rays: Vec<Ray> = Vec::new();
    let normals: Vec<Vec<f64>> = normals.iter().filter_map(|a| normalized(a)).collect();
    let nc = normals.len();

    for (c, a) in normals.iter().enumerate() {
        let pick = lin
            .iter()
            .enumerate()
            .map(|(i, l)| (i, dot(a, l)))
            .filter(|(_, s)| s.abs() > TIGHT_TOL)
            .max_by(|x, y| x.1.abs().total_cmp(&y.1.abs()));
        if let Some((idx, s0)) = pick {
            let mut l0 = lin.remove(idx);
            if s0 < 0.0 {
                l0.iter_mut().for_each(|v| *v = -*v);
            }
            let al0 = dot(a, &l0);
            for l in &mut lin {
                let f = dot(a, l) / al0;
                for (li, l0i) in l.iter_mut().zip(&l0) {
                    *li -= f * l0i;
                }
                if let Some(nl) = normalized(l) {
                    *l = nl;
                }
            }
            for r in &mut rays {
                let f = dot(a, &r.v) / al0;
                for (ri, l0i) in r.v.iter_mut().zip(&l0) {
                    *ri -= f * l0i;
                }
                if let Some(nr) = normalized(&r.v) {
                    r.v = nr;
                }
                r.tight[c] = true;
            }
            let mut tight = vec![true; nc];
            for t in &mut tight[c..] {
                *t = false;
            }
            rays.push(Ray {
                v: normalized(&l0).unwrap_or(l0),
                tight,
            });
            continue;
        }

        let side: Vec<f64> = rays.iter().map(|r| dot(a, &r.v)).collect();
        let mut next: Vec<Ray> = Vec::new();
        for (r, &s) in rays.iter().zip(&side) {
            if s > TIGHT_TOL {
                next.push(r.clone());
            } else if s.abs() <= TIGHT_TOL {
                let mut r = r.clone();
                r.tight[c] = true;
                next.push(r);
            }
        }
        for (ip, p) in rays.iter().enumerate() {
            if side[ip] <= TIGHT_TOL {
                continue;
            }
            for (in_, n) in rays.iter().enumerate() {
                if side[in_] >= -TIGHT_TOL {
                    continue;
                }
                let common: Vec<bool> = p
                    .tight
                    .iter()
                    .zip(&n.tight)
                    .map(|(x, y)| *x && *y)
                    .collect();
                let blocked = rays.iter().enumerate().any(|(ir, r)| {
                    ir != ip && ir != in_ && common.iter().zip(&r.tight).all(|(cm, rt)| !*cm || *rt)
                });
                if blocked {
                    continue;
                }
                let v: Vec<f64> =
                    n.v.iter()
                        .zip(&p.v)
                        .map(|(nv, pv)| side[ip] * nv - side[in_] * pv)
                        .collect();
                if let Some(v) = normalized(&v) {
                    let mut tight = common;
                    tight[c] = true;
                    next.push(Ray { v, tight });
                }
            }
        }
        rays = next;
    }

    let mut out: Vec<Vec<f64>> = Vec::new();
    let mut push = |v: Vec<f64>| {
        if let Some(v) = normalized(&v) {
            if !out.iter().any(|o| parallel(o, &v)) {
                out.push(v);
            }
        }
    };
    for r in rays {
        push(r.v);
    }
    for l in lin {
        push(l.iter().map(|v| -v).collect());
        push(l);
    }
    Ok(out)
}

/// Seeded description of a random bid-ask process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomMarketSpec {
    pub d: usize,
    pub branching: Vec<usize>,
    pub spread_lo: f64,
    pub spread_hi: f64,
    pub seed: u64,
}

/// One bid-ask matrix per tree node.
///
/// Log prices follow a random walk down the tree; each quote is widened by a
/// spread drawn from `[spread_lo, spread_hi]`, and the triangle axiom is then
/// restored by an all-pairs shortest-path closure of the log rates.
pub fn random_bidask_process(spec: &RandomMarketSpec, tree: &ScenarioTree) -> Vec<BidAskMatrix> {
    let d = spec.d;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut log_price = vec![vec![0.0; d]; tree.len()];
    let mut out = Vec::with_capacity(tree.len());
    for id in 0..tree.len() {
        log_price[id] = match tree.node(id).parent {
            None => (0..d).map(|_| rng.gen_range(-1.0..=1.0)).collect(),
            Some(p) => log_price[p]
                .iter()
                .map(|lp| lp + rng.gen_range(-0.5..=0.5))
                .collect(),
        };
        let w = &log_price[id];
        let mut l = vec![vec![0.0; d]; d];
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    let s: f64 = rng.gen_range(spec.spread_lo..=spec.spread_hi);
                    l[i][j] = w[j] - w[i] + s.ln_1p();
                }
            }
        }
        for k in 0..d {
            for i in 0..d {
                for j in 0..d {
                    let via = l[i][k] + l[k][j];
                    if via < l[i][j] {
                        l[i][j] = via;
                    }
                }
            }
        }
        let rows: Vec<Vec<f64>> = (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| if i == j { 1.0 } else { l[i][j].exp() })
                    .collect()
            })
            .collect();
        out.push(BidAskMatrix {
            d,
            entries: rows.concat(),
        });
    }
    out
}
