//! The conic market on a scenario tree: attainable terminal positions, dual
//! feasibility of pricing densities, and arbitrage detection.
//!
//! A self-financing strategy is stored as nonnegative coefficients over the
//! generators of every node's solvency cone; the increment at node `v` is
//! `sum_g lambda[v][g] * (-g)`. Nothing here ever builds a cone in `R^{dN}`.

use thiserror::Error;

use crate::cones::{solvency_cone, BidAskMatrix, ConeError, PolyCone};
use crate::solver::{dot, LinearProgram, LpError, LpOutcome, SolverConfig};
use crate::tree::{AdaptedProcess, ScenarioTree, TerminalPosition, TreeError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MarketError {
    #[error("expected {expected} bid-ask matrices (one per node), got {got}")]
    NodeCountMismatch { expected: usize, got: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("negative plan coefficient {value} at node {node}, generator {generator}")]
    NegativeCoefficient {
        node: usize,
        generator: usize,
        value: f64,
    },
    #[error("solver failure: {0}")]
    SolverFailure(String),
    #[error(
        "inconclusive arbitrage test: pricing margin {margin:.3e}, arbitrage LP feasible: {arbitrage_feasible}"
    )]
    Inconclusive {
        margin: f64,
        arbitrage_feasible: bool,
    },
    #[error("node {node}: {source}")]
    Cone { node: usize, source: ConeError },
    #[error(transparent)]
    Tree(#[from] TreeError),
}

impl From<LpError> for MarketError {
    fn from(e: LpError) -> Self {
        MarketError::SolverFailure(e.to_string())
    }
}

/// Tree, bid-ask process and the derived per-node cones.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketModel {
    tree: ScenarioTree,
    d: usize,
    bidask: Vec<BidAskMatrix>,
    cones: Vec<PolyCone>,
    polars: Vec<PolyCone>,
    offsets: Vec<usize>,
}

impl MarketModel {
    pub fn new(tree: ScenarioTree, bidask: Vec<BidAskMatrix>) -> Result<Self, MarketError> {
        if bidask.len() != tree.len() {
            return Err(MarketError::NodeCountMismatch {
                expected: tree.len(),
                got: bidask.len(),
            });
        }
        let d = bidask[0].dim();
        let mut cones = Vec::with_capacity(tree.len());
        let mut polars = Vec::with_capacity(tree.len());
        for (node, pi) in bidask.iter().enumerate() {
            if pi.dim() != d {
                return Err(MarketError::DimensionMismatch {
                    expected: d,
                    got: pi.dim(),
                });
            }
            let k = solvency_cone(pi).map_err(|source| MarketError::Cone { node, source })?;
            polars.push(
                k.polar()
                    .map_err(|source| MarketError::Cone { node, source })?,
            );
            cones.push(k);
        }
        let mut offsets = Vec::with_capacity(tree.len() + 1);
        let mut acc = 0;
        for k in &cones {
            offsets.push(acc);
            acc += k.generators().len();
        }
        offsets.push(acc);
        Ok(Self {
            tree,
            d,
            bidask,
            cones,
            polars,
            offsets,
        })
    }

    pub fn tree(&self) -> &ScenarioTree {
        &self.tree
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn bidask(&self, node: usize) -> &BidAskMatrix {
        &self.bidask[node]
    }

    /// Solvency cone `K[v]`.
    pub fn cone(&self, node: usize) -> &PolyCone {
        &self.cones[node]
    }

    /// Polar cone `K[v]^+`.
    pub fn polar(&self, node: usize) -> &PolyCone {
        &self.polars[node]
    }

    /// Total number of plan coefficients.
    pub fn num_plan_vars(&self) -> usize {
        self.offsets[self.tree.len()]
    }

    /// Flat index of the first coefficient of `node`.
    pub fn plan_offset(&self, node: usize) -> usize {
        self.offsets[node]
    }

    /// Sparse columns of the map from flat plan coefficients to flat leaf
    /// positions: entry `j` lists `(row, value)` pairs with `row = leaf * d + i`.
    pub fn plan_columns(&self) -> Vec<Vec<(usize, f64)>> {
        let d = self.d;
        let mut cols = vec![Vec::new(); self.num_plan_vars()];
        for (id, node) in self.tree.nodes().iter().enumerate() {
            for (g, gen) in self.cones[id].generators().iter().enumerate() {
                let col = &mut cols[self.offsets[id] + g];
                for leaf in node.leaf_range.clone() {
                    for (i, &gi) in gen.iter().enumerate() {
                        if gi != 0.0 {
                            col.push((leaf * d + i, -gi));
                        }
                    }
                }
            }
        }
        cols
    }

    /// Dense rows of the same map, `d * N` by `num_plan_vars`.
    pub fn plan_matrix(&self) -> Vec<Vec<f64>> {
        let rows = self.d * self.tree.num_leaves();
        let mut m = vec![vec![0.0; self.num_plan_vars()]; rows];
        for (j, col) in self.plan_columns().into_iter().enumerate() {
            for (r, v) in col {
                m[r][j] = v;
            }
        }
        m
    }

    /// LP rows `E[<g, y> | v] >= 0` for every node `v` and generator `g` of
    /// `K[v]`, over flat leaf densities.
    pub(crate) fn dual_cone_rows(&self) -> Vec<Vec<f64>> {
        let d = self.d;
        let n = d * self.tree.num_leaves();
        let mut rows = Vec::new();
        for (id, node) in self.tree.nodes().iter().enumerate() {
            for gen in self.cones[id].generators() {
                let mut row = vec![0.0; n];
                for leaf in node.leaf_range.clone() {
                    let w = self.tree.leaf_mass(leaf) / node.mass;
                    for i in 0..d {
                        row[leaf * d + i] = w * gen[i];
                    }
                }
                rows.push(row);
            }
        }
        rows
    }

    /// Decides the no-arbitrage property; see [`NoArbitrageOutcome`].
    pub fn check_no_arbitrage(
        &self,
        cfg: &SolverConfig,
    ) -> Result<NoArbitrageOutcome, MarketError> {
        check_no_arbitrage(self, cfg)
    }
}

/// Nonnegative coefficients over the generators of each node's solvency cone.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferPlan {
    pub coeffs: Vec<Vec<f64>>,
}

impl TransferPlan {
    pub fn zeros(market: &MarketModel) -> Self {
        Self {
            coeffs: market
                .cones
                .iter()
                .map(|k| vec![0.0; k.generators().len()])
                .collect(),
        }
    }

    pub fn from_flat(market: &MarketModel, flat: &[f64]) -> Self {
        Self {
            coeffs: (0..market.tree.len())
                .map(|v| flat[market.offsets[v]..market.offsets[v + 1]].to_vec())
                .collect(),
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.coeffs.concat()
    }

    /// Increment `xi[v] = sum_g lambda[v][g] * (-g)` at every node.
    pub fn increments(&self, market: &MarketModel) -> AdaptedProcess {
        let d = market.d;
        let mut xi = AdaptedProcess::zeros(d, market.tree.len());
        for (v, lam) in self.coeffs.iter().enumerate() {
            let out = xi.node_mut(v);
            for (l, gen) in lam.iter().zip(market.cones[v].generators()) {
                for i in 0..d {
                    out[i] -= l * gen[i];
                }
            }
        }
        xi
    }
}

/// Pricing density over leaves, paired with positions as
/// `y(x) = sum_l mass(l) <y[l], x[l]>`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualVariable {
    pub y: TerminalPosition,
}

impl DualVariable {
    pub fn zeros(d: usize, leaves: usize) -> Self {
        Self {
            y: TerminalPosition::zeros(d, leaves),
        }
    }

    pub fn pairing(&self, tree: &ScenarioTree, x: &TerminalPosition) -> f64 {
        (0..tree.num_leaves())
            .map(|k| tree.leaf_mass(k) * dot(self.y.leaf(k), x.leaf(k)))
            .sum()
    }
}

/// A martingale `Z` with `Z[v]` in `K[v]^+`.
#[derive(Debug, Clone, PartialEq)]
pub struct PricingProcess {
    pub z: AdaptedProcess,
}

impl PricingProcess {
    /// Leaf values as a pricing density.
    pub fn leaf_density(&self, tree: &ScenarioTree) -> DualVariable {
        DualVariable {
            y: tree.lift_to_leaves(&self.z, tree.horizon()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NoArbitrageOutcome {
    /// A consistent pricing process whose leaf values are all at least `margin`.
    NoArbitrage {
        certificate: PricingProcess,
        margin: f64,
    },
    /// A nonzero nonnegative attainable position from zero endowment,
    /// normalized to unit total.
    Arbitrage {
        witness: TerminalPosition,
        plan: TransferPlan,
    },
}

/// Terminal positions reachable from the endowment `x0` at the root.
#[derive(Debug, Clone, PartialEq)]
pub struct AttainableSet {
    pub market: MarketModel,
    pub x0: Vec<f64>,
}

impl AttainableSet {
    pub fn new(market: MarketModel, x0: Vec<f64>) -> Result<Self, MarketError> {
        if x0.len() != market.d {
            return Err(MarketError::DimensionMismatch {
                expected: market.d,
                got: x0.len(),
            });
        }
        Ok(Self { market, x0 })
    }

    pub fn tree(&self) -> &ScenarioTree {
        &self.market.tree
    }

    pub fn dim(&self) -> usize {
        self.market.d
    }

    /// `x0 * 1` as a terminal position.
    pub fn endowment(&self) -> TerminalPosition {
        TerminalPosition::constant(&self.x0, self.tree().num_leaves())
    }

    /// `x[l] = x0 + sum of increments along the path to leaf l`.
    pub fn terminal_position(&self, plan: &TransferPlan) -> Result<TerminalPosition, MarketError> {
        let m = &self.market;
        if plan.coeffs.len() != m.tree.len() {
            return Err(MarketError::NodeCountMismatch {
                expected: m.tree.len(),
                got: plan.coeffs.len(),
            });
        }
        for (node, lam) in plan.coeffs.iter().enumerate() {
            let want = m.cones[node].generators().len();
            if lam.len() != want {
                return Err(MarketError::DimensionMismatch {
                    expected: want,
                    got: lam.len(),
                });
            }
            if let Some((generator, &value)) = lam.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
                return Err(MarketError::NegativeCoefficient {
                    node,
                    generator,
                    value,
                });
            }
        }
        let xi = plan.increments(m);
        let mut x = self.endowment();
        for (k, &leaf) in m.tree.leaves().iter().enumerate() {
            for v in m.tree.path_to(leaf) {
                for (xk, dv) in x.leaf_mut(k).iter_mut().zip(xi.node(v)) {
                    *xk += dv;
                }
            }
        }
        Ok(x)
    }

    /// Decides `x in A_T(x0)` up to `tol`; returns a witness plan when it is.
    ///
    /// The LP minimizes the l1 residual of the leaf balance equations and
    /// accepts when it is at most `tol * (1 + |x - x0|_1)`.
    pub fn membership(
        &self,
        x: &TerminalPosition,
        tol: f64,
        cfg: &SolverConfig,
    ) -> Result<Option<TransferPlan>, MarketError> {
        let m = &self.market;
        let d = m.d;
        let leaves = m.tree.num_leaves();
        if x.dim() != d || x.num_leaves() != leaves {
            return Err(MarketError::DimensionMismatch {
                expected: d * leaves,
                got: x.dim() * x.num_leaves(),
            });
        }
        let nl = m.num_plan_vars();
        let rows = d * leaves;
        let nv = nl + 2 * rows;
        let mut c = vec![0.0; nv];
        for v in &mut c[nl..] {
            *v = 1.0;
        }
        let mut lp = LinearProgram::new(nv).minimize(c);
        let pm = m.plan_matrix();
        let mut scale = 0.0;
        for (r, prow) in pm.into_iter().enumerate() {
            let mut row = prow;
            row.resize(nv, 0.0);
            row[nl + r] = 1.0;
            row[nl + rows + r] = -1.0;
            let rhs = x.as_flat()[r] - self.x0[r % d];
            scale += rhs.abs();
            lp.add_eq(row, rhs);
        }
        match lp.solve(cfg)? {
            LpOutcome::Optimal(sol) => {
                if sol.value <= tol * (1.0 + scale) {
                    let lam: Vec<f64> = sol.x[..nl].iter().map(|v| v.max(0.0)).collect();
                    Ok(Some(TransferPlan::from_flat(m, &lam)))
                } else {
                    Ok(None)
                }
            }
            other => Err(MarketError::SolverFailure(format!(
                "membership LP returned {other:?}"
            ))),
        }
    }

    /// True iff `E[y | v]` lies in `K[v]^+` (up to `tol`) at every node.
    pub fn dual_feasibility(&self, y: &DualVariable, tol: f64) -> bool {
        let m = &self.market;
        if y.y.dim() != m.d || y.y.num_leaves() != m.tree.num_leaves() {
            return false;
        }
        let Ok(ey) = m.tree.expectation_process(&y.y) else {
            return false;
        };
        (0..m.tree.len())
            .all(|v| m.polars[v].contains(ey.node(v), tol) && dual_slack_ok(m, v, ey.node(v), tol))
    }
}

/// `<g, w> >= -tol (1 + |w|)` for every generator of `K[v]`; equivalent to
/// membership in the polar but independent of the polar's own description.
fn dual_slack_ok(m: &MarketModel, v: usize, w: &[f64], tol: f64) -> bool {
    let slack = tol * (1.0 + dot(w, w).sqrt());
    m.cones[v].generators().iter().all(|g| dot(g, w) >= -slack)
}

/// Runs both the pricing-margin LP and the arbitrage LP and reports the one
/// that succeeds. Disagreement is an error, never resolved silently.
pub fn check_no_arbitrage(
    m: &MarketModel,
    cfg: &SolverConfig,
) -> Result<NoArbitrageOutcome, MarketError> {
    let pricing = pricing_margin(m, cfg)?;
    let arbitrage = arbitrage_witness(m, cfg)?;
    let margin = pricing.as_ref().map_or(f64::NEG_INFINITY, |p| p.1);
    let strict = margin > cfg.eps_strict;
    match (strict, arbitrage) {
        (true, None) => {
            let (certificate, margin) = pricing.expect("margin LP solved");
            Ok(NoArbitrageOutcome::NoArbitrage {
                certificate,
                margin,
            })
        }
        (false, Some((witness, plan))) => Ok(NoArbitrageOutcome::Arbitrage { witness, plan }),
        (_, arb) => Err(MarketError::Inconclusive {
            margin,
            arbitrage_feasible: arb.is_some(),
        }),
    }
}

/// Maximizes `delta` over leaf densities `y >= delta` with
/// `E[y | v] in K[v]^+` everywhere and `E[sum_i y_i] = 1`.
fn pricing_margin(
    m: &MarketModel,
    cfg: &SolverConfig,
) -> Result<Option<(PricingProcess, f64)>, MarketError> {
    let d = m.d;
    let leaves = m.tree.num_leaves();
    let ny = d * leaves;
    let nv = ny + 1;
    let mut c = vec![0.0; nv];
    c[ny] = -1.0;
    let mut lp = LinearProgram::new(nv).minimize(c);
    lp.set_free(ny);
    for mut row in m.dual_cone_rows() {
        row.push(0.0);
        lp.add_geq(row, 0.0);
    }
    for r in 0..ny {
        let mut row = vec![0.0; nv];
        row[r] = 1.0;
        row[ny] = -1.0;
        lp.add_geq(row, 0.0);
    }
    let mut norm = vec![0.0; nv];
    for k in 0..leaves {
        let w = m.tree.leaf_mass(k);
        for i in 0..d {
            norm[k * d + i] = w;
        }
    }
    lp.add_eq(norm, 1.0);
    match lp.solve(cfg)? {
        LpOutcome::Optimal(sol) => {
            let y = TerminalPosition::from_flat(d, sol.x[..ny].to_vec());
            let z = m.tree.expectation_process(&y)?;
            Ok(Some((PricingProcess { z }, sol.x[ny])))
        }
        LpOutcome::Infeasible(_) => Ok(None),
        LpOutcome::Unbounded { .. } => Err(MarketError::SolverFailure(
            "pricing margin LP reported unbounded".into(),
        )),
    }
}

/// Looks for a plan from zero endowment ending in a nonnegative position
/// with unit total.
fn arbitrage_witness(
    m: &MarketModel,
    cfg: &SolverConfig,
) -> Result<Option<(TerminalPosition, TransferPlan)>, MarketError> {
    let nl = m.num_plan_vars();
    let pm = m.plan_matrix();
    let mut total = vec![0.0; nl];
    let mut lp = LinearProgram::new(nl);
    for row in pm {
        for (t, v) in total.iter_mut().zip(&row) {
            *t += v;
        }
        lp.add_geq(row, 0.0);
    }
    lp.add_eq(total, 1.0);
    match lp.solve(cfg)? {
        LpOutcome::Optimal(sol) => {
            let lam: Vec<f64> = sol.x.iter().map(|v| v.max(0.0)).collect();
            let plan = TransferPlan::from_flat(m, &lam);
            let zero = AttainableSet {
                market: m.clone(),
                x0: vec![0.0; m.d],
            };
            let witness = zero.terminal_position(&plan)?;
            Ok(Some((witness, plan)))
        }
        LpOutcome::Infeasible(_) => Ok(None),
        LpOutcome::Unbounded { .. } => Err(MarketError::SolverFailure(
            "arbitrage LP reported unbounded".into(),
        )),
    }
}
