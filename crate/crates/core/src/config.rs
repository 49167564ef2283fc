//! JSON instance files.
//!
//! A config names a tree, a bid-ask rule, utilities, the endowment, a weight
//! grid and optional solver tolerances. Emission is canonical: fields in
//! declaration order, two-space indentation, trailing newline.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cones::{
    random_bidask_process, validate_bidask, BidAskMatrix, ConeError, RandomMarketSpec,
};
use crate::duality::{weight_grid, DualityError, Weight, GRID_EPS};
use crate::market::{AttainableSet, MarketError, MarketModel};
use crate::solver::SolverConfig;
use crate::tree::{NodeSpec, ScenarioTree, TreeError};
use crate::utility::{UtilityError, UtilitySpec};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("parse error at {path}: {message}")]
    Parse { path: String, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error("{kind} at node {node}: {source}")]
    BidAsk {
        kind: &'static str,
        node: usize,
        source: ConeError,
    },
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error(transparent)]
    Utility(#[from] UtilityError),
    #[error(transparent)]
    Duality(#[from] DualityError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitNode {
    pub parent: Option<usize>,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TreeConfig {
    /// Uniform tree with the given child count per level.
    Branching(Vec<usize>),
    /// Explicit node list; `parent` indexes into the same list.
    Nodes(Vec<ExplicitNode>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BidAskConfig {
    /// Two assets, `pi[1][0] = 8 * 2^(sum of moves)` on a ternary tree whose
    /// children move by -1, 0, +1; every other entry is 1.
    PaperExample,
    /// The same matrix at every node.
    Constant { matrix: Vec<Vec<f64>> },
    /// One matrix per node, in the order the tree lists them.
    Explicit { matrices: Vec<Vec<Vec<f64>>> },
    Random {
        spread_lo: f64,
        spread_hi: f64,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub points: usize,
    #[serde(default = "default_eps")]
    pub eps: f64,
}

fn default_eps() -> f64 {
    GRID_EPS
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            points: 21,
            eps: GRID_EPS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketConfig {
    pub d: usize,
    pub tree: TreeConfig,
    pub bidask: BidAskConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utility: Option<UtilitySpec>,
    pub x0: Vec<f64>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub tolerances: SolverConfig,
}

/// A config turned into solver-ready objects.
#[derive(Debug, Clone)]
pub struct Instance {
    pub set: AttainableSet,
    pub utility: UtilitySpec,
    pub grid: Vec<Weight>,
    pub solver: SolverConfig,
}

/// The two-asset, three-period ternary example with exponential utilities and
/// zero endowment.
pub fn paper_example() -> MarketConfig {
    MarketConfig {
        d: 2,
        tree: TreeConfig::Branching(vec![3, 3, 3]),
        bidask: BidAskConfig::PaperExample,
        utility: Some(UtilitySpec::exponential(2)),
        x0: vec![0.0, 0.0],
        grid: GridConfig::default(),
        tolerances: SolverConfig::default(),
    }
}

impl MarketConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ConfigError::Parse {
                path,
                message: e.into_inner().to_string(),
            }
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn build_tree(&self) -> Result<ScenarioTree, ConfigError> {
        Ok(match &self.tree {
            TreeConfig::Branching(b) => ScenarioTree::uniform(b)?,
            TreeConfig::Nodes(nodes) => {
                let specs: Vec<NodeSpec> = nodes
                    .iter()
                    .map(|n| NodeSpec {
                        parent: n.parent,
                        mass: n.mass,
                    })
                    .collect();
                ScenarioTree::from_nodes(&specs)?
            }
        })
    }

    /// Raw matrices per tree node (breadth-first ids), before validation.
    fn raw_matrices(&self, tree: &ScenarioTree) -> Result<Vec<Vec<Vec<f64>>>, ConfigError> {
        let n = tree.len();
        match &self.bidask {
            BidAskConfig::PaperExample => paper_matrices(tree, self.d),
            BidAskConfig::Constant { matrix } => Ok(vec![matrix.clone(); n]),
            BidAskConfig::Explicit { matrices } => {
                if matrices.len() != n {
                    return Err(ConfigError::Invalid(format!(
                        "bidask.matrices has {} entries, tree has {n} nodes",
                        matrices.len()
                    )));
                }
                let mut out = vec![Vec::new(); n];
                for (k, m) in matrices.iter().enumerate() {
                    let id = match self.tree {
                        TreeConfig::Nodes(_) => tree.id_of_input(k),
                        TreeConfig::Branching(_) => k,
                    };
                    out[id] = m.clone();
                }
                Ok(out)
            }
            BidAskConfig::Random {
                spread_lo,
                spread_hi,
                seed,
            } => {
                if !(*spread_lo >= 0.0 && spread_hi >= spread_lo && spread_hi.is_finite()) {
                    return Err(ConfigError::Invalid(format!(
                        "spread range [{spread_lo}, {spread_hi}] must satisfy 0 <= lo <= hi"
                    )));
                }
                let spec = RandomMarketSpec {
                    d: self.d,
                    branching: match &self.tree {
                        TreeConfig::Branching(b) => b.clone(),
                        TreeConfig::Nodes(_) => Vec::new(),
                    },
                    spread_lo: *spread_lo,
                    spread_hi: *spread_hi,
                    seed: *seed,
                };
                Ok(random_bidask_process(&spec, tree)
                    .iter()
                    .map(BidAskMatrix::rows)
                    .collect())
            }
        }
    }

    /// Every violated invariant, one line each. Empty means the config builds.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.d == 0 {
            out.push("d must be at least 1".to_string());
        }
        if self.x0.len() != self.d {
            out.push(format!(
                "x0 has {} entries, expected {}",
                self.x0.len(),
                self.d
            ));
        }
        if let Some(u) = &self.utility {
            if u.dim() != self.d {
                out.push(format!(
                    "utility has {} entries, expected {}",
                    u.dim(),
                    self.d
                ));
            }
            if let Err(e) = u.validate() {
                out.push(e.to_string());
            }
        }
        if self.grid.points == 0 {
            out.push("grid.points must be at least 1".to_string());
        }
        let tree = match self.build_tree() {
            Ok(t) => t,
            Err(e) => {
                out.push(e.to_string());
                return out;
            }
        };
        match self.raw_matrices(&tree) {
            Ok(mats) => {
                for (node, m) in mats.iter().enumerate() {
                    if m.len() != self.d {
                        out.push(format!(
                            "matrix at node {node} has {} rows, expected {}",
                            m.len(),
                            self.d
                        ));
                        continue;
                    }
                    if let Err(e) = validate_bidask(m) {
                        out.push(
                            ConfigError::BidAsk {
                                kind: e.kind(),
                                node,
                                source: e,
                            }
                            .to_string(),
                        );
                    }
                }
            }
            Err(e) => out.push(e.to_string()),
        }
        out
    }

    pub fn build_market(&self) -> Result<MarketModel, ConfigError> {
        let tree = self.build_tree()?;
        let mut mats = Vec::with_capacity(tree.len());
        for (node, m) in self.raw_matrices(&tree)?.iter().enumerate() {
            if m.len() != self.d {
                return Err(ConfigError::Invalid(format!(
                    "matrix at node {node} has {} rows, expected {}",
                    m.len(),
                    self.d
                )));
            }
            mats.push(validate_bidask(m).map_err(|e| ConfigError::BidAsk {
                kind: e.kind(),
                node,
                source: e,
            })?);
        }
        Ok(MarketModel::new(tree, mats)?)
    }

    pub fn build(&self) -> Result<Instance, ConfigError> {
        let v = self.violations();
        if let Some(first) = v.first() {
            if v.len() == 1 {
                // Rebuild for a typed error when the cause is a single matrix.
                self.build_market()?;
            }
            return Err(ConfigError::Invalid(first.clone()));
        }
        let market = self.build_market()?;
        let set = AttainableSet::new(market, self.x0.clone())?;
        let utility = self
            .utility
            .clone()
            .unwrap_or_else(|| UtilitySpec::exponential(self.d));
        let grid = weight_grid(self.d, self.grid.points, self.grid.eps)?;
        Ok(Instance {
            set,
            utility,
            grid,
            solver: self.tolerances,
        })
    }
}

fn paper_matrices(tree: &ScenarioTree, d: usize) -> Result<Vec<Vec<Vec<f64>>>, ConfigError> {
    if d != 2 {
        return Err(ConfigError::Invalid(format!(
            "the paper-example rule needs d = 2, got {d}"
        )));
    }
    let mut moves = vec![0i32; tree.len()];
    for (id, node) in tree.nodes().iter().enumerate() {
        if !node.children.is_empty() && node.children.len() != 3 {
            return Err(ConfigError::Invalid(format!(
                "the paper-example rule needs a ternary tree; node {id} has {} children",
                node.children.len()
            )));
        }
        for (k, &c) in node.children.iter().enumerate() {
            moves[c] = moves[id] + k as i32 - 1;
        }
    }
    Ok(moves
        .iter()
        .map(|&s| vec![vec![1.0, 1.0], vec![8.0 * 2f64.powi(s), 1.0]])
        .collect())
}
