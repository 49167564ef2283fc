//! Finite filtered probability spaces as rooted scenario trees.
//!
//! The atoms of the time-`t` sigma algebra are the depth-`t` nodes. Nodes are
//! numbered breadth first, children in input order, so the leaves under any
//! node occupy a contiguous range of leaf indices.

use std::ops::Range;

use thiserror::Error;

/// Tolerance for probability mass conservation checks.
pub const MASS_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeError {
    #[error("node {node} has non-positive probability {mass}")]
    NonPositiveProbability { node: usize, mass: f64 },
    #[error("children of node {node} carry mass {children}, expected {expected}")]
    MassMismatch {
        node: usize,
        expected: f64,
        children: f64,
    },
    #[error("leaf {node} sits at depth {depth}, expected horizon {horizon}")]
    DepthMismatch {
        node: usize,
        depth: usize,
        horizon: usize,
    },
    #[error("invalid tree structure: {0}")]
    Structure(String),
    #[error("time {t} outside 0..={horizon}")]
    TimeOutOfRange { t: usize, horizon: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub parent: Option<usize>,
    pub time: usize,
    pub mass: f64,
    pub children: Vec<usize>,
    /// Leaf indices (positions in [`ScenarioTree::leaves`]) below this node.
    pub leaf_range: Range<usize>,
}

/// One entry of an explicit node list. `parent` refers to a position in the
/// same input list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeSpec {
    pub parent: Option<usize>,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTree {
    horizon: usize,
    nodes: Vec<Node>,
    leaves: Vec<usize>,
    by_time: Vec<Vec<usize>>,
    /// `input_to_id[k]` is the breadth-first id of the k-th input node.
    input_to_id: Vec<usize>,
}

impl ScenarioTree {
    /// Uniform tree: every node at depth `t` has `branching[t]` children with
    /// equal conditional probability.
    pub fn uniform(branching: &[usize]) -> Result<Self, TreeError> {
        if branching.contains(&0) {
            return Err(TreeError::Structure("zero branching factor".into()));
        }
        let mut specs = vec![NodeSpec {
            parent: None,
            mass: 1.0,
        }];
        let mut frontier = vec![0usize];
        for &b in branching {
            let mut next = Vec::with_capacity(frontier.len() * b);
            for &p in &frontier {
                let mass = specs[p].mass / b as f64;
                for _ in 0..b {
                    specs.push(NodeSpec {
                        parent: Some(p),
                        mass,
                    });
                    next.push(specs.len() - 1);
                }
            }
            frontier = next;
        }
        Self::from_nodes(&specs)
    }

    /// Builds a tree from an explicit node list with absolute probability
    /// masses. The horizon is the depth of the deepest node.
    pub fn from_nodes(specs: &[NodeSpec]) -> Result<Self, TreeError> {
        let n = specs.len();
        let roots: Vec<usize> = (0..n).filter(|&k| specs[k].parent.is_none()).collect();
        if roots.len() != 1 {
            return Err(TreeError::Structure(format!(
                "expected exactly one root, found {}",
                roots.len()
            )));
        }
        let mut kids = vec![Vec::new(); n];
        for (k, s) in specs.iter().enumerate() {
            if let Some(p) = s.parent {
                if p >= n || p == k {
                    return Err(TreeError::Structure(format!(
                        "node {k} has invalid parent {p}"
                    )));
                }
                kids[p].push(k);
            }
            if !(s.mass > 0.0) {
                return Err(TreeError::NonPositiveProbability {
                    node: k,
                    mass: s.mass,
                });
            }
        }

        // Breadth-first renumbering.
        let mut order = Vec::with_capacity(n);
        let mut depth_of = vec![0usize; n];
        order.push(roots[0]);
        let mut head = 0;
        while head < order.len() {
            let k = order[head];
            head += 1;
            for &c in &kids[k] {
                depth_of[c] = depth_of[k] + 1;
                order.push(c);
            }
        }
        if order.len() != n {
            return Err(TreeError::Structure(
                "node list is not connected to the root".into(),
            ));
        }
        let mut input_to_id = vec![0usize; n];
        for (id, &k) in order.iter().enumerate() {
            input_to_id[k] = id;
        }

        let horizon = order.iter().map(|&k| depth_of[k]).max().unwrap_or(0);
        let mut nodes: Vec<Node> = order
            .iter()
            .map(|&k| Node {
                parent: specs[k].parent.map(|p| input_to_id[p]),
                time: depth_of[k],
                mass: specs[k].mass,
                children: kids[k].iter().map(|&c| input_to_id[c]).collect(),
                leaf_range: 0..0,
            })
            .collect();

        if (nodes[0].mass - 1.0).abs() > MASS_TOL {
            return Err(TreeError::MassMismatch {
                node: 0,
                expected: 1.0,
                children: nodes[0].mass,
            });
        }
        let mut leaves = Vec::new();
        for (id, node) in nodes.iter().enumerate() {
            if node.children.is_empty() {
                if node.time != horizon {
                    return Err(TreeError::DepthMismatch {
                        node: id,
                        depth: node.time,
                        horizon,
                    });
                }
                leaves.push(id);
            } else {
                let sum: f64 = node.children.iter().map(|&c| nodes[c].mass).sum();
                if (sum - node.mass).abs() > MASS_TOL * node.mass.max(1.0) {
                    return Err(TreeError::MassMismatch {
                        node: id,
                        expected: node.mass,
                        children: sum,
                    });
                }
            }
        }

        // Leaves are the trailing block of the breadth-first order, so leaf
        // ranges can be accumulated bottom up.
        let first_leaf = leaves[0];
        for id in (0..n).rev() {
            if nodes[id].children.is_empty() {
                let k = id - first_leaf;
                nodes[id].leaf_range = k..k + 1;
            } else {
                let first = nodes[id].children[0];
                let last = *nodes[id].children.last().unwrap();
                nodes[id].leaf_range = nodes[first].leaf_range.start..nodes[last].leaf_range.end;
            }
        }

        let mut by_time = vec![Vec::new(); horizon + 1];
        for (id, node) in nodes.iter().enumerate() {
            by_time[node.time].push(id);
        }

        Ok(Self {
            horizon,
            nodes,
            leaves,
            by_time,
            input_to_id,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: usize) -> &Node {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Leaf node ids, in leaf-index order.
    pub fn leaves(&self) -> &[usize] {
        &self.leaves
    }

    pub fn num_leaves(&self) -> usize {
        self.leaves.len()
    }

    pub fn leaf_mass(&self, leaf: usize) -> f64 {
        self.nodes[self.leaves[leaf]].mass
    }

    pub fn nodes_at(&self, t: usize) -> &[usize] {
        &self.by_time[t]
    }

    /// Breadth-first id assigned to the k-th node of the input list.
    pub fn id_of_input(&self, k: usize) -> usize {
        self.input_to_id[k]
    }

    /// Node ids from the root down to `id`, inclusive.
    pub fn path_to(&self, id: usize) -> Vec<usize> {
        let mut path = vec![id];
        let mut cur = id;
        while let Some(p) = self.nodes[cur].parent {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }

    /// Conditional expectation of a leaf-indexed vector at every node.
    pub fn expectation_process(&self, x: &TerminalPosition) -> Result<AdaptedProcess, TreeError> {
        if x.num_leaves() != self.num_leaves() {
            return Err(TreeError::DimensionMismatch {
                expected: self.num_leaves(),
                got: x.num_leaves(),
            });
        }
        let d = x.dim();
        let mut sums = vec![0.0; self.len() * d];
        for id in (0..self.len()).rev() {
            let node = &self.nodes[id];
            if node.children.is_empty() {
                let k = node.leaf_range.start;
                for i in 0..d {
                    sums[id * d + i] = node.mass * x.leaf(k)[i];
                }
            } else {
                for &c in &node.children {
                    for i in 0..d {
                        sums[id * d + i] += sums[c * d + i];
                    }
                }
            }
        }
        for (id, node) in self.nodes.iter().enumerate() {
            for v in &mut sums[id * d..(id + 1) * d] {
                *v /= node.mass;
            }
        }
        Ok(AdaptedProcess { d, data: sums })
    }

    /// `E[x | F_t]`, one vector per depth-`t` node in [`Self::nodes_at`] order.
    pub fn conditional_expectation(
        &self,
        x: &TerminalPosition,
        t: usize,
    ) -> Result<Vec<Vec<f64>>, TreeError> {
        if t > self.horizon {
            return Err(TreeError::TimeOutOfRange {
                t,
                horizon: self.horizon,
            });
        }
        let all = self.expectation_process(x)?;
        Ok(self.by_time[t]
            .iter()
            .map(|&id| all.node(id).to_vec())
            .collect())
    }

    /// Embeds a process observed at time `t` back onto the leaves.
    pub fn lift_to_leaves(&self, process: &AdaptedProcess, t: usize) -> TerminalPosition {
        let d = process.dim();
        let mut out = TerminalPosition::zeros(d, self.num_leaves());
        for &id in &self.by_time[t] {
            for k in self.nodes[id].leaf_range.clone() {
                out.leaf_mut(k).copy_from_slice(process.node(id));
            }
        }
        out
    }
}

/// An `R^d`-valued process with one value per tree node.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptedProcess {
    d: usize,
    data: Vec<f64>,
}

impl AdaptedProcess {
    pub fn zeros(d: usize, nodes: usize) -> Self {
        Self {
            d,
            data: vec![0.0; d * nodes],
        }
    }

    pub fn from_flat(d: usize, data: Vec<f64>) -> Self {
        assert!(d > 0 && data.len().is_multiple_of(d));
        Self { d, data }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn num_nodes(&self) -> usize {
        self.data.len() / self.d
    }

    pub fn node(&self, id: usize) -> &[f64] {
        &self.data[id * self.d..(id + 1) * self.d]
    }

    pub fn node_mut(&mut self, id: usize) -> &mut [f64] {
        &mut self.data[id * self.d..(id + 1) * self.d]
    }
}

/// A terminal portfolio: one `R^d` vector per leaf, i.e. a point of `R^{d x N}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TerminalPosition {
    d: usize,
    data: Vec<f64>,
}

impl TerminalPosition {
    pub fn zeros(d: usize, leaves: usize) -> Self {
        Self {
            d,
            data: vec![0.0; d * leaves],
        }
    }

    /// The deterministic position `x0` held in every scenario.
    pub fn constant(x0: &[f64], leaves: usize) -> Self {
        Self {
            d: x0.len(),
            data: x0.repeat(leaves),
        }
    }

    pub fn from_flat(d: usize, data: Vec<f64>) -> Self {
        assert!(d > 0 && data.len().is_multiple_of(d));
        Self { d, data }
    }

    pub fn from_leaves(rows: &[Vec<f64>]) -> Self {
        let d = rows.first().map_or(0, Vec::len);
        Self {
            d,
            data: rows.concat(),
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn num_leaves(&self) -> usize {
        self.data.len().checked_div(self.d).unwrap_or(0)
    }

    pub fn leaf(&self, k: usize) -> &[f64] {
        &self.data[k * self.d..(k + 1) * self.d]
    }

    pub fn leaf_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.data[k * self.d..(k + 1) * self.d]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }
}
