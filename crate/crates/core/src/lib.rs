//! Multi-period portfolio selection under proportional transaction costs on
//! finite scenario trees, and numerical checks of set-valued Lagrange duality
//! through weighted-sum scalarizations.
//!
//! The pieces, bottom up:
//!
//! - [`tree`]: the filtered probability space as a rooted tree.
//! - [`cones`]: bid-ask matrices, solvency cones and their polars.
//! - [`market`]: attainable sets, dual feasibility, arbitrage detection.
//! - [`utility`]: separable utilities and their conjugate kernel.
//! - [`solver`]: the LP and smooth convex kernels everything else calls.
//! - [`duality`]: primal/dual scalarizations and upper-image bounds.
//! - [`config`]: the JSON instance format.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

use std::fmt;

use serde::{Serialize, Serializer};
use thiserror::Error;

pub mod cones;
pub mod config;
pub mod duality;
pub mod market;
pub mod solver;
pub mod tree;
pub mod utility;

pub use cones::{
    polar_cone, random_bidask_process, solvency_cone, validate_bidask, BidAskMatrix, ConeError,
    PolyCone, RandomMarketSpec,
};
pub use config::{paper_example, ConfigError, Instance, MarketConfig};
pub use duality::{
    dual_scalarize, duality_report, lagrangian_halfspace, primal_recovery_check, primal_scalarize,
    upper_image, weight_grid, DualityError, DualityReport, HalfSpace, RecoveryOutcome,
    ScalarSolveReport, UpperImage, Weight,
};
pub use market::{
    AttainableSet, DualVariable, MarketError, MarketModel, NoArbitrageOutcome, PricingProcess,
    TransferPlan,
};
pub use solver::SolverConfig;
pub use tree::{AdaptedProcess, NodeSpec, ScenarioTree, TerminalPosition, TreeError};
pub use utility::{AssetUtility, Exponential, ScalarUtility, UtilityError, UtilitySpec};

/// A real number or one of the two infinities.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub enum ExtReal {
    NegInf,
    Finite(f64),
    PosInf,
}

impl ExtReal {
    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    /// Maps the infinities to the `f64` infinities.
    pub fn to_f64(self) -> f64 {
        match self {
            ExtReal::NegInf => f64::NEG_INFINITY,
            ExtReal::Finite(v) => v,
            ExtReal::PosInf => f64::INFINITY,
        }
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::NegInf => f.write_str("-inf"),
            ExtReal::Finite(v) => write!(f, "{v}"),
            ExtReal::PosInf => f.write_str("inf"),
        }
    }
}

impl Serialize for ExtReal {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            ExtReal::Finite(v) => s.serialize_f64(*v),
            other => s.serialize_str(&other.to_string()),
        }
    }
}

/// Any failure raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Cone(#[from] ConeError),
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error(transparent)]
    Utility(#[from] UtilityError),
    #[error(transparent)]
    Duality(#[from] DualityError),
    #[error(transparent)]
    Config(#[from] ConfigError),
}
