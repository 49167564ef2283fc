//! Separable vector utilities `U(x) = (u_1(x_1), ..., u_d(x_d))` and the
//! scalar conjugate kernel
//!
//! ```text
//! phi(y, z) = inf_x { z * (-u(x)) + y * x }
//! ```
//!
//! which is everything the dual objective needs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ExtReal;

/// Exponents beyond this magnitude are rejected instead of overflowing.
pub const EXP_CLAMP: f64 = 700.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UtilityError {
    #[error("exponent {0} outside [-700, 700]")]
    Overflow(f64),
    #[error("weight must be positive, got {0}")]
    NegativeWeight(f64),
    #[error("invalid utility parameters: {0}")]
    InvalidParameter(String),
}

/// A scalar utility: strictly concave, strictly increasing, differentiable on
/// all of `R`, with marginal utility running from `+inf` down to `0`.
pub trait ScalarUtility {
    fn eval(&self, x: f64) -> Result<f64, UtilityError>;
    fn deriv(&self, x: f64) -> Result<f64, UtilityError>;
    /// `-u''(x)`, positive by strict concavity.
    fn neg_second_deriv(&self, x: f64) -> Result<f64, UtilityError>;
    fn conjugate_kernel(&self, y: f64, z: f64) -> Result<ExtReal, UtilityError>;
    fn conjugate_argmin(&self, y: f64, z: f64) -> Result<f64, UtilityError>;
    /// `-d^2 phi / dy^2 = 1 / (z * -u''(x*))` at the conjugate argmin.
    fn conjugate_curvature(&self, y: f64, z: f64) -> Result<f64, UtilityError>;
}

/// `u(x) = -a * exp(-x / b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Exponential {
    pub a: f64,
    pub b: f64,
}

impl Default for Exponential {
    fn default() -> Self {
        Self { a: 1.0, b: 1.0 }
    }
}

impl Exponential {
    fn decay(&self, x: f64) -> Result<f64, UtilityError> {
        let e = -x / self.b;
        if !(-EXP_CLAMP..=EXP_CLAMP).contains(&e) {
            return Err(UtilityError::Overflow(e));
        }
        Ok(e.exp())
    }
}

impl ScalarUtility for Exponential {
    fn eval(&self, x: f64) -> Result<f64, UtilityError> {
        Ok(-self.a * self.decay(x)?)
    }

    fn deriv(&self, x: f64) -> Result<f64, UtilityError> {
        Ok(self.a / self.b * self.decay(x)?)
    }

    fn neg_second_deriv(&self, x: f64) -> Result<f64, UtilityError> {
        Ok(self.a / (self.b * self.b) * self.decay(x)?)
    }

    /// `phi(y, z) = b y (1 - ln(b y / (a z)))` for `y > 0`, `0` at `y = 0` and
    /// `-inf` for `y < 0`.
    fn conjugate_kernel(&self, y: f64, z: f64) -> Result<ExtReal, UtilityError> {
        if !(z > 0.0) {
            return Err(UtilityError::NegativeWeight(z));
        }
        Ok(if y < 0.0 {
            ExtReal::NegInf
        } else if y == 0.0 {
            ExtReal::Finite(0.0)
        } else {
            let r = self.b * y / (self.a * z);
            ExtReal::Finite(self.b * y * (1.0 - r.ln()))
        })
    }

    /// Stationary point of `z * a * exp(-x/b) + y x`: `x = -b ln(b y / (a z))`.
    fn conjugate_argmin(&self, y: f64, z: f64) -> Result<f64, UtilityError> {
        if !(z > 0.0) {
            return Err(UtilityError::NegativeWeight(z));
        }
        if !(y > 0.0) {
            return Err(UtilityError::InvalidParameter(format!(
                "argmin requires y > 0, got {y}"
            )));
        }
        Ok(-self.b * (self.b * y / (self.a * z)).ln())
    }

    fn conjugate_curvature(&self, y: f64, z: f64) -> Result<f64, UtilityError> {
        if !(z > 0.0) {
            return Err(UtilityError::NegativeWeight(z));
        }
        if !(y > 0.0) {
            return Err(UtilityError::InvalidParameter(format!(
                "curvature requires y > 0, got {y}"
            )));
        }
        Ok(self.b / y)
    }
}

/// Utility family for one asset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum AssetUtility {
    Exponential(Exponential),
}

impl AssetUtility {
    pub fn validate(&self) -> Result<(), UtilityError> {
        match self {
            AssetUtility::Exponential(e) => {
                if e.a > 0.0 && e.b > 0.0 && e.a.is_finite() && e.b.is_finite() {
                    Ok(())
                } else {
                    Err(UtilityError::InvalidParameter(format!(
                        "exponential needs a, b > 0 (a = {}, b = {})",
                        e.a, e.b
                    )))
                }
            }
        }
    }

    fn inner(&self) -> &dyn ScalarUtility {
        match self {
            AssetUtility::Exponential(e) => e,
        }
    }
}

impl ScalarUtility for AssetUtility {
    fn eval(&self, x: f64) -> Result<f64, UtilityError> {
        self.inner().eval(x)
    }
    fn deriv(&self, x: f64) -> Result<f64, UtilityError> {
        self.inner().deriv(x)
    }
    fn neg_second_deriv(&self, x: f64) -> Result<f64, UtilityError> {
        self.inner().neg_second_deriv(x)
    }
    fn conjugate_kernel(&self, y: f64, z: f64) -> Result<ExtReal, UtilityError> {
        self.inner().conjugate_kernel(y, z)
    }
    fn conjugate_argmin(&self, y: f64, z: f64) -> Result<f64, UtilityError> {
        self.inner().conjugate_argmin(y, z)
    }
    fn conjugate_curvature(&self, y: f64, z: f64) -> Result<f64, UtilityError> {
        self.inner().conjugate_curvature(y, z)
    }
}

/// Per-asset utilities for a `d`-asset market.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UtilitySpec(pub Vec<AssetUtility>);

impl UtilitySpec {
    /// `u_i(x) = -exp(-x)` for every asset.
    pub fn exponential(d: usize) -> Self {
        Self(vec![AssetUtility::Exponential(Exponential::default()); d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn asset(&self, i: usize) -> &AssetUtility {
        &self.0[i]
    }

    pub fn validate(&self) -> Result<(), UtilityError> {
        self.0.iter().try_for_each(AssetUtility::validate)
    }

    /// `-U(x)` componentwise.
    pub fn disutility(&self, x: &[f64]) -> Result<Vec<f64>, UtilityError> {
        self.0
            .iter()
            .zip(x)
            .map(|(u, &v)| Ok(-u.eval(v)?))
            .collect()
    }
}
