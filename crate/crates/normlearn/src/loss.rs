//! Convex training losses over a scalar prediction, plus the zero-one
//! evaluation metric.
//!
//! Classification losses (hinge, logistic) assume labels in {-1, +1};
//! the data layer maps {0, 1} labels before they reach here.

use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    Squared,
    Logistic,
    Hinge,
    /// Evaluation-only metric; has no derivative.
    ZeroOne,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LossError {
    #[error("zero-one loss is an evaluation metric and has no derivative")]
    NotDifferentiable,
    #[error("unknown loss `{0}` (expected squared, logistic, hinge or zero-one)")]
    Unknown(String),
}

fn sign(v: f64) -> f64 {
    if v >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// log(1 + exp(z)) without overflow for large |z|.
fn log1p_exp(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

impl Loss {
    pub fn value(self, yhat: f64, y: f64) -> f64 {
        match self {
            Loss::Squared => {
                let d = yhat - y;
                d * d
            }
            Loss::Logistic => log1p_exp(-y * yhat),
            Loss::Hinge => (1.0 - y * yhat).max(0.0),
            Loss::ZeroOne => {
                if sign(yhat) != sign(y) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// d loss / d yhat. At the hinge kink (y*yhat == 1) returns 0, a valid
    /// subgradient that makes the update a no-op at the boundary.
    pub fn derivative(self, yhat: f64, y: f64) -> Result<f64, LossError> {
        match self {
            Loss::Squared => Ok(2.0 * (yhat - y)),
            Loss::Logistic => Ok(-y / (1.0 + (y * yhat).exp())),
            Loss::Hinge => Ok(if y * yhat < 1.0 { -y } else { 0.0 }),
            Loss::ZeroOne => Err(LossError::NotDifferentiable),
        }
    }

    /// True for losses a learner can be trained on.
    pub fn is_trainable(self) -> bool {
        !matches!(self, Loss::ZeroOne)
    }

    /// True for losses whose label convention is {-1, +1}.
    pub fn is_classification(self) -> bool {
        matches!(self, Loss::Logistic | Loss::Hinge | Loss::ZeroOne)
    }

    pub fn name(self) -> &'static str {
        match self {
            Loss::Squared => "squared",
            Loss::Logistic => "logistic",
            Loss::Hinge => "hinge",
            Loss::ZeroOne => "zero-one",
        }
    }
}

impl fmt::Display for Loss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Loss {
    type Err = LossError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "squared" => Ok(Loss::Squared),
            "logistic" => Ok(Loss::Logistic),
            "hinge" => Ok(Loss::Hinge),
            "zero-one" | "zero_one" | "01" => Ok(Loss::ZeroOne),
            other => Err(LossError::Unknown(other.to_string())),
        }
    }
}
