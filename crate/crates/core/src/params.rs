use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `1 / (2 * sqrt(pi))`: the integral of a squared unit-variance normal density.
pub const INV_TWO_SQRT_PI: f64 = 0.282_094_791_773_878_14;

/// How a numeric attribute's standard deviation is turned into an
/// expected-correct-guesses term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NumericScale {
    /// `1 / (2 sqrt(pi) sigma)`, the exact squared-density integral.
    #[default]
    Exact,
    /// `1 / sigma`.
    Bare,
}

impl NumericScale {
    pub fn constant(self) -> f64 {
        match self {
            NumericScale::Exact => INV_TWO_SQRT_PI,
            NumericScale::Bare => 1.0,
        }
    }
}

/// Learner parameters shared by the tree, the matcher and inference.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// Floor on numeric standard deviations.
    pub acuity: f64,
    pub numeric_scale: NumericScale,
    pub beam_width: usize,
    /// Run exact A* matching instead of beam search.
    pub exact_match_astar: bool,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            acuity: INV_TWO_SQRT_PI,
            numeric_scale: NumericScale::Exact,
            beam_width: 3,
            exact_match_astar: false,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.acuity.is_finite() && self.acuity > 0.0) {
            return Err(Error::InvalidParams(format!(
                "acuity must be a positive finite number, got {}",
                self.acuity
            )));
        }
        if self.beam_width == 0 {
            return Err(Error::InvalidParams("beam width must be at least 1".into()));
        }
        Ok(())
    }

    /// Expected-correct-guesses contribution of a numeric attribute with the
    /// given standard deviation, before presence weighting.
    pub fn numeric_term(&self, std: f64) -> f64 {
        self.numeric_scale.constant() / std.max(self.acuity)
    }
}
