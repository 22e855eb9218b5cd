//! Estimator configuration.
//!
//! Two exponents steer the data-driven context-width search: `gamma` sets the
//! support threshold (a candidate context must occur more than `n^(1-gamma)`
//! times in the second half of the data to count as observed often enough),
//! and `beta` sets the acceptance level (the width estimate takes the first
//! depth whose conditional-frequency discrepancies all fall below `n^-beta`).
//! Consistency of the scheme needs `2*beta + gamma < 1`; `validate` rejects
//! anything outside that region and says which inequality failed.

use crate::alphabet::Symbol;
use crate::schedule::Schedule;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ParamError {
    #[error("beta must be positive, got {0}")]
    BetaNotPositive(f64),
    #[error("beta must be below 1, got {0}")]
    BetaTooLarge(f64),
    #[error("gamma must be positive, got {0}")]
    GammaNotPositive(f64),
    #[error("gamma must be below 1, got {0}")]
    GammaTooLarge(f64),
    #[error("2*beta + gamma < 1 violated: 2*{beta} + {gamma} = {sum}")]
    JointConstraint { beta: f64, gamma: f64, sum: f64 },
    #[error("target bound must be a positive finite number, got {0}")]
    BadTargetBound(f64),
}

/// The function whose conditional expectation is being estimated.
///
/// The default tracks the full family of indicators `1{x = z}`, i.e. the
/// conditional distribution of the next symbol. A scalar target carries a
/// caller-declared bound; applications are checked against it at run time
/// because boundedness cannot be verified from the closure itself.
#[derive(Clone)]
pub enum Target {
    /// One estimate per symbol: the indicator family `f_z(x) = 1{x = z}`.
    IndicatorFamily,
    /// A single bounded real-valued function of the next symbol.
    Scalar {
        f: Arc<dyn Fn(Symbol) -> f64 + Send + Sync>,
        bound: f64,
    },
}

impl Target {
    pub fn scalar(f: impl Fn(Symbol) -> f64 + Send + Sync + 'static, bound: f64) -> Target {
        Target::Scalar {
            f: Arc::new(f),
            bound,
        }
    }
}

impl fmt::Debug for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::IndicatorFamily => write!(f, "IndicatorFamily"),
            Target::Scalar { bound, .. } => write!(f, "Scalar {{ bound: {bound} }}"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct EstimatorParams {
    pub beta: f64,
    pub gamma: f64,
    pub schedule: Schedule,
    pub target: Target,
}

impl EstimatorParams {
    /// `beta = gamma = 0.3` with the identity schedule and the indicator
    /// family; the workhorse configuration of the test rigs.
    pub fn new(beta: f64, gamma: f64, schedule: Schedule) -> EstimatorParams {
        EstimatorParams {
            beta,
            gamma,
            schedule,
            target: Target::IndicatorFamily,
        }
    }

    pub fn with_target(mut self, target: Target) -> EstimatorParams {
        self.target = target;
        self
    }

    // The negated comparisons double as NaN rejection.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), ParamError> {
        let (beta, gamma) = (self.beta, self.gamma);
        if !(beta > 0.0) {
            return Err(ParamError::BetaNotPositive(beta));
        }
        if !(beta < 1.0) {
            return Err(ParamError::BetaTooLarge(beta));
        }
        if !(gamma > 0.0) {
            return Err(ParamError::GammaNotPositive(gamma));
        }
        if !(gamma < 1.0) {
            return Err(ParamError::GammaTooLarge(gamma));
        }
        let sum = 2.0 * beta + gamma;
        if !(sum < 1.0) {
            return Err(ParamError::JointConstraint { beta, gamma, sum });
        }
        if let Target::Scalar { bound, .. } = &self.target {
            if !(bound.is_finite() && *bound > 0.0) {
                return Err(ParamError::BadTargetBound(*bound));
            }
        }
        Ok(())
    }

    /// Acceptance level `n^-beta` for the width search at horizon `n`.
    pub fn acceptance_level(&self, n: usize) -> f64 {
        (n as f64).powf(-self.beta)
    }

    /// Support threshold `n^(1-gamma)`: a context qualifies only with
    /// strictly more occurrences than this.
    pub fn support_threshold(&self, n: usize) -> f64 {
        (n as f64).powf(1.0 - self.gamma)
    }
}
