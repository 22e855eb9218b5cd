//! Recurrence-block length schedules.
//!
//! The estimator repeatedly waits for the most recent block of the path to
//! recur. How long that block is at stage `k` is set by a schedule `l(k)`,
//! which must satisfy
//!
//! ```text
//!     l(1) = 1,    1 <= l(k) <= k,    l nondecreasing,    l(k) -> infinity.
//! ```
//!
//! Growing `l` slowly keeps the recurrence waits short: the logarithmic
//! schedule `l(n) = min(n, max(1, floor(c * log2 n)))` with
//! `c = (2 + delta) / (eps1 - eps2)` keeps the stage-`n` stopping time below
//! `n^(c*(H + eps1))` eventually, where `H` is the entropy rate of the source.
//! The identity schedule `l(k) = k` is the simplest admissible choice and the
//! default everywhere in the test rigs.
//!
//! `j_index(n)` inverts the schedule: it returns the first stage whose
//! *successor* block length exceeds `n`, i.e. `J(n) = min { j >= 1 : l(j+1) > n }`.
//! This is the stage whose stopping time anchors the reconstructed past at
//! depth `n` (see the predictor module).

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("block length index {0} out of range (first stage is 1)")]
    IndexOutOfRange(usize),
    #[error("schedule table exhausted: stage {stage} requested but table ends at {horizon}")]
    Exhausted { stage: usize, horizon: usize },
    #[error("schedule table invalid: {0}")]
    BadTable(String),
    #[error("logarithmic schedule invalid: {0}")]
    BadLogarithmic(String),
}

/// A validated block-length schedule.
#[derive(Clone, Debug, PartialEq)]
pub enum Schedule {
    /// `l(k) = k`.
    Identity,
    /// `l(n) = min(n, max(1, floor((2+delta)/(eps1-eps2) * log2 n)))`.
    Logarithmic { delta: f64, eps1: f64, eps2: f64 },
    /// Explicit values `l(1), l(2), ...`; stages past the end are rejected
    /// rather than extrapolated.
    Table { values: Vec<usize> },
}

impl Schedule {
    /// Logarithmic schedule with the default constants
    /// `delta = 1, eps1 = 0.5, eps2 = 0.25` (growth exponent 12).
    pub fn logarithmic_default() -> Schedule {
        Schedule::logarithmic(1.0, 0.5, 0.25).expect("default constants are valid")
    }

    // The negated comparisons double as NaN rejection.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn logarithmic(delta: f64, eps1: f64, eps2: f64) -> Result<Schedule, ScheduleError> {
        let bad = |msg: String| Err(ScheduleError::BadLogarithmic(msg));
        if !delta.is_finite() || delta <= 0.0 {
            return bad(format!("delta must be a positive finite number, got {delta}"));
        }
        if !eps1.is_finite() || !eps2.is_finite() {
            return bad(format!("eps1/eps2 must be finite, got {eps1}, {eps2}"));
        }
        if !(eps2 > 0.0) {
            return bad(format!("eps2 must be positive, got {eps2}"));
        }
        if !(eps1 > eps2) {
            return bad(format!("eps1 must exceed eps2, got eps1={eps1}, eps2={eps2}"));
        }
        Ok(Schedule::Logarithmic { delta, eps1, eps2 })
    }

    pub fn table(values: Vec<usize>) -> Result<Schedule, ScheduleError> {
        let bad = |msg: String| Err(ScheduleError::BadTable(msg));
        if values.is_empty() {
            return bad("table must cover at least stage 1".into());
        }
        if values[0] != 1 {
            return bad(format!("l(1) must be 1, got {}", values[0]));
        }
        for (i, w) in values.windows(2).enumerate() {
            if w[1] < w[0] {
                return bad(format!(
                    "block lengths must be nondecreasing, but l({}) = {} < l({}) = {}",
                    i + 2,
                    w[1],
                    i + 1,
                    w[0]
                ));
            }
        }
        for (i, &v) in values.iter().enumerate() {
            let k = i + 1;
            if v < 1 || v > k {
                return bad(format!("need 1 <= l(k) <= k, but l({k}) = {v}"));
            }
        }
        Ok(Schedule::Table { values })
    }

    /// Block length `l(k)` for stage `k >= 1`.
    pub fn block_len(&self, k: usize) -> Result<usize, ScheduleError> {
        if k == 0 {
            return Err(ScheduleError::IndexOutOfRange(0));
        }
        match self {
            Schedule::Identity => Ok(k),
            Schedule::Logarithmic { delta, eps1, eps2 } => {
                let c = (2.0 + delta) / (eps1 - eps2);
                let raw = (c * (k as f64).log2()).floor().max(1.0);
                Ok(raw.min(k as f64) as usize)
            }
            Schedule::Table { values } => values.get(k - 1).copied().ok_or(
                ScheduleError::Exhausted {
                    stage: k,
                    horizon: values.len(),
                },
            ),
        }
    }

    /// `J(n) = min { j >= 1 : l(j+1) > n }`.
    ///
    /// Always exists for the built-in unbounded schedules; a table schedule
    /// errs if its horizon ends before a long enough block length appears.
    /// For slowly growing schedules `J` explodes quickly (logarithmic `l`
    /// makes `J(n)` exponential in `n`), so callers that only need to know
    /// whether `J(n)` is below some bound should use [`Schedule::j_index_within`].
    pub fn j_index(&self, n: usize) -> Result<usize, ScheduleError> {
        if let Schedule::Identity = self {
            // l(j+1) = j+1 > n first at j = max(n, 1).
            return Ok(n.max(1));
        }
        let mut j = 1usize;
        loop {
            if self.block_len(j + 1)? > n {
                return Ok(j);
            }
            j += 1;
        }
    }

    /// `J(n)` if it is at most `limit`, else `None`. Never scans past
    /// `limit` stages, so it is safe for schedules where `J(n)` is huge.
    pub fn j_index_within(&self, n: usize, limit: usize) -> Result<Option<usize>, ScheduleError> {
        if let Schedule::Identity = self {
            let j = n.max(1);
            return Ok((j <= limit).then_some(j));
        }
        for j in 1..=limit {
            match self.block_len(j + 1) {
                Ok(l) if l > n => return Ok(Some(j)),
                Ok(_) => {}
                // A table ending early cannot answer "is J(n) <= limit"
                // affirmatively, and stages beyond the horizon are rejected.
                Err(e) => return Err(e),
            }
        }
        Ok(None)
    }

    /// Exponent `c = (2+delta)/(eps1-eps2)` controlling the polynomial
    /// growth bound of the stopping times; only logarithmic schedules
    /// carry one.
    pub fn growth_exponent(&self) -> Option<f64> {
        match self {
            Schedule::Logarithmic { delta, eps1, eps2 } => Some((2.0 + delta) / (eps1 - eps2)),
            _ => None,
        }
    }
}
