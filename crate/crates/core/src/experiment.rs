//! Seeded replication harness shared by the command-line front end and the
//! acceptance suite.
//!
//! One replication generates a stationary sample path, streams it through
//! the online estimator, and records what happened at every prediction
//! time: the time itself, the frozen width, the running estimates, and —
//! when the source has a finite alphabet — the exact conditional law at
//! that moment together with the estimation error. Replications derive
//! their seeds from the master seed on the source spec, so a batch is
//! reproducible as a whole and each replication is reproducible alone.

use crate::alphabet::{Path, Symbol};
use crate::params::{EstimatorParams, Target};
use crate::predictor::{Estimate, Predictor, PredictorError};
use crate::process::{replication_seed, Process};
use rayon::prelude::*;

/// What one prediction time contributed to the trace.
///
/// `estimates` carries one running estimate per symbol for the indicator
/// family, or a single entry for a scalar target; `oracle` lines up with it
/// when the source can answer, and `abs_error` is their largest gap.
#[derive(Debug, Clone, PartialEq)]
pub struct EventRow {
    pub round: usize,
    pub time: usize,
    pub width: usize,
    pub estimates: Vec<f64>,
    pub oracle: Option<Vec<f64>>,
    pub abs_error: Option<f64>,
    /// Prediction time per round, `time / round`.
    pub ratio: f64,
}

/// Controls what a replication retains beyond its summary vectors.
#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Keep the full per-event trace (memory-heavy at long horizons).
    pub keep_trace: bool,
    /// How many reconstructed past coordinates to report.
    pub tilde_depth: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            keep_trace: false,
            tilde_depth: 4,
        }
    }
}

/// Everything one replication produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Replication {
    pub replication: usize,
    /// The derived seed this replication actually ran under.
    pub seed: u64,
    /// Prediction time per round; entry 0 is the fixed origin.
    pub lambdas: Vec<usize>,
    /// Frozen width per round, aligned with `lambdas`.
    pub kappas: Vec<usize>,
    /// Reconstructed past values `x̃_0, x̃_{-1}, …`, `None` where the
    /// recurrence stops were still undetermined at the horizon.
    pub reconstructed: Vec<Option<Symbol>>,
    /// Estimation error per round from round 1 on; empty when the source
    /// has no finite conditional oracle.
    pub errors: Vec<f64>,
    pub trace: Option<Vec<EventRow>>,
    pub diagnostics: crate::predictor::Diagnostics,
}

impl Replication {
    /// Number of completed prediction rounds (the origin does not count).
    pub fn rounds(&self) -> usize {
        self.lambdas.len() - 1
    }

    /// Terminal `lambda_n / n`, or `None` before the first round.
    pub fn terminal_ratio(&self) -> Option<f64> {
        let n = self.rounds();
        (n > 0).then(|| *self.lambdas.last().unwrap() as f64 / n as f64)
    }

    /// The last round whose prediction time jumped by more than one step,
    /// or `None` when every round advanced by exactly one.
    pub fn last_long_increment_round(&self) -> Option<usize> {
        (1..self.lambdas.len())
            .rev()
            .find(|&r| self.lambdas[r] - self.lambdas[r - 1] != 1)
    }
}

/// The trailing tenth of a slice (at least one element when nonempty).
pub fn final_decile<T>(xs: &[T]) -> &[T] {
    let take = (xs.len() / 10).max(1).min(xs.len());
    &xs[xs.len() - take..]
}

/// Runs replication `replication` of the experiment: a fresh seeded path
/// of `horizon` symbols streamed through a fresh estimator.
pub fn run_replication(
    process: &Process,
    params: &EstimatorParams,
    horizon: usize,
    replication: usize,
    options: &RunOptions,
) -> Result<Replication, PredictorError> {
    assert!(horizon >= 1);
    let seed = replication_seed(process.spec().seed, replication as u64);
    let path = process.reseeded(seed).generate(horizon);
    run_on_path(Some(process), &path, params, replication, seed, options)
}

/// Streams an already-materialized path through a fresh estimator,
/// consulting the source's oracle along the way when one is given. The
/// `replication` and `seed` arguments only label the result.
pub fn run_on_path(
    oracle: Option<&Process>,
    path: &Path,
    params: &EstimatorParams,
    replication: usize,
    seed: u64,
    options: &RunOptions,
) -> Result<Replication, PredictorError> {
    assert!(!path.is_empty());
    let mut predictor = Predictor::new(params.clone())?;
    let mut tracker = oracle.and_then(|p| p.tracker().ok());
    let alphabet = oracle.and_then(|p| p.alphabet_size());
    let mut errors = Vec::new();
    let mut trace = options.keep_trace.then(Vec::new);

    for t in 0..path.len() {
        let x = path[t];
        let outcome = predictor.step(x)?;
        if let Some(tracker) = tracker.as_mut() {
            tracker
                .push(x)
                .expect("a generated path stays inside its own support");
        }
        if !outcome.new_prediction_time {
            continue;
        }
        let round = predictor.lambdas().len() - 1;
        if round == 0 {
            continue;
        }
        let estimates = estimate_row(&predictor, alphabet);
        let oracle = tracker.as_ref().map(|tracker| {
            let law = tracker.law();
            match &params.target {
                Target::IndicatorFamily => law,
                Target::Scalar { f, .. } => vec![law
                        .iter()
                        .enumerate()
                        .map(|(y, p)| p * f(y as Symbol))
                        .sum()],
            }
        });
        let abs_error = oracle.as_ref().map(|oracle| {
            estimates
                .iter()
                .zip(oracle)
                .map(|(e, o)| (e - o).abs())
                .fold(0.0f64, f64::max)
        });
        if let Some(err) = abs_error {
            errors.push(err);
        }
        if let Some(rows) = trace.as_mut() {
            rows.push(EventRow {
                round,
                time: outcome.time,
                width: outcome.width,
                estimates,
                oracle,
                abs_error,
                ratio: outcome.time as f64 / round as f64,
            });
        }
    }

    let reconstructed = (0..options.tilde_depth)
        .map(|i| predictor.reconstructed_value(i))
        .collect::<Result<_, _>>()?;
    Ok(Replication {
        replication,
        seed,
        lambdas: predictor.lambdas().to_vec(),
        kappas: predictor.kappas().to_vec(),
        reconstructed,
        errors,
        trace,
        diagnostics: predictor.diagnostics(),
    })
}

/// Runs a batch of replications in parallel and returns them in
/// replication order.
pub fn run_experiment(
    process: &Process,
    params: &EstimatorParams,
    horizon: usize,
    replications: usize,
    options: &RunOptions,
) -> Result<Vec<Replication>, PredictorError> {
    (0..replications)
        .into_par_iter()
        .map(|r| run_replication(process, params, horizon, r, options))
        .collect()
}

/// The predictor's running estimates as a dense row, padded to the
/// alphabet when one is known.
fn estimate_row(predictor: &Predictor, alphabet: Option<usize>) -> Vec<f64> {
    match predictor
        .estimate()
        .expect("a completed round has at least one successor")
    {
        Estimate::Scalar(v) => vec![v],
        Estimate::Distribution(mut d) => {
            if let Some(a) = alphabet {
                d.resize(a.max(d.len()), 0.0);
            }
            d
        }
    }
}
