//! Sequential prediction for stationary discrete-valued time series.
//!
//! The estimator observes one symbol at a time and maintains a growing family
//! of recurrence stopping times. At data-driven instants it freezes a context
//! width, matches the current suffix of the path against a reconstructed past,
//! and updates a running estimate of the conditional law of the next symbol.
//! For stationary ergodic sources the estimates are pointwise consistent along
//! those instants; for sources whose conditional law depends on finitely many
//! past symbols the frozen width recovers that memory length.
//!
//! Module map:
//! - [`alphabet`]: symbols, patterns, paths, label codec
//! - [`schedule`]: recurrence-block length schedules and their inverse
//! - [`params`]: estimator exponents and target functions
//! - [`index`]: incremental occurrence counts over end-position windows
//! - [`predictor`]: the online estimator itself
//! - [`process`]: samplers and exact oracles for benchmark sources
//! - [`reference`]: deliberately naive re-implementations used as test oracles
//! - [`experiment`]: seeded replication harness shared by the CLI and tests
//! - [`cli`]: command-line front end

pub mod alphabet;
pub mod cli;
pub mod experiment;
pub mod index;
pub mod params;
pub mod predictor;
pub mod process;
pub mod reference;
pub mod schedule;

pub use alphabet::{Path, Pattern, Symbol, SymbolCodec};
pub use experiment::{
    final_decile, run_experiment, run_on_path, run_replication, EventRow, Replication, RunOptions,
};
pub use params::{EstimatorParams, ParamError, Target};
pub use predictor::{Diagnostics, Estimate, Predictor, PredictorError, StepOutcome};
pub use process::{
    replication_seed, ConditionalTracker, Memory, Process, ProcessError, ProcessKind, ProcessSpec,
};
pub use reference::ReferenceError;
pub use schedule::{Schedule, ScheduleError};
