//! The online estimation engine.
//!
//! One symbol enters per step and four things advance in a fixed order:
//! the occurrence index, the recurrence stopping times, the context width
//! for the new horizon, and — when the new moment completes a match — the
//! prediction round with its frozen width and the running estimate. The
//! outputs are defined to be bit-for-bit identical to the from-scratch
//! replay in [`crate::reference`]; every piece of incremental state here is
//! justified by an argument of the form "this cached value cannot differ
//! from the recomputed one", and the equivalence suite holds the two
//! implementations together on thousands of paths.
//!
//! Two deliberate asymmetries with the replay, both answer-preserving:
//!
//! * the reconstructed context of width `k` is read as one contiguous block
//!   ending at its pinning stop, rather than value by value — later stops
//!   reproduce earlier pinned values exactly (tested as an invariant of the
//!   replay), so the block spelling is the same;
//! * the width search asks only "does any disagreement exceed the level?",
//!   abandoning a scan at the first excessive gap instead of completing the
//!   max. The full max is still available as [`Predictor::delta_hat`].
//!
//! Candidate extension words are enumerated from the index, whose tracked
//! block length is capped; on pathologically repetitive inputs the search
//! can outrun the cap, and those levels fall back to literal window scans
//! (same arithmetic, no index), keeping memory bounded at the price of
//! speed on inputs that are degenerate anyway.

use crate::alphabet::{Path, Symbol};
use crate::index::{OccurrenceIndex, DEFAULT_LEN_CAP};
use crate::params::{EstimatorParams, ParamError, Target};
use crate::schedule::ScheduleError;
use rustc_hash::{FxHashMap, FxHashSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PredictorError {
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error("target value {value} at symbol {symbol} leaves the declared bound {bound}")]
    TargetOutOfBounds {
        symbol: Symbol,
        value: f64,
        bound: f64,
    },
}

/// What one step changed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StepOutcome {
    /// The time index of the symbol just consumed.
    pub time: usize,
    /// Context width at this horizon.
    pub width: usize,
    /// A recurrence stage completed at this moment.
    pub new_recurrence_stop: bool,
    /// This moment became a prediction time.
    pub new_prediction_time: bool,
}

/// Current estimate, shaped by the configured target.
#[derive(Clone, Debug, PartialEq)]
pub enum Estimate {
    /// Estimated conditional distribution, indexed by symbol; symbols past
    /// the vector's end have estimate zero.
    Distribution(Vec<f64>),
    /// Estimated conditional mean of the scalar target.
    Scalar(f64),
}

/// Counters for conditions that are legal but worth surfacing.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Diagnostics {
    /// Steps whose accepted width `k >= 1` was accepted only because the
    /// stage pinning its context had not stopped inside the first half —
    /// the width scan's built-in stopgap, not an evidence-based acceptance.
    pub widths_accepted_by_cutoff: u64,
    /// Extension levels answered by literal rescans because the index's
    /// tracked block length is capped.
    pub fallback_levels: u64,
}

pub struct Predictor {
    params: EstimatorParams,
    path: Path,
    index: OccurrenceIndex,
    /// Determined recurrence stopping times, stage 0 first.
    zetas: Vec<usize>,
    /// Block length of the stage currently searching, asked of the schedule
    /// at its first candidate moment.
    pending_len: Option<usize>,
    lambdas: Vec<usize>,
    kappas: Vec<usize>,
    successors: Vec<Symbol>,
    /// Successor tallies per symbol (the distribution numerators).
    counts: Vec<u64>,
    /// Running sum of the scalar target over successors, in round order.
    scalar_sum: f64,
    /// Distinct symbols observed so far, ascending; the candidate pool for
    /// extension enumeration in the width scan.
    seen_symbols: Vec<Symbol>,
    diagnostics: Diagnostics,
}

impl Predictor {
    pub fn new(params: EstimatorParams) -> Result<Self, PredictorError> {
        Self::with_index_cap(params, DEFAULT_LEN_CAP)
    }

    /// A predictor whose index materializes blocks only up to `cap` symbols,
    /// answering longer queries by rescans. The default cap suits real use;
    /// tests shrink it to force the fallback paths.
    pub fn with_index_cap(params: EstimatorParams, cap: usize) -> Result<Self, PredictorError> {
        params.validate()?;
        Ok(Predictor {
            params,
            path: Path::new(),
            index: OccurrenceIndex::with_len_cap(cap),
            zetas: Vec::new(),
            pending_len: None,
            lambdas: Vec::new(),
            kappas: Vec::new(),
            successors: Vec::new(),
            counts: Vec::new(),
            scalar_sum: 0.0,
            seen_symbols: Vec::new(),
            diagnostics: Diagnostics::default(),
        })
    }

    pub fn params(&self) -> &EstimatorParams {
        &self.params
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Horizon of the data seen so far (`None` before the first symbol).
    pub fn horizon(&self) -> Option<usize> {
        self.path.last_time()
    }

    pub fn zetas(&self) -> &[usize] {
        &self.zetas
    }

    pub fn lambdas(&self) -> &[usize] {
        &self.lambdas
    }

    pub fn kappas(&self) -> &[usize] {
        &self.kappas
    }

    pub fn successors(&self) -> &[Symbol] {
        &self.successors
    }

    /// Completed prediction rounds (number of successors averaged so far).
    pub fn rounds(&self) -> usize {
        self.successors.len()
    }

    pub fn diagnostics(&self) -> Diagnostics {
        self.diagnostics
    }

    /// Current estimate, `None` until the first round completes.
    pub fn estimate(&self) -> Option<Estimate> {
        let n = self.rounds();
        if n == 0 {
            return None;
        }
        Some(match &self.params.target {
            Target::IndicatorFamily => Estimate::Distribution(
                self.counts
                    .iter()
                    .map(|&c| c as f64 / n as f64)
                    .collect(),
            ),
            Target::Scalar { .. } => Estimate::Scalar(self.scalar_sum / n as f64),
        })
    }

    /// Estimated conditional probability of one symbol, `None` before the
    /// first round.
    pub fn indicator_estimate(&self, symbol: Symbol) -> Option<f64> {
        let n = self.rounds();
        if n == 0 {
            return None;
        }
        let c = self.counts.get(symbol as usize).copied().unwrap_or(0);
        Some(c as f64 / n as f64)
    }

    /// Reconstructed value `i` steps back, `None` while its pinning stage
    /// is undetermined.
    pub fn reconstructed_value(&self, i: usize) -> Result<Option<Symbol>, ScheduleError> {
        if self.zetas.is_empty() {
            return Ok(None);
        }
        match self
            .params
            .schedule
            .j_index_within(i, self.zetas.len() - 1)?
        {
            Some(j) => Ok(self.path.get(self.zetas[j] - i)),
            None => Ok(None),
        }
    }

    /// Consumes the next symbol and advances every part of the scheme.
    pub fn step(&mut self, x: Symbol) -> Result<StepOutcome, PredictorError> {
        self.path.push(x);
        self.index.append_position(&self.path);
        if let Err(slot) = self.seen_symbols.binary_search(&x) {
            self.seen_symbols.insert(slot, x);
        }
        let t = self.path.len() - 1;

        // 1. Recurrence stopping times. Stage s searches for the first
        // moment whose length-l(s) block reproduces the block ending at the
        // previous stop; the new moment is its only new candidate, so one
        // comparison settles this step. The stage's block length is asked
        // at its first candidate moment — a table schedule that cannot name
        // it errs here, exactly when the search would need it.
        let mut new_stop = false;
        if t == 0 {
            self.zetas.push(0);
        } else {
            let anchor = *self.zetas.last().unwrap();
            let len = match self.pending_len {
                Some(l) => l,
                None => {
                    let l = self.params.schedule.block_len(self.zetas.len())?;
                    self.pending_len = Some(l);
                    l
                }
            };
            if self.path.blocks_equal(t, anchor, len) {
                self.zetas.push(t);
                self.pending_len = None;
                new_stop = true;
            }
        }

        // 2. Context width at the new horizon.
        let width = self.chi_current()?;

        // 3. Prediction round bookkeeping. The successor of the previous
        // round is the symbol right after the previous prediction time, so
        // it is collected before this moment is tested as the next one.
        let prev = self.lambdas.last().copied();
        match prev {
            None => {
                // time 0 is the zeroth prediction time by definition
                self.lambdas.push(0);
                self.kappas.push(0);
            }
            Some(prev) => {
                if t == prev + 1 {
                    self.absorb_successor(x)?;
                }
                let j = self.zetas.partition_point(|&z| z <= prev) - 1;
                let anchor = self.zetas[j];
                assert!(
                    width <= anchor + 1,
                    "width {width} at time {t} outruns the anchored history at {anchor}"
                );
                if j + 1 < self.zetas.len() {
                    assert!(
                        t <= self.zetas[j + 1],
                        "prediction search passed the next recurrence stop"
                    );
                }
                if width == 0 || self.path.blocks_equal(t, anchor, width) {
                    self.lambdas.push(t);
                    self.kappas.push(width);
                }
            }
        }

        Ok(StepOutcome {
            time: t,
            width,
            new_recurrence_stop: new_stop,
            new_prediction_time: self.lambdas.last() == Some(&t),
        })
    }

    fn absorb_successor(&mut self, x: Symbol) -> Result<(), PredictorError> {
        if let Target::Scalar { f, bound } = &self.params.target {
            let v = f(x);
            if !(v.is_finite() && v.abs() <= *bound) {
                return Err(PredictorError::TargetOutOfBounds {
                    symbol: x,
                    value: v,
                    bound: *bound,
                });
            }
            self.scalar_sum += v;
        }
        if self.counts.len() <= x as usize {
            self.counts.resize(x as usize + 1, 0);
        }
        self.counts[x as usize] += 1;
        self.successors.push(x);
        Ok(())
    }

    /// Smallest width whose worst disagreement is within the acceptance
    /// level at the current horizon.
    fn chi_current(&mut self) -> Result<usize, PredictorError> {
        let n = self.path.len() - 1;
        if n == 0 {
            return Ok(0);
        }
        let level = self.params.acceptance_level(n);
        for k in 0..n {
            let scan = self.delta_scan(k, Some(level))?;
            if scan.value <= level {
                if k >= 1 && scan.cutoff {
                    self.diagnostics.widths_accepted_by_cutoff += 1;
                }
                return Ok(k);
            }
        }
        unreachable!("width scan exhausted every k < {n}");
    }

    /// Worst disagreement between the width-`k` conditionals and those of
    /// any admissible extension, at the current horizon (the quantity the
    /// width search thresholds).
    pub fn delta_hat(&mut self, k: usize) -> Result<f64, PredictorError> {
        match self.path.last_time() {
            Some(n) if n > 0 => Ok(self.delta_scan(k, None)?.value),
            _ => Ok(0.0),
        }
    }

    fn delta_scan(&mut self, k: usize, stop_above: Option<f64>) -> Result<DeltaScan, PredictorError> {
        let n = self.path.len() - 1;
        debug_assert!(n >= 1);
        let half = n.div_ceil(2);

        // the stage pinning the width-k context must have stopped inside
        // the first half; undetermined counts as late
        let determined = self.zetas.len() - 1;
        let pin = self
            .params
            .schedule
            .j_index_within(k, determined.min(half))?;
        let anchor = match pin {
            Some(j) if self.zetas[j] < half => self.zetas[j],
            _ => {
                return Ok(DeltaScan {
                    value: 0.0,
                    cutoff: true,
                })
            }
        };
        // later stops reproduce pinned values, so the context is one block
        let ctx: Vec<Symbol> = self.path[anchor + 1 - k..=anchor].to_vec();

        let den_k = self.count_window(&ctx, (half + k).saturating_sub(1), n - 1);
        if den_k == 0 {
            // every comparison pair is skipped
            return Ok(DeltaScan {
                value: 0.0,
                cutoff: false,
            });
        }
        let mut short_ratio: FxHashMap<Symbol, f64> = FxHashMap::default();
        let support = (n as f64).powf(1.0 - self.params.gamma);
        let mut best = 0.0f64;
        let mut frontier = Frontier::default();

        for i in 1..=n {
            let m = k + i;
            if m + 1 > half {
                break;
            }
            let level_admitted = self.scan_level(
                &ctx,
                k,
                m,
                half,
                n,
                support,
                den_k,
                &mut short_ratio,
                &mut frontier,
                &mut best,
                stop_above,
            );
            if let Some(levelcap) = stop_above {
                if best > levelcap {
                    return Ok(DeltaScan {
                        value: best,
                        cutoff: false,
                    });
                }
            }
            if !level_admitted {
                break;
            }
        }
        Ok(DeltaScan {
            value: best,
            cutoff: false,
        })
    }

    /// One extension level: words of length `m + 1` whose trailing `k + 1`
    /// symbols are `ctx` plus a continuation, admitted when seen in the
    /// first half and frequent in the second. Returns whether the level
    /// admitted anything; the worst gap accumulates into `best`.
    ///
    /// Candidates come from the frontier rather than from every distinct
    /// block of the length: an admitted word occurs ending past `half + m`,
    /// where its one-symbol-shorter suffix also occurs inside the previous
    /// level's (wider) window, with its first occurrence no later and with
    /// the same trailing context — so the suffix was admitted there, and
    /// prepending one observed symbol to the previous admitted words
    /// enumerates every candidate the full sweep would have admitted.
    #[allow(clippy::too_many_arguments)]
    fn scan_level(
        &mut self,
        ctx: &[Symbol],
        k: usize,
        m: usize,
        half: usize,
        n: usize,
        support: f64,
        den_k: usize,
        short_ratio: &mut FxHashMap<Symbol, f64>,
        frontier: &mut Frontier,
        best: &mut f64,
        stop_above: Option<f64>,
    ) -> bool {
        let wlen = m + 1;
        if !self.index.grow_to(&self.path, wlen) {
            self.diagnostics.fallback_levels += 1;
            return self.scan_level_by_rescan(ctx, k, m, half, n, support, den_k, short_ratio, best);
        }
        frontier.next.clear();
        let mut admitted = false;
        let symbols = self.seen_symbols.len();
        if m == k + 1 {
            // seed level: candidates are lead | ctx | tail
            'seed: for lead in 0..symbols {
                for tail in 0..symbols {
                    frontier.scratch.clear();
                    frontier.scratch.push(self.seen_symbols[lead]);
                    frontier.scratch.extend_from_slice(ctx);
                    frontier.scratch.push(self.seen_symbols[tail]);
                    if self.check_candidate(
                        ctx,
                        k,
                        m,
                        half,
                        n,
                        support,
                        den_k,
                        short_ratio,
                        frontier,
                        &mut admitted,
                        best,
                        stop_above,
                    ) {
                        break 'seed;
                    }
                }
            }
        } else {
            // deeper levels: candidates are lead | previously admitted word
            'extend: for lead in 0..symbols {
                for base in 0..frontier.words.len() {
                    frontier.scratch.clear();
                    frontier.scratch.push(self.seen_symbols[lead]);
                    frontier.scratch.extend_from_slice(&frontier.words[base]);
                    if self.check_candidate(
                        ctx,
                        k,
                        m,
                        half,
                        n,
                        support,
                        den_k,
                        short_ratio,
                        frontier,
                        &mut admitted,
                        best,
                        stop_above,
                    ) {
                        break 'extend;
                    }
                }
            }
        }
        std::mem::swap(&mut frontier.words, &mut frontier.next);
        admitted
    }

    /// Tests the word in `frontier.scratch` for admission at its level and
    /// folds its conditional gap into `best`; admitted words join
    /// `frontier.next`. Returns whether the scan should short-circuit.
    #[allow(clippy::too_many_arguments)]
    fn check_candidate(
        &self,
        ctx: &[Symbol],
        k: usize,
        m: usize,
        half: usize,
        n: usize,
        support: f64,
        den_k: usize,
        short_ratio: &mut FxHashMap<Symbol, f64>,
        frontier: &mut Frontier,
        admitted: &mut bool,
        best: &mut f64,
        stop_above: Option<f64>,
    ) -> bool {
        debug_assert_eq!(frontier.scratch.len(), m + 1);
        let positions = self
            .index
            .positions(&frontier.scratch)
            .expect("level just grown to cover this length");
        if positions.is_empty() {
            return false;
        }
        // seen in the first half: the earliest occurrence decides
        if (positions[0] as usize) >= half {
            return false;
        }
        let c = OccurrenceIndex::range_count(positions, half + m, n);
        if (c as f64) <= support {
            return false;
        }
        *admitted = true;
        frontier.next.push(frontier.scratch.clone());
        let w = &frontier.scratch;
        let x = w[m];
        let den = self.count_window_at(&w[..m], half + m - 1, n - 1);
        debug_assert!(den >= c);
        let r1 = *short_ratio.entry(x).or_insert_with(|| {
            let mut ext = ctx.to_vec();
            ext.push(x);
            let num = self.count_window_at(&ext, half + k, n);
            num as f64 / den_k as f64
        });
        let gap = (r1 - (c as f64 / den as f64)).abs();
        if gap > *best {
            *best = gap;
            if let Some(level) = stop_above {
                if *best > level {
                    return true;
                }
            }
        }
        false
    }

    /// The same level answered without the index: scratch count tables over
    /// the two windows, candidates walked off the first half directly.
    #[allow(clippy::too_many_arguments)]
    fn scan_level_by_rescan(
        &self,
        ctx: &[Symbol],
        k: usize,
        m: usize,
        half: usize,
        n: usize,
        support: f64,
        den_k: usize,
        short_ratio: &mut FxHashMap<Symbol, f64>,
        best: &mut f64,
    ) -> bool {
        let data = &self.path[..=n];
        let mut word_counts: FxHashMap<&[Symbol], u32> = FxHashMap::default();
        for t in half + m..=n {
            *word_counts.entry(&data[t - m..=t]).or_insert(0) += 1;
        }
        let mut ext_den: FxHashMap<&[Symbol], u32> = FxHashMap::default();
        for t in half + m - 1..=n - 1 {
            *ext_den.entry(&data[t - m + 1..=t]).or_insert(0) += 1;
        }
        let mut seen: FxHashSet<&[Symbol]> = FxHashSet::default();
        let mut admitted = false;
        for t in m..half {
            if data[t - k..t] != *ctx {
                continue;
            }
            let w = &data[t - m..=t];
            if !seen.insert(w) {
                continue;
            }
            let c = word_counts.get(w).copied().unwrap_or(0);
            if (c as f64) <= support {
                continue;
            }
            admitted = true;
            let x = w[m];
            let den = *ext_den
                .get(&w[..m])
                .expect("a second-half word occurrence contains its context");
            let r1 = *short_ratio.entry(x).or_insert_with(|| {
                let mut ext = ctx.to_vec();
                ext.push(x);
                let num = crate::reference::count_ending_in(data, &ext, half + k, n);
                num as f64 / den_k as f64
            });
            let gap = (r1 - (c as f64 / den as f64)).abs();
            if gap > *best {
                *best = gap;
            }
        }
        admitted
    }

    /// Window count through the index, growing it first when the length is
    /// not yet materialized (or rescanning past the cap).
    fn count_window(&mut self, block: &[Symbol], lo: usize, hi: usize) -> usize {
        if !block.is_empty() && !self.index.covers(block.len()) {
            self.index.grow_to(&self.path, block.len());
        }
        self.count_window_at(block, lo, hi)
    }

    /// Window count for a length the index already covers, by literal
    /// rescan beyond the cap.
    fn count_window_at(&self, block: &[Symbol], lo: usize, hi: usize) -> usize {
        if block.is_empty() || self.index.covers(block.len()) {
            self.index
                .count_in(block, lo, hi)
                .expect("covered length cannot err")
        } else {
            crate::reference::count_ending_in(&self.path, block, lo, hi)
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct DeltaScan {
    value: f64,
    /// The zero came from the pinning stage sitting past the first half
    /// (or being undetermined), not from observed agreement.
    cutoff: bool,
}

/// Admitted words carried from one extension level to the next; deeper
/// candidates are one-symbol extensions of these, and `scratch` is the
/// reusable buffer the candidate under test is assembled in.
#[derive(Debug, Default)]
struct Frontier {
    words: Vec<Vec<Symbol>>,
    next: Vec<Vec<Symbol>>,
    scratch: Vec<Symbol>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Target;
    use crate::reference;
    use crate::schedule::Schedule;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn feed(pred: &mut Predictor, path: &Path) -> Vec<StepOutcome> {
        path.iter()
            .map(|&x| pred.step(x).expect("step"))
            .collect()
    }

    /// Step the engine over the path and check every externally visible
    /// quantity against the from-scratch replay, bit for bit.
    fn assert_matches_replay(path: &Path, params: &EstimatorParams, cap: usize) {
        let mut pred = Predictor::with_index_cap(params.clone(), cap).unwrap();
        let outcomes = feed(&mut pred, path);
        let replay = reference::run(path, params).unwrap();

        let widths: Vec<usize> = outcomes.iter().map(|o| o.width).collect();
        assert_eq!(widths, replay.chis, "width trajectory diverged");
        assert_eq!(pred.zetas(), &replay.zetas[..], "recurrence stops diverged");
        assert_eq!(pred.lambdas(), &replay.lambdas[..], "prediction times diverged");
        assert_eq!(pred.kappas(), &replay.kappas[..], "frozen widths diverged");
        assert_eq!(pred.successors(), &replay.successors[..], "successors diverged");

        for s in 0..4u32 {
            let expect = replay.indicator_estimates(s).last().copied();
            assert_eq!(pred.indicator_estimate(s), expect, "estimate of {s} diverged");
        }

        // full disagreement maxima at the final horizon
        let n = path.len() - 1;
        for k in 0..4 {
            let fast = pred.delta_hat(k).unwrap();
            let slow = reference::delta_hat(path, &replay.zetas, n, k, params).unwrap();
            assert_eq!(fast, slow, "disagreement diverged at k={k}");
        }
    }

    #[test]
    fn engine_matches_replay_on_fixed_paths() {
        let mut rng = StdRng::seed_from_u64(40);
        let binary = Path::from_symbols((0..40).map(|_| rng.gen_range(0..2)).collect());
        assert_matches_replay(&binary, &EstimatorParams::new(0.3, 0.3, Schedule::Identity), 64);

        let ternary = Path::from_symbols((0..60).map(|_| rng.gen_range(0..3)).collect());
        assert_matches_replay(
            &ternary,
            &EstimatorParams::new(0.24, 0.5, Schedule::logarithmic_default()),
            64,
        );
    }

    #[test]
    fn engine_matches_replay_on_random_paths() {
        let mut rng = StdRng::seed_from_u64(0xE0);
        for case in 0..150 {
            let (len, a) = (rng.gen_range(2..200), rng.gen_range(2..5));
            let path = Path::from_symbols((0..len).map(|_| rng.gen_range(0..a)).collect());
            let schedule = if case % 2 == 0 {
                Schedule::Identity
            } else {
                Schedule::logarithmic_default()
            };
            let params = if case % 3 == 0 {
                EstimatorParams::new(0.24, 0.5, schedule)
            } else {
                EstimatorParams::new(0.3, 0.3, schedule)
            };
            assert_matches_replay(&path, &params, 64);
        }
    }

    #[test]
    fn tiny_index_cap_forces_rescans_and_still_agrees() {
        let mut rng = StdRng::seed_from_u64(0xCA9);
        let mut fallbacks = 0;
        for case in 0..80 {
            let (len, a) = (rng.gen_range(4..120), rng.gen_range(2..4));
            let path = Path::from_symbols((0..len).map(|_| rng.gen_range(0..a)).collect());
            let schedule = if case % 2 == 0 {
                Schedule::Identity
            } else {
                Schedule::logarithmic_default()
            };
            let params = EstimatorParams::new(0.3, 0.3, schedule);
            assert_matches_replay(&path, &params, 2);

            let mut pred = Predictor::with_index_cap(params, 2).unwrap();
            feed(&mut pred, &path);
            fallbacks += pred.diagnostics().fallback_levels;
        }
        assert!(fallbacks > 0, "the cap never forced a rescan level");
    }

    #[test]
    fn short_circuit_agrees_with_the_full_maximum() {
        let mut rng = StdRng::seed_from_u64(0x5C);
        for _ in 0..60 {
            let (len, a) = (rng.gen_range(6..150), rng.gen_range(2..4));
            let path = Path::from_symbols((0..len).map(|_| rng.gen_range(0..a)).collect());
            let params = EstimatorParams::new(0.3, 0.3, Schedule::Identity);
            let mut pred = Predictor::new(params.clone()).unwrap();
            feed(&mut pred, &path);
            let n = path.len() - 1;
            for k in 0..3 {
                let full = pred.delta_scan(k, None).unwrap().value;
                for level in [
                    full * 0.9,
                    full,
                    full * 1.1 + 1e-12,
                    params.acceptance_level(n),
                ] {
                    let quick = pred.delta_scan(k, Some(level)).unwrap();
                    assert_eq!(
                        quick.value <= level,
                        full <= level,
                        "short-circuit verdict diverged at k={k} level={level}"
                    );
                }
            }
        }
    }

    #[test]
    fn frozen_values_on_the_alternating_path() {
        let alt = Path::from_symbols((0..20).map(|t| (t % 2) as u32).collect());
        let params = EstimatorParams::new(0.24, 0.5, Schedule::Identity);
        let mut pred = Predictor::new(params).unwrap();
        let outcomes = feed(&mut pred, &alt);
        assert_eq!(pred.delta_hat(0).unwrap(), 0.5);
        assert_eq!(pred.delta_hat(1).unwrap(), 0.0);
        assert_eq!(outcomes.last().unwrap().width, 1);
        assert_eq!(pred.diagnostics().widths_accepted_by_cutoff, 0);
    }

    #[test]
    fn scalar_target_estimates_match_replay() {
        let mut rng = StdRng::seed_from_u64(0xF1);
        let path = Path::from_symbols((0..90).map(|_| rng.gen_range(0..3)).collect());
        let f = |x: Symbol| 0.1 + x as f64 * 0.3;
        let params = EstimatorParams::new(0.3, 0.3, Schedule::Identity)
            .with_target(Target::scalar(f, 1.0));
        let mut pred = Predictor::new(params.clone()).unwrap();
        feed(&mut pred, &path);
        let replay = reference::run(&path, &params).unwrap();
        let expect = replay.scalar_estimates(&f).last().copied().unwrap();
        assert_eq!(pred.estimate(), Some(Estimate::Scalar(expect)));
    }

    #[test]
    fn scalar_target_bound_is_enforced() {
        let params = EstimatorParams::new(0.3, 0.3, Schedule::Identity)
            .with_target(Target::scalar(|x| x as f64 * 10.0, 1.0));
        let mut pred = Predictor::new(params).unwrap();
        pred.step(0).unwrap();
        let err = pred.step(1).unwrap_err();
        assert!(matches!(
            err,
            PredictorError::TargetOutOfBounds { symbol: 1, bound, .. } if bound == 1.0
        ));
    }

    #[test]
    fn outgrown_table_schedule_errors_at_the_search_that_needs_it() {
        let table = Schedule::table(vec![1, 1]).unwrap();
        let mut pred = Predictor::new(EstimatorParams::new(0.3, 0.3, table)).unwrap();
        pred.step(0).unwrap();
        pred.step(0).unwrap();
        pred.step(0).unwrap();
        let err = pred.step(0).unwrap_err();
        assert!(matches!(
            err,
            PredictorError::Schedule(ScheduleError::Exhausted { stage: 3, .. })
        ));
    }

    #[test]
    fn fresh_predictor_answers_trivially() {
        let mut pred =
            Predictor::new(EstimatorParams::new(0.3, 0.3, Schedule::Identity)).unwrap();
        assert_eq!(pred.horizon(), None);
        assert_eq!(pred.estimate(), None);
        assert_eq!(pred.delta_hat(0).unwrap(), 0.0);
        let first = pred.step(7).unwrap();
        assert_eq!(first.time, 0);
        assert_eq!(first.width, 0);
        assert!(first.new_prediction_time);
        // the pinning stage for the present is stage one, which is not yet
        // determined after a single observation
        assert_eq!(pred.reconstructed_value(0).unwrap(), None);
        let second = pred.step(7).unwrap();
        assert!(second.new_recurrence_stop);
        assert_eq!(pred.reconstructed_value(0).unwrap(), Some(7));
    }
}
