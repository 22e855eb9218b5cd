//! Definition-literal reference implementation.
//!
//! Everything in this module recomputes its answer from scratch on the raw
//! path: window counts are literal rescans, the recurrence times are replayed
//! from time zero, and the width search is reevaluated in full at every
//! horizon. Nothing here shares caches or incremental state with the online
//! engine, which is exactly the point — the engine is trusted only because
//! its outputs are bit-for-bit equal to these on every tested path.
//!
//! The only liberties taken are ones that provably cannot change a result:
//! per-call scratch count tables instead of per-occurrence rescans, and
//! stopping the extension search at the first level with no admissible
//! extended context. The latter is sound because admissibility is inherited
//! by suffixes: dropping the leading symbol of an admissible word keeps it
//! inside both halves' windows (they only widen), so once a level is empty
//! every deeper level is empty too. The emptiness itself is still checked
//! literally at each level.

use crate::alphabet::{Path, Symbol};
use crate::params::EstimatorParams;
use crate::process::{replication_seed, Process, ProcessError};
use crate::schedule::{Schedule, ScheduleError};
use rustc_hash::{FxHashMap, FxHashSet};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

/// Longest path the full replay will accept. Quadratic-or-worse scans are
/// the whole point of this module, so anything past the cap is a mistake in
/// the caller rather than a patience problem.
pub const NAIVE_LENGTH_CAP: usize = 2000;

#[derive(Debug, Error, PartialEq)]
pub enum ReferenceError {
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("the naive replay is capped at {cap} symbols, got {length}")]
    PathTooLong { length: usize, cap: usize },
}

fn half_point(n: usize) -> usize {
    n.div_ceil(2)
}

/// Occurrences of `block` in `data` with end position in `[lo, hi]`,
/// counted by literal comparison. The empty block occurs at every observed
/// position.
pub fn count_ending_in(data: &[Symbol], block: &[Symbol], lo: usize, hi: usize) -> usize {
    if data.is_empty() {
        return 0;
    }
    let hi = hi.min(data.len() - 1);
    if lo > hi {
        return 0;
    }
    (lo..=hi)
        .filter(|&t| t + 1 >= block.len() && &data[t + 1 - block.len()..=t] == block)
        .count()
}

/// Seen in the first half of `data = x_0..x_n`: some occurrence ends by
/// `ceil(n/2) - 1`.
pub fn in_l1(data: &[Symbol], block: &[Symbol]) -> bool {
    let n = data.len() - 1;
    let half = half_point(n);
    half > 0 && count_ending_in(data, block, 0, half - 1) > 0
}

/// Frequent in the second half: strictly more than `n^(1-gamma)` occurrences
/// ending in `[ceil(n/2) + len - 1, n]`.
pub fn in_l2(data: &[Symbol], gamma: f64, block: &[Symbol]) -> bool {
    let n = data.len() - 1;
    let lo = half_point(n) + block.len().saturating_sub(1);
    let c = count_ending_in(data, block, lo, n);
    (c as f64) > (n as f64).powf(1.0 - gamma)
}

/// Admissible candidate context: both of the above.
pub fn in_ln(data: &[Symbol], gamma: f64, block: &[Symbol]) -> bool {
    in_l1(data, block) && in_l2(data, gamma, block)
}

/// Second-half conditional frequency of `x` after `context` in
/// `data = x_0..x_n`: occurrences of `context x` ending in
/// `[ceil(n/2) + m, n]` over occurrences of `context` ending in
/// `[ceil(n/2) + m - 1, n - 1]` (`m` the context length), so that every
/// counted context occurrence has exactly one observed continuation.
/// `None` when the denominator window holds no occurrence.
pub fn empirical_conditional(data: &[Symbol], context: &[Symbol], x: Symbol) -> Option<f64> {
    let n = data.len().checked_sub(1)?;
    if n == 0 {
        return None;
    }
    let half = half_point(n);
    let m = context.len();
    let den = count_ending_in(data, context, (half + m).saturating_sub(1), n - 1);
    if den == 0 {
        return None;
    }
    let mut ext = Vec::with_capacity(m + 1);
    ext.extend_from_slice(context);
    ext.push(x);
    let num = count_ending_in(data, &ext, half + m, n);
    Some(num as f64 / den as f64)
}

/// Recurrence stopping times determined by the observed path, replayed from
/// the definition: stage 0 stops at time 0, and stage `s` stops at the first
/// later time where the length-`l(s)` block ending there reproduces the
/// block ending at the previous stop. Stages whose search runs off the end
/// of the path are simply absent; a table schedule too short to even state
/// the next stage's block length is an error.
pub fn zetas(path: &Path, schedule: &Schedule) -> Result<Vec<usize>, ScheduleError> {
    assert!(!path.is_empty(), "recurrence times need at least one symbol");
    let last = path.len() - 1;
    let mut zs = vec![0usize];
    loop {
        let anchor = *zs.last().unwrap();
        if anchor >= last {
            break;
        }
        let stage = zs.len();
        let len = schedule.block_len(stage)?;
        // The schedule constraint len <= stage and the growth zeta_s >= s
        // keep the anchored block inside the path.
        debug_assert!(len <= anchor + 1);
        match (anchor + 1..=last).find(|&t| path.blocks_equal(t, anchor, len)) {
            Some(t) => zs.push(t),
            None => break,
        }
    }
    Ok(zs)
}

/// `J(i)` capped by what the data has determined: the stage whose stop pins
/// the reconstructed value `i` steps back, if that stage is among the
/// `zetas.len() - 1` determined ones.
fn pinning_stage(
    schedule: &Schedule,
    zetas: &[usize],
    i: usize,
    probe_cap: usize,
) -> Result<Option<usize>, ScheduleError> {
    schedule.j_index_within(i, (zetas.len() - 1).min(probe_cap))
}

/// Reconstructed value `i` steps back: `x` at time `zeta(J(i)) - i`, or
/// `None` while that stage is undetermined.
pub fn tilde_value(
    path: &Path,
    schedule: &Schedule,
    zetas: &[usize],
    i: usize,
) -> Result<Option<Symbol>, ScheduleError> {
    match pinning_stage(schedule, zetas, i, usize::MAX)? {
        Some(j) => {
            debug_assert!(zetas[j] >= i, "pinning stop before the offset it serves");
            Ok(path.get(zetas[j] - i))
        }
        None => Ok(None),
    }
}

/// The `k` most recent reconstructed values, oldest first, or `None` while
/// any of them is undetermined. `k = 0` is the empty context.
pub fn tilde_context(
    path: &Path,
    schedule: &Schedule,
    zetas: &[usize],
    k: usize,
) -> Result<Option<Vec<Symbol>>, ScheduleError> {
    let mut ctx = Vec::with_capacity(k);
    for i in (0..k).rev() {
        match tilde_value(path, schedule, zetas, i)? {
            Some(v) => ctx.push(v),
            None => return Ok(None),
        }
    }
    Ok(Some(ctx))
}

/// Worst disagreement, at horizon `n`, between the conditional frequencies
/// given the reconstructed context of length `k` and given any admissible
/// extension of it: the max over extension depths `i = 1..=n` and over
/// admissible words `z (context) x` of the absolute ratio gap. Zero when the
/// stage pinning the context stopped past the first half (or is still
/// undetermined), and pairs whose short-context denominator window is empty
/// are skipped.
pub fn delta_hat(
    path: &Path,
    zetas: &[usize],
    n: usize,
    k: usize,
    params: &EstimatorParams,
) -> Result<f64, ScheduleError> {
    if n == 0 {
        return Ok(0.0);
    }
    let data = &path[..=n];
    let half = half_point(n);
    match pinning_stage(&params.schedule, zetas, k, half)? {
        Some(j) if zetas[j] < half => {}
        _ => return Ok(0.0),
    }
    let ctx = tilde_context(path, &params.schedule, zetas, k)?
        .expect("context pinned inside the first half must be determined");

    let den_k = count_ending_in(data, &ctx, (half + k).saturating_sub(1), n - 1);
    if den_k == 0 {
        // every comparison pair is skipped
        return Ok(0.0);
    }
    let mut short_ratio: FxHashMap<Symbol, f64> = FxHashMap::default();
    let mut ratio_for = |x: Symbol| -> f64 {
        *short_ratio.entry(x).or_insert_with(|| {
            let mut ext = ctx.clone();
            ext.push(x);
            count_ending_in(data, &ext, half + k, n) as f64 / den_k as f64
        })
    };

    let support = (n as f64).powf(1.0 - params.gamma);
    let mut best = 0.0f64;
    for i in 1..=n {
        let m = k + i;
        if m + 1 > half {
            // no word of this length fits inside the first half
            break;
        }
        // fresh scratch tables for this level, rebuilt from the raw data:
        // counts of the full words over [half+m, n] (which is both their
        // frequency window and the ratio numerator window) and of their
        // leading contexts over [half+m-1, n-1] (the denominator window)
        let mut word_counts: FxHashMap<&[Symbol], u32> = FxHashMap::default();
        for t in half + m..=n {
            *word_counts.entry(&data[t - m..=t]).or_insert(0) += 1;
        }
        let mut ext_den: FxHashMap<&[Symbol], u32> = FxHashMap::default();
        for t in half + m - 1..=n - 1 {
            *ext_den.entry(&data[t - m + 1..=t]).or_insert(0) += 1;
        }

        let mut seen: FxHashSet<&[Symbol]> = FxHashSet::default();
        let mut level_admitted = false;
        for t in m..half {
            if data[t - k..t] != ctx[..] {
                continue;
            }
            let w = &data[t - m..=t];
            if !seen.insert(w) {
                continue;
            }
            // ending at t <= half-1 witnesses the first-half requirement
            let c = word_counts.get(w).copied().unwrap_or(0);
            if (c as f64) <= support {
                continue;
            }
            level_admitted = true;
            let x = w[m];
            let den = *ext_den
                .get(&w[..m])
                .expect("a second-half word occurrence contains its context");
            let gap = (ratio_for(x) - (c as f64 / den as f64)).abs();
            if gap > best {
                best = gap;
            }
        }
        if !level_admitted {
            break;
        }
    }
    Ok(best)
}

/// Context width at horizon `n`: the smallest `k` whose worst disagreement
/// is within `n^-beta`. Zero at horizon 0 by convention. Always defined —
/// by `k = ceil(n/2)` the pinning stage must lie past the first half, which
/// zeroes the disagreement.
pub fn chi(
    path: &Path,
    zetas: &[usize],
    n: usize,
    params: &EstimatorParams,
) -> Result<usize, ScheduleError> {
    if n == 0 {
        return Ok(0);
    }
    let level = params.acceptance_level(n);
    for k in 0..n {
        if delta_hat(path, zetas, n, k, params)? <= level {
            return Ok(k);
        }
    }
    unreachable!("width scan exhausted every k < {n}");
}

/// Full from-scratch replay of the scheme over one path.
#[derive(Clone, Debug)]
pub struct ReferenceRun {
    /// Determined recurrence stopping times, stage 0 first.
    pub zetas: Vec<usize>,
    /// Context width at every horizon `0..path.len()`.
    pub chis: Vec<usize>,
    /// Prediction times, `lambda_0 = 0` first.
    pub lambdas: Vec<usize>,
    /// Context width frozen at each prediction time (`kappa_r = chi at
    /// lambda_r`).
    pub kappas: Vec<usize>,
    /// Observed successor of each prediction time, in order; the final
    /// prediction time contributes only if its successor lies on the path.
    pub successors: Vec<Symbol>,
}

impl ReferenceRun {
    /// Running averages `(1/n) * sum of f(successor_j)`, one entry per
    /// prediction round, accumulated in round order.
    pub fn scalar_estimates(&self, f: &dyn Fn(Symbol) -> f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.successors.len());
        let mut sum = 0.0f64;
        for (idx, &s) in self.successors.iter().enumerate() {
            sum += f(s);
            out.push(sum / ((idx + 1) as f64));
        }
        out
    }

    /// Running estimate of the conditional probability of `symbol`.
    pub fn indicator_estimates(&self, symbol: Symbol) -> Vec<f64> {
        self.scalar_estimates(&|x| if x == symbol { 1.0 } else { 0.0 })
    }
}

/// Replays the whole scheme: recurrence times, the width at every horizon,
/// and the prediction times with their frozen widths and successors.
///
/// A prediction time advances to the next moment whose final stretch of
/// length `chi_t` reproduces the stretch ending at the last recurrence stop
/// at or before the previous prediction time (trivially satisfied when
/// `chi_t = 0`). The scheme guarantees the search never outruns the next
/// recurrence stop; that and the width staying inside the anchored history
/// are asserted, not assumed.
pub fn run(path: &Path, params: &EstimatorParams) -> Result<ReferenceRun, ReferenceError> {
    debug_assert!(params.validate().is_ok(), "invalid estimator parameters");
    assert!(!path.is_empty());
    if path.len() > NAIVE_LENGTH_CAP {
        return Err(ReferenceError::PathTooLong {
            length: path.len(),
            cap: NAIVE_LENGTH_CAP,
        });
    }
    let last = path.len() - 1;
    let zs = zetas(path, &params.schedule)?;
    let mut chis = Vec::with_capacity(path.len());
    for n in 0..path.len() {
        chis.push(chi(path, &zs, n, params)?);
    }

    let mut lambdas = vec![0usize];
    let mut kappas = vec![0usize];
    'rounds: loop {
        let prev = *lambdas.last().unwrap();
        let j = zs.partition_point(|&z| z <= prev) - 1;
        #[allow(clippy::needless_range_loop)]
        for t in prev + 1..=last {
            let width = chis[t];
            assert!(
                width <= zs[j] + 1,
                "width {width} at time {t} outruns the anchor history at {}",
                zs[j]
            );
            if j + 1 < zs.len() {
                assert!(
                    t <= zs[j + 1],
                    "prediction search passed the next recurrence stop"
                );
            }
            if width == 0 || path.blocks_equal(t, zs[j], width) {
                lambdas.push(t);
                kappas.push(width);
                continue 'rounds;
            }
        }
        break;
    }

    let successors = lambdas
        .iter()
        .filter_map(|&l| path.get(l + 1))
        .collect();
    Ok(ReferenceRun {
        zetas: zs,
        chis,
        lambdas,
        kappas,
        successors,
    })
}

/// Reversed-time recurrence walk: starting from the newest observation,
/// step `k` times into the past, each step jumping to the previous
/// occurrence of the block (of the stage's scheduled length) that ends at
/// the current anchor. Returns the final anchor relative to the newest
/// position (always `<= 0`), or `None` when the history is too short to
/// contain the next backward occurrence.
///
/// Mirrors the forward recurrence construction: when the forward walk
/// reaches a stop at absolute time `l`, the backward walk launched from
/// that moment retraces the same stops and lands on `-l` exactly.
pub fn hat_zeta(
    history: &Path,
    k: usize,
    schedule: &Schedule,
) -> Result<Option<isize>, ScheduleError> {
    assert!(!history.is_empty());
    let origin = history.len() - 1;
    let mut anchor = origin;
    for i in 1..=k {
        let len = schedule.block_len(k - i + 1)?;
        if len > anchor + 1 {
            return Ok(None);
        }
        let mut found = None;
        for t in 1..=anchor {
            if anchor - t + 1 < len {
                break;
            }
            if history.blocks_equal(anchor - t, anchor, len) {
                found = Some(anchor - t);
                break;
            }
        }
        match found {
            Some(a) => anchor = a,
            None => return Ok(None),
        }
    }
    Ok(Some(anchor as isize - origin as isize))
}

/// Verdict of a goodness-of-fit comparison at the 0.999 level.
#[derive(Debug, Clone, PartialEq)]
pub struct GoodnessOfFit {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    /// 0.999 quantile of the null law; zero when no freedom is left.
    pub threshold: f64,
    pub pass: bool,
}

/// Simulates `runs` independent paths, reads the reconstructed tuple
/// `(x̃_{-m+1}, …, x̃_0)` off each, and Pearson-tests the empirical tuple
/// law against the exact stationary `m`-block law of the source.
///
/// The reconstruction uses the identity schedule, growing each path until
/// every needed recurrence stop is determined. Only finite-alphabet sources
/// can be checked; cells the source cannot produce fail the test outright
/// if they are ever observed.
pub fn tilde_distribution_check(
    process: &Process,
    m: usize,
    runs: usize,
) -> Result<GoodnessOfFit, ProcessError> {
    assert!((1..=4).contains(&m), "the tuple length must be 1..=4");
    assert!(runs >= 1);
    let Some(alphabet) = process.alphabet_size() else {
        return Err(ProcessError::Unsupported {
            operation: "the reconstructed-law check",
            kind: process.spec().kind.name(),
        });
    };
    let master = process.spec().seed;
    let mut counts = vec![0usize; alphabet.pow(m as u32)];
    for r in 0..runs {
        let sampler = process.reseeded(replication_seed(master, r as u64));
        let mut length = 64usize;
        let (path, zs) = loop {
            let path = sampler.generate(length);
            let zs = zetas(&path, &Schedule::Identity)
                .expect("the identity schedule never exhausts");
            if zs.len() > (m - 1).max(1) {
                break (path, zs);
            }
            length *= 2;
            assert!(
                length <= 1 << 22,
                "recurrence stops failed to appear within a generous horizon"
            );
        };
        let mut cell = 0usize;
        for i in (0..m).rev() {
            cell = cell * alphabet + path[zs[i.max(1)] - i] as usize;
        }
        counts[cell] += 1;
    }

    let mut statistic = 0.0f64;
    let mut positive_cells = 0usize;
    for (cell, &observed) in counts.iter().enumerate() {
        let tuple = cell_digits(cell, alphabet, m);
        let p = process.marginal_block_probability(&tuple);
        if p > 0.0 {
            positive_cells += 1;
            let expected = p * runs as f64;
            let gap = observed as f64 - expected;
            statistic += gap * gap / expected;
        } else if observed > 0 {
            statistic = f64::INFINITY;
        }
    }
    let degrees_of_freedom = positive_cells.saturating_sub(1);
    let (threshold, pass) = if degrees_of_freedom == 0 {
        (0.0, statistic == 0.0)
    } else {
        let null =
            ChiSquared::new(degrees_of_freedom as f64).expect("positive degrees of freedom");
        let q = null.inverse_cdf(0.999);
        (q, statistic <= q)
    };
    Ok(GoodnessOfFit {
        statistic,
        degrees_of_freedom,
        threshold,
        pass,
    })
}

/// Decodes a cell number into its tuple, oldest symbol first.
fn cell_digits(mut cell: usize, alphabet: usize, width: usize) -> Vec<Symbol> {
    let mut out = vec![0 as Symbol; width];
    for slot in out.iter_mut().rev() {
        *slot = (cell % alphabet) as Symbol;
        cell /= alphabet;
    }
    out
}
