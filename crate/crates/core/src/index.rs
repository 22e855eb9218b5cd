//! Incremental block-occurrence counts over end-position windows.
//!
//! The estimator keeps asking questions of the form "how often does this
//! block end inside that stretch of the path?", with the stretch sliding
//! forward one symbol at a time and the data split into two halves whose
//! boundary also moves. Recounting from scratch at each step would make the
//! whole scheme quadratic, so the index stores, for every block length it
//! tracks, the sorted list of end positions of every distinct block of that
//! length seen so far. A window count is then two binary searches, any window
//! placement is equally cheap, and the moving half-boundary costs nothing at
//! all — the halves are query parameters, not maintained state.
//!
//! Appends are amortized O(tracked lengths); the tracked range grows lazily
//! as queries demand longer blocks, up to a storage cap that protects memory
//! on degenerate (near-periodic) inputs. Queries past the cap are answered by
//! the caller through literal rescans instead — same answers, no index.

use crate::alphabet::{Path, Pattern, Symbol};
use std::collections::HashMap;
use thiserror::Error;

/// Longest block length the index will materialize lists for. Statistical
/// inputs stay far below this (the support threshold thins candidate blocks
/// out long before); the cap only matters for adversarially repetitive paths,
/// where it bounds memory at O(cap * path length).
pub const DEFAULT_LEN_CAP: usize = 64;

#[derive(Debug, Error, PartialEq)]
pub enum IndexError {
    #[error("pattern of length {len} exceeds the tracked maximum {max_len}")]
    PatternTooLong { len: usize, max_len: usize },
}

/// Append-only occurrence lists, one map per block length.
#[derive(Clone, Debug)]
pub struct OccurrenceIndex {
    /// `by_len[l]` maps each distinct block of length `l` (1-based; slot 0
    /// unused) to the ascending end positions of its occurrences.
    by_len: Vec<HashMap<Pattern, Vec<u32>>>,
    /// Number of path positions appended so far.
    appended: usize,
    /// Longest block length currently materialized.
    max_len: usize,
    /// Hard ceiling for `max_len`.
    len_cap: usize,
}

impl Default for OccurrenceIndex {
    fn default() -> Self {
        Self::new()
    }
}

impl OccurrenceIndex {
    pub fn new() -> Self {
        Self::with_len_cap(DEFAULT_LEN_CAP)
    }

    /// Index with a custom storage cap; tests use tiny caps to force the
    /// rescan fallback and check it agrees with the indexed answers.
    pub fn with_len_cap(len_cap: usize) -> Self {
        OccurrenceIndex {
            by_len: vec![HashMap::new()],
            appended: 0,
            max_len: 0,
            len_cap: len_cap.max(1),
        }
    }

    pub fn positions_appended(&self) -> usize {
        self.appended
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn len_cap(&self) -> usize {
        self.len_cap
    }

    /// True when blocks of length `len` are materialized (the empty block is
    /// always answerable).
    pub fn covers(&self, len: usize) -> bool {
        len <= self.max_len
    }

    /// Registers the newest path position. `path` must be the same path this
    /// index has been fed all along, grown by exactly one symbol.
    pub fn append_position(&mut self, path: &Path) {
        assert_eq!(
            path.len(),
            self.appended + 1,
            "index fed {} positions but path has {}",
            self.appended,
            path.len()
        );
        let t = path.len() - 1;
        for len in 1..=self.max_len.min(t + 1) {
            let block = path.block_ending_at(t, len);
            Self::push_occurrence(&mut self.by_len[len], block, t);
        }
        self.appended += 1;
    }

    /// Grows the tracked length to cover `len` (clamped to the cap),
    /// backfilling occurrence lists for the whole path seen so far. Returns
    /// whether `len` is covered afterwards.
    pub fn grow_to(&mut self, path: &Path, len: usize) -> bool {
        assert_eq!(path.len(), self.appended, "grow_to with out-of-sync path");
        let target = len.min(self.len_cap);
        while self.max_len < target {
            let new_len = self.max_len + 1;
            let mut map = HashMap::new();
            for t in new_len.saturating_sub(1)..path.len() {
                Self::push_occurrence(&mut map, path.block_ending_at(t, new_len), t);
            }
            self.by_len.push(map);
            self.max_len = new_len;
        }
        self.covers(len)
    }

    fn push_occurrence(map: &mut HashMap<Pattern, Vec<u32>>, block: &[Symbol], t: usize) {
        // Probe by slice first so only a block's first occurrence allocates.
        match map.get_mut(block) {
            Some(list) => list.push(t as u32),
            None => {
                map.insert(Pattern::from_slice(block), vec![t as u32]);
            }
        }
    }

    /// Ascending end positions of `block`; empty if never seen. Errs for
    /// lengths beyond the tracked range (rather than wrongly answering 0).
    pub fn positions(&self, block: &[Symbol]) -> Result<&[u32], IndexError> {
        if block.is_empty() || block.len() > self.max_len {
            return Err(IndexError::PatternTooLong {
                len: block.len(),
                max_len: self.max_len,
            });
        }
        Ok(self.by_len[block.len()]
            .get(block)
            .map(Vec::as_slice)
            .unwrap_or(&[]))
    }

    /// Number of occurrences of `block` with end position in `[lo, hi]`
    /// (inclusive; empty when `lo > hi`). The empty block occurs at every
    /// observed position.
    pub fn count_in(&self, block: &[Symbol], lo: usize, hi: usize) -> Result<usize, IndexError> {
        if block.is_empty() {
            let hi = hi.min(self.appended.wrapping_sub(1));
            return Ok(if self.appended == 0 || lo > hi {
                0
            } else {
                hi - lo + 1
            });
        }
        Ok(Self::range_count(self.positions(block)?, lo, hi))
    }

    /// End position of the `i`-th occurrence (1-based) of `block` within
    /// `[lo, hi]`, if that many fall inside.
    pub fn occurrence_time(
        &self,
        block: &[Symbol],
        lo: usize,
        hi: usize,
        i: usize,
    ) -> Result<Option<usize>, IndexError> {
        if i == 0 {
            return Ok(None);
        }
        if block.is_empty() {
            let hi = hi.min(self.appended.wrapping_sub(1));
            if self.appended == 0 || lo > hi {
                return Ok(None);
            }
            let t = lo + (i - 1);
            return Ok((t <= hi).then_some(t));
        }
        let list = self.positions(block)?;
        let start = list.partition_point(|&t| (t as usize) < lo);
        let idx = start + (i - 1);
        Ok(list
            .get(idx)
            .map(|&t| t as usize)
            .filter(|&t| t <= hi))
    }

    /// Distinct blocks of length `len` with their occurrence lists, or
    /// `None` when that length is not materialized.
    pub fn blocks_of_len(
        &self,
        len: usize,
    ) -> Option<impl Iterator<Item = (&Pattern, &[u32])>> {
        if len == 0 || len > self.max_len {
            return None;
        }
        Some(self.by_len[len].iter().map(|(p, v)| (p, v.as_slice())))
    }

    pub(crate) fn range_count(positions: &[u32], lo: usize, hi: usize) -> usize {
        if lo > hi {
            return 0;
        }
        let a = positions.partition_point(|&t| (t as usize) < lo);
        let b = positions.partition_point(|&t| (t as usize) <= hi);
        b - a
    }
}

/// A read-only count view over one inclusive end-position window `[a, b]`.
///
/// Views are cheap; advancing a window edge means making the view for the
/// new bounds. Equality with a literal recount is what the property suite
/// checks, so there is deliberately no cached state here to drift.
#[derive(Clone, Copy, Debug)]
pub struct WindowCounts<'a> {
    index: &'a OccurrenceIndex,
    a: usize,
    b: usize,
}

impl<'a> WindowCounts<'a> {
    pub fn new(index: &'a OccurrenceIndex, a: usize, b: usize) -> Self {
        WindowCounts { index, a, b }
    }

    pub fn bounds(&self) -> (usize, usize) {
        (self.a, self.b)
    }

    pub fn advanced_start(&self, a: usize) -> Self {
        WindowCounts { a, ..*self }
    }

    pub fn advanced_end(&self, b: usize) -> Self {
        WindowCounts { b, ..*self }
    }

    pub fn count(&self, block: &[Symbol]) -> Result<usize, IndexError> {
        self.index.count_in(block, self.a, self.b)
    }

    pub fn occurrence_time(&self, block: &[Symbol], i: usize) -> Result<Option<usize>, IndexError> {
        self.index.occurrence_time(block, self.a, self.b, i)
    }
}

/// The two-half context-qualification view at horizon `n`.
///
/// With data `x_0..x_n` and `h = ceil(n/2)`, a block of length `m` qualifies
/// as *seen* when it ends somewhere in the first half `x_0..x_{h-1}`, and as
/// *frequent* when it ends strictly more than `n^(1-gamma)` times in
/// `[h + m - 1, n]`. Both together make it an admissible candidate context.
/// The off-center windows for conditional frequencies follow the same
/// pattern: for a context `c` of length `m`, the numerator counts `c x` over
/// `[h + m, n]` and the denominator counts `c` over `[h + m - 1, n - 1]`, so
/// every denominator occurrence has exactly one observed continuation and
/// the frequencies of the continuations sum to one exactly.
#[derive(Clone, Copy, Debug)]
pub struct LSetView<'a> {
    index: &'a OccurrenceIndex,
    n: usize,
    gamma: f64,
}

impl<'a> LSetView<'a> {
    /// View at horizon `n` (data `x_0..x_n`); the index must have seen at
    /// least `n + 1` positions.
    pub fn new(index: &'a OccurrenceIndex, n: usize, gamma: f64) -> Self {
        assert!(
            index.positions_appended() > n,
            "horizon {n} not yet observed"
        );
        LSetView { index, n, gamma }
    }

    pub fn horizon(&self) -> usize {
        self.n
    }

    /// `ceil(n/2)`: first position of the second half.
    pub fn half(&self) -> usize {
        self.n.div_ceil(2)
    }

    pub fn first_half(&self) -> WindowCounts<'a> {
        WindowCounts::new(self.index, 0, self.half().wrapping_sub(1))
    }

    pub fn second_half(&self) -> WindowCounts<'a> {
        WindowCounts::new(self.index, self.half(), self.n)
    }

    /// Seen at all in the first half (the whole block inside it).
    pub fn in_l1(&self, block: &[Symbol]) -> Result<bool, IndexError> {
        let half = self.half();
        if half == 0 {
            return Ok(false);
        }
        Ok(self.index.count_in(block, 0, half - 1)? > 0)
    }

    /// Frequent in the second half: strictly more than `n^(1-gamma)`
    /// occurrences over `[half + len - 1, n]`.
    pub fn in_l2(&self, block: &[Symbol]) -> Result<bool, IndexError> {
        let lo = self.half() + block.len().saturating_sub(1);
        let c = self.index.count_in(block, lo, self.n)?;
        Ok((c as f64) > (self.n as f64).powf(1.0 - self.gamma))
    }

    /// Admissible candidate: seen in the first half and frequent in the
    /// second.
    pub fn in_ln(&self, block: &[Symbol]) -> Result<bool, IndexError> {
        Ok(self.in_l1(block)? && self.in_l2(block)?)
    }

    /// Second-half conditional frequency of `x` after `context`, or `None`
    /// when the context never ends inside the denominator window.
    pub fn empirical_conditional(
        &self,
        context: &[Symbol],
        x: Symbol,
    ) -> Result<Option<f64>, IndexError> {
        let half = self.half();
        let m = context.len();
        let den_hi = match self.n.checked_sub(1) {
            Some(v) => v,
            None => return Ok(None),
        };
        let den = self
            .index
            .count_in(context, (half + m).saturating_sub(1), den_hi)?;
        if den == 0 {
            return Ok(None);
        }
        let mut extended = Vec::with_capacity(m + 1);
        extended.extend_from_slice(context);
        extended.push(x);
        let num = self.index.count_in(&extended, half + m, self.n)?;
        Ok(Some(num as f64 / den as f64))
    }
}
