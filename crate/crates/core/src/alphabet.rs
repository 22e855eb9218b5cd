//! Symbols, finite patterns, and growing sample paths.
//!
//! Everything downstream works over a countable alphabet embedded into the
//! nonnegative integers. A [`Pattern`] is an immutable finite word used both
//! as a query (which block are we counting?) and as a hash-map key inside the
//! occurrence index; a [`Path`] is the append-only realization the estimator
//! walks along. Time is 0-based: `path[t]` is the observation at time `t`.

use std::borrow::Borrow;
use std::collections::HashMap;
use std::fmt;

/// Alphabet symbol. Unsignedness enforces the "nonnegative integer" contract
/// structurally; countable alphabets simply use values without a known bound.
pub type Symbol = u32;

/// An immutable finite word of symbols. The empty pattern is legal and acts
/// as the vacuous context (every position matches it).
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pattern(Box<[Symbol]>);

impl Pattern {
    pub fn empty() -> Self {
        Pattern(Box::from([]))
    }

    pub fn from_slice(symbols: &[Symbol]) -> Self {
        Pattern(Box::from(symbols))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Symbol] {
        &self.0
    }

    /// The pattern extended on the right by one symbol.
    pub fn appended(&self, x: Symbol) -> Pattern {
        let mut v = self.0.to_vec();
        v.push(x);
        Pattern(v.into_boxed_slice())
    }
}

impl fmt::Debug for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Pattern[")?;
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{s}")?;
        }
        write!(f, "]")
    }
}

impl From<Vec<Symbol>> for Pattern {
    fn from(v: Vec<Symbol>) -> Self {
        Pattern(v.into_boxed_slice())
    }
}

impl From<&[Symbol]> for Pattern {
    fn from(s: &[Symbol]) -> Self {
        Pattern::from_slice(s)
    }
}

// Lets hash maps keyed by `Pattern` be probed with a borrowed `&[Symbol]`,
// so the hot counting loops never allocate just to look something up.
// Sound because the derived `Hash`/`Eq` on `Pattern` delegate to the slice.
impl Borrow<[Symbol]> for Pattern {
    fn borrow(&self) -> &[Symbol] {
        &self.0
    }
}

/// Append-only realization of the observed process.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Path(Vec<Symbol>);

impl Path {
    pub fn new() -> Self {
        Path(Vec::new())
    }

    pub fn from_symbols(symbols: Vec<Symbol>) -> Self {
        Path(symbols)
    }

    pub fn push(&mut self, x: Symbol) {
        self.0.push(x);
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Last time index currently observed, i.e. `len() - 1`.
    pub fn last_time(&self) -> Option<usize> {
        self.0.len().checked_sub(1)
    }

    pub fn get(&self, t: usize) -> Option<Symbol> {
        self.0.get(t).copied()
    }

    pub fn as_slice(&self) -> &[Symbol] {
        &self.0
    }

    /// The block of length `len` ending at time `end` (inclusive).
    /// Panics if the block sticks out past either edge of the path.
    pub fn block_ending_at(&self, end: usize, len: usize) -> &[Symbol] {
        assert!(end < self.0.len(), "block end {end} beyond path");
        let start = end
            .checked_sub(len.saturating_sub(1))
            .expect("block start before time 0");
        if len == 0 {
            return &[];
        }
        &self.0[start..=end]
    }

    /// Do the blocks of length `len` ending at `a` and `b` coincide?
    /// Compares back to front so mismatches near the end exit early.
    pub fn blocks_equal(&self, a: usize, b: usize, len: usize) -> bool {
        let (x, y) = (self.block_ending_at(a, len), self.block_ending_at(b, len));
        x.iter().rev().zip(y.iter().rev()).all(|(u, v)| u == v)
    }
}

impl std::ops::Deref for Path {
    type Target = [Symbol];

    fn deref(&self) -> &[Symbol] {
        &self.0
    }
}

impl From<Vec<Symbol>> for Path {
    fn from(v: Vec<Symbol>) -> Self {
        Path(v)
    }
}

/// Maps user-facing labels (characters, strings) to dense symbol indices.
///
/// The numeric pipeline only ever sees `Symbol`s; anything presented to a
/// person goes back through the codec. Interning is first-come-first-served.
#[derive(Clone, Debug, Default)]
pub struct SymbolCodec {
    labels: Vec<String>,
    index: HashMap<String, Symbol>,
}

impl SymbolCodec {
    pub fn new() -> Self {
        Self::default()
    }

    /// Interns `label`, returning its symbol; an already-known label keeps
    /// its original symbol.
    pub fn intern(&mut self, label: &str) -> Symbol {
        if let Some(&s) = self.index.get(label) {
            return s;
        }
        let s = self.labels.len() as Symbol;
        self.labels.push(label.to_owned());
        self.index.insert(label.to_owned(), s);
        s
    }

    pub fn encode(&self, label: &str) -> Option<Symbol> {
        self.index.get(label).copied()
    }

    pub fn decode(&self, s: Symbol) -> Option<&str> {
        self.labels.get(s as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::hash_map::DefaultHasher;
    use std::hash::{Hash, Hasher};

    fn hash_of<T: Hash + ?Sized>(t: &T) -> u64 {
        let mut h = DefaultHasher::new();
        t.hash(&mut h);
        h.finish()
    }

    #[test]
    fn empty_pattern_is_legal_and_matches_nothing_spatial() {
        let p = Pattern::empty();
        assert_eq!(p.len(), 0);
        assert!(p.is_empty());
        assert_eq!(p.as_slice(), &[] as &[Symbol]);
    }

    #[test]
    fn pattern_hash_agrees_with_slice_hash() {
        // Required for the Borrow-based map lookups to be sound.
        for sample in [&[][..], &[0][..], &[1, 2, 3][..], &[7, 7, 7, 7][..]] {
            let p = Pattern::from_slice(sample);
            assert_eq!(hash_of(&p), hash_of(sample));
        }
    }

    #[test]
    fn pattern_lookup_by_slice() {
        let mut m: HashMap<Pattern, usize> = HashMap::new();
        m.insert(Pattern::from_slice(&[1, 0, 1]), 7);
        assert_eq!(m.get(&[1, 0, 1][..]).copied(), Some(7));
        assert_eq!(m.get(&[1, 0][..]).copied(), None);
    }

    #[test]
    fn block_extraction_and_equality() {
        let path = Path::from_symbols(vec![0, 1, 1, 0, 1, 1]);
        assert_eq!(path.block_ending_at(3, 2), &[1, 0]);
        assert_eq!(path.block_ending_at(0, 1), &[0]);
        assert_eq!(path.block_ending_at(5, 0), &[] as &[Symbol]);
        // period-3 structure: blocks of length 2 at times 3 and 0 differ,
        // at times 4 and 1 coincide
        assert!(!path.blocks_equal(3, 1, 2));
        assert!(path.blocks_equal(4, 1, 2));
        // length-0 blocks always match
        assert!(path.blocks_equal(0, 5, 0));
    }

    #[test]
    fn codec_round_trip() {
        let mut c = SymbolCodec::new();
        let a = c.intern("rain");
        let b = c.intern("sun");
        assert_eq!(c.intern("rain"), a);
        assert_eq!(c.encode("sun"), Some(b));
        assert_eq!(c.decode(a), Some("rain"));
        assert_eq!(c.decode(99), None);
        assert_eq!(c.len(), 2);
    }
}
