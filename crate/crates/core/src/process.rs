//! Seeded samplers for benchmark sources and exact oracles for the
//! quantities the estimator is judged against.
//!
//! Four source families are covered: finite-alphabet IID draws, Markov
//! chains of arbitrary finite order, hidden-Markov chains (finite memory
//! fails, yet conditionals stay continuous — the designated hard case),
//! and a geometric law on the nonnegative integers (countable-alphabet
//! IID). Every sample path starts in the exact stationary law, so finite
//! prefixes are stationary and convergence tests need no burn-in.
//!
//! The oracle side answers conditional next-symbol laws, stationary block
//! probabilities, entropy rates, per-context memory lengths, and the
//! worst-case conditional gap over context extensions — the population
//! quantity the width estimator chases. [`ConditionalTracker`] exposes the
//! conditional law incrementally so a long run costs one filter update per
//! symbol instead of one full-prefix evaluation per query.

use crate::alphabet::{Path, Symbol};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Probability rows must sum to one within this slack.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;
/// The computed stationary law must satisfy its balance equation within this slack.
pub const STATIONARY_TOLERANCE: f64 = 1e-10;

/// The law of one benchmark source.
#[derive(Debug, Clone, PartialEq)]
pub enum ProcessKind {
    /// Independent draws from a fixed law over `{0, …, a−1}`.
    Iid { probabilities: Vec<f64> },
    /// A Markov chain of the given order. `kernel` carries one row per
    /// length-`order` context, ordered by the context read as a base-`a`
    /// numeral with the oldest symbol as the most significant digit.
    Markov { order: usize, kernel: Vec<Vec<f64>> },
    /// A hidden Markov chain: `transition` moves the hidden state,
    /// `emission` holds one observation row per hidden state.
    HiddenMarkov {
        transition: Vec<Vec<f64>>,
        emission: Vec<Vec<f64>>,
    },
    /// Independent draws of `floor` failures before the first success:
    /// `P(k) = p (1−p)^k` on the full set of nonnegative integers.
    Geometric { parameter: f64 },
}

impl ProcessKind {
    pub(crate) fn name(&self) -> &'static str {
        match self {
            ProcessKind::Iid { .. } => "iid",
            ProcessKind::Markov { .. } => "markov",
            ProcessKind::HiddenMarkov { .. } => "hidden-markov",
            ProcessKind::Geometric { .. } => "geometric",
        }
    }
}

/// A source law plus the seed that fixes its sample path.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessSpec {
    pub kind: ProcessKind,
    pub seed: u64,
}

impl ProcessSpec {
    pub fn new(kind: ProcessKind, seed: u64) -> Self {
        Self { kind, seed }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ProcessError {
    #[error("the alphabet must not be empty")]
    EmptyAlphabet,
    #[error("{which} must sum to one, got {sum}")]
    RowNotNormalized { which: String, sum: f64 },
    #[error("{which} has a negative entry {value}")]
    NegativeEntry { which: String, value: f64 },
    #[error("{which} has {found} entries where {expected} were expected")]
    RaggedRow {
        which: String,
        expected: usize,
        found: usize,
    },
    #[error("an order-{order} kernel over {alphabet} symbols needs {expected} rows, got {found}")]
    KernelShape {
        order: usize,
        alphabet: usize,
        expected: usize,
        found: usize,
    },
    #[error("an order-{order} context space over {alphabet} symbols is too large to index")]
    ContextSpaceTooLarge { order: usize, alphabet: usize },
    #[error("the chain order must be at least one")]
    BadOrder,
    #[error("the emission table needs one row per hidden state ({hidden}), got {found}")]
    EmissionShape { hidden: usize, found: usize },
    #[error("the geometric parameter must lie strictly between zero and one, got {value}")]
    BadGeometricParameter { value: f64 },
    #[error("solving for the stationary law left residual {residual}")]
    StationarySolveFailed { residual: f64 },
    #[error("the observed context has probability zero under this source")]
    ZeroProbabilityContext,
    #[error("the context must carry at least {needed} symbols, got {found}")]
    ContextTooShort { needed: usize, found: usize },
    #[error("{operation} is not available for {kind} sources")]
    Unsupported {
        operation: &'static str,
        kind: &'static str,
    },
}

/// Memory length of a context: the depth beyond which further history
/// cannot move the conditional law.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Memory {
    Finite(usize),
    Infinite,
}

/// A validated source: sampler and exact oracle in one handle.
///
/// Construction validates the description and solves for the stationary law
/// once; every oracle answer afterwards is a deterministic function of the
/// description and the query.
#[derive(Debug, Clone)]
pub struct Process {
    spec: ProcessSpec,
    /// Stationary law of the order-`m` context for Markov chains, of the
    /// hidden state for hidden-Markov chains, of single symbols for IID
    /// draws; empty for the geometric source.
    stationary: Vec<f64>,
}

impl Process {
    pub fn new(spec: ProcessSpec) -> Result<Self, ProcessError> {
        let stationary = match &spec.kind {
            ProcessKind::Iid { probabilities } => {
                validate_row("the symbol law", probabilities)?;
                probabilities.clone()
            }
            ProcessKind::Markov { order, kernel } => {
                let alphabet = validate_kernel(*order, kernel)?;
                stationary_law(&context_chain(kernel, alphabet))?
            }
            ProcessKind::HiddenMarkov {
                transition,
                emission,
            } => {
                validate_hidden(transition, emission)?;
                let n = transition.len();
                let mut p = DMatrix::zeros(n, n);
                for (i, row) in transition.iter().enumerate() {
                    for (j, &v) in row.iter().enumerate() {
                        p[(i, j)] = v;
                    }
                }
                stationary_law(&p)?
            }
            ProcessKind::Geometric { parameter } => {
                if !(*parameter > 0.0 && *parameter < 1.0) {
                    return Err(ProcessError::BadGeometricParameter { value: *parameter });
                }
                Vec::new()
            }
        };
        Ok(Self { spec, stationary })
    }

    pub fn spec(&self) -> &ProcessSpec {
        &self.spec
    }

    /// The same source with a different seed; the stationary solve is reused.
    pub fn reseeded(&self, seed: u64) -> Self {
        let mut copy = self.clone();
        copy.spec.seed = seed;
        copy
    }

    /// Number of distinct symbols, or `None` for the countable alphabet.
    pub fn alphabet_size(&self) -> Option<usize> {
        match &self.spec.kind {
            ProcessKind::Iid { probabilities } => Some(probabilities.len()),
            ProcessKind::Markov { kernel, .. } => Some(kernel[0].len()),
            ProcessKind::HiddenMarkov { emission, .. } => Some(emission[0].len()),
            ProcessKind::Geometric { .. } => None,
        }
    }

    #[cfg(test)]
    pub(crate) fn stationary_law(&self) -> &[f64] {
        &self.stationary
    }

    /// A seeded sample path of the given length, started in the stationary law.
    pub fn generate(&self, length: usize) -> Path {
        let mut rng = ChaCha8Rng::seed_from_u64(self.spec.seed);
        let mut out = Vec::with_capacity(length);
        match &self.spec.kind {
            ProcessKind::Iid { probabilities } => {
                for _ in 0..length {
                    out.push(sample_law(&mut rng, probabilities) as Symbol);
                }
            }
            ProcessKind::Markov { order, kernel } => {
                let a = kernel[0].len();
                let contexts = self.stationary.len();
                let mut ctx = sample_law(&mut rng, &self.stationary);
                for &s in context_digits(a, *order, ctx).iter().take(length) {
                    out.push(s);
                }
                while out.len() < length {
                    let y = sample_law(&mut rng, &kernel[ctx]);
                    out.push(y as Symbol);
                    ctx = (ctx * a + y) % contexts;
                }
            }
            ProcessKind::HiddenMarkov {
                transition,
                emission,
            } => {
                let mut hidden = sample_law(&mut rng, &self.stationary);
                for _ in 0..length {
                    out.push(sample_law(&mut rng, &emission[hidden]) as Symbol);
                    hidden = sample_law(&mut rng, &transition[hidden]);
                }
            }
            ProcessKind::Geometric { parameter } => {
                let log_q = (1.0 - parameter).ln();
                for _ in 0..length {
                    let u: f64 = rng.gen();
                    out.push(((1.0 - u).ln() / log_q).floor() as Symbol);
                }
            }
        }
        Path::from_symbols(out)
    }

    /// Exact stationary probability of observing the block anywhere.
    pub fn marginal_block_probability(&self, block: &[Symbol]) -> f64 {
        if block.is_empty() {
            return 1.0;
        }
        match &self.spec.kind {
            ProcessKind::Iid { probabilities } => block
                .iter()
                .map(|&s| probabilities.get(s as usize).copied().unwrap_or(0.0))
                .product(),
            ProcessKind::Markov { order, kernel } => {
                let a = kernel[0].len();
                let m = *order;
                if block.len() <= m {
                    let Some(idx) = context_index(a, block) else {
                        return 0.0;
                    };
                    let step = a.pow(block.len() as u32);
                    (0..self.stationary.len())
                        .filter(|c| c % step == idx)
                        .map(|c| self.stationary[c])
                        .sum()
                } else {
                    let Some(head) = context_index(a, &block[..m]) else {
                        return 0.0;
                    };
                    let mut p = self.stationary[head];
                    let mut ctx = head;
                    for &s in &block[m..] {
                        if p == 0.0 || s as usize >= a {
                            return 0.0;
                        }
                        p *= kernel[ctx][s as usize];
                        ctx = (ctx * a + s as usize) % self.stationary.len();
                    }
                    p
                }
            }
            ProcessKind::HiddenMarkov { .. } => match self.hidden_forward(block) {
                Some((_, log_p)) => log_p.exp(),
                None => 0.0,
            },
            ProcessKind::Geometric { parameter } => {
                let q = 1.0 - parameter;
                block
                    .iter()
                    .map(|&s| parameter * q.powi(s as i32))
                    .product()
            }
        }
    }

    /// Exact law of the next symbol given the full observed past.
    ///
    /// Only finite-alphabet sources can return their law as a vector; the
    /// geometric source answers through [`Process::true_conditional`] alone.
    pub fn conditional_law(&self, observed: &[Symbol]) -> Result<Vec<f64>, ProcessError> {
        match &self.spec.kind {
            ProcessKind::Iid { probabilities } => {
                if self.marginal_block_probability(observed) == 0.0 {
                    return Err(ProcessError::ZeroProbabilityContext);
                }
                Ok(probabilities.clone())
            }
            ProcessKind::Markov { order, kernel } => {
                if self.marginal_block_probability(observed) == 0.0 {
                    return Err(ProcessError::ZeroProbabilityContext);
                }
                let m = *order;
                if observed.len() >= m {
                    let idx = context_index(kernel[0].len(), &observed[observed.len() - m..])
                        .expect("a positive-probability context is in the alphabet");
                    Ok(kernel[idx].clone())
                } else {
                    // too short to pin a kernel row: average the rows of the
                    // stationary contexts that end in the observed symbols
                    let base = self.marginal_block_probability(observed);
                    let a = kernel[0].len();
                    let law = (0..a as Symbol)
                        .map(|y| {
                            let mut block = observed.to_vec();
                            block.push(y);
                            self.marginal_block_probability(&block) / base
                        })
                        .collect();
                    Ok(law)
                }
            }
            ProcessKind::HiddenMarkov {
                transition,
                emission,
            } => {
                let (posterior, _) = self
                    .hidden_forward(observed)
                    .ok_or(ProcessError::ZeroProbabilityContext)?;
                let predicted = if observed.is_empty() {
                    posterior
                } else {
                    advance_hidden(&posterior, transition)
                };
                Ok(emit_law(&predicted, emission))
            }
            ProcessKind::Geometric { .. } => Err(ProcessError::Unsupported {
                operation: "a finite conditional law",
                kind: self.spec.kind.name(),
            }),
        }
    }

    /// Exact `P(next = y | observed past)`.
    pub fn true_conditional(&self, observed: &[Symbol], y: Symbol) -> Result<f64, ProcessError> {
        match &self.spec.kind {
            ProcessKind::Geometric { parameter } => {
                Ok(parameter * (1.0 - parameter).powi(y as i32))
            }
            _ => Ok(self
                .conditional_law(observed)?
                .get(y as usize)
                .copied()
                .unwrap_or(0.0)),
        }
    }

    /// Smallest depth beyond which no positive-probability extension of the
    /// observed context can move the conditional law.
    pub fn true_memory_length(&self, observed: &[Symbol]) -> Result<Memory, ProcessError> {
        match &self.spec.kind {
            ProcessKind::Iid { .. } => {
                if self.marginal_block_probability(observed) == 0.0 {
                    return Err(ProcessError::ZeroProbabilityContext);
                }
                Ok(Memory::Finite(0))
            }
            ProcessKind::Geometric { .. } => Ok(Memory::Finite(0)),
            ProcessKind::Markov { order, kernel } => {
                let m = *order;
                if observed.len() < m {
                    return Err(ProcessError::ContextTooShort {
                        needed: m,
                        found: observed.len(),
                    });
                }
                if self.marginal_block_probability(observed) == 0.0 {
                    return Err(ProcessError::ZeroProbabilityContext);
                }
                let a = kernel[0].len();
                let tail = &observed[observed.len() - m..];
                // Depth d suffices exactly when every stationary context
                // sharing the last d symbols carries the same kernel row:
                // shorter and deeper extensions alike then mix identical rows.
                for d in 0..=m {
                    let step = a.pow(d as u32);
                    let suffix = context_index(a, &tail[m - d..])
                        .expect("a positive-probability context is in the alphabet");
                    let mut class = (0..self.stationary.len())
                        .filter(|c| c % step == suffix && self.stationary[*c] > 0.0);
                    let first = class.next().expect("the observed context itself is stationary");
                    if class.all(|c| rows_equal(&kernel[first], &kernel[c])) {
                        return Ok(Memory::Finite(d));
                    }
                }
                unreachable!("depth equal to the order always pins a single row")
            }
            ProcessKind::HiddenMarkov {
                transition,
                emission,
            } => {
                if self.marginal_block_probability(observed) == 0.0 {
                    return Err(ProcessError::ZeroProbabilityContext);
                }
                // Degenerate specs collapse to IID observations; anything
                // else keeps a sliver of every past symbol alive forever.
                let iid_emissions = emission.windows(2).all(|w| rows_equal(&w[0], &w[1]));
                let iid_hidden = transition.windows(2).all(|w| rows_equal(&w[0], &w[1]));
                if iid_emissions || iid_hidden {
                    Ok(Memory::Finite(0))
                } else {
                    Ok(Memory::Infinite)
                }
            }
        }
    }

    /// Worst conditional-probability gap between the depth-`k` context and
    /// any of its positive-probability extensions.
    pub fn true_delta_k(&self, context: &[Symbol], k: usize) -> Result<f64, ProcessError> {
        if context.len() < k {
            return Err(ProcessError::ContextTooShort {
                needed: k,
                found: context.len(),
            });
        }
        match &self.spec.kind {
            ProcessKind::Iid { .. } => {
                if self.marginal_block_probability(context) == 0.0 {
                    return Err(ProcessError::ZeroProbabilityContext);
                }
                Ok(0.0)
            }
            ProcessKind::Geometric { .. } => Ok(0.0),
            ProcessKind::HiddenMarkov { .. } => Err(ProcessError::Unsupported {
                operation: "the conditional-gap oracle",
                kind: self.spec.kind.name(),
            }),
            ProcessKind::Markov { order, kernel } => {
                let a = kernel[0].len();
                let m = *order;
                let tail = &context[context.len() - k..];
                if self.marginal_block_probability(tail) == 0.0 {
                    return Err(ProcessError::ZeroProbabilityContext);
                }
                let base = self.conditional_law(tail)?;
                // Extensions deeper than the kernel order only repeat rows
                // already reachable at depth `order − k`, so the supremum
                // truncates there; depth one is always probed so contexts at
                // or past the order still answer (with gap zero).
                let deepest = m.saturating_sub(k).max(1);
                let mut best = 0.0f64;
                for i in 1..=deepest {
                    for z in 0..a.pow(i as u32) {
                        let mut extended = context_digits(a, i, z);
                        extended.extend_from_slice(tail);
                        if self.marginal_block_probability(&extended) == 0.0 {
                            continue;
                        }
                        let law = self.conditional_law(&extended)?;
                        for x in 0..a {
                            let mut block = extended.clone();
                            block.push(x as Symbol);
                            if self.marginal_block_probability(&block) == 0.0 {
                                continue;
                            }
                            best = best.max((base[x] - law[x]).abs());
                        }
                    }
                }
                Ok(best)
            }
        }
    }

    /// Exact per-symbol entropy in bits.
    pub fn entropy_rate(&self) -> Result<f64, ProcessError> {
        match &self.spec.kind {
            ProcessKind::Iid { probabilities } => Ok(shannon(probabilities)),
            ProcessKind::Markov { kernel, .. } => Ok(self
                .stationary
                .iter()
                .zip(kernel)
                .map(|(&pi, row)| pi * shannon(row))
                .sum()),
            ProcessKind::Geometric { parameter } => {
                let q = 1.0 - parameter;
                Ok(-parameter.log2() - q / parameter * q.log2())
            }
            ProcessKind::HiddenMarkov { .. } => Err(ProcessError::Unsupported {
                operation: "a closed-form entropy rate",
                kind: self.spec.kind.name(),
            }),
        }
    }

    /// An incremental view of the conditional next-symbol law.
    pub fn tracker(&self) -> Result<ConditionalTracker<'_>, ProcessError> {
        let state = match &self.spec.kind {
            ProcessKind::Iid { .. } => TrackerState::Fixed,
            ProcessKind::Markov { .. } => TrackerState::Recent(Vec::new()),
            ProcessKind::HiddenMarkov { .. } => TrackerState::Posterior {
                alpha: self.stationary.clone(),
                seen: false,
            },
            ProcessKind::Geometric { .. } => {
                return Err(ProcessError::Unsupported {
                    operation: "an incremental conditional law",
                    kind: self.spec.kind.name(),
                })
            }
        };
        Ok(ConditionalTracker {
            process: self,
            state,
        })
    }

    /// Scaled forward filter: posterior over hidden states after the block,
    /// plus the block's log probability; `None` when the block is impossible.
    fn hidden_forward(&self, block: &[Symbol]) -> Option<(Vec<f64>, f64)> {
        let ProcessKind::HiddenMarkov {
            transition,
            emission,
        } = &self.spec.kind
        else {
            unreachable!("filtering is only defined for hidden-state sources");
        };
        let mut alpha = self.stationary.clone();
        let mut log_p = 0.0;
        for (t, &obs) in block.iter().enumerate() {
            let predicted = if t == 0 {
                alpha
            } else {
                advance_hidden(&alpha, transition)
            };
            let mut next: Vec<f64> = predicted
                .iter()
                .zip(emission)
                .map(|(&p, row)| p * row.get(obs as usize).copied().unwrap_or(0.0))
                .collect();
            let scale: f64 = next.iter().sum();
            if scale <= 0.0 {
                return None;
            }
            for v in &mut next {
                *v /= scale;
            }
            log_p += scale.ln();
            alpha = next;
        }
        Some((alpha, log_p))
    }
}

/// Incremental conditional law: one constant-size update per symbol, with
/// answers identical to [`Process::conditional_law`] on the full prefix.
#[derive(Debug, Clone)]
pub struct ConditionalTracker<'a> {
    process: &'a Process,
    state: TrackerState,
}

#[derive(Debug, Clone)]
enum TrackerState {
    /// IID: the law never moves.
    Fixed,
    /// Markov: the most recent symbols, at most the chain order of them.
    Recent(Vec<Symbol>),
    /// Hidden-Markov: the filtered hidden-state posterior.
    Posterior { alpha: Vec<f64>, seen: bool },
}

impl ConditionalTracker<'_> {
    /// The law of the next symbol given everything pushed so far.
    pub fn law(&self) -> Vec<f64> {
        match (&self.state, &self.process.spec.kind) {
            (TrackerState::Fixed, ProcessKind::Iid { probabilities }) => probabilities.clone(),
            (TrackerState::Recent(recent), ProcessKind::Markov { .. }) => self
                .process
                .conditional_law(recent)
                .expect("every pushed prefix kept positive probability"),
            (
                TrackerState::Posterior { alpha, seen },
                ProcessKind::HiddenMarkov {
                    transition,
                    emission,
                },
            ) => {
                let predicted = if *seen {
                    advance_hidden(alpha, transition)
                } else {
                    alpha.clone()
                };
                emit_law(&predicted, emission)
            }
            _ => unreachable!("tracker state always matches its source kind"),
        }
    }

    /// Absorbs the next observed symbol.
    pub fn push(&mut self, x: Symbol) -> Result<(), ProcessError> {
        let order = match &self.process.spec.kind {
            ProcessKind::Markov { order, .. } => *order,
            _ => 0,
        };
        match &mut self.state {
            TrackerState::Fixed => {
                let ProcessKind::Iid { probabilities } = &self.process.spec.kind else {
                    unreachable!("tracker state always matches its source kind");
                };
                if probabilities.get(x as usize).copied().unwrap_or(0.0) == 0.0 {
                    return Err(ProcessError::ZeroProbabilityContext);
                }
            }
            TrackerState::Recent(recent) => {
                let law = self
                    .process
                    .conditional_law(recent)
                    .expect("every pushed prefix kept positive probability");
                if law.get(x as usize).copied().unwrap_or(0.0) == 0.0 {
                    return Err(ProcessError::ZeroProbabilityContext);
                }
                recent.push(x);
                if recent.len() > order {
                    recent.remove(0);
                }
            }
            TrackerState::Posterior { alpha, seen } => {
                let ProcessKind::HiddenMarkov {
                    transition,
                    emission,
                } = &self.process.spec.kind
                else {
                    unreachable!("tracker state always matches its source kind");
                };
                let predicted = if *seen {
                    advance_hidden(alpha, transition)
                } else {
                    alpha.clone()
                };
                let mut next: Vec<f64> = predicted
                    .iter()
                    .zip(emission)
                    .map(|(&p, row)| p * row.get(x as usize).copied().unwrap_or(0.0))
                    .collect();
                let scale: f64 = next.iter().sum();
                if scale <= 0.0 {
                    return Err(ProcessError::ZeroProbabilityContext);
                }
                for v in &mut next {
                    *v /= scale;
                }
                *alpha = next;
                *seen = true;
            }
        }
        Ok(())
    }
}

/// Derives the seed for one replication from a master seed: the pair is
/// mixed through a 64-bit finalizer so neighboring replication numbers land
/// on unrelated streams, deterministically.
pub fn replication_seed(master: u64, replication: u64) -> u64 {
    let mut z = master ^ replication.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One hidden-state transition applied to a distribution.
fn advance_hidden(alpha: &[f64], transition: &[Vec<f64>]) -> Vec<f64> {
    let n = alpha.len();
    (0..n)
        .map(|h| (0..n).map(|g| alpha[g] * transition[g][h]).sum())
        .collect()
}

/// The observation law produced by a distribution over hidden states.
fn emit_law(hidden: &[f64], emission: &[Vec<f64>]) -> Vec<f64> {
    let a = emission[0].len();
    (0..a)
        .map(|y| hidden.iter().zip(emission).map(|(&p, row)| p * row[y]).sum())
        .collect()
}

fn rows_equal(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| (x - y).abs() <= ROW_SUM_TOLERANCE)
}

/// Shannon entropy of a law, in bits, with `0 log 0 = 0`.
fn shannon(row: &[f64]) -> f64 {
    -row.iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.log2())
        .sum::<f64>()
}

/// Draws one index from a law by inverting the cumulative sums.
fn sample_law(rng: &mut ChaCha8Rng, law: &[f64]) -> usize {
    let r: f64 = rng.gen();
    let mut cumulative = 0.0;
    for (i, &p) in law.iter().enumerate() {
        cumulative += p;
        if r < cumulative {
            return i;
        }
    }
    law.iter()
        .rposition(|&p| p > 0.0)
        .expect("a validated law has positive mass")
}

/// Reads a context as a base-`a` numeral, oldest symbol most significant.
fn context_index(a: usize, digits: &[Symbol]) -> Option<usize> {
    let mut idx = 0usize;
    for &d in digits {
        if d as usize >= a {
            return None;
        }
        idx = idx * a + d as usize;
    }
    Some(idx)
}

/// Inverse of [`context_index`] at a fixed width.
fn context_digits(a: usize, width: usize, mut idx: usize) -> Vec<Symbol> {
    let mut digits = vec![0 as Symbol; width];
    for slot in digits.iter_mut().rev() {
        *slot = (idx % a) as Symbol;
        idx /= a;
    }
    digits
}

// The negated comparison doubles as NaN rejection.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
fn validate_row(which: &str, row: &[f64]) -> Result<(), ProcessError> {
    if row.is_empty() {
        return Err(ProcessError::EmptyAlphabet);
    }
    if let Some(&value) = row.iter().find(|v| !(**v >= 0.0)) {
        return Err(ProcessError::NegativeEntry {
            which: which.to_string(),
            value,
        });
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
        return Err(ProcessError::RowNotNormalized {
            which: which.to_string(),
            sum,
        });
    }
    Ok(())
}

/// Checks an order-`m` kernel and returns the alphabet size.
fn validate_kernel(order: usize, kernel: &[Vec<f64>]) -> Result<usize, ProcessError> {
    if order == 0 {
        return Err(ProcessError::BadOrder);
    }
    let Some(first) = kernel.first() else {
        return Err(ProcessError::EmptyAlphabet);
    };
    let alphabet = first.len();
    if alphabet == 0 {
        return Err(ProcessError::EmptyAlphabet);
    }
    let expected = alphabet
        .checked_pow(order as u32)
        .ok_or(ProcessError::ContextSpaceTooLarge { order, alphabet })?;
    if kernel.len() != expected {
        return Err(ProcessError::KernelShape {
            order,
            alphabet,
            expected,
            found: kernel.len(),
        });
    }
    for (i, row) in kernel.iter().enumerate() {
        if row.len() != alphabet {
            return Err(ProcessError::RaggedRow {
                which: format!("kernel row {i}"),
                expected: alphabet,
                found: row.len(),
            });
        }
        validate_row(&format!("kernel row {i}"), row)?;
    }
    Ok(alphabet)
}

fn validate_hidden(transition: &[Vec<f64>], emission: &[Vec<f64>]) -> Result<(), ProcessError> {
    let hidden = transition.len();
    if hidden == 0 {
        return Err(ProcessError::EmptyAlphabet);
    }
    for (i, row) in transition.iter().enumerate() {
        if row.len() != hidden {
            return Err(ProcessError::RaggedRow {
                which: format!("hidden transition row {i}"),
                expected: hidden,
                found: row.len(),
            });
        }
        validate_row(&format!("hidden transition row {i}"), row)?;
    }
    if emission.len() != hidden {
        return Err(ProcessError::EmissionShape {
            hidden,
            found: emission.len(),
        });
    }
    let alphabet = emission[0].len();
    for (i, row) in emission.iter().enumerate() {
        if row.len() != alphabet {
            return Err(ProcessError::RaggedRow {
                which: format!("emission row {i}"),
                expected: alphabet,
                found: row.len(),
            });
        }
        validate_row(&format!("emission row {i}"), row)?;
    }
    Ok(())
}

/// Transition matrix of the context chain induced by a kernel.
fn context_chain(kernel: &[Vec<f64>], alphabet: usize) -> DMatrix<f64> {
    let contexts = kernel.len();
    let mut p = DMatrix::zeros(contexts, contexts);
    for (ctx, row) in kernel.iter().enumerate() {
        for (y, &v) in row.iter().enumerate() {
            let next = (ctx * alphabet + y) % contexts;
            p[(ctx, next)] += v;
        }
    }
    p
}

/// Solves `π P = π, Σπ = 1` and verifies the balance residual.
fn stationary_law(p: &DMatrix<f64>) -> Result<Vec<f64>, ProcessError> {
    let n = p.nrows();
    let mut pi = if n == 1 {
        vec![1.0]
    } else {
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] = p[(j, i)] - if i == j { 1.0 } else { 0.0 };
            }
        }
        for j in 0..n {
            a[(n - 1, j)] = 1.0;
        }
        let mut b = DVector::zeros(n);
        b[n - 1] = 1.0;
        let solved = a.lu().solve(&b).ok_or(ProcessError::StationarySolveFailed {
            residual: f64::INFINITY,
        })?;
        solved.iter().copied().collect()
    };
    for v in &mut pi {
        if *v < 0.0 && *v > -STATIONARY_TOLERANCE {
            *v = 0.0;
        }
    }
    let total: f64 = pi.iter().sum();
    for v in &mut pi {
        *v /= total;
    }
    let mut residual = 0.0f64;
    for j in 0..n {
        let image: f64 = (0..n).map(|i| pi[i] * p[(i, j)]).sum();
        residual = residual.max((image - pi[j]).abs());
    }
    if pi.iter().any(|v| !v.is_finite() || *v < 0.0) || residual > STATIONARY_TOLERANCE {
        return Err(ProcessError::StationarySolveFailed { residual });
    }
    Ok(pi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iid(probabilities: Vec<f64>) -> Process {
        Process::new(ProcessSpec::new(ProcessKind::Iid { probabilities }, 7)).unwrap()
    }

    fn markov(order: usize, kernel: Vec<Vec<f64>>) -> Process {
        Process::new(ProcessSpec::new(ProcessKind::Markov { order, kernel }, 7)).unwrap()
    }

    fn lopsided_chain() -> Process {
        markov(1, vec![vec![0.9, 0.1], vec![0.2, 0.8]])
    }

    fn sticky_hmm() -> Process {
        Process::new(ProcessSpec::new(
            ProcessKind::HiddenMarkov {
                transition: vec![vec![0.9, 0.1], vec![0.1, 0.9]],
                emission: vec![vec![0.95, 0.05], vec![0.05, 0.95]],
            },
            7,
        ))
        .unwrap()
    }

    #[test]
    fn point_mass_source_emits_only_zeros() {
        let process = iid(vec![1.0]);
        assert!(process.generate(50).iter().all(|&s| s == 0));
        assert_eq!(process.entropy_rate().unwrap(), 0.0);
    }

    #[test]
    fn the_seed_pins_the_path() {
        let process = lopsided_chain();
        assert_eq!(
            process.generate(200).as_slice(),
            process.generate(200).as_slice()
        );
        assert_ne!(
            process.generate(200).as_slice(),
            process.reseeded(8).generate(200).as_slice()
        );
    }

    #[test]
    fn lopsided_chain_frequencies_near_the_stationary_law() {
        let process = lopsided_chain();
        // by hand: balance gives pi(0) = 0.2 / (0.1 + 0.2)
        assert!((process.marginal_block_probability(&[0]) - 2.0 / 3.0).abs() <= 1e-12);
        let path = process.generate(100_000);
        let ones = path.iter().filter(|&&s| s == 1).count() as f64;
        assert!((ones / 100_000.0 - 1.0 / 3.0).abs() < 0.01);
    }

    #[test]
    fn stationary_laws_balance_and_normalize() {
        let genuinely_second_order = markov(
            2,
            vec![
                vec![0.1, 0.9],
                vec![0.8, 0.2],
                vec![0.3, 0.7],
                vec![0.6, 0.4],
            ],
        );
        for process in [lopsided_chain(), genuinely_second_order, sticky_hmm()] {
            let pi = process.stationary_law();
            assert!((pi.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            assert!(pi.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn marginal_block_examples() {
        let process = lopsided_chain();
        assert_eq!(process.marginal_block_probability(&[]), 1.0);
        assert!((process.marginal_block_probability(&[0, 1]) - (2.0 / 3.0) * 0.1).abs() <= 1e-12);
        assert_eq!(process.marginal_block_probability(&[0, 2]), 0.0);

        let coin = iid(vec![0.5, 0.5]);
        assert!((coin.marginal_block_probability(&[1, 0, 1]) - 0.125).abs() <= 1e-15);
    }

    #[test]
    fn empirical_block_frequencies_match_the_marginals() {
        let specs = [
            iid(vec![0.3, 0.7]),
            lopsided_chain(),
            sticky_hmm(),
            Process::new(ProcessSpec::new(ProcessKind::Geometric { parameter: 0.5 }, 7)).unwrap(),
        ];
        let n = 100_000usize;
        for process in &specs {
            let path = process.generate(n);
            for block in [&[0][..], &[1], &[0, 1], &[1, 1, 0], &[0, 0, 1, 0]] {
                let windows = n - block.len() + 1;
                let hits = (0..windows)
                    .filter(|&t| &path[t..t + block.len()] == block)
                    .count() as f64;
                let expected = process.marginal_block_probability(block);
                assert!(
                    (hits / windows as f64 - expected).abs() <= 3.0 / (windows as f64).sqrt(),
                    "block {block:?} drifted from its marginal"
                );
            }
        }
    }

    #[test]
    fn conditional_law_reads_the_kernel_row() {
        let process = lopsided_chain();
        assert_eq!(process.conditional_law(&[1, 1, 0]).unwrap(), vec![0.9, 0.1]);
        assert_eq!(process.true_conditional(&[1, 1, 0], 1).unwrap(), 0.1);
        assert_eq!(process.true_conditional(&[1, 1, 0], 9).unwrap(), 0.0);
        assert_eq!(
            process.conditional_law(&[0, 2]),
            Err(ProcessError::ZeroProbabilityContext)
        );

        let coin = iid(vec![0.25, 0.75]);
        assert_eq!(coin.conditional_law(&[1, 0, 0, 1]).unwrap(), vec![0.25, 0.75]);
    }

    #[test]
    fn short_contexts_average_the_stationary_rows() {
        let process = markov(
            2,
            vec![
                vec![0.1, 0.9],
                vec![0.8, 0.2],
                vec![0.3, 0.7],
                vec![0.6, 0.4],
            ],
        );
        let law = process.conditional_law(&[1]).unwrap();
        for y in 0..2u32 {
            let joint = process.marginal_block_probability(&[1, y]);
            let base = process.marginal_block_probability(&[1]);
            assert!((law[y as usize] - joint / base).abs() <= 1e-12);
        }
        assert!((law[0] + law[1] - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn hidden_filter_matches_exhaustive_path_enumeration() {
        let process = sticky_hmm();
        let (transition, emission) = (
            vec![vec![0.9, 0.1], vec![0.1, 0.9]],
            vec![vec![0.95, 0.05], vec![0.05, 0.95]],
        );
        let pi = process.stationary_law().to_vec();
        // joint probability of an observation block, summing over every
        // hidden trajectory
        let exhaustive = |obs: &[Symbol]| -> f64 {
            let mut total = 0.0;
            let states = 2usize.pow(obs.len() as u32);
            for assignment in 0..states {
                let hidden: Vec<usize> =
                    (0..obs.len()).map(|t| (assignment >> t) & 1).collect();
                let mut p = pi[hidden[0]] * emission[hidden[0]][obs[0] as usize];
                for t in 1..obs.len() {
                    p *= transition[hidden[t - 1]][hidden[t]]
                        * emission[hidden[t]][obs[t] as usize];
                }
                total += p;
            }
            total
        };
        for len in 1..=6usize {
            for word in 0..2usize.pow(len as u32) {
                let obs = context_digits(2, len, word);
                let block = exhaustive(&obs);
                assert!((process.marginal_block_probability(&obs) - block).abs() <= 1e-10);
                for y in 0..2u32 {
                    let mut longer = obs.clone();
                    longer.push(y);
                    let cond = exhaustive(&longer) / block;
                    assert!(
                        (process.true_conditional(&obs, y).unwrap() - cond).abs() <= 1e-10,
                        "filter drifted at context {obs:?} -> {y}"
                    );
                }
            }
        }
        // spot checks at the deepest supported contexts
        let deep = process.generate(10);
        let block = exhaustive(&deep);
        assert!((process.marginal_block_probability(&deep) - block).abs() <= 1e-10);
        for y in 0..2u32 {
            let mut longer = deep.as_slice().to_vec();
            longer.push(y);
            let cond = exhaustive(&longer) / block;
            assert!((process.true_conditional(&deep, y).unwrap() - cond).abs() <= 1e-10);
        }
    }

    #[test]
    fn tracker_agrees_with_full_prefix_conditionals() {
        let second_order = markov(
            2,
            vec![
                vec![0.1, 0.9],
                vec![0.8, 0.2],
                vec![0.3, 0.7],
                vec![0.6, 0.4],
            ],
        );
        for process in [iid(vec![0.3, 0.7]), second_order, sticky_hmm()] {
            let path = process.generate(120);
            let mut tracker = process.tracker().unwrap();
            assert_eq!(tracker.law(), process.conditional_law(&[]).unwrap());
            for t in 0..path.len() {
                tracker.push(path[t]).unwrap();
                let full = process.conditional_law(&path[..=t]).unwrap();
                let incremental = tracker.law();
                for (a, b) in incremental.iter().zip(&full) {
                    assert!((a - b).abs() <= 1e-12, "tracker drifted at time {t}");
                }
            }
        }
    }

    #[test]
    fn tracker_rejects_impossible_symbols() {
        let process = iid(vec![1.0, 0.0]);
        let mut tracker = process.tracker().unwrap();
        tracker.push(0).unwrap();
        assert_eq!(tracker.push(1), Err(ProcessError::ZeroProbabilityContext));
    }

    #[test]
    fn memory_length_recovers_the_effective_order() {
        assert_eq!(
            iid(vec![0.5, 0.5]).true_memory_length(&[]).unwrap(),
            Memory::Finite(0)
        );
        let genuinely_second = markov(
            2,
            vec![
                vec![0.1, 0.9],
                vec![0.8, 0.2],
                vec![0.3, 0.7],
                vec![0.6, 0.4],
            ],
        );
        assert_eq!(
            genuinely_second.true_memory_length(&[0, 1]).unwrap(),
            Memory::Finite(2)
        );
        // rows keyed only by the newest symbol collapse one level
        let secretly_first = markov(
            2,
            vec![
                vec![0.7, 0.3],
                vec![0.4, 0.6],
                vec![0.7, 0.3],
                vec![0.4, 0.6],
            ],
        );
        assert_eq!(
            secretly_first.true_memory_length(&[1, 0]).unwrap(),
            Memory::Finite(1)
        );
        let secretly_iid = markov(
            2,
            vec![
                vec![0.7, 0.3],
                vec![0.7, 0.3],
                vec![0.7, 0.3],
                vec![0.7, 0.3],
            ],
        );
        assert_eq!(
            secretly_iid.true_memory_length(&[1, 1]).unwrap(),
            Memory::Finite(0)
        );
        assert_eq!(
            genuinely_second.true_memory_length(&[1]),
            Err(ProcessError::ContextTooShort { needed: 2, found: 1 })
        );
        assert_eq!(
            genuinely_second.true_memory_length(&[1, 7]),
            Err(ProcessError::ZeroProbabilityContext)
        );
        assert_eq!(
            sticky_hmm().true_memory_length(&[0]).unwrap(),
            Memory::Infinite
        );
        let degenerate_hmm = Process::new(ProcessSpec::new(
            ProcessKind::HiddenMarkov {
                transition: vec![vec![0.9, 0.1], vec![0.1, 0.9]],
                emission: vec![vec![0.5, 0.5], vec![0.5, 0.5]],
            },
            7,
        ))
        .unwrap();
        assert_eq!(
            degenerate_hmm.true_memory_length(&[0]).unwrap(),
            Memory::Finite(0)
        );
    }

    #[test]
    fn conditional_gap_oracle() {
        let process = lopsided_chain();
        // the widest depth-one gap against the marginal law: row (0.2, 0.8)
        // versus pi = (2/3, 1/3)
        let frozen = 2.0 / 3.0 - 0.2;
        assert!((process.true_delta_k(&[], 0).unwrap() - frozen).abs() <= 1e-10);
        assert_eq!(process.true_delta_k(&[0], 1).unwrap(), 0.0);
        assert_eq!(process.true_delta_k(&[1, 0, 1], 3).unwrap(), 0.0);
        assert!(iid(vec![0.4, 0.6]).true_delta_k(&[], 0).unwrap() == 0.0);

        let genuinely_second = markov(
            2,
            vec![
                vec![0.1, 0.9],
                vec![0.8, 0.2],
                vec![0.3, 0.7],
                vec![0.6, 0.4],
            ],
        );
        assert!(genuinely_second.true_delta_k(&[1], 1).unwrap() > 0.0);
        assert_eq!(genuinely_second.true_delta_k(&[0, 1], 2).unwrap(), 0.0);
        assert_eq!(
            genuinely_second.true_delta_k(&[1], 2),
            Err(ProcessError::ContextTooShort { needed: 2, found: 1 })
        );
        assert!(matches!(
            sticky_hmm().true_delta_k(&[0], 0),
            Err(ProcessError::Unsupported { .. })
        ));
    }

    #[test]
    fn entropy_rate_examples() {
        assert_eq!(iid(vec![0.5, 0.5]).entropy_rate().unwrap(), 1.0);
        let h = |p: f64| -p * p.log2() - (1.0 - p) * (1.0 - p).log2();
        let expected = (2.0 / 3.0) * h(0.9) + (1.0 / 3.0) * h(0.2);
        assert!((lopsided_chain().entropy_rate().unwrap() - expected).abs() <= 1e-12);
        assert!(matches!(
            sticky_hmm().entropy_rate(),
            Err(ProcessError::Unsupported { .. })
        ));
    }

    #[test]
    fn geometric_source_examples() {
        let process =
            Process::new(ProcessSpec::new(ProcessKind::Geometric { parameter: 0.5 }, 7)).unwrap();
        assert_eq!(process.alphabet_size(), None);
        assert!((process.marginal_block_probability(&[0]) - 0.5).abs() <= 1e-15);
        assert!((process.marginal_block_probability(&[1]) - 0.25).abs() <= 1e-15);
        assert_eq!(process.entropy_rate().unwrap(), 2.0);
        assert_eq!(process.true_memory_length(&[3]).unwrap(), Memory::Finite(0));
        assert_eq!(process.true_conditional(&[9, 9], 2).unwrap(), 0.125);
        let path = process.generate(100_000);
        let mean = path.iter().map(|&s| s as f64).sum::<f64>() / 100_000.0;
        assert!((mean - 1.0).abs() < 0.05, "sample mean {mean} drifted");
    }

    #[test]
    fn validation_names_the_offending_row() {
        let unbalanced = Process::new(ProcessSpec::new(
            ProcessKind::Markov {
                order: 1,
                kernel: vec![vec![0.9, 0.1], vec![0.2, 0.79]],
            },
            0,
        ));
        assert!(matches!(
            unbalanced,
            Err(ProcessError::RowNotNormalized { ref which, .. }) if which == "kernel row 1"
        ));
        assert!(matches!(
            Process::new(ProcessSpec::new(
                ProcessKind::Iid {
                    probabilities: vec![1.2, -0.2]
                },
                0,
            )),
            Err(ProcessError::NegativeEntry { .. })
        ));
        assert_eq!(
            Process::new(ProcessSpec::new(
                ProcessKind::Markov {
                    order: 2,
                    kernel: vec![vec![0.5, 0.5], vec![0.5, 0.5]],
                },
                0,
            ))
            .unwrap_err(),
            ProcessError::KernelShape {
                order: 2,
                alphabet: 2,
                expected: 4,
                found: 2
            }
        );
        assert!(matches!(
            Process::new(ProcessSpec::new(
                ProcessKind::Markov {
                    order: 1,
                    kernel: vec![vec![0.5, 0.5], vec![1.0]],
                },
                0,
            )),
            Err(ProcessError::RaggedRow { .. })
        ));
        assert_eq!(
            Process::new(ProcessSpec::new(
                ProcessKind::Markov {
                    order: 0,
                    kernel: vec![vec![1.0]]
                },
                0,
            ))
            .unwrap_err(),
            ProcessError::BadOrder
        );
        for bad in [0.0, 1.0, -0.3] {
            assert_eq!(
                Process::new(ProcessSpec::new(
                    ProcessKind::Geometric { parameter: bad },
                    0
                ))
                .unwrap_err(),
                ProcessError::BadGeometricParameter { value: bad }
            );
        }
        assert!(matches!(
            Process::new(ProcessSpec::new(
                ProcessKind::HiddenMarkov {
                    transition: vec![vec![0.9, 0.1], vec![0.1, 0.9]],
                    emission: vec![vec![1.0]],
                },
                0,
            )),
            Err(ProcessError::EmissionShape {
                hidden: 2,
                found: 1
            })
        ));
        assert!(matches!(
            Process::new(ProcessSpec::new(
                ProcessKind::Iid {
                    probabilities: vec![]
                },
                0
            )),
            Err(ProcessError::EmptyAlphabet)
        ));
    }
}
