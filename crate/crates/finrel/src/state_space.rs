//! Finite terminal state spaces, payoff vectors, partitions, and nested
//! filtrations.
//!
//! A market is modelled by a finite set of terminal states. What the market
//! can distinguish at each date is a partition of that set, and a filtration
//! is a chain of partitions where each one refines its predecessor. States
//! are addressed by 0-based index throughout; labels are presentation only.

use std::collections::HashSet;
use std::fmt;

use thiserror::Error;

/// Errors raised while constructing state spaces and payoff vectors.
#[derive(Debug, Error, PartialEq)]
pub enum StateSpaceError {
    #[error("state space must contain at least one state")]
    Empty,
    #[error("duplicate state label `{0}`")]
    DuplicateLabel(String),
    #[error("payoff has {got} entries but the state space has {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("payoff entry {index} is not finite")]
    NonFinite { index: usize },
}

/// Errors raised while constructing partitions.
#[derive(Debug, Error, PartialEq)]
pub enum PartitionError {
    #[error("partition block {block} is empty")]
    EmptyBlock { block: usize },
    #[error("state index {state} is out of range for {n} states")]
    OutOfRange { state: usize, n: usize },
    #[error("state {state} appears in more than one block")]
    Overlap { state: usize },
    #[error("state {state} is not covered by any block")]
    Gap { state: usize },
}

/// A single violation found while validating a filtration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FiltrationViolation {
    /// Block `block` at time index `time` straddles two blocks of the
    /// preceding partition.
    NotRefining { time: usize, block: usize },
    /// The first partition must be the trivial one-block partition.
    FirstNotTrivial,
    /// A filtration declared complete must end in the singleton partition.
    LastNotDiscrete,
    /// Partition at `time` is over a different number of states.
    WrongStateCount { time: usize },
    /// Time indices must be strictly increasing.
    TimesNotIncreasing,
}

impl fmt::Display for FiltrationViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NotRefining { time, block } => write!(
                f,
                "block {block} of the partition at time {time} straddles blocks of the previous partition"
            ),
            Self::FirstNotTrivial => write!(f, "the first partition is not the trivial one-block partition"),
            Self::LastNotDiscrete => write!(
                f,
                "the filtration is declared complete but its last partition is not the singleton partition"
            ),
            Self::WrongStateCount { time } => {
                write!(f, "partition at time {time} covers a different number of states")
            }
            Self::TimesNotIncreasing => write!(f, "time indices are not strictly increasing"),
        }
    }
}

/// Errors raised while constructing filtrations.
#[derive(Debug, Error, PartialEq)]
pub enum FiltrationError {
    #[error("filtration must have at least one time")]
    NoTimes,
    #[error("filtration has {times} times but {partitions} partitions")]
    LengthMismatch { times: usize, partitions: usize },
    #[error("invalid filtration: {}", format_violations(.0))]
    Invalid(Vec<FiltrationViolation>),
}

fn format_violations(violations: &[FiltrationViolation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// A finite set of terminal states with distinct labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSpace {
    labels: Vec<String>,
}

impl StateSpace {
    /// Builds a state space from distinct labels.
    pub fn new<I, S>(labels: I) -> Result<Self, StateSpaceError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(StateSpaceError::Empty);
        }
        let mut seen = HashSet::new();
        for label in &labels {
            if !seen.insert(label.as_str()) {
                return Err(StateSpaceError::DuplicateLabel(label.clone()));
            }
        }
        Ok(Self { labels })
    }

    /// A state space of `n` states with generated labels `w1..wn`.
    pub fn with_size(n: usize) -> Result<Self, StateSpaceError> {
        Self::new((1..=n).map(|i| format!("w{i}")))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, state: usize) -> &str {
        &self.labels[state]
    }

    /// Resolves a label to its state index.
    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// A terminal payoff: one currency value per state.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffVector {
    values: Vec<f64>,
}

impl PayoffVector {
    /// Builds a payoff over `space`, checking length and finiteness.
    pub fn new(space: &StateSpace, values: Vec<f64>) -> Result<Self, StateSpaceError> {
        if values.len() != space.len() {
            return Err(StateSpaceError::LengthMismatch {
                expected: space.len(),
                got: values.len(),
            });
        }
        Self::from_values(values)
    }

    /// Builds a payoff from raw values, checking finiteness only.
    pub fn from_values(values: Vec<f64>) -> Result<Self, StateSpaceError> {
        if values.is_empty() {
            return Err(StateSpaceError::Empty);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(StateSpaceError::NonFinite { index });
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, state: usize) -> f64 {
        self.values[state]
    }
}

/// A partition of `{0, .., n-1}` into disjoint nonempty blocks.
///
/// Blocks are normalized on construction: each block is sorted and blocks
/// are ordered by their smallest element, so block indices are deterministic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    n: usize,
    blocks: Vec<Vec<usize>>,
    state_to_block: Vec<usize>,
}

impl Partition {
    /// Builds a partition, verifying disjointness and full coverage.
    pub fn new(n: usize, blocks: Vec<Vec<usize>>) -> Result<Self, PartitionError> {
        let mut owner: Vec<Option<usize>> = vec![None; n];
        for (b, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(PartitionError::EmptyBlock { block: b });
            }
            for &state in block {
                if state >= n {
                    return Err(PartitionError::OutOfRange { state, n });
                }
                if owner[state].is_some() {
                    return Err(PartitionError::Overlap { state });
                }
                owner[state] = Some(b);
            }
        }
        if let Some(state) = owner.iter().position(|o| o.is_none()) {
            return Err(PartitionError::Gap { state });
        }

        let mut blocks: Vec<Vec<usize>> = blocks
            .into_iter()
            .map(|mut block| {
                block.sort_unstable();
                block
            })
            .collect();
        blocks.sort_by_key(|block| block[0]);

        let mut state_to_block = vec![0usize; n];
        for (b, block) in blocks.iter().enumerate() {
            for &state in block {
                state_to_block[state] = b;
            }
        }
        Ok(Self {
            n,
            blocks,
            state_to_block,
        })
    }

    /// The one-block partition: nothing is distinguishable.
    pub fn trivial(n: usize) -> Self {
        Self::new(n, vec![(0..n).collect()]).expect("trivial partition is valid for n >= 1")
    }

    /// The singleton partition: every state is distinguishable.
    pub fn discrete(n: usize) -> Self {
        Self::new(n, (0..n).map(|i| vec![i]).collect())
            .expect("singleton partition is valid for n >= 1")
    }

    pub fn num_states(&self) -> usize {
        self.n
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn block(&self, index: usize) -> &[usize] {
        &self.blocks[index]
    }

    /// The index of the unique block containing `state`.
    pub fn block_index(&self, state: usize) -> Result<usize, PartitionError> {
        if state >= self.n {
            return Err(PartitionError::OutOfRange { state, n: self.n });
        }
        Ok(self.state_to_block[state])
    }

    pub fn is_trivial(&self) -> bool {
        self.blocks.len() == 1
    }

    pub fn is_discrete(&self) -> bool {
        self.blocks.len() == self.n
    }

    /// Whether every block of `self` is contained in a block of `coarser`.
    pub fn refines(&self, coarser: &Partition) -> bool {
        if self.n != coarser.n {
            return false;
        }
        self.blocks.iter().all(|block| {
            let target = coarser.state_to_block[block[0]];
            block.iter().all(|&s| coarser.state_to_block[s] == target)
        })
    }
}

/// Checks that a chain of partitions forms a filtration: the first is
/// trivial, each refines its predecessor, and the last is the singleton
/// partition when the chain is declared complete. Returns every violation
/// found, in time order.
pub fn validate_filtration(
    partitions: &[Partition],
    complete: bool,
) -> Result<(), Vec<FiltrationViolation>> {
    let mut violations = Vec::new();
    if partitions.is_empty() {
        return Ok(());
    }
    let n = partitions[0].num_states();
    if !partitions[0].is_trivial() {
        violations.push(FiltrationViolation::FirstNotTrivial);
    }
    for t in 1..partitions.len() {
        if partitions[t].num_states() != n {
            violations.push(FiltrationViolation::WrongStateCount { time: t });
            continue;
        }
        if !partitions[t].refines(&partitions[t - 1]) {
            // Report the first offending block at this time.
            let prev = &partitions[t - 1];
            let block = partitions[t]
                .blocks()
                .iter()
                .position(|b| {
                    let target = prev.block_index(b[0]).expect("state in range");
                    b.iter()
                        .any(|&s| prev.block_index(s).expect("state in range") != target)
                })
                .unwrap_or(0);
            violations.push(FiltrationViolation::NotRefining { time: t, block });
        }
    }
    if complete && !partitions.last().expect("nonempty").is_discrete() {
        violations.push(FiltrationViolation::LastNotDiscrete);
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

/// A nested chain of partitions indexed by strictly increasing times.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Filtration {
    times: Vec<usize>,
    partitions: Vec<Partition>,
    complete: bool,
}

impl Filtration {
    /// Builds a filtration with implicit times `0, 1, ..`.
    pub fn new(partitions: Vec<Partition>, complete: bool) -> Result<Self, FiltrationError> {
        let times = (0..partitions.len()).collect();
        Self::with_times(times, partitions, complete)
    }

    /// Builds a filtration with explicit time indices.
    pub fn with_times(
        times: Vec<usize>,
        partitions: Vec<Partition>,
        complete: bool,
    ) -> Result<Self, FiltrationError> {
        if partitions.is_empty() {
            return Err(FiltrationError::NoTimes);
        }
        if times.len() != partitions.len() {
            return Err(FiltrationError::LengthMismatch {
                times: times.len(),
                partitions: partitions.len(),
            });
        }
        let mut violations = Vec::new();
        if !times.windows(2).all(|w| w[0] < w[1]) {
            violations.push(FiltrationViolation::TimesNotIncreasing);
        }
        if let Err(more) = validate_filtration(&partitions, complete) {
            violations.extend(more);
        }
        if !violations.is_empty() {
            return Err(FiltrationError::Invalid(violations));
        }
        Ok(Self {
            times,
            partitions,
            complete,
        })
    }

    pub fn len(&self) -> usize {
        self.partitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.partitions.is_empty()
    }

    pub fn num_states(&self) -> usize {
        self.partitions[0].num_states()
    }

    pub fn times(&self) -> &[usize] {
        &self.times
    }

    pub fn partitions(&self) -> &[Partition] {
        &self.partitions
    }

    pub fn partition(&self, index: usize) -> &Partition {
        &self.partitions[index]
    }

    pub fn is_complete(&self) -> bool {
        self.complete
    }

    /// The last (finest) partition.
    pub fn terminal_partition(&self) -> &Partition {
        self.partitions.last().expect("filtration is nonempty")
    }
}
