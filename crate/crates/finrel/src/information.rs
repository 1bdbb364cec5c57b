//! Entropy accounting for information revelation.
//!
//! Total terminal entropy splits exactly against any partition: the entropy
//! of the block masses (what the partition reveals) plus the mass-weighted
//! entropies of the conditional measures inside each block (what remains).
//! Prices reveal information only through their level sets — states with
//! equal prices stay indistinguishable — so the partition induced by a price
//! vector coarsens the information partition and can only reveal less.
//!
//! Entropies are computed in natural log internally and converted on
//! output; the default reporting base is 2.

use thiserror::Error;

use crate::geometry::{conditional_measure, ProbabilityMeasure};
use crate::state_space::{Partition, PayoffVector};

/// Default absolute tolerance for grouping prices into one level.
pub const DEFAULT_PRICE_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum InformationError {
    #[error(
        "price values chain ambiguously at tolerance {tolerance:e}: \
         {a} and {b} group together but the level would span {span:e}; \
         use a smaller tolerance"
    )]
    AmbiguousTolerance {
        tolerance: f64,
        a: f64,
        b: f64,
        span: f64,
    },
    #[error("no price level within {tolerance:e} of {price}")]
    UnknownPriceLevel { price: f64, tolerance: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Logarithm base for entropy reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogBase {
    /// Bits.
    Two,
    /// Nats.
    E,
}

impl LogBase {
    fn convert(self, nats: f64) -> f64 {
        match self {
            LogBase::Two => nats / std::f64::consts::LN_2,
            LogBase::E => nats,
        }
    }
}

/// Shannon entropy of a weight vector in nats, with the `0 ln 0 = 0`
/// convention. The trailing `+ 0.0` normalizes `-0.0` from point masses.
fn entropy_nats(weights: &[f64]) -> f64 {
    weights
        .iter()
        .map(|&w| if w > 0.0 { -w * w.ln() } else { 0.0 })
        .sum::<f64>()
        + 0.0
}

/// Shannon entropy of a measure.
pub fn entropy(q: &ProbabilityMeasure, base: LogBase) -> f64 {
    base.convert(entropy_nats(q.weights()))
}

/// The exact decomposition of total entropy against one partition.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyReport {
    pub base: LogBase,
    /// Entropy of the full measure.
    pub h_total: f64,
    /// Entropy of the block masses.
    pub h_branch: f64,
    /// Mass-weighted entropy remaining inside the blocks.
    pub h_residual: f64,
    /// Information the partition reveals; equals `h_branch` by the
    /// decomposition identity.
    pub revealed: f64,
}

/// Splits `entropy(q)` into branch and residual parts against `partition`.
pub fn conservation_decomposition(
    q: &ProbabilityMeasure,
    partition: &Partition,
    base: LogBase,
) -> EntropyReport {
    assert_eq!(
        partition.num_states(),
        q.len(),
        "partition must cover the state space"
    );
    let h_total_nats = entropy_nats(q.weights());
    let masses: Vec<f64> = partition.blocks().iter().map(|b| q.mass(b)).collect();
    let h_branch_nats = entropy_nats(&masses);
    let h_residual_nats: f64 = partition
        .blocks()
        .iter()
        .zip(&masses)
        .map(|(block, &mass)| {
            let conditional = conditional_measure(q, block).expect("blocks are nonempty");
            mass * entropy_nats(conditional.weights())
        })
        .sum();
    EntropyReport {
        base,
        h_total: base.convert(h_total_nats),
        h_branch: base.convert(h_branch_nats),
        h_residual: base.convert(h_residual_nats),
        revealed: base.convert(h_total_nats - h_residual_nats),
    }
}

/// The level sets of a price vector: one entry per distinct price value,
/// each holding the states priced there.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePartition {
    levels: Vec<PriceLevel>,
    tolerance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriceLevel {
    /// Representative price of the level (mean of member prices).
    pub price: f64,
    /// States in the level, ascending.
    pub states: Vec<usize>,
}

impl PricePartition {
    pub fn levels(&self) -> &[PriceLevel] {
        &self.levels
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    /// The level whose price matches `s` within the grouping tolerance.
    pub fn level_of(&self, s: f64) -> Result<&PriceLevel, InformationError> {
        self.levels
            .iter()
            .find(|level| (level.price - s).abs() <= self.tolerance.max(f64::EPSILON))
            .ok_or(InformationError::UnknownPriceLevel {
                price: s,
                tolerance: self.tolerance,
            })
    }

    /// View as a state-space partition.
    pub fn as_partition(&self, n: usize) -> Partition {
        Partition::new(n, self.levels.iter().map(|l| l.states.clone()).collect())
            .expect("levels partition the state space")
    }
}

/// Groups states whose prices differ by at most `tolerance` into maximal
/// levels. Prices that chain (adjacent gaps within tolerance but a total
/// span beyond it) are rejected as ambiguous.
pub fn price_induced_partition(
    prices: &PayoffVector,
    tolerance: f64,
) -> Result<PricePartition, InformationError> {
    assert!(tolerance >= 0.0, "tolerance must be nonnegative");
    let mut order: Vec<usize> = (0..prices.len()).collect();
    order.sort_by(|&a, &b| {
        prices
            .value(a)
            .partial_cmp(&prices.value(b))
            .expect("payoff entries are finite")
    });

    let mut levels: Vec<Vec<usize>> = Vec::new();
    let mut current = vec![order[0]];
    for &state in &order[1..] {
        let prev = *current.last().expect("level is nonempty");
        if prices.value(state) - prices.value(prev) <= tolerance {
            current.push(state);
        } else {
            levels.push(std::mem::take(&mut current));
            current = vec![state];
        }
    }
    levels.push(current);

    for level in &levels {
        let lo = prices.value(level[0]);
        let hi = prices.value(*level.last().expect("level is nonempty"));
        if hi - lo > tolerance {
            // Adjacent gaps were within tolerance but the level spans more:
            // grouping would depend on chaining order.
            return Err(InformationError::AmbiguousTolerance {
                tolerance,
                a: lo,
                b: hi,
                span: hi - lo,
            });
        }
    }

    let levels = levels
        .into_iter()
        .map(|mut states| {
            let price = states.iter().map(|&s| prices.value(s)).sum::<f64>() / states.len() as f64;
            states.sort_unstable();
            PriceLevel { price, states }
        })
        .collect();
    Ok(PricePartition { levels, tolerance })
}

/// Conditional measure over the level set priced at `s`, and its entropy.
pub fn posterior_given_price(
    q: &ProbabilityMeasure,
    partition: &PricePartition,
    s: f64,
    base: LogBase,
) -> Result<(ProbabilityMeasure, f64), InformationError> {
    let level = partition.level_of(s)?;
    for &state in &level.states {
        if state >= q.len() {
            return Err(InformationError::DimensionMismatch {
                expected: q.len(),
                got: state + 1,
            });
        }
    }
    let conditional =
        conditional_measure(q, &level.states).expect("levels are nonempty and in range");
    let h = entropy(&conditional, base);
    Ok((conditional, h))
}

/// Information the price reveals: total entropy minus the expected residual
/// entropy across price levels.
pub fn revealed_information(
    q: &ProbabilityMeasure,
    partition: &PricePartition,
    base: LogBase,
) -> f64 {
    let h_total = entropy_nats(q.weights());
    let expected_residual: f64 = partition
        .levels()
        .iter()
        .map(|level| {
            let mass = q.mass(&level.states);
            let conditional = conditional_measure(q, &level.states).expect("levels are nonempty");
            mass * entropy_nats(conditional.weights())
        })
        .sum();
    base.convert(h_total - expected_residual)
}
