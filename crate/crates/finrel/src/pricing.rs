//! Projection pricing over a filtration.
//!
//! Under a pricing geometry `Q`, the discounted price at time `t` is the
//! conditional expectation of the terminal payoff given the time-`t`
//! partition — equivalently, the orthogonal projection of the payoff onto
//! the subspace of block-constant vectors under `<., .>_Q`. Discounted
//! prices are then a `Q`-martingale; observing the same process under any
//! other measure produces an apparent per-block drift, and the pattern of
//! drifts across (market geometry, observer) pairs is what the frame
//! classifier labels.

use thiserror::Error;

use crate::geometry::{inner_product, ProbabilityMeasure};
use crate::state_space::{Filtration, Partition, PayoffVector};

/// Measures closer than this in total variation are treated as equal when
/// classifying frames.
pub const FRAME_EQUALITY_TOL: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum PricingError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("price process has {process} times but the filtration has {filtration}")]
    TimeMismatch { process: usize, filtration: usize },
}

/// Projects `x` onto the block-constant subspace of `partition` under the
/// geometry `q`: on each block the output equals the `q`-conditional mean
/// of `x`. The result lives in the same `n`-dimensional space as the payoff.
pub fn project(x: &PayoffVector, q: &ProbabilityMeasure, partition: &Partition) -> PayoffVector {
    assert_eq!(x.len(), q.len(), "payoff dimension must match the measure");
    assert_eq!(
        partition.num_states(),
        q.len(),
        "partition must cover the state space"
    );
    let mut out = vec![0.0; x.len()];
    for block in partition.blocks() {
        let mass: f64 = block.iter().map(|&s| q.weight(s)).sum();
        let mean: f64 = block.iter().map(|&s| q.weight(s) * x.value(s)).sum::<f64>() / mass;
        for &s in block {
            out[s] = mean;
        }
    }
    PayoffVector::from_values(out).expect("projection of a finite payoff is finite")
}

/// Largest inner product between the projection residual `x - proj` and any
/// block indicator of `partition`. Orthogonality of conditional expectation
/// makes this vanish up to rounding.
pub fn orthogonality_residual(
    x: &PayoffVector,
    proj: &PayoffVector,
    q: &ProbabilityMeasure,
    partition: &Partition,
) -> f64 {
    assert_eq!(
        x.len(),
        proj.len(),
        "payoff and projection must share a space"
    );
    partition
        .blocks()
        .iter()
        .map(|block| {
            block
                .iter()
                .map(|&s| q.weight(s) * (x.value(s) - proj.value(s)))
                .sum::<f64>()
                .abs()
        })
        .fold(0.0, f64::max)
}

/// Discounted and spot prices along a filtration, with per-state discounted
/// returns. Returns on a block whose previous price is zero are flagged
/// undefined rather than reported as infinities.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceProcess {
    times: Vec<usize>,
    discounted: Vec<Vec<f64>>,
    spot: Vec<Vec<f64>>,
    returns: Vec<Vec<Option<f64>>>,
    rate: f64,
}

impl PriceProcess {
    pub fn times(&self) -> &[usize] {
        &self.times
    }

    /// `S~_t`, one vector per time, block-constant on the time-`t` partition.
    pub fn discounted(&self) -> &[Vec<f64>] {
        &self.discounted
    }

    /// Spot prices `S_t = e^{-r_f (T - t)} S~_t`.
    pub fn spot(&self) -> &[Vec<f64>] {
        &self.spot
    }

    /// Discounted returns `R~_t = S~_t / S~_{t-1}` for `t = times[1..]`;
    /// `None` marks states in a block with zero previous price.
    pub fn returns(&self) -> &[Vec<Option<f64>>] {
        &self.returns
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn num_states(&self) -> usize {
        self.discounted[0].len()
    }
}

/// Prices `x` along `filtration` under the geometry `q` with a constant
/// per-period rate `r_f`.
pub fn price_process(
    x: &PayoffVector,
    q: &ProbabilityMeasure,
    filtration: &Filtration,
    r_f: f64,
) -> PriceProcess {
    assert_eq!(x.len(), q.len(), "payoff dimension must match the measure");
    assert_eq!(
        filtration.num_states(),
        q.len(),
        "filtration must cover the state space"
    );

    let times = filtration.times().to_vec();
    let horizon = *times.last().expect("filtration is nonempty") as f64;
    let discounted: Vec<Vec<f64>> = filtration
        .partitions()
        .iter()
        .map(|p| project(x, q, p).values().to_vec())
        .collect();
    let spot: Vec<Vec<f64>> = discounted
        .iter()
        .zip(&times)
        .map(|(prices, &t)| {
            let factor = (-r_f * (horizon - t as f64)).exp();
            prices.iter().map(|v| factor * v).collect()
        })
        .collect();
    let returns: Vec<Vec<Option<f64>>> = (1..discounted.len())
        .map(|t| {
            discounted[t]
                .iter()
                .zip(&discounted[t - 1])
                .map(
                    |(now, prev)| {
                        if *prev == 0.0 {
                            None
                        } else {
                            Some(now / prev)
                        }
                    },
                )
                .collect()
        })
        .collect();
    PriceProcess {
        times,
        discounted,
        spot,
        returns,
        rate: r_f,
    }
}

/// Largest blockwise martingale defect `|E^q[S~_t | block] - S~_{t-1}|`
/// across all times and blocks of the predecessor partitions.
pub fn martingale_residual(
    process: &PriceProcess,
    q: &ProbabilityMeasure,
    filtration: &Filtration,
) -> f64 {
    let mut worst: f64 = 0.0;
    for t in 1..process.discounted.len() {
        let prev = filtration.partition(t - 1);
        for block in prev.blocks() {
            let mass: f64 = block.iter().map(|&s| q.weight(s)).sum();
            let expected: f64 = block
                .iter()
                .map(|&s| q.weight(s) * process.discounted[t][s])
                .sum::<f64>()
                / mass;
            let defect = (expected - process.discounted[t - 1][block[0]]).abs();
            worst = worst.max(defect);
        }
    }
    worst
}

/// Apparent drifts of a price process when its discounted returns are
/// averaged under `observer`: one `phi_t` per block of each predecessor
/// partition, `None` when the block's return is undefined.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftReport {
    /// `drifts[t - 1][block]` is `phi_t` on that block of the time-`t-1`
    /// partition.
    drifts: Vec<Vec<Option<f64>>>,
}

impl DriftReport {
    pub fn per_time(&self) -> &[Vec<Option<f64>>] {
        &self.drifts
    }

    /// Largest absolute drift over all times and blocks, ignoring
    /// undefined entries.
    pub fn max_abs(&self) -> f64 {
        self.drifts
            .iter()
            .flatten()
            .filter_map(|d| d.map(f64::abs))
            .fold(0.0, f64::max)
    }
}

/// Computes `phi_t(block) = E^observer[R~_t | block] - 1` on each block of
/// the predecessor partition.
pub fn apparent_drift(
    process: &PriceProcess,
    observer: &ProbabilityMeasure,
    filtration: &Filtration,
) -> Result<DriftReport, PricingError> {
    if observer.len() != process.num_states() {
        return Err(PricingError::DimensionMismatch {
            expected: process.num_states(),
            got: observer.len(),
        });
    }
    if filtration.len() != process.times.len() {
        return Err(PricingError::TimeMismatch {
            process: process.times.len(),
            filtration: filtration.len(),
        });
    }
    let mut drifts = Vec::with_capacity(process.returns.len());
    for (t, slice) in process.returns.iter().enumerate() {
        let prev = filtration.partition(t);
        let mut per_block = Vec::with_capacity(prev.num_blocks());
        for block in prev.blocks() {
            if block.iter().any(|&s| slice[s].is_none()) {
                per_block.push(None);
                continue;
            }
            let mass: f64 = block.iter().map(|&s| observer.weight(s)).sum();
            let mean: f64 = block
                .iter()
                .map(|&s| observer.weight(s) * slice[s].expect("checked above"))
                .sum::<f64>()
                / mass;
            per_block.push(Some(mean - 1.0));
        }
        drifts.push(per_block);
    }
    Ok(DriftReport { drifts })
}

/// The four observation regimes for a price process: whether the market
/// geometry is curved away from the flat background, and whether the
/// observer evaluates under the market geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameLabel {
    /// Flat market geometry, observer agrees with it: no drift anywhere.
    InertialNoGravity,
    /// Flat market geometry evaluated under a different measure: drift from
    /// mismeasurement, not curvature.
    AcceleratedNoGravity,
    /// Curved market geometry observed under the flat background: drift from
    /// curvature.
    StaticInField,
    /// Curved market geometry, observer agrees with it: the drift vanishes
    /// though the curvature remains.
    FreeFallInField,
}

impl FrameLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::InertialNoGravity => "inertial_no_gravity",
            Self::AcceleratedNoGravity => "accelerated_no_gravity",
            Self::StaticInField => "static_in_field",
            Self::FreeFallInField => "free_fall_in_field",
        }
    }
}

/// Frame label plus a marker for observers that are neither the flat
/// background nor the market geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameClassification {
    pub label: FrameLabel,
    /// Set when the market is curved and the observer is a third measure;
    /// such observers are reported as static-in-field.
    pub generic_observer: bool,
}

/// Classifies the observation frame from (market geometry, observer, flat
/// background), testing measure equality in total variation.
pub fn classify_frame(
    market: &ProbabilityMeasure,
    observer: &ProbabilityMeasure,
    flat: &ProbabilityMeasure,
) -> Result<FrameClassification, PricingError> {
    if observer.len() != market.len() {
        return Err(PricingError::DimensionMismatch {
            expected: market.len(),
            got: observer.len(),
        });
    }
    if flat.len() != market.len() {
        return Err(PricingError::DimensionMismatch {
            expected: market.len(),
            got: flat.len(),
        });
    }
    let market_is_flat = market.total_variation(flat) < FRAME_EQUALITY_TOL;
    let observer_is_market = observer.total_variation(market) < FRAME_EQUALITY_TOL;
    let observer_is_flat = observer.total_variation(flat) < FRAME_EQUALITY_TOL;

    let (label, generic_observer) = if market_is_flat {
        if observer_is_market {
            (FrameLabel::InertialNoGravity, false)
        } else {
            (FrameLabel::AcceleratedNoGravity, false)
        }
    } else if observer_is_market {
        (FrameLabel::FreeFallInField, false)
    } else {
        (FrameLabel::StaticInField, !observer_is_flat)
    };
    Ok(FrameClassification {
        label,
        generic_observer,
    })
}

/// Full frame report: classification plus the apparent drifts of the priced
/// process under the observer.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameReport {
    pub classification: FrameClassification,
    pub drift: DriftReport,
}

/// Prices `x` under the market geometry, then reports the frame label and
/// the apparent drifts seen by `observer`.
pub fn frame_report(
    x: &PayoffVector,
    market: &ProbabilityMeasure,
    observer: &ProbabilityMeasure,
    flat: &ProbabilityMeasure,
    filtration: &Filtration,
    r_f: f64,
) -> Result<FrameReport, PricingError> {
    let classification = classify_frame(market, observer, flat)?;
    let process = price_process(x, market, filtration, r_f);
    let drift = apparent_drift(&process, observer, filtration)?;
    Ok(FrameReport {
        classification,
        drift,
    })
}

/// Squared norm `<y, y>_Q`; the Pythagoras identity splits the payoff norm
/// into projection and residual parts.
pub fn squared_norm(y: &PayoffVector, q: &ProbabilityMeasure) -> f64 {
    inner_product(y, y, q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{exponential_tilt, GeometricPotential};
    use crate::state_space::Filtration;
    use approx::assert_abs_diff_eq;

    fn eight_state_geometry() -> ProbabilityMeasure {
        let p = ProbabilityMeasure::uniform_n(8);
        let mut phi = vec![0.25; 3];
        phi.extend(vec![-0.15; 5]);
        exponential_tilt(&p, &GeometricPotential::new(phi)).unwrap()
    }

    fn eight_state_payoff() -> PayoffVector {
        PayoffVector::from_values(vec![12.0, 10.0, 8.0, 6.0, 4.0, 3.0, 2.0, 1.0]).unwrap()
    }

    fn eight_state_filtration() -> Filtration {
        Filtration::new(
            vec![
                Partition::trivial(8),
                Partition::new(8, vec![vec![0, 1, 2], vec![3, 4, 5, 6, 7]]).unwrap(),
                Partition::discrete(8),
            ],
            true,
        )
        .unwrap()
    }

    #[test]
    fn projection_onto_trivial_partition_is_the_mean() {
        let q = eight_state_geometry();
        let x = eight_state_payoff();
        let s0 = project(&x, &q, &Partition::trivial(8));
        for &v in s0.values() {
            assert!((v - 6.412).abs() < 1e-3, "S0 entry {v}");
        }
    }

    #[test]
    fn projection_onto_branch_partition() {
        let q = eight_state_geometry();
        let x = eight_state_payoff();
        let p1 = Partition::new(8, vec![vec![0, 1, 2], vec![3, 4, 5, 6, 7]]).unwrap();
        let s1 = project(&x, &q, &p1);
        for &v in &s1.values()[..3] {
            assert_abs_diff_eq!(v, 10.0, epsilon = 1e-12);
        }
        for &v in &s1.values()[3..] {
            assert_abs_diff_eq!(v, 3.2, epsilon = 1e-12);
        }
    }

    #[test]
    fn projection_onto_singletons_is_identity() {
        let q = eight_state_geometry();
        let x = eight_state_payoff();
        let s = project(&x, &q, &Partition::discrete(8));
        assert_eq!(s.values(), x.values());
    }

    #[test]
    fn residual_is_orthogonal_to_block_indicators() {
        let q = eight_state_geometry();
        let x = eight_state_payoff();
        let p1 = Partition::new(8, vec![vec![0, 1, 2], vec![3, 4, 5, 6, 7]]).unwrap();
        let proj = project(&x, &q, &p1);
        assert!(orthogonality_residual(&x, &proj, &q, &p1) < 1e-10);

        // A block-constant payoff projects to itself.
        let flat = PayoffVector::from_values(vec![2.0, 2.0, 2.0, 7.0, 7.0, 7.0, 7.0, 7.0]).unwrap();
        let proj = project(&flat, &q, &p1);
        assert_eq!(orthogonality_residual(&flat, &proj, &q, &p1), 0.0);
    }

    #[test]
    fn price_process_reference_values() {
        let q = eight_state_geometry();
        let x = eight_state_payoff();
        let f = eight_state_filtration();
        let process = price_process(&x, &q, &f, 0.0);
        assert!((process.discounted()[0][0] - 6.412).abs() < 1e-3);
        let s1 = &process.discounted()[1];
        assert_abs_diff_eq!(s1[0], 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s1[7], 3.2, epsilon = 1e-12);
        // Complete filtration reaches the payoff itself.
        assert_eq!(process.discounted()[2], x.values());
        // With r_f = 0 spot equals discounted.
        assert_eq!(process.spot(), process.discounted());
        assert!(martingale_residual(&process, &q, &f) < 1e-10);
    }

    #[test]
    fn constant_payoff_prices_constant() {
        let q = eight_state_geometry();
        let c = PayoffVector::from_values(vec![3.5; 8]).unwrap();
        let f = eight_state_filtration();
        let process = price_process(&c, &q, &f, 0.0);
        for prices in process.discounted() {
            for &v in prices {
                assert_abs_diff_eq!(v, 3.5, epsilon = 1e-12);
            }
        }
        let drift = apparent_drift(&process, &ProbabilityMeasure::uniform_n(8), &f).unwrap();
        assert!(drift.max_abs() < 1e-12);
    }

    #[test]
    fn drift_vanishes_under_the_pricing_geometry() {
        let q = eight_state_geometry();
        let x = eight_state_payoff();
        let f = eight_state_filtration();
        let process = price_process(&x, &q, &f, 0.0);
        let drift = apparent_drift(&process, &q, &f).unwrap();
        assert!(drift.max_abs() < 1e-10);
    }

    #[test]
    fn drift_under_flat_observer_matches_hand_value() {
        let q = eight_state_geometry();
        let x = eight_state_payoff();
        let f = eight_state_filtration();
        let process = price_process(&x, &q, &f, 0.0);
        let flat = ProbabilityMeasure::uniform_n(8);
        let drift = apparent_drift(&process, &flat, &f).unwrap();
        // Two-term hand evaluation on the trivial block.
        let s0 = process.discounted()[0][0];
        let expected = ((3.0 / 8.0) * 10.0 + (5.0 / 8.0) * 3.2) / s0 - 1.0;
        let got = drift.per_time()[0][0].unwrap();
        assert_abs_diff_eq!(got, expected, epsilon = 1e-12);
    }

    #[test]
    fn zero_price_block_is_flagged() {
        // Payoff with zero mean on one branch under the uniform geometry.
        let q = ProbabilityMeasure::uniform_n(4);
        let x = PayoffVector::from_values(vec![1.0, -1.0, 2.0, 2.0]).unwrap();
        let f = Filtration::new(
            vec![
                Partition::trivial(4),
                Partition::new(4, vec![vec![0, 1], vec![2, 3]]).unwrap(),
                Partition::discrete(4),
            ],
            true,
        )
        .unwrap();
        let process = price_process(&x, &q, &f, 0.0);
        // Block {0, 1} prices to zero at t = 1, so t = 2 returns there are
        // undefined while prices keep flowing.
        assert_eq!(process.discounted()[1][0], 0.0);
        assert_eq!(process.returns()[1][0], None);
        assert!(process.returns()[1][2].is_some());
        let drift = apparent_drift(&process, &q, &f).unwrap();
        assert_eq!(drift.per_time()[1][0], None);
        assert!(drift.per_time()[1][1].is_some());
    }

    #[test]
    fn frame_classification_reference_cases() {
        let flat = ProbabilityMeasure::uniform_n(8);
        let q = eight_state_geometry();

        let c = classify_frame(&flat, &flat, &flat).unwrap();
        assert_eq!(c.label, FrameLabel::InertialNoGravity);

        let c = classify_frame(&q, &flat, &flat).unwrap();
        assert_eq!(c.label, FrameLabel::StaticInField);
        assert!(!c.generic_observer);

        let c = classify_frame(&q, &q, &flat).unwrap();
        assert_eq!(c.label, FrameLabel::FreeFallInField);

        let other = ProbabilityMeasure::new(vec![0.3, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1]).unwrap();
        let c = classify_frame(&flat, &other, &flat).unwrap();
        assert_eq!(c.label, FrameLabel::AcceleratedNoGravity);

        // Curved market, third-party observer: static with a note.
        let c = classify_frame(&q, &other, &flat).unwrap();
        assert_eq!(c.label, FrameLabel::StaticInField);
        assert!(c.generic_observer);
    }

    #[test]
    fn frame_classification_is_permutation_equivariant() {
        let q = eight_state_geometry();
        let flat = ProbabilityMeasure::uniform_n(8);
        let base = classify_frame(&q, &flat, &flat).unwrap();
        // Relabel states by reversing.
        let reversed =
            ProbabilityMeasure::new(q.weights().iter().rev().cloned().collect()).unwrap();
        let relabeled = classify_frame(&reversed, &flat, &flat).unwrap();
        assert_eq!(base, relabeled);
    }

    #[test]
    fn tower_property_of_projection() {
        let q = eight_state_geometry();
        let x = eight_state_payoff();
        let fine = Partition::new(8, vec![vec![0, 1], vec![2], vec![3, 4], vec![5, 6, 7]]).unwrap();
        let coarse = Partition::new(8, vec![vec![0, 1, 2], vec![3, 4, 5, 6, 7]]).unwrap();
        let through_fine = project(&project(&x, &q, &fine), &q, &coarse);
        let direct = project(&x, &q, &coarse);
        for (a, b) in through_fine.values().iter().zip(direct.values()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn pythagoras_identity() {
        let q = eight_state_geometry();
        let x = eight_state_payoff();
        let p1 = Partition::new(8, vec![vec![0, 1, 2], vec![3, 4, 5, 6, 7]]).unwrap();
        let s = project(&x, &q, &p1);
        let residual = PayoffVector::from_values(
            x.values()
                .iter()
                .zip(s.values())
                .map(|(a, b)| a - b)
                .collect(),
        )
        .unwrap();
        let lhs = squared_norm(&x, &q);
        let rhs = squared_norm(&s, &q) + squared_norm(&residual, &q);
        assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-10);
    }
}
