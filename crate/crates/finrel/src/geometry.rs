//! Probability measures as geometries.
//!
//! A strictly positive measure `Q` on the state space plays the role of a
//! metric: it defines the inner product `<Y, Z>_Q = E^Q[Y Z]` under which
//! prices become orthogonal projections. The flat background is the uniform
//! measure; curved geometries arise from it by an exponential tilt
//! `Q(w) ∝ P(w) e^{phi(w)}` with a per-state log-weight field `phi`.
//!
//! Tilting is invariant under adding a constant to `phi`, so a potential is
//! only meaningful up to gauge; [`GeometricPotential::zero_mean_under`]
//! selects the representative with zero mean under a reference measure.

use thiserror::Error;

use crate::state_space::{PayoffVector, StateSpace};

/// Weights below this bound are rejected: equivalence of measures requires
/// every state to carry usable mass.
pub const MIN_WEIGHT: f64 = 1e-300;

/// Tolerance within which constructed weights are silently renormalized.
pub const NORMALIZATION_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum MeasureError {
    #[error("a probability measure needs at least one state")]
    Empty,
    #[error("weight {value} at state {index} is not strictly positive (minimum {MIN_WEIGHT:e})")]
    NonPositiveWeight { index: usize, value: f64 },
    #[error("weight at state {index} is not finite")]
    NonFinite { index: usize },
}

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("conditional measure requires a nonempty block")]
    EmptyBlock,
    #[error("state index {state} is out of range for {n} states")]
    OutOfRange { state: usize, n: usize },
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

/// A strictly positive probability measure on the state space.
///
/// Construction renormalizes the weights, so the sum-to-one invariant holds
/// up to [`NORMALIZATION_TOL`] regardless of rounding in upstream solvers.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMeasure {
    weights: Vec<f64>,
}

impl ProbabilityMeasure {
    pub fn new(weights: Vec<f64>) -> Result<Self, MeasureError> {
        if weights.is_empty() {
            return Err(MeasureError::Empty);
        }
        for (index, &w) in weights.iter().enumerate() {
            if !w.is_finite() {
                return Err(MeasureError::NonFinite { index });
            }
            if w < MIN_WEIGHT {
                return Err(MeasureError::NonPositiveWeight { index, value: w });
            }
        }
        let total: f64 = weights.iter().sum();
        let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
        // Renormalization of a heavily skewed vector can underflow a tiny
        // weight; that breaks equivalence just as a zero input would.
        for (index, &w) in weights.iter().enumerate() {
            if w < MIN_WEIGHT {
                return Err(MeasureError::NonPositiveWeight { index, value: w });
            }
        }
        Ok(Self { weights })
    }

    /// The flat background: every state carries weight `1/n`.
    pub fn uniform(space: &StateSpace) -> Self {
        Self::uniform_n(space.len())
    }

    /// The flat background over `n` anonymous states.
    pub fn uniform_n(n: usize) -> Self {
        assert!(n >= 1, "a probability measure needs at least one state");
        Self {
            weights: vec![1.0 / n as f64; n],
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, state: usize) -> f64 {
        self.weights[state]
    }

    /// Total mass carried by a set of states.
    pub fn mass(&self, block: &[usize]) -> f64 {
        block.iter().map(|&s| self.weights[s]).sum()
    }

    /// Expectation of a payoff under this measure.
    pub fn expectation(&self, payoff: &PayoffVector) -> f64 {
        assert_eq!(
            payoff.len(),
            self.len(),
            "payoff dimension must match the measure"
        );
        self.weights
            .iter()
            .zip(payoff.values())
            .map(|(q, x)| q * x)
            .sum()
    }

    /// Total variation distance, `max_A |Q(A) - P(A)| = L1 / 2`.
    pub fn total_variation(&self, other: &ProbabilityMeasure) -> f64 {
        assert_eq!(other.len(), self.len(), "measures must share a state space");
        0.5 * self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }
}

/// Gauge convention attached to a geometric potential.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gauge {
    /// The potential has zero mean under the reference (flat) measure.
    ZeroMeanUnderPrior,
    /// No normalization; the potential is one representative of its class.
    None,
}

/// A per-state log-tilt field. `Q(w) ∝ P(w) e^{phi(w)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometricPotential {
    phi: Vec<f64>,
    gauge: Gauge,
}

impl GeometricPotential {
    /// Wraps a raw potential without choosing a gauge.
    pub fn new(phi: Vec<f64>) -> Self {
        assert!(
            phi.iter().all(|v| v.is_finite()),
            "potential entries must be finite"
        );
        Self {
            phi,
            gauge: Gauge::None,
        }
    }

    /// Shifts `phi` by a constant so that its mean under `prior` is zero,
    /// and records the gauge. The induced tilt is unchanged.
    pub fn zero_mean_under(phi: Vec<f64>, prior: &ProbabilityMeasure) -> Self {
        assert_eq!(
            phi.len(),
            prior.len(),
            "potential dimension must match the prior"
        );
        assert!(
            phi.iter().all(|v| v.is_finite()),
            "potential entries must be finite"
        );
        let mean: f64 = prior.weights().iter().zip(&phi).map(|(p, v)| p * v).sum();
        let phi = phi.iter().map(|v| v - mean).collect();
        Self {
            phi,
            gauge: Gauge::ZeroMeanUnderPrior,
        }
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.phi
    }

    pub fn value(&self, state: usize) -> f64 {
        self.phi[state]
    }

    pub fn gauge(&self) -> Gauge {
        self.gauge
    }

    /// Mean of the potential under a measure; zero (up to rounding) for the
    /// gauged representative.
    pub fn mean_under(&self, measure: &ProbabilityMeasure) -> f64 {
        assert_eq!(self.phi.len(), measure.len(), "dimension mismatch");
        measure
            .weights()
            .iter()
            .zip(&self.phi)
            .map(|(p, v)| p * v)
            .sum()
    }
}

/// Tilts `prior` by `phi`: `Q(w) = P(w) e^{phi(w)} / Z`.
///
/// Entries are shifted by `max(phi)` before exponentiation; the result is
/// unchanged because the tilt is invariant under adding a constant.
pub fn exponential_tilt(
    prior: &ProbabilityMeasure,
    phi: &GeometricPotential,
) -> Result<ProbabilityMeasure, GeometryError> {
    if phi.len() != prior.len() {
        return Err(GeometryError::DimensionMismatch {
            expected: prior.len(),
            got: phi.len(),
        });
    }
    let shift = phi
        .values()
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = prior
        .weights()
        .iter()
        .zip(phi.values())
        .map(|(p, v)| p * (v - shift).exp())
        .collect();
    Ok(ProbabilityMeasure::new(weights)?)
}

/// The metric inner product `<Y, Z>_Q = E^Q[Y Z] = sum_w Q(w) Y(w) Z(w)`.
pub fn inner_product(y: &PayoffVector, z: &PayoffVector, q: &ProbabilityMeasure) -> f64 {
    assert_eq!(y.len(), q.len(), "payoff dimension must match the measure");
    assert_eq!(z.len(), q.len(), "payoff dimension must match the measure");
    q.weights()
        .iter()
        .zip(y.values().iter().zip(z.values()))
        .map(|(w, (a, b))| w * a * b)
        .sum()
}

/// Restricts `q` to `block` and renormalizes. The result is a measure on the
/// block, indexed in block order.
pub fn conditional_measure(
    q: &ProbabilityMeasure,
    block: &[usize],
) -> Result<ProbabilityMeasure, GeometryError> {
    if block.is_empty() {
        return Err(GeometryError::EmptyBlock);
    }
    for &s in block {
        if s >= q.len() {
            return Err(GeometryError::OutOfRange {
                state: s,
                n: q.len(),
            });
        }
    }
    let weights: Vec<f64> = block.iter().map(|&s| q.weight(s)).collect();
    Ok(ProbabilityMeasure::new(weights)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state_space::Partition;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn payoff(values: &[f64]) -> PayoffVector {
        PayoffVector::from_values(values.to_vec()).unwrap()
    }

    #[test]
    fn uniform_prior_weights() {
        let space = StateSpace::with_size(8).unwrap();
        let p = ProbabilityMeasure::uniform(&space);
        for &w in p.weights() {
            assert_eq!(w, 0.125);
        }
        assert_eq!(ProbabilityMeasure::uniform_n(1).weights(), &[1.0]);
        for &w in ProbabilityMeasure::uniform_n(3).weights() {
            assert_abs_diff_eq!(w, 1.0 / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn zero_potential_is_identity_tilt() {
        let p = ProbabilityMeasure::new(vec![0.2, 0.3, 0.5]).unwrap();
        let q = exponential_tilt(&p, &GeometricPotential::new(vec![0.0; 3])).unwrap();
        for (a, b) in p.weights().iter().zip(q.weights()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn eight_state_tilt_matches_reference_masses() {
        // phi = +0.25 on a three-state block, -0.15 on the complement.
        let p = ProbabilityMeasure::uniform_n(8);
        let mut phi = vec![0.25; 3];
        phi.extend(vec![-0.15; 5]);
        let q = exponential_tilt(&p, &GeometricPotential::new(phi)).unwrap();
        let q_a: f64 = q.weights()[..3].iter().sum();
        let q_b: f64 = q.weights()[3..].iter().sum();
        assert!((q_a - 0.4722).abs() < 5e-4, "Q(A) = {q_a}");
        assert!((q_b - 0.5280).abs() < 5e-4, "Q(B) = {q_b}");
        assert_abs_diff_eq!(q_a + q_b, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn nonpositive_weights_rejected() {
        assert!(matches!(
            ProbabilityMeasure::new(vec![0.5, 0.0, 0.5]),
            Err(MeasureError::NonPositiveWeight { index: 1, .. })
        ));
        assert!(matches!(
            ProbabilityMeasure::new(vec![0.5, -0.1, 0.6]),
            Err(MeasureError::NonPositiveWeight { index: 1, .. })
        ));
        assert!(matches!(
            ProbabilityMeasure::new(vec![0.5, f64::NAN]),
            Err(MeasureError::NonFinite { index: 1 })
        ));
    }

    #[test]
    fn inner_product_reference_values() {
        let q = ProbabilityMeasure::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let ones = payoff(&[1.0; 4]);
        assert_abs_diff_eq!(inner_product(&ones, &ones, &q), 1.0, epsilon = 1e-15);

        let e1 = payoff(&[1.0, 0.0, 0.0, 0.0]);
        let e2 = payoff(&[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(inner_product(&e1, &e2, &q), 0.0);
    }

    #[test]
    fn eight_state_payoff_price() {
        let p = ProbabilityMeasure::uniform_n(8);
        let mut phi = vec![0.25; 3];
        phi.extend(vec![-0.15; 5]);
        let q = exponential_tilt(&p, &GeometricPotential::new(phi)).unwrap();
        let x = payoff(&[12.0, 10.0, 8.0, 6.0, 4.0, 3.0, 2.0, 1.0]);
        let ones = payoff(&[1.0; 8]);
        assert!((inner_product(&x, &ones, &q) - 6.412).abs() < 1e-3);
    }

    #[test]
    fn conditional_measure_on_blocks() {
        let p = ProbabilityMeasure::uniform_n(8);
        let mut phi = vec![0.25; 3];
        phi.extend(vec![-0.15; 5]);
        let q = exponential_tilt(&p, &GeometricPotential::new(phi)).unwrap();
        let part = Partition::new(8, vec![vec![0, 1, 2], vec![3, 4, 5, 6, 7]]).unwrap();

        let on_a = conditional_measure(&q, part.block(0)).unwrap();
        for &w in on_a.weights() {
            assert_abs_diff_eq!(w, 1.0 / 3.0, epsilon = 1e-12);
        }
        let on_b = conditional_measure(&q, part.block(1)).unwrap();
        for &w in on_b.weights() {
            assert_abs_diff_eq!(w, 0.2, epsilon = 1e-12);
        }
        let singleton = conditional_measure(&q, &[5]).unwrap();
        assert_eq!(singleton.weights(), &[1.0]);
        assert_eq!(conditional_measure(&q, &[]), Err(GeometryError::EmptyBlock));
    }

    #[test]
    fn zero_mean_gauge_holds() {
        let prior = ProbabilityMeasure::new(vec![0.1, 0.4, 0.5]).unwrap();
        let phi = GeometricPotential::zero_mean_under(vec![3.0, -1.0, 2.5], &prior);
        assert!(phi.mean_under(&prior).abs() < 1e-10);
        assert_eq!(phi.gauge(), Gauge::ZeroMeanUnderPrior);
    }

    proptest! {
        #[test]
        fn tilt_is_gauge_invariant(
            weights in proptest::collection::vec(0.01f64..10.0, 2..10),
            shift in -5.0f64..5.0,
        ) {
            let n = weights.len();
            let prior = ProbabilityMeasure::new(weights).unwrap();
            let phi_raw: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
            let q1 = exponential_tilt(&prior, &GeometricPotential::new(phi_raw.clone())).unwrap();
            let shifted: Vec<f64> = phi_raw.iter().map(|v| v + shift).collect();
            let q2 = exponential_tilt(&prior, &GeometricPotential::new(shifted)).unwrap();
            for (a, b) in q1.weights().iter().zip(q2.weights()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn inner_product_is_an_inner_product(
            weights in proptest::collection::vec(0.01f64..10.0, 3..8),
            seed in 0u64..1000,
        ) {
            let n = weights.len();
            let q = ProbabilityMeasure::new(weights).unwrap();
            let y = payoff(&(0..n).map(|i| ((i as f64) + seed as f64 * 0.1).sin()).collect::<Vec<_>>());
            let z = payoff(&(0..n).map(|i| ((i as f64) - seed as f64 * 0.2).cos()).collect::<Vec<_>>());
            // Symmetry.
            prop_assert!((inner_product(&y, &z, &q) - inner_product(&z, &y, &q)).abs() < 1e-14);
            // Linearity in the first argument.
            let sum = payoff(&y.values().iter().zip(z.values()).map(|(a, b)| a + b).collect::<Vec<_>>());
            let lhs = inner_product(&sum, &z, &q);
            let rhs = inner_product(&y, &z, &q) + inner_product(&z, &z, &q);
            prop_assert!((lhs - rhs).abs() < 1e-12);
            // Positive definiteness on nonzero vectors.
            if y.values().iter().any(|v| v.abs() > 1e-9) {
                prop_assert!(inner_product(&y, &y, &q) > 0.0);
            }
        }

        #[test]
        fn conditioning_reaggregates(
            weights in proptest::collection::vec(0.01f64..10.0, 4..10),
            cut in 1usize..3,
        ) {
            let q = ProbabilityMeasure::new(weights).unwrap();
            let cut = cut.min(q.len() - 1);
            let block: Vec<usize> = (0..cut).collect();
            let mass = q.mass(&block);
            let cond = conditional_measure(&q, &block).unwrap();
            for (i, &s) in block.iter().enumerate() {
                prop_assert!((mass * cond.weight(i) - q.weight(s)).abs() < 1e-12);
            }
        }
    }
}
