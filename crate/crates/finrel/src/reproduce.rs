//! The embedded eight-state reference scenario and its golden checks.
//!
//! Three states form branch `A`, five form branch `B`; the market learns
//! the branch at the intermediate date and everything at the terminal date.
//! A blockwise-constant source on the complete cross-branch graph curves
//! the geometry, the payoff prices by projection, and the entropy ledger
//! accounts for what the intermediate price reveals. `section4()` runs the
//! whole chain and compares every figure against its frozen value.

use crate::field_solver::{
    block_symmetric_solution, build_laplacian, solve_field_equation, StructuralSource,
    WeightedGraph,
};
use crate::geometry::{exponential_tilt, ProbabilityMeasure};
use crate::information::{
    entropy, posterior_given_price, price_induced_partition, revealed_information, LogBase,
    DEFAULT_PRICE_TOL,
};
use crate::pricing::price_process;
use crate::state_space::{Filtration, Partition, PayoffVector, StateSpace};

/// One golden value: computed result, frozen expectation, tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueCheck {
    pub name: &'static str,
    pub value: f64,
    pub expected: f64,
    pub tolerance: f64,
}

impl ValueCheck {
    fn new(name: &'static str, value: f64, expected: f64, tolerance: f64) -> Self {
        Self {
            name,
            value,
            expected,
            tolerance,
        }
    }

    pub fn pass(&self) -> bool {
        (self.value - self.expected).abs() <= self.tolerance
    }
}

/// Result of replaying the reference scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct FixtureReport {
    pub checks: Vec<ValueCheck>,
}

impl FixtureReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(ValueCheck::pass)
    }

    pub fn check(&self, name: &str) -> Option<&ValueCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// The pieces of the reference scenario, exposed for reuse.
#[derive(Debug, Clone)]
pub struct EightStateScenario {
    pub space: StateSpace,
    pub payoff: PayoffVector,
    pub filtration: Filtration,
    pub graph: WeightedGraph,
    pub source: StructuralSource,
    pub kappa: f64,
}

/// Builds the eight-state scenario: branches of 3 and 5 states, source
/// (+5, -3) with coupling 0.4, payoff (12, 10, 8, 6, 4, 3, 2, 1).
pub fn eight_state_scenario() -> EightStateScenario {
    let space = StateSpace::with_size(8).expect("eight labels are distinct");
    let payoff = PayoffVector::new(&space, vec![12.0, 10.0, 8.0, 6.0, 4.0, 3.0, 2.0, 1.0])
        .expect("payoff is finite");
    let branch_a: Vec<usize> = (0..3).collect();
    let branch_b: Vec<usize> = (3..8).collect();
    let filtration = Filtration::new(
        vec![
            Partition::trivial(8),
            Partition::new(8, vec![branch_a.clone(), branch_b.clone()])
                .expect("branches partition the states"),
            Partition::discrete(8),
        ],
        true,
    )
    .expect("chain refines");
    let graph =
        WeightedGraph::complete_bipartite(&branch_a, &branch_b).expect("bipartite graph is valid");
    let mut rho = vec![5.0; 3];
    rho.extend(vec![-3.0; 5]);
    let kappa = 0.4;
    let source = StructuralSource::new(rho, kappa).expect("source balances");
    EightStateScenario {
        space,
        payoff,
        filtration,
        graph,
        source,
        kappa,
    }
}

/// Replays the eight-state scenario end to end and checks every golden
/// value at its frozen tolerance.
pub fn section4() -> FixtureReport {
    let scenario = eight_state_scenario();
    let prior = ProbabilityMeasure::uniform(&scenario.space);

    // Geometric potential: closed form for the golden values, numeric solve
    // for the rest of the pipeline. The two agree to solver precision.
    let (phi_a, phi_b) =
        block_symmetric_solution(3, 5, 5.0, -3.0, scenario.kappa).expect("source balances");
    let laplacian = build_laplacian(&scenario.graph).expect("graph is connected");
    let phi = solve_field_equation(&laplacian, &scenario.source, &prior)
        .expect("compatible source on a connected graph");

    let q = exponential_tilt(&prior, &phi).expect("bounded potential tilts cleanly");
    let q_a: f64 = q.weights()[..3].iter().sum();

    let s0 = q.expectation(&scenario.payoff);
    let e_p_x = prior.expectation(&scenario.payoff);

    let process = price_process(&scenario.payoff, &q, &scenario.filtration, 0.0);
    let s1 = PayoffVector::from_values(process.discounted()[1].clone()).expect("prices are finite");
    let s1_high = s1.value(0);
    let s1_low = s1.value(7);

    let h2 = entropy(&q, LogBase::Two);
    let pp = price_induced_partition(&s1, DEFAULT_PRICE_TOL).expect("two clean levels");
    let expected_residual: f64 = pp
        .levels()
        .iter()
        .map(|level| {
            let (_, h) = posterior_given_price(&q, &pp, level.price, LogBase::Two)
                .expect("level prices resolve");
            q.mass(&level.states) * h
        })
        .sum();
    let revealed = revealed_information(&q, &pp, LogBase::Two);

    FixtureReport {
        checks: vec![
            ValueCheck::new("phi_A", phi_a, 0.25, 1e-12),
            ValueCheck::new("phi_B", phi_b, -0.15, 1e-12),
            ValueCheck::new("Q_A", q_a, 0.4722, 5e-4),
            ValueCheck::new("S0", s0, 6.412, 1e-3),
            ValueCheck::new("E_P_X", e_p_x, 5.75, 0.0),
            ValueCheck::new("S1_level_high", s1_high, 10.0, 1e-12),
            ValueCheck::new("S1_level_low", s1_low, 3.2, 1e-12),
            ValueCheck::new("H2_bits", h2, 2.9716, 5e-3),
            ValueCheck::new("E_Ht_bits", expected_residual, 1.9738, 5e-3),
            ValueCheck::new("I_S1_bits", revealed, 0.9978, 5e-3),
        ],
    }
}
