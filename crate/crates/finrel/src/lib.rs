//! A numerical engine for pricing over curved probability geometries.
//!
//! The pipeline runs in five stages, each a module:
//!
//! * [`state_space`] — finite terminal states, payoffs, partitions, and
//!   nested filtrations.
//! * [`geometry`] — strictly positive measures as geometries: the flat
//!   background, exponential tilts by a log-weight potential, and the
//!   `<Y, Z>_Q = E^Q[YZ]` inner product.
//! * [`field_solver`] — graph Laplacians and the discrete field equation
//!   `L phi = kappa rho` under a zero-mean gauge, with the block-symmetric
//!   closed form.
//! * [`maxent`] — maximum-entropy measure selection under linear
//!   expectation constraints, by damped Newton on the dual.
//! * [`pricing`] — conditional expectation as orthogonal projection, price
//!   processes along filtrations, apparent drift under mismatched
//!   observers, and the four-frame classification.
//! * [`information`] — the entropy ledger: exact branch/residual
//!   decomposition, price-induced partitions, and revealed information.
//! * [`continuous_filter`] — continuous-time Bayes filtering, the
//!   posterior-density SDE, and price dynamics whose volatility is the
//!   posterior variance.
//!
//! [`reproduce`] replays an embedded eight-state reference scenario through
//! the whole chain and checks every figure against frozen golden values.
//!
//! ```
//! use finrel::geometry::{exponential_tilt, GeometricPotential, ProbabilityMeasure};
//! use finrel::pricing::project;
//! use finrel::state_space::{Partition, PayoffVector};
//!
//! let prior = ProbabilityMeasure::uniform_n(4);
//! let phi = GeometricPotential::new(vec![0.5, 0.5, -0.3, -0.3]);
//! let q = exponential_tilt(&prior, &phi)?;
//!
//! let payoff = PayoffVector::from_values(vec![8.0, 6.0, 4.0, 2.0])?;
//! let partition = Partition::new(4, vec![vec![0, 1], vec![2, 3]])?;
//! let price = project(&payoff, &q, &partition);
//! assert_eq!(price.value(0), 7.0);
//! assert_eq!(price.value(3), 3.0);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

// Validation guards are written `!(x > 0.0)` so that NaN fails closed.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod continuous_filter;
pub mod field_solver;
pub mod geometry;
pub mod information;
pub mod maxent;
pub mod pricing;
pub mod reproduce;
pub mod state_space;

pub use continuous_filter::{FilterPath, GridPrior, ObservationModel, SimulationMode};
pub use field_solver::{StructuralSource, WeightedGraph};
pub use geometry::{GeometricPotential, ProbabilityMeasure};
pub use information::LogBase;
pub use maxent::LinearConstraint;
pub use pricing::{FrameLabel, PriceProcess};
pub use state_space::{Filtration, Partition, PayoffVector, StateSpace};
