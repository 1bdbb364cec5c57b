//! The discrete field equation `L phi = kappa * rho`.
//!
//! A weighted graph on the state space induces the Laplacian `L = D - W`.
//! Structural sources `rho` (coupled with strength `kappa`) generate the
//! geometric potential by solving the field equation; the potential is only
//! determined up to an additive constant, so we pin it with the zero-mean
//! gauge `E^prior[phi] = 0`. The solution exists iff the source sums to zero
//! (the constant vector spans the kernel of a connected Laplacian) and is
//! then unique under the gauge.
//!
//! The solve appends the gauge as a border row: the system
//!
//! ```text
//! | L   1 | | phi    |   | kappa * rho |
//! | p'  0 | | lambda | = | 0           |
//! ```
//!
//! is nonsingular for a connected graph, and multiplying the first row block
//! by the all-ones vector shows `lambda = 0` whenever the source is
//! compatible, so `phi` solves the original equation exactly.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::geometry::{GeometricPotential, ProbabilityMeasure};

/// Source imbalance beyond this bound makes the field equation unsolvable.
pub const COMPATIBILITY_TOL: f64 = 1e-10;

/// Post-solve residual bound on `||L phi - kappa rho||_inf`.
pub const RESIDUAL_TOL: f64 = 1e-9;

/// Post-solve bound on the gauge `|E^prior[phi]|`.
pub const GAUGE_TOL: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum FieldError {
    #[error("graph must have at least one vertex")]
    EmptyGraph,
    #[error("edge ({i}, {j}) is out of range for {n} vertices")]
    EdgeOutOfRange { i: usize, j: usize, n: usize },
    #[error("edge ({i}, {j}) has non-positive weight {weight}")]
    NonPositiveWeight { i: usize, j: usize, weight: f64 },
    #[error("self-loop on vertex {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({i}, {j})")]
    DuplicateEdge { i: usize, j: usize },
    #[error("graph is disconnected; the gauged solution is not unique")]
    Disconnected,
    #[error("incompatible source: sum(rho) = {sum:e} exceeds {COMPATIBILITY_TOL:e}")]
    IncompatibleSource { sum: f64 },
    #[error("coupling strength must be positive, got {0}")]
    NonPositiveCoupling(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("linear system is singular or badly conditioned")]
    SingularSystem,
    #[error("solve left residual {residual:e} above {RESIDUAL_TOL:e}")]
    ResidualTooLarge { residual: f64 },
}

/// An undirected weighted graph on the state space. No self-loops, strictly
/// positive weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
}

impl WeightedGraph {
    pub fn new(n: usize, edges: Vec<(usize, usize, f64)>) -> Result<Self, FieldError> {
        if n == 0 {
            return Err(FieldError::EmptyGraph);
        }
        let mut seen = std::collections::HashSet::new();
        for &(i, j, weight) in &edges {
            if i >= n || j >= n {
                return Err(FieldError::EdgeOutOfRange { i, j, n });
            }
            if i == j {
                return Err(FieldError::SelfLoop(i));
            }
            if !(weight > 0.0) || !weight.is_finite() {
                return Err(FieldError::NonPositiveWeight { i, j, weight });
            }
            let key = (i.min(j), i.max(j));
            if !seen.insert(key) {
                return Err(FieldError::DuplicateEdge { i, j });
            }
        }
        Ok(Self { n, edges })
    }

    /// Complete graph with unit weights; the default topology when a
    /// scenario does not specify edges.
    pub fn complete(n: usize) -> Result<Self, FieldError> {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                edges.push((i, j, 1.0));
            }
        }
        Self::new(n, edges)
    }

    /// Complete bipartite graph with unit weights between two disjoint
    /// vertex sets covering `0..n`.
    pub fn complete_bipartite(block_a: &[usize], block_b: &[usize]) -> Result<Self, FieldError> {
        let n = block_a.len() + block_b.len();
        let mut edges = Vec::with_capacity(block_a.len() * block_b.len());
        for &i in block_a {
            for &j in block_b {
                edges.push((i, j, 1.0));
            }
        }
        Self::new(n, edges)
    }

    pub fn num_vertices(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn is_connected(&self) -> bool {
        let mut adjacency = vec![Vec::new(); self.n];
        for &(i, j, _) in &self.edges {
            adjacency[i].push(j);
            adjacency[j].push(i);
        }
        let mut visited = vec![false; self.n];
        let mut stack = vec![0usize];
        visited[0] = true;
        let mut count = 1usize;
        while let Some(v) = stack.pop() {
            for &u in &adjacency[v] {
                if !visited[u] {
                    visited[u] = true;
                    count += 1;
                    stack.push(u);
                }
            }
        }
        count == self.n
    }
}

/// A structural source `rho` with coupling strength `kappa`.
///
/// The source must sum to zero: the constant vector spans the kernel of a
/// connected Laplacian, so `kappa * rho` must be orthogonal to it.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuralSource {
    rho: Vec<f64>,
    kappa: f64,
}

impl StructuralSource {
    pub fn new(rho: Vec<f64>, kappa: f64) -> Result<Self, FieldError> {
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(FieldError::NonPositiveCoupling(kappa));
        }
        let sum: f64 = rho.iter().sum();
        if sum.abs() > COMPATIBILITY_TOL {
            return Err(FieldError::IncompatibleSource { sum });
        }
        Ok(Self { rho, kappa })
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }
}

/// The graph Laplacian `L = D - W` of a weighted graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Laplacian {
    matrix: DMatrix<f64>,
}

impl Laplacian {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)]
    }

    /// Row-major copy of the matrix, row by row.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|i| (0..self.dim()).map(|j| self.matrix[(i, j)]).collect())
            .collect()
    }

    /// `max_i |(L phi - rhs)_i|`.
    pub fn residual_inf(&self, phi: &[f64], rhs: &[f64]) -> f64 {
        assert_eq!(phi.len(), self.dim());
        assert_eq!(rhs.len(), self.dim());
        let phi = DVector::from_column_slice(phi);
        let out = &self.matrix * phi;
        out.iter()
            .zip(rhs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Builds the Laplacian of `g`, requiring connectivity so the gauged field
/// equation has a unique solution.
pub fn build_laplacian(g: &WeightedGraph) -> Result<Laplacian, FieldError> {
    if !g.is_connected() {
        return Err(FieldError::Disconnected);
    }
    let n = g.num_vertices();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for &(i, j, w) in g.edges() {
        m[(i, j)] -= w;
        m[(j, i)] -= w;
        m[(i, i)] += w;
        m[(j, j)] += w;
    }
    Ok(Laplacian { matrix: m })
}

/// Solves `L phi = kappa * rho` under the gauge `E^prior[phi] = 0`.
pub fn solve_field_equation(
    laplacian: &Laplacian,
    source: &StructuralSource,
    prior: &ProbabilityMeasure,
) -> Result<GeometricPotential, FieldError> {
    let n = laplacian.dim();
    if source.len() != n {
        return Err(FieldError::DimensionMismatch {
            expected: n,
            got: source.len(),
        });
    }
    if prior.len() != n {
        return Err(FieldError::DimensionMismatch {
            expected: n,
            got: prior.len(),
        });
    }
    let sum: f64 = source.rho().iter().sum();
    if sum.abs() > COMPATIBILITY_TOL {
        return Err(FieldError::IncompatibleSource { sum });
    }

    // Bordered system: gauge row appended, ones column for the multiplier.
    let mut bordered = DMatrix::<f64>::zeros(n + 1, n + 1);
    bordered
        .view_mut((0, 0), (n, n))
        .copy_from(&laplacian.matrix);
    for i in 0..n {
        bordered[(i, n)] = 1.0;
        bordered[(n, i)] = prior.weight(i);
    }
    let mut rhs = DVector::<f64>::zeros(n + 1);
    for (i, &r) in source.rho().iter().enumerate() {
        rhs[i] = source.kappa() * r;
    }

    let lu = bordered.lu();
    let solution = lu.solve(&rhs).ok_or(FieldError::SingularSystem)?;
    let phi: Vec<f64> = solution.iter().take(n).cloned().collect();

    let scaled_rhs: Vec<f64> = source.rho().iter().map(|r| source.kappa() * r).collect();
    let residual = laplacian.residual_inf(&phi, &scaled_rhs);
    if !residual.is_finite() {
        return Err(FieldError::SingularSystem);
    }
    if residual > RESIDUAL_TOL {
        return Err(FieldError::ResidualTooLarge { residual });
    }

    let potential = GeometricPotential::zero_mean_under(phi, prior);
    debug_assert!(potential.mean_under(prior).abs() < GAUGE_TOL);
    Ok(potential)
}

/// Closed-form solution of the field equation on a complete bipartite graph
/// with blockwise-constant source: `rho_a` on `n_a` vertices, `rho_b` on
/// `n_b` vertices, unit edge weights, zero-mean gauge under the uniform
/// prior. Returns `(phi_a, phi_b)`.
pub fn block_symmetric_solution(
    n_a: usize,
    n_b: usize,
    rho_a: f64,
    rho_b: f64,
    kappa: f64,
) -> Result<(f64, f64), FieldError> {
    assert!(n_a >= 1 && n_b >= 1, "both blocks must be nonempty");
    let imbalance = n_a as f64 * rho_a + n_b as f64 * rho_b;
    if imbalance.abs() > COMPATIBILITY_TOL {
        return Err(FieldError::IncompatibleSource { sum: imbalance });
    }
    // Blockwise the equation reads n_b (phi_a - phi_b) = kappa rho_a; the
    // gauge n_a phi_a + n_b phi_b = 0 splits the gap across the blocks.
    let gap = kappa * rho_a / n_b as f64;
    let total = (n_a + n_b) as f64;
    let phi_a = (n_b as f64 / total) * gap;
    let phi_b = -(n_a as f64 / total) * gap;
    Ok((phi_a, phi_b))
}
