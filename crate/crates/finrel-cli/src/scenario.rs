//! Scenario file schema, parsing, and resolution into engine types.
//!
//! Scenarios are JSON with optional sections; each command validates that
//! exactly the sections it needs are present. Unknown keys are rejected
//! with their path. States are referenced by label everywhere in the file
//! and resolved to indices here.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::Deserialize;

use finrel::field_solver::{StructuralSource, WeightedGraph};
use finrel::geometry::ProbabilityMeasure;
use finrel::maxent::LinearConstraint;
use finrel::state_space::{Filtration, Partition, PayoffVector, StateSpace};

/// Errors split by exit code: validation problems exit 1, numerical
/// failures exit 2.
#[derive(Debug)]
pub enum AppError {
    Validation(String),
    Numerical(String),
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AppError::Validation(msg) => write!(f, "validation error: {msg}"),
            AppError::Numerical(msg) => write!(f, "numerical error: {msg}"),
        }
    }
}

impl std::error::Error for AppError {}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Validation(_) => 1,
            AppError::Numerical(_) => 2,
        }
    }
}

pub fn validation(msg: impl fmt::Display) -> AppError {
    AppError::Validation(msg.to_string())
}

pub fn numerical(msg: impl fmt::Display) -> AppError {
    AppError::Numerical(msg.to_string())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub states: Option<Vec<String>>,
    pub payoff: Option<Vec<f64>>,
    /// One partition per time, each a list of blocks of state labels.
    pub filtration: Option<Vec<Vec<Vec<String>>>>,
    pub graph: Option<GraphSection>,
    pub source: Option<SourceSection>,
    pub constraints: Option<Vec<ConstraintSection>>,
    /// Pricing geometry as a label -> weight map.
    pub market: Option<BTreeMap<String, f64>>,
    /// Observer measure as a label -> weight map.
    pub observer: Option<BTreeMap<String, f64>>,
    /// Per-period rate for the discrete pricing commands.
    pub r_f: Option<f64>,
    /// Price-level grouping tolerance.
    pub tolerance: Option<f64>,
    pub model: Option<ModelSection>,
    pub prior: Option<GridSection>,
    pub binary: Option<BinarySection>,
    pub true_state: Option<f64>,
    pub mode: Option<String>,
    pub paths: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSection {
    /// Edges as (label, label, weight) triples.
    pub edges: Vec<(String, String, f64)>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSection {
    pub rho: BTreeMap<String, f64>,
    pub kappa: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSection {
    pub coefficients: Vec<f64>,
    pub target: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub sigma: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub dt: f64,
    #[serde(default)]
    pub r_f: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub grid: Vec<f64>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinarySection {
    #[serde(rename = "L")]
    pub low: f64,
    #[serde(rename = "H")]
    pub high: f64,
    pub pi0: f64,
}

impl Scenario {
    /// Checks that every section a command needs is present, listing all
    /// missing ones in a single error.
    pub fn require_sections(&self, sections: &[&str]) -> Result<(), AppError> {
        let missing: Vec<&str> = sections
            .iter()
            .filter(|&&name| !self.has_section(name))
            .cloned()
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(validation(format!(
                "scenario is missing required section{}: `{}`",
                if missing.len() > 1 { "s" } else { "" },
                missing.join("`, `")
            )))
        }
    }

    fn has_section(&self, name: &str) -> bool {
        match name {
            "states" => self.states.is_some(),
            "payoff" => self.payoff.is_some(),
            "filtration" => self.filtration.is_some(),
            "graph" => self.graph.is_some(),
            "source" => self.source.is_some(),
            "constraints" => self.constraints.is_some(),
            "market" => self.market.is_some(),
            "observer" => self.observer.is_some(),
            "model" => self.model.is_some(),
            "prior" => self.prior.is_some(),
            "binary" => self.binary.is_some(),
            "true_state" => self.true_state.is_some(),
            _ => false,
        }
    }

    /// Loads and parses a scenario file, reporting the JSON path of any
    /// unknown or ill-typed key.
    pub fn load(path: &Path) -> Result<Self, AppError> {
        let text = fs::read_to_string(path)
            .map_err(|e| validation(format!("cannot read {}: {e}", path.display())))?;
        let mut de = serde_json::Deserializer::from_str(&text);
        serde_path_to_error::deserialize(&mut de).map_err(|e| {
            validation(format!(
                "{} at `{}`: {}",
                path.display(),
                e.path(),
                e.inner()
            ))
        })
    }

    pub fn require_states(&self) -> Result<StateSpace, AppError> {
        let labels = self
            .states
            .as_ref()
            .ok_or_else(|| validation("scenario is missing required section `states`"))?;
        StateSpace::new(labels.clone()).map_err(validation)
    }

    pub fn require_payoff(&self, space: &StateSpace) -> Result<PayoffVector, AppError> {
        let values = self
            .payoff
            .as_ref()
            .ok_or_else(|| validation("scenario is missing required section `payoff`"))?;
        PayoffVector::new(space, values.clone()).map_err(validation)
    }

    pub fn require_filtration(&self, space: &StateSpace) -> Result<Filtration, AppError> {
        let chains = self
            .filtration
            .as_ref()
            .ok_or_else(|| validation("scenario is missing required section `filtration`"))?;
        let mut partitions = Vec::with_capacity(chains.len());
        for (t, blocks) in chains.iter().enumerate() {
            let mut resolved = Vec::with_capacity(blocks.len());
            for block in blocks {
                let mut indices = Vec::with_capacity(block.len());
                for label in block {
                    indices.push(resolve_label(space, label)?);
                }
                resolved.push(indices);
            }
            let partition = Partition::new(space.len(), resolved)
                .map_err(|e| validation(format!("filtration[{t}]: {e}")))?;
            partitions.push(partition);
        }
        // A chain that ends in singletons is complete: terminal states are
        // fully revealed.
        let complete = partitions.last().map(|p| p.is_discrete()).unwrap_or(false);
        Filtration::new(partitions, complete).map_err(validation)
    }

    /// The graph section resolved over the state space; a complete graph
    /// with unit weights when the section is absent.
    pub fn graph_or_complete(&self, space: &StateSpace) -> Result<WeightedGraph, AppError> {
        match &self.graph {
            None => WeightedGraph::complete(space.len()).map_err(validation),
            Some(section) => {
                let mut edges = Vec::with_capacity(section.edges.len());
                for (a, b, weight) in &section.edges {
                    edges.push((resolve_label(space, a)?, resolve_label(space, b)?, *weight));
                }
                WeightedGraph::new(space.len(), edges).map_err(validation)
            }
        }
    }

    pub fn require_source(&self, space: &StateSpace) -> Result<StructuralSource, AppError> {
        let section = self
            .source
            .as_ref()
            .ok_or_else(|| validation("scenario is missing required section `source`"))?;
        let mut rho = vec![0.0; space.len()];
        for (label, value) in &section.rho {
            rho[resolve_label(space, label)?] = *value;
        }
        StructuralSource::new(rho, section.kappa).map_err(validation)
    }

    pub fn constraints(&self, space: &StateSpace) -> Result<Vec<LinearConstraint>, AppError> {
        let sections = match &self.constraints {
            None => return Ok(Vec::new()),
            Some(s) => s,
        };
        let mut out = Vec::with_capacity(sections.len());
        for (i, c) in sections.iter().enumerate() {
            if c.coefficients.len() != space.len() {
                return Err(validation(format!(
                    "constraints[{i}] has {} coefficients but there are {} states",
                    c.coefficients.len(),
                    space.len()
                )));
            }
            out.push(LinearConstraint::new(c.coefficients.clone(), c.target));
        }
        Ok(out)
    }

    /// Resolves a label -> weight map into a measure over the state space.
    pub fn measure_from_map(
        &self,
        space: &StateSpace,
        map: &BTreeMap<String, f64>,
        section: &str,
    ) -> Result<ProbabilityMeasure, AppError> {
        if map.len() != space.len() {
            return Err(validation(format!(
                "section `{section}` assigns {} weights but there are {} states",
                map.len(),
                space.len()
            )));
        }
        let mut weights = vec![0.0; space.len()];
        for (label, weight) in map {
            weights[resolve_label(space, label)?] = *weight;
        }
        ProbabilityMeasure::new(weights)
            .map_err(|e| validation(format!("section `{section}`: {e}")))
    }

    /// The pricing geometry: an explicit `market` map, else derived by
    /// solving the field equation when a source is present, else the flat
    /// background.
    pub fn market_geometry(&self, space: &StateSpace) -> Result<ProbabilityMeasure, AppError> {
        if let Some(map) = &self.market {
            return self.measure_from_map(space, map, "market");
        }
        if self.source.is_some() {
            let graph = self.graph_or_complete(space)?;
            let source = self.require_source(space)?;
            let laplacian = finrel::field_solver::build_laplacian(&graph).map_err(validation)?;
            let prior = ProbabilityMeasure::uniform(space);
            let phi = finrel::field_solver::solve_field_equation(&laplacian, &source, &prior)
                .map_err(numerical)?;
            return finrel::geometry::exponential_tilt(&prior, &phi).map_err(numerical);
        }
        Ok(ProbabilityMeasure::uniform(space))
    }
}

fn resolve_label(space: &StateSpace, label: &str) -> Result<usize, AppError> {
    space
        .index_of(label)
        .ok_or_else(|| validation(format!("unknown state label `{label}`")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_split_by_error_kind() {
        assert_eq!(validation("bad input").exit_code(), 1);
        assert_eq!(numerical("no convergence").exit_code(), 2);
    }
}
