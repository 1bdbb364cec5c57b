//! One function per CLI command. Each builds a JSON report, prints it, and
//! writes JSON/CSV artifacts into the out directory.

use std::fmt::Write as _;
use std::path::Path;

use serde_json::{json, Value};

use finrel::continuous_filter::{
    simulate_batch, volatility_uncertainty_curve, FilterPath, GridPrior, ObservationModel,
    SimulationJob, SimulationMode,
};
use finrel::field_solver::{build_laplacian, solve_field_equation};
use finrel::geometry::{exponential_tilt, ProbabilityMeasure};
use finrel::information::{
    conservation_decomposition, posterior_given_price, price_induced_partition,
    revealed_information, LogBase, DEFAULT_PRICE_TOL,
};
use finrel::maxent::solve_maxent;
use finrel::pricing::{apparent_drift, frame_report, martingale_residual, price_process};
use finrel::reproduce;
use finrel::state_space::{PayoffVector, StateSpace};

use crate::output::{csv_opt, ensure_dir, print_json, write_json, write_text};
use crate::scenario::{numerical, validation, AppError, Scenario};

/// Global flag overrides that commands may consume.
pub struct Overrides {
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub dt: Option<f64>,
    pub tolerance: Option<f64>,
    pub base: LogBase,
}

fn base_name(base: LogBase) -> &'static str {
    match base {
        LogBase::Two => "2",
        LogBase::E => "e",
    }
}

fn labels_json(space: &StateSpace) -> Value {
    json!(space.labels())
}

/// A measure as a label -> weight map, pasteable back into a scenario's
/// `market` or `observer` section.
fn measure_json(space: &StateSpace, q: &ProbabilityMeasure) -> Value {
    let mut map = serde_json::Map::new();
    for (state, &weight) in q.weights().iter().enumerate() {
        map.insert(space.label(state).to_string(), json!(weight));
    }
    Value::Object(map)
}

/// `finrel field solve <scenario>`: solve the field equation and print the
/// potential and the geometry it induces.
pub fn field_solve(scenario: &Scenario, out: &Path) -> Result<(), AppError> {
    scenario.require_sections(&["states", "source"])?;
    let space = scenario.require_states()?;
    let graph = scenario.graph_or_complete(&space)?;
    let source = scenario.require_source(&space)?;
    let prior = ProbabilityMeasure::uniform(&space);

    let laplacian = build_laplacian(&graph).map_err(validation)?;
    let phi = solve_field_equation(&laplacian, &source, &prior).map_err(numerical)?;
    let q = exponential_tilt(&prior, &phi).map_err(numerical)?;

    let rhs: Vec<f64> = source.rho().iter().map(|r| source.kappa() * r).collect();
    let report = json!({
        "states": labels_json(&space),
        "kappa": source.kappa(),
        "phi": phi.values(),
        "q": measure_json(&space, &q),
        "residual_inf": laplacian.residual_inf(phi.values(), &rhs),
        "gauge_mean": phi.mean_under(&prior),
    });
    ensure_dir(out)?;
    write_json(out, "field.json", &report)?;
    print_json(&report);
    Ok(())
}

/// `finrel maxent <scenario>`: maximum-entropy geometry under the scenario
/// constraints.
pub fn maxent(scenario: &Scenario, out: &Path, overrides: &Overrides) -> Result<(), AppError> {
    scenario.require_sections(&["states"])?;
    let space = scenario.require_states()?;
    let constraints = scenario.constraints(&space)?;
    let prior = ProbabilityMeasure::uniform(&space);
    let q = solve_maxent(&prior, &constraints).map_err(|e| match e {
        finrel::maxent::MaxEntError::NonConvergence { .. } => numerical(e),
        other => validation(other),
    })?;

    let satisfied: Vec<Value> = constraints
        .iter()
        .map(|c| {
            let achieved: f64 = q
                .weights()
                .iter()
                .zip(c.coefficients())
                .map(|(w, v)| w * v)
                .sum();
            json!({ "target": c.target(), "achieved": achieved })
        })
        .collect();
    let report = json!({
        "states": labels_json(&space),
        "q": measure_json(&space, &q),
        "entropy": finrel::information::entropy(&q, overrides.base),
        "entropy_base": base_name(overrides.base),
        "constraints": satisfied,
    });
    ensure_dir(out)?;
    write_json(out, "maxent.json", &report)?;
    print_json(&report);
    Ok(())
}

fn observer_measure(
    scenario: &Scenario,
    space: &StateSpace,
) -> Result<(ProbabilityMeasure, &'static str), AppError> {
    match &scenario.observer {
        Some(map) => Ok((
            scenario.measure_from_map(space, map, "observer")?,
            "observer",
        )),
        None => Ok((ProbabilityMeasure::uniform(space), "flat")),
    }
}

/// `finrel price <scenario>`: projection prices along the filtration with
/// per-time CSV of prices, returns, and drifts under the observer.
pub fn price(scenario: &Scenario, out: &Path) -> Result<(), AppError> {
    scenario.require_sections(&["states", "payoff", "filtration"])?;
    let space = scenario.require_states()?;
    let payoff = scenario.require_payoff(&space)?;
    let filtration = scenario.require_filtration(&space)?;
    let q = scenario.market_geometry(&space)?;
    let r_f = scenario.r_f.unwrap_or(0.0);
    let (observer, observer_kind) = observer_measure(scenario, &space)?;

    let process = price_process(&payoff, &q, &filtration, r_f);
    let drift = apparent_drift(&process, &observer, &filtration).map_err(validation)?;

    let report = json!({
        "states": labels_json(&space),
        "times": process.times(),
        "r_f": r_f,
        "market": q.weights(),
        "discounted": process.discounted(),
        "spot": process.spot(),
        "returns": process.returns(),
        "martingale_residual": martingale_residual(&process, &q, &filtration),
        "drift_observer": observer_kind,
        "drift": drift.per_time(),
    });

    let mut csv = String::from("time,state,block,price,return,drift\n");
    for (idx, &time) in process.times().iter().enumerate() {
        let partition = filtration.partition(idx);
        for state in 0..space.len() {
            let block = partition.block_index(state).expect("state in range");
            let ret = if idx == 0 {
                None
            } else {
                process.returns()[idx - 1][state]
            };
            let drift_cell = if idx == 0 {
                None
            } else {
                let prev_block = filtration
                    .partition(idx - 1)
                    .block_index(state)
                    .expect("state in range");
                drift.per_time()[idx - 1][prev_block]
            };
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{}",
                time,
                space.label(state),
                block,
                process.discounted()[idx][state],
                csv_opt(ret),
                csv_opt(drift_cell),
            );
        }
    }

    ensure_dir(out)?;
    write_json(out, "price.json", &report)?;
    write_text(out, "price.csv", &csv)?;
    print_json(&report);
    Ok(())
}

/// `finrel info <scenario>`: the entropy ledger per time, plus a per-level
/// CSV of what each price value leaves unresolved.
pub fn info(scenario: &Scenario, out: &Path, overrides: &Overrides) -> Result<(), AppError> {
    scenario.require_sections(&["states", "payoff", "filtration"])?;
    let space = scenario.require_states()?;
    let payoff = scenario.require_payoff(&space)?;
    let filtration = scenario.require_filtration(&space)?;
    let q = scenario.market_geometry(&space)?;
    let base = overrides.base;
    let tolerance = overrides
        .tolerance
        .or(scenario.tolerance)
        .unwrap_or(DEFAULT_PRICE_TOL);

    let process = price_process(&payoff, &q, &filtration, scenario.r_f.unwrap_or(0.0));

    let mut per_time = Vec::new();
    let mut csv = String::from("time,price,states,mass,residual_entropy\n");
    for (idx, &time) in process.times().iter().enumerate() {
        let partition = filtration.partition(idx);
        let decomposition = conservation_decomposition(&q, partition, base);
        let prices = PayoffVector::from_values(process.discounted()[idx].clone())
            .expect("prices are finite");
        let pp = price_induced_partition(&prices, tolerance).map_err(validation)?;
        let revealed_by_price = revealed_information(&q, &pp, base);

        for level in pp.levels() {
            let (_, residual) =
                posterior_given_price(&q, &pp, level.price, base).map_err(validation)?;
            let members: Vec<&str> = level.states.iter().map(|&s| space.label(s)).collect();
            let _ = writeln!(
                csv,
                "{},{},{},{},{}",
                time,
                level.price,
                members.join("|"),
                q.mass(&level.states),
                residual,
            );
        }

        per_time.push(json!({
            "time": time,
            "h_total": decomposition.h_total,
            "h_branch": decomposition.h_branch,
            "h_residual": decomposition.h_residual,
            "revealed_by_partition": decomposition.revealed,
            "revealed_by_price": revealed_by_price,
            "price_levels": pp.num_levels(),
        }));
    }

    let report = json!({
        "states": labels_json(&space),
        "base": base_name(base),
        "tolerance": tolerance,
        "per_time": per_time,
    });
    ensure_dir(out)?;
    write_json(out, "info.json", &report)?;
    write_text(out, "info_levels.csv", &csv)?;
    print_json(&report);
    Ok(())
}

/// `finrel frames <scenario>`: classify the observation frame and report
/// apparent drifts under the observer.
pub fn frames(scenario: &Scenario, out: &Path) -> Result<(), AppError> {
    scenario.require_sections(&["states", "payoff", "filtration"])?;
    let space = scenario.require_states()?;
    let payoff = scenario.require_payoff(&space)?;
    let filtration = scenario.require_filtration(&space)?;
    let market = scenario.market_geometry(&space)?;
    let flat = ProbabilityMeasure::uniform(&space);
    let (observer, observer_kind) = observer_measure(scenario, &space)?;

    let report = frame_report(
        &payoff,
        &market,
        &observer,
        &flat,
        &filtration,
        scenario.r_f.unwrap_or(0.0),
    )
    .map_err(validation)?;

    let value = json!({
        "states": labels_json(&space),
        "frame": report.classification.label.as_str(),
        "generic_observer": report.classification.generic_observer,
        "observer": observer_kind,
        "market": market.weights(),
        "apparent_drift": report.drift.per_time(),
        "max_abs_drift": report.drift.max_abs(),
    });
    ensure_dir(out)?;
    write_json(out, "frames.json", &value)?;
    print_json(&value);
    Ok(())
}

fn path_csv(path: &FilterPath) -> String {
    let mut csv = String::from("t,xi,m,v,price,vol\n");
    for k in 0..path.times().len() {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            path.times()[k],
            path.xi()[k],
            path.mean()[k],
            path.variance()[k],
            path.price()[k],
            path.vol()[k],
        );
    }
    csv
}

/// `finrel simulate <scenario>`: Monte Carlo filtering paths with per-path
/// CSV and a batch summary, plus the volatility-uncertainty curve for
/// binary models.
pub fn simulate(scenario: &Scenario, out: &Path, overrides: &Overrides) -> Result<(), AppError> {
    scenario.require_sections(&["model"])?;
    let section = scenario
        .model
        .as_ref()
        .ok_or_else(|| validation("scenario is missing required section `model`"))?;
    let dt = overrides.dt.unwrap_or(section.dt);
    let model = ObservationModel::new(section.sigma, section.horizon, dt, section.r_f)
        .map_err(validation)?;
    let seed = overrides.seed.or(scenario.seed).unwrap_or(0);
    let paths = overrides.paths.or(scenario.paths).unwrap_or(1);
    if paths == 0 {
        return Err(validation("`paths` must be at least 1"));
    }
    let mode = match scenario.mode.as_deref() {
        None | Some("innovation") => SimulationMode::Innovation,
        Some("observation") => {
            let true_state = scenario.true_state.ok_or_else(|| {
                validation("observation mode requires `true_state` in the scenario")
            })?;
            SimulationMode::Observation { true_state }
        }
        Some(other) => {
            return Err(validation(format!(
                "unknown mode `{other}`; expected `observation` or `innovation`"
            )))
        }
    };

    let (job, curve) = match (&scenario.binary, &scenario.prior) {
        (Some(_), Some(_)) => {
            return Err(validation(
                "sections `binary` and `prior` are mutually exclusive",
            ))
        }
        (Some(b), None) => {
            let curve = volatility_uncertainty_curve(&model, b.low, b.high);
            let job = match mode {
                SimulationMode::Innovation => SimulationJob::Binary {
                    model,
                    low: b.low,
                    high: b.high,
                    pi0: b.pi0,
                },
                SimulationMode::Observation { .. } => {
                    // Observation mode runs the two-point grid filter.
                    let prior = GridPrior::binary(b.low, b.high, b.pi0).map_err(validation)?;
                    SimulationJob::Grid { prior, model, mode }
                }
            };
            (job, Some(curve))
        }
        (None, Some(section)) => {
            let prior = GridPrior::new(section.grid.clone(), section.weights.clone())
                .map_err(validation)?;
            (SimulationJob::Grid { prior, model, mode }, None)
        }
        (None, None) => return Err(validation("scenario needs a `prior` or a `binary` section")),
    };

    ensure_dir(out)?;
    let mut write_error: Option<AppError> = None;
    let summary = simulate_batch(&job, paths, seed, |index, path| {
        if write_error.is_some() {
            return;
        }
        let name = format!("path_{index:05}.csv");
        if let Err(e) = write_text(out, &name, &path_csv(path)) {
            write_error = Some(e);
        }
    })
    .map_err(numerical)?;
    if let Some(e) = write_error {
        return Err(e);
    }

    if let Some(curve) = &curve {
        let mut csv = String::from("pi,Sigma\n");
        for (pi, sigma) in curve {
            let _ = writeln!(csv, "{pi},{sigma}");
        }
        write_text(out, "volatility_curve.csv", &csv)?;
    }

    let report = json!({
        "paths": summary.paths,
        "seed": seed,
        "dt": dt,
        "mode": match mode {
            SimulationMode::Innovation => "innovation",
            SimulationMode::Observation { .. } => "observation",
        },
        "martingale": {
            "initial": summary.initial,
            "terminal_mean": summary.terminal_mean,
            "terminal_std_error": summary.terminal_std_error,
            "z": summary.martingale_z,
            "ok": summary.martingale_z < 3.0,
        },
        "quadratic_variation": {
            "mean_rel_error": summary.qv_mean_rel_error,
            "ok": summary.qv_mean_rel_error < 0.10,
        },
        "clip_count": summary.clip_total,
        "max_mass_drift": summary.max_mass_drift,
    });
    write_json(out, "simulate_summary.json", &report)?;
    print_json(&report);
    Ok(())
}

/// `finrel reproduce <fixture>`: replay an embedded fixture and verify its
/// golden values. Exits 0 only when every value matches.
pub fn reproduce_fixture(fixture: &str, out: &Path) -> Result<(), AppError> {
    if fixture != "section4" {
        return Err(validation(format!(
            "unknown fixture `{fixture}`; available: section4"
        )));
    }
    let report = reproduce::section4();

    let mut values = serde_json::Map::new();
    let mut checks = serde_json::Map::new();
    for check in &report.checks {
        match check.name {
            "S1_level_high" | "S1_level_low" => {}
            name => {
                values.insert(name.to_string(), json!(check.value));
                checks.insert(name.to_string(), json!(check.pass()));
            }
        }
    }
    let high = report.check("S1_level_high").expect("present");
    let low = report.check("S1_level_low").expect("present");
    values.insert("S1_levels".into(), json!([high.value, low.value]));
    checks.insert("S1_levels".into(), json!(high.pass() && low.pass()));

    let mut value = Value::Object(values);
    value["checks"] = Value::Object(checks);
    value["pass"] = json!(report.pass());

    ensure_dir(out)?;
    write_json(out, "reproduce.json", &value)?;
    print_json(&value);

    if report.pass() {
        Ok(())
    } else {
        let failing: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| !c.pass())
            .map(|c| c.name)
            .collect();
        Err(numerical(format!(
            "golden values out of tolerance: {}",
            failing.join(", ")
        )))
    }
}
