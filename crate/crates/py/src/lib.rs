//! Python bindings: scenarios in, JSON reports out.
//!
//! The module mirrors the CLI surface. Scenarios and configs travel as JSON
//! strings so Python can build them with plain dicts:
//!
//!     import apmatch, json
//!     scen = apmatch.generate_scenario(users=20, aps=5, area=200.0, seed=1)
//!     report = json.loads(apmatch.run(scen))
//!     print(report["metrics"]["unemployment_rate"])

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use apmatch_core::config::RunConfig;
use apmatch_core::matching::{bdaa, exhaustive_optimum};
use apmatch_core::model::Scenario as CoreScenario;
use apmatch_core::pipeline::{self, ApLayout, Pipeline};
use apmatch_core::stability::{check_core, check_pairwise, StabilityReport};

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_scenario(json: &str) -> PyResult<CoreScenario> {
    let scenario: CoreScenario = serde_json::from_str(json).map_err(err)?;
    scenario.validate().map_err(err)?;
    Ok(scenario)
}

fn parse_config(json: Option<&str>) -> PyResult<RunConfig> {
    match json {
        None => Ok(RunConfig::default()),
        Some(s) => RunConfig::from_json(s).map_err(err),
    }
}

fn parse_layout(layout: &str) -> PyResult<ApLayout> {
    match layout {
        "random" => Ok(ApLayout::Random),
        "grid5" => Ok(ApLayout::Grid5),
        other => Err(PyValueError::new_err(format!("unknown layout {other}"))),
    }
}

/// Seeded uniform scenario as a JSON string.
#[pyfunction]
#[pyo3(signature = (users, aps, area, seed, layout="random"))]
fn generate_scenario(users: usize, aps: usize, area: f64, seed: u64, layout: &str) -> PyResult<String> {
    let scenario = pipeline::generate_random(users, aps, area, seed, parse_layout(layout)?)
        .map_err(err)?;
    serde_json::to_string_pretty(&scenario).map_err(err)
}

/// Full mechanism run; returns the report as a JSON string.
#[pyfunction]
#[pyo3(signature = (scenario_json, config_json=None))]
fn run(scenario_json: &str, config_json: Option<&str>) -> PyResult<String> {
    let out = pipeline::run_pipeline(parse_scenario(scenario_json)?, parse_config(config_json)?)
        .map_err(err)?;
    serde_json::to_string_pretty(&out.report).map_err(err)
}

/// Like `run`, but also returns the matcher's event trace as JSON lines.
#[pyfunction]
#[pyo3(signature = (scenario_json, config_json=None))]
fn run_with_trace(scenario_json: &str, config_json: Option<&str>) -> PyResult<(String, Vec<String>)> {
    let out = pipeline::run_pipeline(parse_scenario(scenario_json)?, parse_config(config_json)?)
        .map_err(err)?;
    let report = serde_json::to_string_pretty(&out.report).map_err(err)?;
    let trace = out
        .trace
        .iter()
        .map(|e| serde_json::to_string(e).map_err(err))
        .collect::<PyResult<Vec<_>>>()?;
    Ok((report, trace))
}

/// Mechanism vs nearest-AP vs exhaustive optimum, as a JSON string.
#[pyfunction]
#[pyo3(signature = (scenario_json, config_json=None))]
fn compare(scenario_json: &str, config_json: Option<&str>) -> PyResult<String> {
    let report = pipeline::compare(parse_scenario(scenario_json)?, parse_config(config_json)?)
        .map_err(err)?;
    serde_json::to_string_pretty(&report).map_err(err)
}

/// Stability report (pairwise always; core scans at desk scale) for the
/// mechanism's matching.
#[pyfunction]
#[pyo3(signature = (scenario_json, config_json=None))]
fn check_stability(scenario_json: &str, config_json: Option<&str>) -> PyResult<String> {
    let pipeline =
        Pipeline::new(parse_scenario(scenario_json)?, parse_config(config_json)?).map_err(err)?;
    let outcome = bdaa(&pipeline.table, &pipeline.prefs).map_err(err)?;
    let (is_pairwise_stable, witness) = check_pairwise(&pipeline.table, &outcome.matching);
    let (core_member, weak_core_member) =
        match check_core(&pipeline.table, &outcome.matching, false) {
            Ok((core, _)) => {
                let weak = check_core(&pipeline.table, &outcome.matching, true)
                    .map_err(err)?
                    .0;
                (Some(core), Some(weak))
            }
            Err(apmatch_core::Error::SizeGuard { .. }) => (None, None),
            Err(e) => return Err(err(e)),
        };
    let report = StabilityReport {
        is_pairwise_stable,
        core_member,
        weak_core_member,
        blocking_witness: witness,
    };
    serde_json::to_string_pretty(&report).map_err(err)
}

/// Welfare of the exhaustive optimum over the modified worths.
#[pyfunction]
#[pyo3(signature = (scenario_json, config_json=None))]
fn optimum_welfare(scenario_json: &str, config_json: Option<&str>) -> PyResult<f64> {
    let pipeline =
        Pipeline::new(parse_scenario(scenario_json)?, parse_config(config_json)?).map_err(err)?;
    let (_, welfare) = exhaustive_optimum(&pipeline.table, true).map_err(err)?;
    Ok(welfare)
}

/// Attempt rate of one contender among `n` under the default 802.11n table.
#[pyfunction]
fn attempt_rate(n: usize) -> PyResult<f64> {
    let model = apmatch_core::mac80211::MacModel::default();
    apmatch_core::mac80211::attempt_rate(&model.tables[0], n, None).map_err(err)
}

/// Nash-bargained shares of `worth` for power utilities with the given
/// exponents.
#[pyfunction]
fn nash_shares(worth: f64, alphas: Vec<f64>) -> PyResult<Vec<f64>> {
    use apmatch_core::bargaining::{nash_allocate, SharingSpec};
    use apmatch_core::model::PlayerId;
    let members: Vec<PlayerId> = (1..=alphas.len() as u32).map(PlayerId::user).collect();
    let spec = SharingSpec::Power {
        alphas: members.iter().copied().zip(alphas.iter().copied()).collect(),
    };
    let out = nash_allocate(worth, &members, &spec).map_err(err)?;
    Ok(members.iter().map(|m| out.shares[m]).collect())
}

#[pymodule]
fn apmatch(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(generate_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(run_with_trace, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(check_stability, m)?)?;
    m.add_function(wrap_pyfunction!(optimum_welfare, m)?)?;
    m.add_function(wrap_pyfunction!(attempt_rate, m)?)?;
    m.add_function(wrap_pyfunction!(nash_shares, m)?)?;
    Ok(())
}
