//! Python bindings: run presets or experiment files and get summaries back
//! as plain dictionaries.

use std::path::Path;

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use clickpoison::attacks::Strategy;
use clickpoison::config::{self, ExperimentFile, Overrides};
use clickpoison::harness::{self, summary_json};
use clickpoison::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        Error::Invariant(_) | Error::InfeasibleFeedback(_) => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn json_to_py<'py>(py: Python<'py>, v: &serde_json::Value) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (v.to_string(),))
}

/// Confidence radius for an item with `n` observations.
#[pyfunction]
fn beta(n: u64, num_items: usize, delta: f64) -> PyResult<f64> {
    let params = clickpoison::BetaParams::new(num_items, delta).map_err(to_py)?;
    clickpoison::beta(&params, n).map_err(to_py)
}

/// Names of the shipped presets.
#[pyfunction]
fn presets() -> Vec<&'static str> {
    config::PRESETS.iter().map(|(n, _)| *n).collect()
}

/// Item means of the `num_items` most-rated movies in a MovieLens file.
#[pyfunction]
#[pyo3(signature = (ratings, num_items=100, threshold=4.0))]
fn ingest_movielens(ratings: &str, num_items: usize, threshold: f64) -> PyResult<Vec<f64>> {
    harness::ingest_movielens(Path::new(ratings), num_items, threshold).map_err(to_py)
}

#[allow(clippy::too_many_arguments)]
fn load(
    preset: Option<&str>,
    config_text: Option<&str>,
    horizon: Option<u64>,
    replications: Option<u32>,
    seed: Option<u64>,
    strategies: Option<Vec<String>>,
    ratings: Option<String>,
) -> Result<config::Resolved, Error> {
    let file = match (preset, config_text) {
        (Some(name), None) => config::preset(name)?,
        (None, Some(text)) => ExperimentFile::parse(text, Path::new("<string>"))?,
        _ => {
            return Err(Error::Config(
                "give exactly one of `preset` and `config`".into(),
            ))
        }
    };
    let strategies = strategies
        .map(|names| {
            names
                .iter()
                .map(|n| Strategy::from_name(n))
                .collect::<Result<Vec<_>, _>>()
        })
        .transpose()?;
    let ov = Overrides {
        horizon,
        replications,
        seed,
        strategies,
        ratings: ratings.map(Into::into),
        ..Overrides::default()
    };
    config::resolve(&file, &ov)
}

/// Runs each strategy of a preset (or TOML text) on paired seeds and returns
/// one summary per strategy, keyed by strategy name.
#[pyfunction]
#[pyo3(signature = (preset=None, config=None, horizon=None, replications=None, seed=None, strategies=None, ratings=None, jobs=None))]
#[allow(clippy::too_many_arguments)]
fn run<'py>(
    py: Python<'py>,
    preset: Option<&str>,
    config: Option<&str>,
    horizon: Option<u64>,
    replications: Option<u32>,
    seed: Option<u64>,
    strategies: Option<Vec<String>>,
    ratings: Option<String>,
    jobs: Option<usize>,
) -> PyResult<Bound<'py, PyAny>> {
    let resolved = load(
        preset,
        config,
        horizon,
        replications,
        seed,
        strategies,
        ratings,
    )
    .map_err(to_py)?;
    let results = py
        .detach(|| {
            resolved
                .strategies
                .iter()
                .map(|&s| {
                    let mut spec = resolved.spec.clone();
                    spec.strategy = s;
                    harness::run_experiment(&spec, jobs)
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .map_err(to_py)?;
    let map: serde_json::Map<String, serde_json::Value> = results
        .iter()
        .map(|r| (r.spec.strategy.name().to_string(), summary_json(r)))
        .collect();
    json_to_py(py, &serde_json::Value::Object(map))
}

#[pymodule]
fn pyclickpoison(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(beta, m)?)?;
    m.add_function(wrap_pyfunction!(presets, m)?)?;
    m.add_function(wrap_pyfunction!(ingest_movielens, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
