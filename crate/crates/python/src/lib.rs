//! Python bindings. Proofs, graphs and reports cross the boundary as plain
//! JSON-shaped values (dicts and lists); inputs may also be JSON strings.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyString};
use serde::de::DeserializeOwned;
use serde::Serialize;

use ::prooflog as core;
use core::engine::{ProofRecord, ProofTree};
use core::harness::{self, DatasetFormat, MetricsConfig, ProgramSource};
use core::metrics::{self, EditCosts, Labeling, ProofGraph, DEFAULT_GED_BUDGET};
use core::{SearchConfig, SourceProgram, Strategy, Substitution};

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn from_py<T: DeserializeOwned>(value: &Bound<'_, PyAny>) -> PyResult<T> {
    let text = if let Ok(s) = value.cast::<PyString>() {
        s.to_string()
    } else {
        value.py().import("json")?.call_method1("dumps", (value,))?.extract::<String>()?
    };
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn proof_from_py(value: &Bound<'_, PyAny>) -> PyResult<ProofTree> {
    let record: ProofRecord = from_py(value)?;
    ProofTree::from_record(&record).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn value_error(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Engine settings from keyword arguments; unknown keys are an error.
fn search_config(options: Option<&Bound<'_, PyDict>>) -> PyResult<SearchConfig> {
    let mut cfg = SearchConfig::default();
    let Some(options) = options else { return Ok(cfg) };
    for (key, value) in options.iter() {
        let key: String = key.extract()?;
        match key.as_str() {
            "strategy" => cfg.strategy = value.extract::<String>()?.parse::<Strategy>().map_err(value_error)?,
            "max_depth" => cfg.max_depth = value.extract()?,
            "max_solutions" => cfg.max_solutions = value.extract()?,
            "step_budget" => cfg.step_budget = value.extract()?,
            "occurs_check" => cfg.occurs_check = value.extract()?,
            other => return Err(PyValueError::new_err(format!("unknown engine option `{other}`"))),
        }
    }
    cfg.validate().map_err(value_error)?;
    Ok(cfg)
}

fn dataset_format(name: &str) -> PyResult<DatasetFormat> {
    name.parse().map_err(value_error)
}

/// A parsed program: a knowledge base plus its `?-` queries.
#[pyclass(module = "prooflog", frozen)]
struct Program {
    inner: core::Program,
}

#[pymethods]
impl Program {
    #[new]
    #[pyo3(signature = (text, origin = "<string>"))]
    fn new(text: &str, origin: &str) -> PyResult<Self> {
        core::parse_program(&SourceProgram::new(text, origin))
            .map(|inner| Program { inner })
            .map_err(|diags| PyValueError::new_err(diags.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n")))
    }

    #[getter]
    fn queries(&self) -> Vec<String> {
        self.inner.queries.iter().map(|q| q.iter().map(|g| g.to_string()).collect::<Vec<_>>().join(", ")).collect()
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.inner.warnings.iter().map(|w| w.to_string()).collect()
    }

    /// Runs `query` (default: the first `?-` query) and returns status,
    /// steps, diagnostics and solutions with their proofs.
    #[pyo3(signature = (query = None, **options))]
    fn solve(&self, py: Python<'_>, query: Option<&str>, options: Option<&Bound<'_, PyDict>>) -> PyResult<Py<PyAny>> {
        let cfg = search_config(options)?;
        let goals = match query {
            Some(q) => core::parse_query(q)
                .map_err(|d| PyValueError::new_err(d.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n")))?,
            None => self
                .inner
                .queries
                .first()
                .cloned()
                .ok_or_else(|| PyValueError::new_err("program has no `?-` query"))?,
        };
        let kb = &self.inner.kb;
        let result = py.detach(|| core::solve(kb, &goals, &cfg)).map_err(value_error)?;
        let value = serde_json::json!({
            "status": result.status,
            "steps": result.steps_used,
            "diagnostics": result.diagnostics,
            "solutions": result.solutions.iter().map(|s| s.to_json()).collect::<Vec<_>>(),
        });
        to_py(py, &value)
    }

    /// Three-way True/False/Unknown answer for a ground literal, using its
    /// `neg_` counterpart for False.
    #[pyo3(signature = (statement, **options))]
    fn classify(&self, py: Python<'_>, statement: &str, options: Option<&Bound<'_, PyDict>>) -> PyResult<Py<PyAny>> {
        let cfg = search_config(options)?;
        let term = core::parse_term(statement).map_err(value_error)?;
        let kb = &self.inner.kb;
        let c = py.detach(|| core::classify_answer(kb, &term, &cfg)).map_err(value_error)?;
        let value = serde_json::json!({
            "label": c.label,
            "proof": c.proof.as_ref().map(ProofTree::to_record),
            "inconsistent": c.inconsistent,
            "budget_exhausted": c.budget_exhausted,
            "diagnostics": c.diagnostics,
        });
        to_py(py, &value)
    }

    /// Replays a proof. Returns None when it is accepted, otherwise the
    /// reason it was rejected.
    #[pyo3(signature = (proof, **options))]
    fn check(&self, proof: &Bound<'_, PyAny>, options: Option<&Bound<'_, PyDict>>) -> PyResult<Option<String>> {
        let cfg = search_config(options)?;
        let tree = proof_from_py(proof)?;
        Ok(core::check_proof(&self.inner.kb, &tree, &cfg).err().map(|r| r.to_string()))
    }

    fn __repr__(&self) -> String {
        format!("Program(clauses={}, queries={})", self.inner.kb.len(), self.inner.queries.len())
    }
}

/// Parses a term and returns its canonical rendering.
#[pyfunction]
fn parse_term(text: &str) -> PyResult<String> {
    core::parse_term(text).map(|t| t.render()).map_err(value_error)
}

/// Most general unifier of two terms as `{variable: term}`, or None.
#[pyfunction]
#[pyo3(signature = (a, b, occurs_check = true))]
fn unify(a: &str, b: &str, occurs_check: bool) -> PyResult<Option<Vec<(String, String)>>> {
    let a = core::parse_term(a).map_err(value_error)?;
    let b = core::parse_term(b).map_err(value_error)?;
    let Some(s) = core::unify(&a, &b, &Substitution::new(), occurs_check) else { return Ok(None) };
    let s = core::subst::resolve(s);
    Ok(Some(s.sorted().into_iter().map(|(v, t)| (v.to_string(), t.render())).collect()))
}

#[pyfunction]
#[pyo3(signature = (proof, labeling = "provenance"))]
fn tree_to_dag(py: Python<'_>, proof: &Bound<'_, PyAny>, labeling: &str) -> PyResult<Py<PyAny>> {
    let labeling: Labeling = labeling.parse().map_err(value_error)?;
    let graph = metrics::tree_to_dag(&proof_from_py(proof)?, labeling).map_err(value_error)?;
    to_py(py, &graph)
}

fn graph_from_py(value: &Bound<'_, PyAny>) -> PyResult<ProofGraph> {
    let g: ProofGraph = from_py(value)?;
    g.validate().map_err(value_error)?;
    Ok(g)
}

/// Unit-cost edit distance as `(distance, exact)`; with a budget the search
/// may stop early and return an upper bound.
#[pyfunction]
#[pyo3(signature = (a, b, budget = None))]
fn ged(py: Python<'_>, a: &Bound<'_, PyAny>, b: &Bound<'_, PyAny>, budget: Option<u64>) -> PyResult<(u64, bool)> {
    let (a, b) = (graph_from_py(a)?, graph_from_py(b)?);
    let r = py.detach(|| metrics::ged(&a, &b, &EditCosts::default(), budget.unwrap_or(DEFAULT_GED_BUDGET)));
    Ok((r.distance, r.exact))
}

/// Best similarity of `pred` against any of the gold graphs; zero when the
/// answer was wrong.
#[pyfunction]
#[pyo3(signature = (pred, golds, answer_correct = true))]
fn similarity(py: Python<'_>, pred: &Bound<'_, PyAny>, golds: Vec<Bound<'_, PyAny>>, answer_correct: bool) -> PyResult<f64> {
    let pred = graph_from_py(pred)?;
    let golds = golds.iter().map(graph_from_py).collect::<PyResult<Vec<_>>>()?;
    let score = py
        .detach(|| metrics::best_gold_score(&pred, &golds, answer_correct, &EditCosts::default(), DEFAULT_GED_BUDGET))
        .map_err(value_error)?;
    Ok(metrics::ratio_to_f64(&score.similarity))
}

#[pyfunction]
#[pyo3(signature = (pred, gold, answer_correct = true))]
fn exact_match(pred: &Bound<'_, PyAny>, gold: &Bound<'_, PyAny>, answer_correct: bool) -> PyResult<bool> {
    Ok(metrics::proof_exact_match(&graph_from_py(pred)?, &graph_from_py(gold)?, answer_correct))
}

fn load(path: PathBuf, format: DatasetFormat) -> PyResult<harness::Dataset> {
    harness::load_dataset(&path, format).map_err(|e| PyIOError::new_err(e.to_string()))
}

/// Records, rejected lines and warnings of a dataset file.
#[pyfunction]
fn load_dataset(py: Python<'_>, path: PathBuf, format: &str) -> PyResult<Py<PyAny>> {
    let d = load(path, dataset_format(format)?)?;
    let value = serde_json::json!({
        "records": d.records,
        "rejected": d.rejected,
        "warnings": d.warnings,
    });
    to_py(py, &value)
}

fn metrics_config(format: DatasetFormat, exact_match: Option<bool>) -> MetricsConfig {
    let mut m = MetricsConfig::for_format(format);
    if let Some(on) = exact_match {
        m.exact_match = on;
    }
    m
}

/// Scores a predictions JSONL file against a dataset. Returns the full
/// report; unreadable prediction lines are listed under `prediction_errors`.
#[pyfunction]
#[pyo3(signature = (dataset, format, predictions, exact_match = None))]
fn score(
    py: Python<'_>,
    dataset: PathBuf,
    format: &str,
    predictions: PathBuf,
    exact_match: Option<bool>,
) -> PyResult<Py<PyAny>> {
    let format = dataset_format(format)?;
    let data = load(dataset, format)?;
    let text = std::fs::read_to_string(&predictions)
        .map_err(|e| PyIOError::new_err(format!("{}: {e}", predictions.display())))?;
    let (preds, errors) = harness::parse_predictions(&text);
    let report = harness::score_predictions(&data, format, &preds, &metrics_config(format, exact_match))
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    let mut value = serde_json::to_value(&report).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    value["prediction_errors"] = serde_json::to_value(&errors).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    to_py(py, &value)
}

/// Offline evaluation: runs `<programs_dir>/<instance_id>.pl` for every
/// record and returns the report. Writes report files when `report_dir` is
/// given.
#[pyfunction]
#[pyo3(signature = (dataset, format, programs_dir, report_dir = None, workers = None, exact_match = None, **options))]
#[allow(clippy::too_many_arguments)]
fn evaluate(
    py: Python<'_>,
    dataset: PathBuf,
    format: &str,
    programs_dir: PathBuf,
    report_dir: Option<PathBuf>,
    workers: Option<usize>,
    exact_match: Option<bool>,
    options: Option<&Bound<'_, PyDict>>,
) -> PyResult<Py<PyAny>> {
    let format = dataset_format(format)?;
    let cfg = search_config(options)?;
    let data = load(dataset, format)?;
    let metrics = metrics_config(format, exact_match);
    let report = py
        .detach(|| harness::run_eval(&data, format, &ProgramSource::Offline(programs_dir), &cfg, &metrics, workers))
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    if let Some(dir) = report_dir {
        harness::emit_report(&report, &dir).map_err(|e| PyIOError::new_err(e.to_string()))?;
    }
    to_py(py, &report)
}

#[pymodule]
fn prooflog(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Program>()?;
    m.add_function(wrap_pyfunction!(parse_term, m)?)?;
    m.add_function(wrap_pyfunction!(unify, m)?)?;
    m.add_function(wrap_pyfunction!(tree_to_dag, m)?)?;
    m.add_function(wrap_pyfunction!(ged, m)?)?;
    m.add_function(wrap_pyfunction!(similarity, m)?)?;
    m.add_function(wrap_pyfunction!(exact_match, m)?)?;
    m.add_function(wrap_pyfunction!(load_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(score, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    Ok(())
}
