use std::path::PathBuf;

use num_rational::BigRational;
use rayon::prelude::*;
use serde::Deserialize;
use serde_json::Value;

use super::{
    Dataset, DatasetFormat, EvalRecord, Flag, HarnessError, InstanceResult, MetricsConfig, MetricsReport, Outcome,
    PredictedAnswer, Prediction, RecordError,
};
use crate::clause::Goal;
use crate::engine::{classify_answer, solve, AnswerLabel, ProofTree, SearchConfig};
use crate::metrics::{tree_to_dag, MetricsError, ProofGraph};
use crate::symgen::{build_prompt, generate_program, load_offline, GenerationResult, GenerationStatus};
use crate::symgen::{PromptTemplate, TextGenerator};
use crate::term::Number;

/// The variable an arithmetic program binds to its answer.
pub const ANSWER_VARIABLE: &str = "Answer";

pub enum ProgramSource<'a> {
    /// `<dir>/<instance_id>.pl` per instance.
    Offline(PathBuf),
    Service { generator: &'a dyn TextGenerator, template: &'a PromptTemplate, retries: u32 },
}

impl ProgramSource<'_> {
    fn obtain(&self, record: &EvalRecord, format: DatasetFormat) -> GenerationResult {
        match self {
            ProgramSource::Offline(dir) => load_offline(dir, &record.instance_id),
            ProgramSource::Service { generator, template, retries } => {
                match build_prompt(template, &record.problem_text(format)) {
                    Ok(prompt) => generate_program(*generator, &prompt, template.stop_markers(), *retries, &record.instance_id),
                    Err(e) => GenerationResult {
                        raw_text: String::new(),
                        extracted_program: None,
                        program: None,
                        status: GenerationStatus::ServiceError,
                        attempts: 0,
                        diagnostics: Vec::new(),
                        error: Some(e.to_string()),
                    },
                }
            }
        }
    }
}

fn graph_of(proof: &ProofTree, format: DatasetFormat, pred: &mut Prediction) -> ProofGraph {
    match tree_to_dag(proof, format.labeling()) {
        Ok(g) => g,
        Err(MetricsError::MissingProvenance(label)) => {
            pred.flag(Flag::MissingProvenance);
            pred.diagnostics.push(format!("no provenance id on `{label}`"));
            ProofGraph::new()
        }
        Err(e) => {
            pred.flag(Flag::InvalidProofGraph);
            pred.diagnostics.push(e.to_string());
            ProofGraph::new()
        }
    }
}

/// Runs the engine on a generated program. The first query decides the
/// answer: for logical datasets it must be a single literal, which is
/// classified three ways; for arithmetic ones the first solution's `Answer`
/// binding is the answer.
pub fn predict(generation: GenerationResult, format: DatasetFormat, cfg: &SearchConfig) -> Prediction {
    let mut pred = Prediction {
        program: generation.extracted_program.as_ref().map(|s| s.text.clone()),
        diagnostics: generation.diagnostics.iter().map(|d| d.to_string()).collect(),
        ..Default::default()
    };
    let program = match (generation.status, generation.program) {
        (GenerationStatus::Ok, Some(p)) => p,
        (status, _) => {
            let flag = match status {
                GenerationStatus::ExtractionFailed => Flag::ExtractionFailed,
                GenerationStatus::ParseFailed => Flag::ParseFailed,
                _ => Flag::ServiceError,
            };
            return pred.fail(Outcome::GenerationFailure, flag, generation.error);
        }
    };
    let Some(query) = program.queries.first() else {
        return pred.fail(Outcome::GenerationFailure, Flag::MissingQuery, Some("program has no `?-` query".to_string()));
    };

    if !format.is_arithmetic() {
        let [Goal::Call(statement)] = query.as_slice() else {
            return pred.fail(Outcome::EngineFailure, Flag::UnsupportedQuery, Some("query must be a single literal".to_string()));
        };
        let c = match classify_answer(&program.kb, statement, cfg) {
            Ok(c) => c,
            Err(e) => return pred.fail(Outcome::EngineFailure, Flag::EngineError, Some(e.to_string())),
        };
        if !c.diagnostics.is_empty() {
            pred.flag(Flag::EngineDiagnostics);
            pred.diagnostics.extend(c.diagnostics.iter().map(|d| d.to_string()));
        }
        if c.inconsistent {
            pred.flag(Flag::Inconsistent);
        }
        if c.budget_exhausted {
            // A found proof stands; an Unknown reached by running out of
            // steps is not an answer.
            if c.label == AnswerLabel::Unknown {
                return pred.fail(Outcome::EngineFailure, Flag::BudgetExhausted, Some("step budget exhausted".to_string()));
            }
            pred.flag(Flag::BudgetExhausted);
        }
        if let Some(proof) = &c.proof {
            pred.proof = graph_of(proof, format, &mut pred);
        }
        pred.proof_tree = c.proof;
        pred.answer = Some(PredictedAnswer::Label(c.label));
        return pred;
    }

    let result = match solve(&program.kb, query, &SearchConfig { max_solutions: 1, ..cfg.clone() }) {
        Ok(r) => r,
        Err(e) => return pred.fail(Outcome::EngineFailure, Flag::EngineError, Some(e.to_string())),
    };
    if !result.diagnostics.is_empty() {
        pred.flag(Flag::EngineDiagnostics);
        pred.diagnostics.extend(result.diagnostics.iter().map(|d| d.to_string()));
    }
    let Some(solution) = result.solutions.into_iter().next() else {
        let flag = if result.status == crate::engine::SearchStatus::BudgetExhausted {
            Flag::BudgetExhausted
        } else {
            Flag::NoSolution
        };
        return pred.fail(Outcome::EngineFailure, flag, Some("query has no solution".to_string()));
    };
    let Some(value) = solution.binding(ANSWER_VARIABLE).cloned() else {
        return pred.fail(
            Outcome::EngineFailure,
            Flag::MissingAnswerVariable,
            Some(format!("query does not bind `{ANSWER_VARIABLE}`")),
        );
    };
    pred.answer = Some(match value.as_number() {
        Some(n) => PredictedAnswer::Number(n.value().clone()),
        None => PredictedAnswer::Other(value.render()),
    });
    pred.proof = graph_of(&solution.proof, format, &mut pred);
    pred.proof_tree = Some(solution.proof);
    pred
}

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool, HarnessError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n.max(1));
    }
    builder.build().map_err(|e| HarnessError::WorkerPool(e.to_string()))
}

/// Evaluates every loaded record. Instances run in parallel on `workers`
/// threads (all cores when `None`); results are folded in record order, so
/// offline runs are reproducible.
pub fn run_eval(
    dataset: &Dataset,
    format: DatasetFormat,
    source: &ProgramSource<'_>,
    engine: &SearchConfig,
    metrics: &MetricsConfig,
    workers: Option<usize>,
) -> Result<MetricsReport, HarnessError> {
    engine.validate()?;
    if let ProgramSource::Offline(dir) = source {
        if !dir.is_dir() {
            return Err(HarnessError::MissingProgramsDir(dir.display().to_string()));
        }
    }
    let results: Vec<InstanceResult> = pool(workers)?.install(|| {
        dataset
            .records
            .par_iter()
            .map(|record| {
                let mut prediction = predict(source.obtain(record, format), format, engine);
                if matches!(source, ProgramSource::Offline(_)) {
                    // Offline, the only "service" failure is a missing or
                    // unreadable program file.
                    for f in &mut prediction.flags {
                        if *f == Flag::ServiceError {
                            *f = Flag::MissingProgram;
                        }
                    }
                }
                super::score_instance(record, prediction, metrics)
            })
            .collect()
    });
    MetricsReport::from_results(
        format.name(),
        results,
        metrics.exact_match,
        dataset.rejected.clone(),
        dataset.warnings.clone(),
    )
}

/// One line of a predictions file: `{"id", "answer", "proof", "status"}`.
/// `proof` is a proof graph; `status` is `ok` (the default),
/// `generation_failure` or `engine_failure`.
#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct PredictionRecord {
    #[serde(alias = "instance_id")]
    pub id: String,
    #[serde(default)]
    pub answer: Option<Value>,
    #[serde(default)]
    pub proof: Option<ProofGraph>,
    #[serde(default)]
    pub status: Option<String>,
}

pub fn parse_predictions(text: &str) -> (Vec<PredictionRecord>, Vec<RecordError>) {
    let mut records = Vec::new();
    let mut errors = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<PredictionRecord>(line) {
            Ok(r) => records.push(r),
            Err(e) => errors.push(RecordError { line: i + 1, instance_id: None, message: format!("invalid prediction: {e}") }),
        }
    }
    (records, errors)
}

fn parse_answer(v: &Value, arithmetic: bool) -> PredictedAnswer {
    let parsed = match v {
        Value::Bool(b) if !arithmetic => Some(PredictedAnswer::Label(if *b { AnswerLabel::True } else { AnswerLabel::False })),
        Value::String(s) if !arithmetic => s.parse().ok().map(PredictedAnswer::Label),
        Value::Number(_) | Value::String(_) if arithmetic => {
            let text = match v {
                Value::String(s) => s.trim().to_string(),
                other => other.to_string(),
            };
            parse_rational(&text).map(PredictedAnswer::Number)
        }
        _ => None,
    };
    parsed.unwrap_or_else(|| PredictedAnswer::Other(v.to_string()))
}

/// `27`, `-3`, `13.5` or `27/2`.
fn parse_rational(text: &str) -> Option<BigRational> {
    let (negative, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text),
    };
    let value = match body.split_once('/') {
        Some((n, d)) => {
            let d: num_bigint::BigInt = d.trim().parse().ok()?;
            if d == 0.into() {
                return None;
            }
            BigRational::new(n.trim().parse().ok()?, d)
        }
        None => Number::parse_decimal(body)?.value().clone(),
    };
    Some(if negative { -value } else { value })
}

/// Scores precomputed predictions. Records without a prediction count as
/// generation failures.
pub fn score_predictions(
    dataset: &Dataset,
    format: DatasetFormat,
    predictions: &[PredictionRecord],
    metrics: &MetricsConfig,
) -> Result<MetricsReport, HarnessError> {
    let by_id: std::collections::HashMap<&str, &PredictionRecord> =
        predictions.iter().map(|p| (p.id.as_str(), p)).collect();
    let mut warnings = dataset.warnings.clone();
    let known: std::collections::HashSet<&str> = dataset.records.iter().map(|r| r.instance_id.as_str()).collect();
    let unknown = predictions.iter().filter(|p| !known.contains(p.id.as_str())).count();
    if unknown > 0 {
        warnings.push(format!("{unknown} predictions do not match any loaded record"));
    }
    let results = dataset
        .records
        .iter()
        .map(|record| {
            let pred = match by_id.get(record.instance_id.as_str()) {
                None => Prediction::default().fail(Outcome::GenerationFailure, Flag::MissingPrediction, None),
                Some(p) => to_prediction(p, format),
            };
            super::score_instance(record, pred, metrics)
        })
        .collect();
    MetricsReport::from_results(format.name(), results, metrics.exact_match, dataset.rejected.clone(), warnings)
}

fn to_prediction(p: &PredictionRecord, format: DatasetFormat) -> Prediction {
    let mut pred = Prediction::default();
    match p.status.as_deref() {
        Some("generation_failure") => return pred.fail(Outcome::GenerationFailure, Flag::ServiceError, None),
        Some("engine_failure") => return pred.fail(Outcome::EngineFailure, Flag::EngineError, None),
        _ => {}
    }
    pred.answer = p.answer.as_ref().map(|v| parse_answer(v, format.is_arithmetic()));
    if let Some(graph) = &p.proof {
        if graph.validate().is_ok() {
            pred.proof = if format.is_arithmetic() { graph.canonicalized() } else { graph.clone() };
        } else {
            pred.flag(Flag::InvalidProofGraph);
        }
    }
    pred
}
