//! Evaluation pipeline: load benchmark records, obtain a program per
//! instance, run the engine, score answers and proofs, aggregate.

mod dataset;
mod eval;
mod gold;
mod report;

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{AnswerLabel, EngineError, ProofTree};
use crate::metrics::{best_gold_score, serialize_ratio, EditCosts, ProofGraph, DEFAULT_GED_BUDGET};
use crate::term::Number;

pub use dataset::{
    load_dataset, parse_dataset, parse_integer_answer, Dataset, DatasetFormat, EvalRecord, GoldAnswer, LoadError,
    RecordError, RecordMeta, Statement,
};
pub use eval::{parse_predictions, predict, run_eval, score_predictions, PredictionRecord, ProgramSource};
pub use gold::{chain_of_thought_graph, parse_proofwriter_proofs, split_sentences};
pub use report::{emit_report, render_summary};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error("invalid engine configuration: {0}")]
    Engine(#[from] EngineError),
    #[error("programs directory {0} does not exist")]
    MissingProgramsDir(String),
    #[error("cannot start worker pool: {0}")]
    WorkerPool(String),
    #[error("answer accuracy does not bound proof metrics: {0}")]
    InvariantViolated(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// What the engine (or a predictions file) answered.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PredictedAnswer {
    Label(AnswerLabel),
    Number(BigRational),
    /// Anything else, such as a non-numeric `Answer` binding.
    Other(String),
}

impl fmt::Display for PredictedAnswer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PredictedAnswer::Label(l) => write!(f, "{l}"),
            PredictedAnswer::Number(n) => write!(f, "{}", Number::new(n.clone())),
            PredictedAnswer::Other(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("predicted answer `{pred}` is not comparable with gold answer `{gold}`")]
pub struct KindMismatch {
    pub pred: String,
    pub gold: String,
}

/// Label equality, or exact integer equality for arithmetic answers: a
/// rational prediction only counts when its denominator is 1.
pub fn score_answer(pred: &PredictedAnswer, gold: &GoldAnswer) -> Result<bool, KindMismatch> {
    match (pred, gold) {
        (PredictedAnswer::Label(p), GoldAnswer::Label(g)) => Ok(p == g),
        (PredictedAnswer::Number(p), GoldAnswer::Integer(g)) => Ok(p.is_integer() && p.numer() == g),
        _ => Err(KindMismatch { pred: pred.to_string(), gold: gold.to_string() }),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MetricsConfig {
    pub costs: EditCosts,
    /// Expansion budget per edit-distance computation.
    pub ged_budget: u64,
    /// Whether proof accuracy (exact match) is reported.
    pub exact_match: bool,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig { costs: EditCosts::default(), ged_budget: DEFAULT_GED_BUDGET, exact_match: true }
    }
}

impl MetricsConfig {
    /// Proof accuracy is reported for PrOntoQA only, as in the published
    /// result tables; similarity is reported everywhere.
    pub fn for_format(format: DatasetFormat) -> Self {
        MetricsConfig { exact_match: format == DatasetFormat::ProntoQa, ..Default::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Correct,
    WrongAnswer,
    GenerationFailure,
    EngineFailure,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    ExtractionFailed,
    ParseFailed,
    ServiceError,
    MissingProgram,
    MissingPrediction,
    MissingQuery,
    UnsupportedQuery,
    EngineError,
    BudgetExhausted,
    NoSolution,
    MissingAnswerVariable,
    AnswerKindMismatch,
    Inconsistent,
    EngineDiagnostics,
    MissingProvenance,
    InvalidProofGraph,
    GedUpperBound,
}

impl fmt::Display for Flag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = serde_json::to_value(self).expect("flags serialize");
        f.write_str(v.as_str().unwrap_or_default())
    }
}

/// A prediction before scoring.
#[derive(Clone, Debug, Default)]
pub struct Prediction {
    pub answer: Option<PredictedAnswer>,
    pub proof: ProofGraph,
    /// Set when no answer could be produced at all.
    pub failure: Option<Outcome>,
    pub flags: Vec<Flag>,
    pub program: Option<String>,
    pub proof_tree: Option<ProofTree>,
    pub diagnostics: Vec<String>,
    pub error: Option<String>,
}

impl Prediction {
    fn flag(&mut self, flag: Flag) {
        if !self.flags.contains(&flag) {
            self.flags.push(flag);
        }
    }

    fn fail(mut self, outcome: Outcome, flag: Flag, error: impl Into<Option<String>>) -> Self {
        self.failure = Some(outcome);
        self.flag(flag);
        if let Some(e) = error.into() {
            self.error = Some(e);
        }
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InstanceResult {
    pub instance_id: String,
    pub outcome: Outcome,
    pub answer: Option<String>,
    pub gold_answer: String,
    pub label_correct: bool,
    #[serde(serialize_with = "serialize_ratio")]
    pub similarity: BigRational,
    /// Absent when proof accuracy is not reported.
    pub exact_match: Option<bool>,
    pub distance: Option<u64>,
    pub flags: Vec<Flag>,
    pub depth: Option<u32>,
    pub n_statements: usize,
    pub error: Option<String>,
    pub diagnostics: Vec<String>,
    pub program: Option<String>,
    pub proof_graph: ProofGraph,
    pub proof: Option<crate::engine::ProofRecord>,
}

impl InstanceResult {
    /// The short form written to `instances.jsonl`.
    pub fn summary(&self) -> InstanceSummary<'_> {
        InstanceSummary {
            instance_id: &self.instance_id,
            answer: self.answer.as_deref(),
            gold_answer: &self.gold_answer,
            outcome: self.outcome,
            label_correct: self.label_correct,
            similarity: &self.similarity,
            exact_match: self.exact_match,
            flags: &self.flags,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct InstanceSummary<'a> {
    pub instance_id: &'a str,
    pub answer: Option<&'a str>,
    pub gold_answer: &'a str,
    pub outcome: Outcome,
    pub label_correct: bool,
    #[serde(serialize_with = "serialize_ratio")]
    pub similarity: &'a BigRational,
    pub exact_match: Option<bool>,
    pub flags: &'a [Flag],
}

/// Scores one prediction against its record.
pub fn score_instance(record: &EvalRecord, mut pred: Prediction, cfg: &MetricsConfig) -> InstanceResult {
    let (outcome, label_correct) = match (&pred.failure, &pred.answer) {
        (Some(outcome), _) => (*outcome, false),
        (None, None) => (Outcome::EngineFailure, false),
        (None, Some(answer)) => match score_answer(answer, &record.gold_answer) {
            Ok(true) => (Outcome::Correct, true),
            Ok(false) => (Outcome::WrongAnswer, false),
            Err(_) => {
                pred.flag(Flag::AnswerKindMismatch);
                (Outcome::WrongAnswer, false)
            }
        },
    };
    let empty = [ProofGraph::new()];
    let golds = if record.gold_proofs.is_empty() { &empty[..] } else { &record.gold_proofs[..] };
    let score = best_gold_score(&pred.proof, golds, label_correct, &cfg.costs, cfg.ged_budget)
        .expect("gold list is non-empty");
    if !score.distance_exact {
        pred.flag(Flag::GedUpperBound);
    }
    pred.flags.sort();
    InstanceResult {
        instance_id: record.instance_id.clone(),
        outcome,
        answer: pred.answer.as_ref().map(|a| a.to_string()),
        gold_answer: record.gold_answer.to_string(),
        label_correct,
        similarity: score.similarity,
        exact_match: cfg.exact_match.then_some(score.exact_match),
        distance: score.distance,
        flags: pred.flags,
        depth: record.meta.depth,
        n_statements: record.meta.n_statements,
        error: pred.error,
        diagnostics: pred.diagnostics,
        program: pred.program,
        proof_graph: pred.proof,
        proof: pred.proof_tree.map(|t| t.to_record()),
    }
}

/// Counts and rates over a set of instances. Rates over an empty set are 0.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MetricTuple {
    pub instances: usize,
    pub correct: usize,
    pub wrong_answer: usize,
    pub generation_failure: usize,
    pub engine_failure: usize,
    #[serde(serialize_with = "serialize_ratio")]
    pub answer_accuracy: BigRational,
    #[serde(serialize_with = "serialize_ratio")]
    pub proof_similarity_all: BigRational,
    /// Mean similarity over correctly answered instances.
    #[serde(serialize_with = "serialize_ratio")]
    pub proof_similarity_correct: BigRational,
    #[serde(serialize_with = "serialize_optional_ratio")]
    pub proof_accuracy_all: Option<BigRational>,
    #[serde(serialize_with = "serialize_optional_ratio")]
    pub proof_accuracy_correct: Option<BigRational>,
    #[serde(serialize_with = "serialize_ratio")]
    pub generation_failure_rate: BigRational,
}

fn serialize_optional_ratio<S: serde::Serializer>(r: &Option<BigRational>, s: S) -> Result<S::Ok, S::Error> {
    match r {
        Some(r) => serialize_ratio(r, s),
        None => s.serialize_none(),
    }
}

fn ratio(numer: BigRational, denom: usize) -> BigRational {
    if denom == 0 {
        BigRational::zero()
    } else {
        numer / BigRational::from_integer(BigInt::from(denom))
    }
}

fn count_ratio(numer: usize, denom: usize) -> BigRational {
    ratio(BigRational::from_integer(BigInt::from(numer)), denom)
}

impl MetricTuple {
    pub fn aggregate<'a>(results: impl IntoIterator<Item = &'a InstanceResult>, exact_match: bool) -> MetricTuple {
        let results: Vec<&InstanceResult> = results.into_iter().collect();
        let n = results.len();
        let count = |o: Outcome| results.iter().filter(|r| r.outcome == o).count();
        let correct = count(Outcome::Correct);
        let sum = |it: &mut dyn Iterator<Item = &&InstanceResult>| -> BigRational {
            it.fold(BigRational::zero(), |acc, r| acc + &r.similarity)
        };
        let sim_all = sum(&mut results.iter());
        let sim_correct = sum(&mut results.iter().filter(|r| r.label_correct));
        let exact = |only_correct: bool| {
            let hits = results.iter().filter(|r| (!only_correct || r.label_correct) && r.exact_match == Some(true)).count();
            count_ratio(hits, if only_correct { correct } else { n })
        };
        MetricTuple {
            instances: n,
            correct,
            wrong_answer: count(Outcome::WrongAnswer),
            generation_failure: count(Outcome::GenerationFailure),
            engine_failure: count(Outcome::EngineFailure),
            answer_accuracy: count_ratio(correct, n),
            proof_similarity_all: ratio(sim_all, n),
            proof_similarity_correct: ratio(sim_correct, correct),
            proof_accuracy_all: exact_match.then(|| exact(false)),
            proof_accuracy_correct: exact_match.then(|| exact(true)),
            generation_failure_rate: count_ratio(count(Outcome::GenerationFailure), n),
        }
    }

    /// Zero-ruled proof metrics never exceed answer accuracy.
    pub fn check_upper_bound(&self) -> Result<(), String> {
        if self.proof_similarity_all > self.answer_accuracy {
            return Err(format!(
                "similarity {} > accuracy {}",
                self.proof_similarity_all.to_f64().unwrap_or(f64::NAN),
                self.answer_accuracy.to_f64().unwrap_or(f64::NAN)
            ));
        }
        if self.proof_accuracy_all.as_ref().is_some_and(|p| *p > self.answer_accuracy) {
            return Err("proof accuracy exceeds answer accuracy".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Breakdown {
    /// `depth` or `statements`.
    pub group: String,
    pub bucket: String,
    pub metrics: MetricTuple,
}

pub const DEPTH_BUCKETS: [&str; 7] = ["0", "≤1", "≤2", "≤3", "≤5", ">5", "n/a"];
pub const STATEMENT_BUCKETS: [&str; 2] = ["≤20", ">20"];

/// Each depth falls in exactly one bucket: the tightest listed bound.
pub fn depth_bucket(depth: Option<u32>) -> &'static str {
    match depth {
        None => "n/a",
        Some(0) => "0",
        Some(1) => "≤1",
        Some(2) => "≤2",
        Some(3) => "≤3",
        Some(4 | 5) => "≤5",
        Some(_) => ">5",
    }
}

pub fn statement_bucket(n: usize) -> &'static str {
    if n <= 20 {
        "≤20"
    } else {
        ">20"
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsReport {
    pub dataset: String,
    #[serde(flatten)]
    pub overall: MetricTuple,
    pub breakdowns: Vec<Breakdown>,
    pub rejected: Vec<RecordError>,
    pub warnings: Vec<String>,
    pub per_instance: Vec<InstanceResult>,
}

impl MetricsReport {
    /// Folds per-instance results in the order given. Empty buckets are
    /// omitted from the breakdowns.
    pub fn from_results(
        dataset: &str,
        per_instance: Vec<InstanceResult>,
        exact_match: bool,
        rejected: Vec<RecordError>,
        warnings: Vec<String>,
    ) -> Result<MetricsReport, HarnessError> {
        let overall = MetricTuple::aggregate(&per_instance, exact_match);
        let mut breakdowns = Vec::new();
        for bucket in DEPTH_BUCKETS {
            let members = per_instance.iter().filter(|r| depth_bucket(r.depth) == bucket);
            push_bucket(&mut breakdowns, "depth", bucket, MetricTuple::aggregate(members, exact_match));
        }
        for bucket in STATEMENT_BUCKETS {
            let members = per_instance.iter().filter(|r| statement_bucket(r.n_statements) == bucket);
            push_bucket(&mut breakdowns, "statements", bucket, MetricTuple::aggregate(members, exact_match));
        }
        let report = MetricsReport { dataset: dataset.to_string(), overall, breakdowns, rejected, warnings, per_instance };
        report.check_upper_bound().map_err(HarnessError::InvariantViolated)?;
        Ok(report)
    }

    pub fn check_upper_bound(&self) -> Result<(), String> {
        self.overall.check_upper_bound()?;
        for b in &self.breakdowns {
            b.metrics.check_upper_bound().map_err(|e| format!("{} {}: {e}", b.group, b.bucket))?;
        }
        Ok(())
    }

    pub fn breakdown(&self, group: &str, bucket: &str) -> Option<&MetricTuple> {
        self.breakdowns.iter().find(|b| b.group == group && b.bucket == bucket).map(|b| &b.metrics)
    }
}

fn push_bucket(out: &mut Vec<Breakdown>, group: &str, bucket: &str, metrics: MetricTuple) {
    if metrics.instances > 0 {
        out.push(Breakdown { group: group.into(), bucket: bucket.into(), metrics });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn answer_scoring() {
        let label = |l| PredictedAnswer::Label(l);
        let t = GoldAnswer::Label(AnswerLabel::True);
        assert_eq!(score_answer(&label(AnswerLabel::True), &t), Ok(true));
        assert_eq!(score_answer(&label(AnswerLabel::Unknown), &GoldAnswer::Label(AnswerLabel::False)), Ok(false));
        let g27 = GoldAnswer::Integer(27.into());
        assert_eq!(score_answer(&PredictedAnswer::Number(rat(27, 1)), &g27), Ok(true));
        assert_eq!(score_answer(&PredictedAnswer::Number(rat(27, 2)), &GoldAnswer::Integer(13.into())), Ok(false));
        assert!(score_answer(&label(AnswerLabel::True), &g27).is_err());
        assert!(score_answer(&PredictedAnswer::Other("x".into()), &t).is_err());
    }

    #[test]
    fn buckets_partition_depths() {
        let labels: Vec<_> = (0..8).map(|d| depth_bucket(Some(d))).collect();
        assert_eq!(labels, ["0", "≤1", "≤2", "≤3", "≤5", "≤5", ">5", ">5"]);
        assert_eq!(depth_bucket(None), "n/a");
        assert_eq!((statement_bucket(20), statement_bucket(21)), ("≤20", ">20"));
    }

    fn record(id: &str, depth: Option<u32>) -> EvalRecord {
        EvalRecord {
            instance_id: id.into(),
            context: Vec::new(),
            question: String::new(),
            gold_answer: GoldAnswer::Label(AnswerLabel::True),
            gold_proofs: vec![ProofGraph::new()],
            meta: RecordMeta { depth, n_statements: 0 },
        }
    }

    #[test]
    fn counting_example() {
        let cfg = MetricsConfig::default();
        let mut results: Vec<_> = (0..9)
            .map(|i| {
                let p = Prediction { answer: Some(PredictedAnswer::Label(AnswerLabel::True)), ..Default::default() };
                score_instance(&record(&i.to_string(), Some(i % 3)), p, &cfg)
            })
            .collect();
        let failed = Prediction::default().fail(Outcome::GenerationFailure, Flag::ParseFailed, None);
        results.push(score_instance(&record("9", None), failed, &cfg));
        let report = MetricsReport::from_results("t", results, true, vec![], vec![]).unwrap();
        assert_eq!(report.overall.answer_accuracy, rat(9, 10));
        assert_eq!(report.overall.generation_failure_rate, rat(1, 10));
        assert_eq!(report.overall.proof_similarity_all, rat(9, 10));
        assert_eq!(report.overall.proof_similarity_correct, rat(1, 1));
        let depth_total: usize = report.breakdowns.iter().filter(|b| b.group == "depth").map(|b| b.metrics.instances).sum();
        assert_eq!(depth_total, 10);
        assert_eq!(report.breakdown("depth", "n/a").unwrap().generation_failure, 1);
    }

    #[test]
    fn empty_report() {
        let report = MetricsReport::from_results("t", vec![], true, vec![], vec![]).unwrap();
        assert_eq!(report.overall.instances, 0);
        assert_eq!(report.overall.answer_accuracy, BigRational::zero());
        assert!(report.breakdowns.is_empty());
    }
}
