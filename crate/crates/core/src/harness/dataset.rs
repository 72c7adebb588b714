//! Dataset adapters. Each reads one JSON object per line and produces the
//! same record type; nothing else in the harness knows about the formats.

use std::fmt;
use std::path::Path;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::gold::{chain_of_thought_graph, parse_proofwriter_proofs, split_sentences};
use crate::engine::AnswerLabel;
use crate::metrics::{Labeling, ProofGraph};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetFormat {
    #[serde(rename = "proofwriter")]
    ProofWriter,
    #[serde(rename = "prontoqa")]
    ProntoQa,
    #[serde(rename = "gsm8k_proofs")]
    Gsm8kProofs,
}

impl DatasetFormat {
    pub fn labeling(self) -> Labeling {
        match self {
            DatasetFormat::ProofWriter | DatasetFormat::ProntoQa => Labeling::ByProvenance,
            DatasetFormat::Gsm8kProofs => Labeling::ByRender,
        }
    }

    pub fn is_arithmetic(self) -> bool {
        self == DatasetFormat::Gsm8kProofs
    }

    pub fn name(self) -> &'static str {
        match self {
            DatasetFormat::ProofWriter => "proofwriter",
            DatasetFormat::ProntoQa => "prontoqa",
            DatasetFormat::Gsm8kProofs => "gsm8k_proofs",
        }
    }
}

impl fmt::Display for DatasetFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for DatasetFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "proofwriter" => Ok(DatasetFormat::ProofWriter),
            "prontoqa" => Ok(DatasetFormat::ProntoQa),
            "gsm8k_proofs" | "gsm8k" => Ok(DatasetFormat::Gsm8kProofs),
            other => Err(format!("unknown dataset format `{other}` (proofwriter, prontoqa, gsm8k_proofs)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Statement {
    pub id: String,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GoldAnswer {
    Label(AnswerLabel),
    Integer(#[serde(with = "decimal")] BigInt),
}

/// Integers as decimal strings, so large values survive JSON round trips.
mod decimal {
    use num_bigint::BigInt;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(n: &BigInt, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&n.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigInt, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        super::parse_integer_answer(&v).ok_or_else(|| serde::de::Error::custom("expected an integer"))
    }
}

impl fmt::Display for GoldAnswer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GoldAnswer::Label(l) => write!(f, "{l}"),
            GoldAnswer::Integer(n) => write!(f, "{n}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordMeta {
    pub depth: Option<u32>,
    pub n_statements: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub instance_id: String,
    pub context: Vec<Statement>,
    pub question: String,
    pub gold_answer: GoldAnswer,
    pub gold_proofs: Vec<ProofGraph>,
    pub meta: RecordMeta,
}

impl EvalRecord {
    /// Problem text shown to the generator, in the shape the shipped
    /// demonstrations use.
    pub fn problem_text(&self, format: DatasetFormat) -> String {
        if format.is_arithmetic() {
            return format!("Question: {}", self.question);
        }
        let mut out = String::from("Context:\n");
        for s in &self.context {
            out.push_str(&format!("[{}] {}\n", s.id, s.text));
        }
        out.push_str(&format!("Question: {}", self.question));
        out
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Unreadable { path: String, source: std::io::Error },
}

/// A record that could not be loaded; the rest of the file still loads.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RecordError {
    pub line: usize,
    pub instance_id: Option<String>,
    pub message: String,
}

impl fmt::Display for RecordError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.instance_id {
            Some(id) => write!(f, "line {} ({id}): {}", self.line, self.message),
            None => write!(f, "line {}: {}", self.line, self.message),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Dataset {
    pub records: Vec<EvalRecord>,
    pub rejected: Vec<RecordError>,
    pub warnings: Vec<String>,
}

pub fn load_dataset(path: &Path, format: DatasetFormat) -> Result<Dataset, LoadError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| LoadError::Unreadable { path: path.display().to_string(), source })?;
    Ok(parse_dataset(&text, format))
}

/// Parses JSON lines; blank lines are skipped.
pub fn parse_dataset(text: &str, format: DatasetFormat) -> Dataset {
    let mut out = Dataset::default();
    for (index, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = index + 1;
        let value: Value = match serde_json::from_str(line) {
            Ok(v) => v,
            Err(e) => {
                out.rejected.push(RecordError { line: line_no, instance_id: None, message: format!("invalid JSON: {e}") });
                continue;
            }
        };
        let parsed = match format {
            DatasetFormat::ProofWriter => proofwriter(&value, line_no),
            DatasetFormat::ProntoQa => prontoqa(&value, line_no).map(|r| vec![Ok(r)]),
            DatasetFormat::Gsm8kProofs => gsm8k(&value, line_no).map(|r| vec![Ok(r)]),
        };
        match parsed {
            Ok(records) => {
                for r in records {
                    match r {
                        Ok(record) => out.records.push(record),
                        Err(e) => out.rejected.push(e),
                    }
                }
            }
            Err(e) => out.rejected.push(e),
        }
    }
    if out.records.is_empty() && out.rejected.is_empty() {
        out.warnings.push("dataset is empty".into());
    }
    out
}

type Parsed<T> = Result<T, RecordError>;

fn instance_id(v: &Value) -> Option<String> {
    match v.get("id").or_else(|| v.get("instance_id"))? {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn error(line: usize, id: Option<&str>, message: impl Into<String>) -> RecordError {
    RecordError { line, instance_id: id.map(str::to_string), message: message.into() }
}

fn text_field<'a>(v: &'a Value, keys: &[&str]) -> Option<&'a str> {
    keys.iter().find_map(|k| v.get(*k).and_then(Value::as_str))
}

fn depth_field(v: &Value) -> Option<u32> {
    ["depth", "QDep", "qdep"].iter().find_map(|k| v.get(*k)).and_then(|d| match d {
        Value::Number(n) => n.as_u64().and_then(|n| u32::try_from(n).ok()),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    })
}

fn label_answer(v: &Value) -> Option<AnswerLabel> {
    match v {
        Value::Bool(true) => Some(AnswerLabel::True),
        Value::Bool(false) => Some(AnswerLabel::False),
        Value::String(s) => s.parse().ok(),
        _ => None,
    }
}

fn explicit_golds(v: &Value, line: usize, id: &str) -> Parsed<Option<Vec<ProofGraph>>> {
    let Some(raw) = v.get("gold_proofs") else { return Ok(None) };
    let graphs: Vec<ProofGraph> = serde_json::from_value(raw.clone())
        .map_err(|e| error(line, Some(id), format!("malformed gold_proofs: {e}")))?;
    for g in &graphs {
        g.validate().map_err(|e| error(line, Some(id), e.to_string()))?;
    }
    Ok(Some(graphs))
}

/// Accepts either `context: [{id, text}]` or ProofWriter's `triples` and
/// `rules` maps of `{id: {text}}`.
fn proofwriter_context(v: &Value) -> Option<Vec<Statement>> {
    if let Some(list) = v.get("context").and_then(Value::as_array) {
        return list
            .iter()
            .map(|s| Some(Statement { id: s.get("id")?.as_str()?.to_string(), text: s.get("text")?.as_str()?.to_string() }))
            .collect();
    }
    let mut out = Vec::new();
    for key in ["triples", "rules"] {
        if let Some(map) = v.get(key).and_then(Value::as_object) {
            for (id, entry) in map {
                let text = entry.get("text").and_then(Value::as_str).or_else(|| entry.as_str())?;
                out.push(Statement { id: id.clone(), text: text.to_string() });
            }
        }
    }
    (!out.is_empty()).then_some(out)
}

/// One record per line, or one theory with a `questions` map that expands
/// into `<id>-<question key>` records.
fn proofwriter(v: &Value, line: usize) -> Parsed<Vec<Parsed<EvalRecord>>> {
    let id = instance_id(v).ok_or_else(|| error(line, None, "missing `id`"))?;
    let context = proofwriter_context(v).ok_or_else(|| error(line, Some(&id), "missing or malformed context"))?;
    let questions: Vec<(String, &Value)> = match v.get("questions").and_then(Value::as_object) {
        Some(map) => map.iter().map(|(k, q)| (format!("{id}-{k}"), q)).collect(),
        None => vec![(id.clone(), v)],
    };
    Ok(questions
        .into_iter()
        .map(|(qid, q)| {
            let question = text_field(q, &["question", "query"]).ok_or_else(|| error(line, Some(&qid), "missing `question`"))?;
            let answer = q
                .get("answer")
                .and_then(label_answer)
                .ok_or_else(|| error(line, Some(&qid), "missing or unrecognized `answer`"))?;
            let gold_proofs = match explicit_golds(q, line, &qid)? {
                Some(g) => g,
                None => match q.get("proofs") {
                    Some(Value::String(s)) => parse_proofwriter_proofs(s).map_err(|e| error(line, Some(&qid), e))?,
                    Some(Value::Array(items)) => {
                        let mut graphs = Vec::new();
                        for item in items {
                            let s = item.as_str().ok_or_else(|| error(line, Some(&qid), "non-string proof"))?;
                            graphs.extend(parse_proofwriter_proofs(s).map_err(|e| error(line, Some(&qid), e))?);
                        }
                        graphs
                    }
                    _ => Vec::new(),
                },
            };
            Ok(EvalRecord {
                instance_id: qid,
                meta: RecordMeta { depth: depth_field(q), n_statements: context.len() },
                context: context.clone(),
                question: question.to_string(),
                gold_answer: GoldAnswer::Label(answer),
                gold_proofs: or_empty(gold_proofs),
            })
        })
        .collect())
}

/// An unannotated or unprovable instance is compared against the empty
/// graph.
fn or_empty(golds: Vec<ProofGraph>) -> Vec<ProofGraph> {
    if golds.is_empty() {
        vec![ProofGraph::new()]
    } else {
        golds
    }
}

fn numbered(sentences: Vec<String>) -> Vec<Statement> {
    sentences.into_iter().enumerate().map(|(i, text)| Statement { id: format!("s{}", i + 1), text }).collect()
}

fn prontoqa(v: &Value, line: usize) -> Parsed<EvalRecord> {
    let id = instance_id(v).ok_or_else(|| error(line, None, "missing `id`"))?;
    let context = match v.get("context") {
        Some(Value::String(s)) => numbered(split_sentences(s)),
        Some(Value::Array(items)) => numbered(items.iter().filter_map(Value::as_str).map(str::to_string).collect()),
        _ => return Err(error(line, Some(&id), "missing `context`")),
    };
    let question = text_field(v, &["question", "query"]).ok_or_else(|| error(line, Some(&id), "missing `question`"))?;
    let answer = v
        .get("answer")
        .and_then(label_answer)
        .ok_or_else(|| error(line, Some(&id), "missing or unrecognized `answer`"))?;
    let gold_proofs = match explicit_golds(v, line, &id)? {
        Some(g) => g,
        None => match v.get("chain_of_thought") {
            Some(Value::Array(steps)) => {
                let steps: Vec<String> = steps.iter().filter_map(Value::as_str).map(str::to_string).collect();
                let pairs: Vec<(String, String)> = context.iter().map(|s| (s.id.clone(), s.text.clone())).collect();
                let g = chain_of_thought_graph(&steps, &pairs);
                if g.is_empty() {
                    Vec::new()
                } else {
                    vec![g]
                }
            }
            _ => Vec::new(),
        },
    };
    Ok(EvalRecord {
        instance_id: id,
        meta: RecordMeta { depth: depth_field(v), n_statements: context.len() },
        context,
        question: question.to_string(),
        gold_answer: GoldAnswer::Label(answer),
        gold_proofs: or_empty(gold_proofs),
    })
}

/// `72`, `"72"`, `"1,234"` or a worked solution ending in `#### 72`.
pub fn parse_integer_answer(v: &Value) -> Option<BigInt> {
    match v {
        Value::Number(n) => n.as_i64().map(BigInt::from).or_else(|| n.to_string().parse().ok()),
        Value::String(s) => {
            let tail = s.rsplit("####").next().unwrap_or(s);
            tail.trim().replace(',', "").parse().ok()
        }
        _ => None,
    }
}

fn gsm8k(v: &Value, line: usize) -> Parsed<EvalRecord> {
    let id = instance_id(v).ok_or_else(|| error(line, None, "missing `id`"))?;
    let question = text_field(v, &["question"]).ok_or_else(|| error(line, Some(&id), "missing `question`"))?;
    let answer = v
        .get("answer")
        .and_then(parse_integer_answer)
        .ok_or_else(|| error(line, Some(&id), "missing or non-integer `answer`"))?;
    let gold_proofs = explicit_golds(v, line, &id)?
        .unwrap_or_default()
        .into_iter()
        .map(|g| g.canonicalized())
        .collect();
    let context = numbered(split_sentences(question));
    Ok(EvalRecord {
        instance_id: id,
        meta: RecordMeta { depth: depth_field(v), n_statements: context.len() },
        context,
        question: question.to_string(),
        gold_answer: GoldAnswer::Integer(answer),
        gold_proofs: or_empty(gold_proofs),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn proofwriter_flat_and_nested() {
        let text = r#"{"id":"p1","context":[{"id":"triple1","text":"Fiona is red."}],"question":"Fiona is red.","answer":true,"depth":0,"proofs":"[(triple1)]"}
{"id":"p2","triples":{"triple1":{"text":"Bob is big."}},"rules":{"rule1":{"text":"Big things are round."}},"questions":{"Q1":{"question":"Bob is round.","answer":"True","QDep":1,"proofs":"[(((triple1) -> rule1))]"},"Q2":{"question":"Bob is red.","answer":"Unknown","QDep":0}}}
{"id":"p3","context":[],"question":"x"}"#;
        let d = parse_dataset(text, DatasetFormat::ProofWriter);
        let ids: Vec<_> = d.records.iter().map(|r| r.instance_id.as_str()).collect();
        assert_eq!(ids, ["p1", "p2-Q1", "p2-Q2"]);
        assert_eq!(d.records[1].gold_proofs[0].edges.len(), 1);
        assert_eq!(d.records[2].gold_proofs, vec![ProofGraph::new()]);
        assert_eq!(d.records[1].meta, RecordMeta { depth: Some(1), n_statements: 2 });
        assert_eq!(d.rejected.len(), 1);
        assert_eq!(d.rejected[0].line, 3);
    }

    #[test]
    fn prontoqa_record() {
        let text = r#"{"id":"q1","context":"Every wumpus is a tumpus. Max is a wumpus.","question":"True or false: Max is a tumpus.","answer":"True","chain_of_thought":["Max is a wumpus.","Every wumpus is a tumpus.","Max is a tumpus."]}"#;
        let d = parse_dataset(text, DatasetFormat::ProntoQa);
        let r = &d.records[0];
        assert_eq!(r.context[1], Statement { id: "s2".into(), text: "Max is a wumpus.".into() });
        assert_eq!(r.gold_proofs[0].labeled_edges().into_iter().collect::<Vec<_>>(), [("s2", "s1")]);
    }

    #[test]
    fn gsm8k_answers() {
        let text = "{\"id\":\"g1\",\"question\":\"A has 3. B has 4. How many?\",\"answer\":\"3 + 4 = 7\\n#### 7\"}\n\n{\"id\":\"g2\",\"question\":\"q\",\"answer\":\"1,234\"}\n{\"id\":\"g3\",\"question\":\"q\"}";
        let d = parse_dataset(text, DatasetFormat::Gsm8kProofs);
        assert_eq!(d.records[0].gold_answer, GoldAnswer::Integer(7.into()));
        assert_eq!(d.records[0].meta.n_statements, 3);
        assert_eq!(d.records[1].gold_answer, GoldAnswer::Integer(1234.into()));
        assert_eq!(d.rejected.len(), 1);
    }

    #[test]
    fn empty_file_warns() {
        let d = parse_dataset("", DatasetFormat::ProntoQa);
        assert!(d.records.is_empty());
        assert_eq!(d.warnings.len(), 1);
    }
}
