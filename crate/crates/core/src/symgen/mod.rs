//! Few-shot program generation: prompt assembly, completion, and extraction
//! of the returned program.

mod http;
mod templates;

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::parser::{parse_program, ParseDiagnostic, Program, SourceProgram};

pub use http::{HttpGenerator, ServiceConfig, ENDPOINT_ENV, TOKEN_ENV};
pub use templates::TemplateKind;

pub const DEFAULT_RETRIES: u32 = 2;
pub const PROBLEM_MARKER: &str = "### Problem";
pub const PROGRAM_MARKER: &str = "### Program";
const FENCE: &str = "```";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demonstration {
    pub problem: String,
    pub program: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PromptTemplate {
    header: Option<String>,
    demonstrations: Vec<Demonstration>,
    stop_markers: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("template has no demonstrations")]
    EmptyTemplate,
    #[error("demonstration {index} does not parse: {first}")]
    InvalidDemonstration { index: usize, first: String, diagnostics: Vec<ParseDiagnostic> },
    #[error("malformed template file: {0}")]
    Malformed(String),
}

#[derive(Deserialize)]
struct TemplateFile {
    #[serde(default)]
    header: Option<String>,
    demonstrations: Vec<Demonstration>,
    #[serde(default)]
    stop_markers: Option<Vec<String>>,
}

impl PromptTemplate {
    /// Validates every demonstration program up front.
    pub fn new(
        header: Option<String>,
        demonstrations: Vec<Demonstration>,
        stop_markers: Vec<String>,
    ) -> Result<Self, TemplateError> {
        if demonstrations.is_empty() {
            return Err(TemplateError::EmptyTemplate);
        }
        for (index, demo) in demonstrations.iter().enumerate() {
            if let Err(diagnostics) = parse_program(&SourceProgram::new(&demo.program, format!("demo-{index}"))) {
                let first = diagnostics.first().map(|d| d.to_string()).unwrap_or_default();
                return Err(TemplateError::InvalidDemonstration { index, first, diagnostics });
            }
        }
        Ok(PromptTemplate { header, demonstrations, stop_markers })
    }

    /// Reads `{header?, demonstrations: [{problem, program}], stop_markers?}`.
    pub fn from_json(text: &str) -> Result<Self, TemplateError> {
        let file: TemplateFile = serde_json::from_str(text).map_err(|e| TemplateError::Malformed(e.to_string()))?;
        let stops = file.stop_markers.unwrap_or_else(|| vec![PROBLEM_MARKER.to_string()]);
        PromptTemplate::new(file.header, file.demonstrations, stops)
    }

    pub fn builtin(kind: TemplateKind) -> Self {
        let demonstrations = kind
            .demonstrations()
            .iter()
            .map(|(problem, program)| Demonstration { problem: problem.to_string(), program: program.to_string() })
            .collect();
        PromptTemplate::new(None, demonstrations, vec![PROBLEM_MARKER.to_string()])
            .expect("built-in templates are valid")
    }

    pub fn demonstrations(&self) -> &[Demonstration] {
        &self.demonstrations
    }

    pub fn header(&self) -> Option<&str> {
        self.header.as_deref()
    }

    pub fn stop_markers(&self) -> &[String] {
        &self.stop_markers
    }
}

fn push_problem(out: &mut String, problem: &str) {
    out.push_str(PROBLEM_MARKER);
    out.push('\n');
    out.push_str(problem.trim_end());
    out.push('\n');
    out.push_str(PROGRAM_MARKER);
    out.push('\n');
    out.push_str(FENCE);
    out.push_str("prolog\n");
}

/// Header, demonstrations, then the target problem with an open program
/// fence for the model to complete.
pub fn build_prompt(template: &PromptTemplate, problem: &str) -> Result<String, TemplateError> {
    if template.demonstrations.is_empty() {
        return Err(TemplateError::EmptyTemplate);
    }
    let mut out = String::new();
    if let Some(header) = &template.header {
        out.push_str(header.trim_end());
        out.push_str("\n\n");
    }
    for demo in &template.demonstrations {
        push_problem(&mut out, &demo.problem);
        out.push_str(demo.program.trim_end());
        out.push('\n');
        out.push_str(FENCE);
        out.push_str("\n\n");
    }
    push_problem(&mut out, problem);
    Ok(out)
}

/// Pulls the program out of a completion. The prompt ends inside an open
/// fence, so a bare closing fence after some code ends the program; a fence
/// that opens a new block (language tag, or nothing before it) starts one.
pub fn extract_program(completion: &str, stop_markers: &[String]) -> Option<String> {
    let mut text = completion;
    for marker in stop_markers.iter().filter(|m| !m.is_empty()) {
        if let Some(i) = text.find(marker.as_str()) {
            text = &text[..i];
        }
    }
    let mut offset = 0;
    let mut fences = Vec::new();
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim_start();
        if let Some(info) = trimmed.strip_prefix(FENCE) {
            fences.push((offset, offset + line.len(), info.trim().to_string()));
        }
        offset += line.len();
    }
    let (start, after, info) = fences.first()?.clone();
    let before = &text[..start];
    if info.is_empty() && !before.trim().is_empty() {
        return Some(before.trim().to_string());
    }
    let (end, _, _) = fences.get(1)?;
    Some(text[after..*end].trim().to_string())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenerationStatus {
    Ok,
    ExtractionFailed,
    ParseFailed,
    ServiceError,
}

impl fmt::Display for GenerationStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GenerationStatus::Ok => "ok",
            GenerationStatus::ExtractionFailed => "extraction_failed",
            GenerationStatus::ParseFailed => "parse_failed",
            GenerationStatus::ServiceError => "service_error",
        })
    }
}

#[derive(Clone, Debug)]
pub struct GenerationResult {
    pub raw_text: String,
    pub extracted_program: Option<SourceProgram>,
    /// Present exactly when `status` is `Ok`.
    pub program: Option<Program>,
    pub status: GenerationStatus,
    pub attempts: u32,
    pub diagnostics: Vec<ParseDiagnostic>,
    pub error: Option<String>,
}

impl GenerationResult {
    fn failure(status: GenerationStatus, attempts: u32, error: impl Into<String>) -> Self {
        GenerationResult {
            raw_text: String::new(),
            extracted_program: None,
            program: None,
            status,
            attempts,
            diagnostics: Vec::new(),
            error: Some(error.into()),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == GenerationStatus::Ok
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct ServiceError(pub String);

/// A single-turn text completion backend.
pub trait TextGenerator: Send + Sync {
    fn complete(&self, prompt: &str, stop: &[String]) -> Result<String, ServiceError>;
}

fn interpret(raw: String, stop_markers: &[String], origin: &str, attempts: u32) -> GenerationResult {
    let Some(code) = extract_program(&raw, stop_markers) else {
        return GenerationResult {
            error: Some("no code block in completion".into()),
            raw_text: raw,
            ..GenerationResult::failure(GenerationStatus::ExtractionFailed, attempts, "")
        };
    };
    let source = SourceProgram::new(code, origin);
    match parse_program(&source) {
        Ok(program) => GenerationResult {
            raw_text: raw,
            extracted_program: Some(source),
            diagnostics: program.warnings.clone(),
            program: Some(program),
            status: GenerationStatus::Ok,
            attempts,
            error: None,
        },
        Err(diagnostics) => GenerationResult {
            raw_text: raw,
            extracted_program: Some(source),
            program: None,
            status: GenerationStatus::ParseFailed,
            attempts,
            error: diagnostics.first().map(|d| d.to_string()),
            diagnostics,
        },
    }
}

/// Calls the generator with the same prompt up to `1 + retries` times until
/// a completion yields a parseable program. Never fails past this point:
/// the last failure is reported in the result.
pub fn generate_program(
    generator: &dyn TextGenerator,
    prompt: &str,
    stop_markers: &[String],
    retries: u32,
    origin: &str,
) -> GenerationResult {
    let mut last = None;
    for attempt in 1..=retries.saturating_add(1) {
        let result = match generator.complete(prompt, stop_markers) {
            Ok(raw) => interpret(raw, stop_markers, origin, attempt),
            Err(e) => GenerationResult::failure(GenerationStatus::ServiceError, attempt, e.0),
        };
        if result.is_ok() {
            return result;
        }
        last = Some(result);
    }
    last.expect("at least one attempt is made")
}

/// Reads `<dir>/<instance_id>.pl` (or `<dir>/<instance_id>`). Files may hold
/// either a bare program or a raw completion with a fenced block.
pub fn load_offline(dir: &Path, instance_id: &str) -> GenerationResult {
    let candidates = [dir.join(format!("{instance_id}.pl")), dir.join(instance_id)];
    let Some(path) = candidates.iter().find(|p| p.is_file()) else {
        return GenerationResult::failure(
            GenerationStatus::ServiceError,
            1,
            format!("no program file for `{instance_id}` in {}", dir.display()),
        );
    };
    let raw = match std::fs::read_to_string(path) {
        Ok(text) => text,
        Err(e) => return GenerationResult::failure(GenerationStatus::ServiceError, 1, format!("{}: {e}", path.display())),
    };
    if raw.contains(FENCE) {
        return interpret(raw, &[], instance_id, 1);
    }
    let source = SourceProgram::new(raw.clone(), instance_id);
    match parse_program(&source) {
        Ok(program) => GenerationResult {
            raw_text: raw,
            extracted_program: Some(source),
            diagnostics: program.warnings.clone(),
            program: Some(program),
            status: GenerationStatus::Ok,
            attempts: 1,
            error: None,
        },
        Err(diagnostics) => GenerationResult {
            raw_text: raw,
            extracted_program: Some(source),
            program: None,
            status: GenerationStatus::ParseFailed,
            attempts: 1,
            error: diagnostics.first().map(|d| d.to_string()),
            diagnostics,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicU32, Ordering};
    use std::sync::Mutex;

    struct Scripted {
        replies: Mutex<Vec<Result<String, ServiceError>>>,
        calls: AtomicU32,
    }

    impl Scripted {
        fn new(replies: Vec<Result<&str, &str>>) -> Self {
            let replies = replies
                .into_iter()
                .rev()
                .map(|r| r.map(str::to_string).map_err(|e| ServiceError(e.to_string())))
                .collect();
            Scripted { replies: Mutex::new(replies), calls: AtomicU32::new(0) }
        }
    }

    impl TextGenerator for Scripted {
        fn complete(&self, _prompt: &str, _stop: &[String]) -> Result<String, ServiceError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.replies.lock().unwrap().pop().unwrap_or_else(|| Err(ServiceError("no more replies".into())))
        }
    }

    fn one_demo() -> PromptTemplate {
        PromptTemplate::new(
            None,
            vec![Demonstration { problem: "Fiona is green.".into(), program: "green(fiona).".into() }],
            vec![PROBLEM_MARKER.into()],
        )
        .unwrap()
    }

    #[test]
    fn prompt_structure() {
        let prompt = build_prompt(&one_demo(), "Bob is red.").unwrap();
        assert_eq!(prompt.matches(PROBLEM_MARKER).count(), 2);
        assert_eq!(prompt.matches(FENCE).count(), 3);
        assert!(prompt.ends_with("```prolog\n"));
        assert_eq!(prompt, build_prompt(&one_demo(), "Bob is red.").unwrap());
    }

    #[test]
    fn demonstrations_keep_order() {
        let t = PromptTemplate::new(
            Some("Translate.".into()),
            vec![
                Demonstration { problem: "first".into(), program: "a.".into() },
                Demonstration { problem: "second".into(), program: "b.".into() },
            ],
            vec![],
        )
        .unwrap();
        let prompt = build_prompt(&t, "third").unwrap();
        assert!(prompt.starts_with("Translate.\n\n"));
        assert!(prompt.find("first").unwrap() < prompt.find("second").unwrap());
    }

    #[test]
    fn template_validation() {
        let bad = vec![Demonstration { problem: "x".into(), program: "green(fiona".into() }];
        assert!(matches!(PromptTemplate::new(None, bad, vec![]), Err(TemplateError::InvalidDemonstration { .. })));
        assert_eq!(PromptTemplate::new(None, vec![], vec![]), Err(TemplateError::EmptyTemplate));
        assert_eq!(TemplateKind::Logical.demonstrations().len(), 2);
        assert_eq!(TemplateKind::Arithmetic.demonstrations().len(), 5);
        PromptTemplate::builtin(TemplateKind::Logical);
        PromptTemplate::builtin(TemplateKind::Arithmetic);
    }

    #[test]
    fn extraction_rules() {
        let stops = vec![PROBLEM_MARKER.to_string()];
        assert_eq!(extract_program("green(fiona).\n```\n### Problem\nmore", &stops).unwrap(), "green(fiona).");
        assert_eq!(extract_program("Sure:\n```prolog\ngreen(fiona).\n```\nDone.", &stops).unwrap(), "green(fiona).");
        assert_eq!(extract_program("```\na.\n```\n```\nb.\n```", &stops).unwrap(), "a.");
        assert_eq!(extract_program("green(fiona).", &stops), None);
        assert_eq!(extract_program("```prolog\ngreen(fiona).", &stops), None);
    }

    #[test]
    fn generation_statuses() {
        let g = Scripted::new(vec![Ok("green(fiona).\n```")]);
        let r = generate_program(&g, "p", &[], 2, "i1");
        assert_eq!(r.status, GenerationStatus::Ok);
        assert_eq!(r.program.unwrap().kb.len(), 1);

        let g = Scripted::new(vec![Ok("no code"), Ok("no code"), Ok("no code")]);
        let r = generate_program(&g, "p", &[], 2, "i1");
        assert_eq!((r.status, r.attempts), (GenerationStatus::ExtractionFailed, 3));

        let g = Scripted::new(vec![Err("connection refused"), Err("connection refused"), Err("connection refused")]);
        let r = generate_program(&g, "p", &[], 2, "i1");
        assert_eq!(r.status, GenerationStatus::ServiceError);
        assert_eq!(g.calls.load(Ordering::SeqCst), 3);

        let g = Scripted::new(vec![Ok("green(fiona\n```"), Ok("green(fiona).\n```")]);
        let r = generate_program(&g, "p", &[], 2, "i1");
        assert_eq!((r.status, r.attempts), (GenerationStatus::Ok, 2));

        let g = Scripted::new(vec![Ok("green(fiona\n```")]);
        let r = generate_program(&g, "p", &[], 0, "i1");
        assert_eq!(r.status, GenerationStatus::ParseFailed);
        assert!(!r.diagnostics.is_empty());
    }

    #[test]
    fn offline_programs() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("good.pl"), "% id: s1\ngreen(fiona).\n").unwrap();
        std::fs::write(dir.path().join("bad.pl"), "green(fiona\n").unwrap();
        assert_eq!(load_offline(dir.path(), "good").status, GenerationStatus::Ok);
        let bad = load_offline(dir.path(), "bad");
        assert_eq!(bad.status, GenerationStatus::ParseFailed);
        assert!(!bad.diagnostics.is_empty());
        assert_eq!(load_offline(dir.path(), "missing").status, GenerationStatus::ServiceError);
    }
}
