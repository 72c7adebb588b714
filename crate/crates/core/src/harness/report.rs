use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use num_rational::BigRational;
use serde::Serialize;

use super::{Breakdown, HarnessError, MetricTuple, MetricsReport, RecordError};
use crate::metrics::ratio_to_f64;

/// The report minus the per-instance list, in field order.
#[derive(Serialize)]
struct Summary<'a> {
    dataset: &'a str,
    #[serde(flatten)]
    overall: &'a MetricTuple,
    breakdowns: &'a [Breakdown],
    rejected: &'a [RecordError],
    warnings: &'a [String],
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.display().to_string(), source }
}

fn write(path: &Path, contents: &str) -> Result<(), HarnessError> {
    std::fs::write(path, contents).map_err(io_error(path))
}

fn percent(r: &BigRational) -> String {
    format!("{:.2}", ratio_to_f64(r) * 100.0)
}

fn row(out: &mut String, name: &str, m: &MetricTuple) {
    let optional = |r: &Option<BigRational>| r.as_ref().map(percent).unwrap_or_else(|| "-".into());
    let _ = writeln!(
        out,
        "{name:<16} {:>6} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}",
        m.instances,
        percent(&m.answer_accuracy),
        percent(&m.proof_similarity_all),
        percent(&m.proof_similarity_correct),
        optional(&m.proof_accuracy_all),
        optional(&m.proof_accuracy_correct),
        percent(&m.generation_failure_rate),
        m.wrong_answer,
        m.engine_failure,
    );
}

/// Human-readable summary table. Rates are percentages.
pub fn render_summary(r: &MetricsReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "dataset: {}", r.dataset);
    let _ = writeln!(out, "instances: {} (rejected records: {})", r.overall.instances, r.rejected.len());
    for w in &r.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "{:<16} {:>6} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}",
        "bucket", "n", "acc", "sim_all", "sim_cor", "pacc_all", "pacc_cor", "gen_fail", "wrong", "eng_fail"
    );
    row(&mut out, "all", &r.overall);
    for b in &r.breakdowns {
        row(&mut out, &format!("{} {}", b.group, b.bucket), &b.metrics);
    }
    out
}

/// File name for an instance id: anything outside `[A-Za-z0-9._-]` becomes
/// `_`, and clashes get a numeric suffix.
fn file_stem(id: &str, taken: &mut HashSet<String>) -> String {
    let base: String = id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') { c } else { '_' })
        .collect();
    let base = if base.is_empty() || base.starts_with('.') { format!("_{base}") } else { base };
    let mut stem = base.clone();
    let mut n = 2;
    while !taken.insert(stem.clone()) {
        stem = format!("{base}-{n}");
        n += 1;
    }
    stem
}

/// Writes `summary.txt`, `summary.json`, `instances.jsonl` and one
/// `instances/<id>.json` per record into `dir`.
pub fn emit_report(r: &MetricsReport, dir: &Path) -> Result<(), HarnessError> {
    let instances_dir = dir.join("instances");
    std::fs::create_dir_all(&instances_dir).map_err(io_error(&instances_dir))?;
    write(&dir.join("summary.txt"), &render_summary(r))?;

    let summary = Summary {
        dataset: &r.dataset,
        overall: &r.overall,
        breakdowns: &r.breakdowns,
        rejected: &r.rejected,
        warnings: &r.warnings,
    };
    let mut json = serde_json::to_string_pretty(&summary).expect("report serializes");
    json.push('\n');
    write(&dir.join("summary.json"), &json)?;

    let mut lines = String::new();
    let mut taken = HashSet::new();
    for instance in &r.per_instance {
        lines.push_str(&serde_json::to_string(&instance.summary()).expect("instance serializes"));
        lines.push('\n');
        let path = instances_dir.join(format!("{}.json", file_stem(&instance.instance_id, &mut taken)));
        let mut body = serde_json::to_string_pretty(instance).expect("instance serializes");
        body.push('\n');
        write(&path, &body)?;
    }
    write(&dir.join("instances.jsonl"), &lines)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stems_are_safe_and_unique() {
        let mut taken = HashSet::new();
        assert_eq!(file_stem("a/b", &mut taken), "a_b");
        assert_eq!(file_stem("a:b", &mut taken), "a_b-2");
        assert_eq!(file_stem("..", &mut taken), "_..");
    }

    #[test]
    fn empty_report_files() {
        let dir = tempfile::tempdir().unwrap();
        let r = MetricsReport::from_results("prontoqa", vec![], true, vec![], vec!["dataset is empty".into()]).unwrap();
        emit_report(&r, dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join("summary.txt")).unwrap();
        assert!(text.contains("instances: 0"));
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
        assert_eq!(json["instances"], 0);
        assert_eq!(json["answer_accuracy"], 0.0);
        assert_eq!(std::fs::read_dir(dir.path().join("instances")).unwrap().count(), 0);
    }
}
