use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use prooflog::engine::{check_proof, ProofRecord, ProofTree, SearchConfig, Strategy};
use prooflog::harness::{
    emit_report, load_dataset, parse_predictions, render_summary, run_eval, score_predictions, DatasetFormat,
    MetricsConfig, MetricsReport, ProgramSource,
};
use prooflog::symgen::{HttpGenerator, PromptTemplate, ServiceConfig, TemplateKind};
use prooflog::{parse_program, parse_query, solve, SourceProgram};

#[derive(Parser)]
#[command(name = "prooflog", version, about = "Prolog-subset engine with proof DAGs and proof-level evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one query against a program and print its solutions and proofs.
    Solve {
        program: PathBuf,
        /// Query to run instead of the program's first `?-` directive.
        #[arg(long)]
        query: Option<String>,
        #[arg(long, value_enum, default_value = "text")]
        output: Output,
        #[command(flatten)]
        engine: EngineArgs,
    },
    /// Evaluate a dataset end to end.
    Eval {
        #[command(flatten)]
        data: DataArgs,
        /// Directory of `<instance_id>.pl` programs (offline mode).
        #[arg(long, conflicts_with = "service_config")]
        programs_dir: Option<PathBuf>,
        /// JSON service settings; credentials come from the environment.
        #[arg(long)]
        service_config: Option<PathBuf>,
        /// JSON prompt template replacing the built-in demonstrations.
        #[arg(long)]
        template: Option<PathBuf>,
        /// Worker threads (defaults to all cores).
        #[arg(long)]
        workers: Option<usize>,
        #[command(flatten)]
        engine: EngineArgs,
    },
    /// Score a predictions file (`{"id", "answer", "proof", "status"}` per line).
    Score {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        predictions: PathBuf,
    },
    /// Replay a proof file against a program.
    Check {
        program: PathBuf,
        proof: PathBuf,
        #[command(flatten)]
        engine: EngineArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Output {
    Text,
    Json,
}

#[derive(Args)]
struct EngineArgs {
    #[arg(long, default_value = "ids")]
    strategy: Strategy,
    #[arg(long, default_value_t = 20)]
    max_depth: u32,
    #[arg(long, default_value_t = 20)]
    max_solutions: usize,
    #[arg(long, default_value_t = 1_000_000)]
    step_budget: u64,
    #[arg(long)]
    occurs_check: bool,
}

impl EngineArgs {
    fn config(&self) -> SearchConfig {
        SearchConfig {
            strategy: self.strategy,
            max_depth: self.max_depth,
            max_solutions: self.max_solutions,
            step_budget: self.step_budget,
            occurs_check: self.occurs_check,
        }
    }
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// proofwriter, prontoqa or gsm8k_proofs.
    #[arg(long)]
    format: DatasetFormat,
    /// Write summary and per-instance files here.
    #[arg(long)]
    report_dir: Option<PathBuf>,
    /// Report proof accuracy (exact match); on by default for prontoqa.
    #[arg(long)]
    exact_match: bool,
}

impl DataArgs {
    fn metrics(&self) -> MetricsConfig {
        let mut m = MetricsConfig::for_format(self.format);
        m.exact_match |= self.exact_match;
        m
    }
}

type CliResult = Result<ExitCode, String>;

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn load_program(path: &Path) -> Result<prooflog::Program, String> {
    let source = SourceProgram::new(read(path)?, path.display().to_string());
    parse_program(&source).map_err(|diags| {
        diags.iter().map(|d| format!("{}:{d}", path.display())).collect::<Vec<_>>().join("\n")
    })
}

fn print_tree(tree: &ProofTree, indent: usize) {
    let provenance = tree.provenance().map(|p| format!("  [{p}]")).unwrap_or_default();
    println!("{:indent$}{}{provenance}", "", tree.label(), indent = indent);
    for child in tree.children() {
        print_tree(child, indent + 2);
    }
}

fn cmd_solve(program: &Path, query: Option<&str>, output: Output, engine: &EngineArgs) -> CliResult {
    let p = load_program(program)?;
    for w in &p.warnings {
        eprintln!("{}:{w}", program.display());
    }
    let goals = match query {
        Some(q) => parse_query(q).map_err(|d| d.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n"))?,
        None => p.queries.first().cloned().ok_or("program has no `?-` query; pass --query")?,
    };
    let result = solve(&p.kb, &goals, &engine.config()).map_err(|e| e.to_string())?;
    match output {
        Output::Json => {
            let value = serde_json::json!({
                "status": result.status,
                "steps": result.steps_used,
                "diagnostics": result.diagnostics,
                "solutions": result.solutions.iter().map(|s| s.to_json()).collect::<Vec<_>>(),
            });
            println!("{}", serde_json::to_string_pretty(&value).expect("json"));
        }
        Output::Text => {
            for (i, s) in result.solutions.iter().enumerate() {
                let bindings: Vec<String> = s.bindings.iter().map(|(v, t)| format!("{v} = {t}")).collect();
                let shown = if bindings.is_empty() { "true".to_string() } else { bindings.join(", ") };
                println!("solution {}: {shown}", i + 1);
                print_tree(&s.proof, 2);
            }
            if result.solutions.is_empty() {
                println!("no solutions");
            }
            println!("status: {:?}, steps: {}", result.status, result.steps_used);
            for d in &result.diagnostics {
                eprintln!("diagnostic: {d}");
            }
        }
    }
    Ok(if result.solutions.is_empty() { ExitCode::from(1) } else { ExitCode::SUCCESS })
}

fn finish(report: &MetricsReport, report_dir: Option<&Path>) -> CliResult {
    print!("{}", render_summary(report));
    for r in &report.rejected {
        eprintln!("rejected {r}");
    }
    if let Some(dir) = report_dir {
        emit_report(report, dir).map_err(|e| e.to_string())?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_eval(
    data: &DataArgs,
    programs_dir: Option<&Path>,
    service_config: Option<&Path>,
    template: Option<&Path>,
    workers: Option<usize>,
    engine: &EngineArgs,
) -> CliResult {
    let dataset = load_dataset(&data.dataset, data.format).map_err(|e| e.to_string())?;
    let cfg = engine.config();
    let report = match (programs_dir, service_config) {
        (Some(dir), _) => {
            run_eval(&dataset, data.format, &ProgramSource::Offline(dir.to_path_buf()), &cfg, &data.metrics(), workers)
        }
        (None, Some(path)) => {
            let config = ServiceConfig::from_json(&read(path)?)?;
            let template = match template {
                Some(t) => PromptTemplate::from_json(&read(t)?).map_err(|e| e.to_string())?,
                None => PromptTemplate::builtin(if data.format.is_arithmetic() {
                    TemplateKind::Arithmetic
                } else {
                    TemplateKind::Logical
                }),
            };
            let retries = config.retries;
            let workers = Some(workers.unwrap_or(config.max_in_flight).min(config.max_in_flight.max(1)));
            let generator = HttpGenerator::from_env(config).map_err(|e| e.to_string())?;
            let source = ProgramSource::Service { generator: &generator, template: &template, retries };
            run_eval(&dataset, data.format, &source, &cfg, &data.metrics(), workers)
        }
        (None, None) => return Err("pass --programs-dir or --service-config".into()),
    }
    .map_err(|e| e.to_string())?;
    finish(&report, data.report_dir.as_deref())
}

fn cmd_score(data: &DataArgs, predictions: &Path) -> CliResult {
    let dataset = load_dataset(&data.dataset, data.format).map_err(|e| e.to_string())?;
    let (preds, errors) = parse_predictions(&read(predictions)?);
    for e in &errors {
        eprintln!("{}: {e}", predictions.display());
    }
    let report = score_predictions(&dataset, data.format, &preds, &data.metrics()).map_err(|e| e.to_string())?;
    finish(&report, data.report_dir.as_deref())
}

/// Accepts a bare proof record or any object with a `proof` field, such as
/// a per-instance report file or one solution from `solve --output json`.
fn cmd_check(program: &Path, proof: &Path, engine: &EngineArgs) -> CliResult {
    let p = load_program(program)?;
    let value: serde_json::Value = serde_json::from_str(&read(proof)?).map_err(|e| format!("{}: {e}", proof.display()))?;
    let value = match value.get("proof") {
        Some(inner) => inner.clone(),
        None => value,
    };
    let record: ProofRecord = serde_json::from_value(value).map_err(|e| format!("{}: {e}", proof.display()))?;
    let tree = ProofTree::from_record(&record).map_err(|e| e.to_string())?;
    match check_proof(&p.kb, &tree, &engine.config()) {
        Ok(()) => {
            println!("accepted");
            Ok(ExitCode::SUCCESS)
        }
        Err(rejection) => {
            println!("rejected: {rejection}");
            Ok(ExitCode::from(1))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve { program, query, output, engine } => cmd_solve(program, query.as_deref(), *output, engine),
        Command::Eval { data, programs_dir, service_config, template, workers, engine } => cmd_eval(
            data,
            programs_dir.as_deref(),
            service_config.as_deref(),
            template.as_deref(),
            *workers,
            engine,
        ),
        Command::Score { data, predictions } => cmd_score(data, predictions),
        Command::Check { program, proof, engine } => cmd_check(program, proof, engine),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(2)
    })
}
