//! The `thinksum` command line.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use super::{
    load_task_file, merge_config, render_report, run_evaluation, write_report, ReportFormat,
};
use crate::backend::{
    CachedModel, Counted, LanguageModel, MockBackend, MockTable, RemoteBackend, RemoteConfig,
    ResponseCache, API_KEY_ENV,
};
use crate::tasks::{PipelineKind, TaskConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_BACKEND: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "thinksum",
    version,
    about = "Evaluate Think/Sum pipelines on benchmark task files"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one task file through a pipeline and report the metric.
    Run(RunArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum BackendKind {
    Mock,
    Remote,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Task file in the BIG-bench JSON layout.
    #[arg(long)]
    task: PathBuf,
    /// Pipeline to run; defaults to the one the task file names.
    #[arg(long)]
    pipeline: Option<PipelineKind>,
    #[arg(long, value_enum, default_value_t = BackendKind::Mock)]
    backend: BackendKind,
    /// Completions endpoint URL for the remote backend.
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    model: Option<String>,
    /// Sampling temperature for every generation step.
    #[arg(long)]
    temperature: Option<f64>,
    /// Token budget for every generation step.
    #[arg(long)]
    max_tokens: Option<u32>,
    /// Response cache file; reused across runs.
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long)]
    parallelism: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Where to write the report; stdout when absent.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value = "table")]
    format: ReportFormat,
    /// Mock response table; defaults to `<task stem>.mock.json` beside the task.
    #[arg(long)]
    mock_table: Option<PathBuf>,
    /// JSON file of configuration overrides.
    #[arg(long)]
    config: Option<PathBuf>,
}

struct Failure {
    code: i32,
    message: String,
}

fn config_error(message: impl std::fmt::Display) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        message: message.to_string(),
    }
}

fn default_mock_table(task: &Path) -> PathBuf {
    let stem = task
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    task.with_file_name(format!("{stem}.mock.json"))
}

fn read_json_object(path: &Path) -> Result<serde_json::Map<String, serde_json::Value>, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_error(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))
}

fn build_config(args: &RunArgs, task_config: TaskConfig) -> Result<TaskConfig, Failure> {
    let mut cfg = match &args.config {
        Some(p) => merge_config(&task_config, &read_json_object(p)?).map_err(config_error)?,
        None => task_config,
    };
    for params in [
        &mut cfg.example_params,
        &mut cfg.fact_params,
        &mut cfg.sports_params,
        &mut cfg.translation_params,
        &mut cfg.formal_translation_params,
        &mut cfg.answer_params,
    ] {
        if let Some(t) = args.temperature {
            params.temperature = t;
        }
        if let Some(m) = args.max_tokens {
            params.max_tokens = m;
        }
    }
    if let Some(p) = args.parallelism {
        cfg.parallelism = p;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(config_error)?;
    Ok(cfg)
}

fn build_backend(args: &RunArgs, cfg: &TaskConfig) -> Result<Box<dyn LanguageModel>, Failure> {
    match args.backend {
        BackendKind::Mock => {
            let path = args
                .mock_table
                .clone()
                .unwrap_or_else(|| default_mock_table(&args.task));
            let text = std::fs::read_to_string(&path)
                .map_err(|e| config_error(format!("mock table {}: {e}", path.display())))?;
            let table = MockTable::from_json(&text)
                .map_err(|e| config_error(format!("mock table {}: {e}", path.display())))?;
            Ok(Box::new(MockBackend::new(table).map_err(config_error)?))
        }
        BackendKind::Remote => {
            let endpoint = args
                .endpoint
                .clone()
                .ok_or_else(|| config_error("--endpoint is required for the remote backend"))?;
            let model = args
                .model
                .clone()
                .ok_or_else(|| config_error("--model is required for the remote backend"))?;
            let mut rc = RemoteConfig::new(endpoint, model);
            rc.max_in_flight = cfg.parallelism.max(1);
            if rc.api_key.is_none() {
                tracing::info!("{API_KEY_ENV} is not set; sending requests without a credential");
            }
            Ok(Box::new(RemoteBackend::new(rc).map_err(config_error)?))
        }
    }
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let mut task = load_task_file(&args.task)
        .map_err(|e| config_error(format!("{}: {e}", args.task.display())))?;
    if let Some(kind) = args.pipeline {
        task = task.with_pipeline(kind).map_err(config_error)?;
    }
    if task.pipeline.is_none() {
        return Err(config_error(
            "the task file names no pipeline; pass --pipeline",
        ));
    }
    let cfg = build_config(
        &args,
        task.apply_config(&TaskConfig::default())
            .map_err(config_error)?,
    )?;
    let counted = Counted::new(build_backend(&args, &cfg)?);
    let report = match &args.cache {
        Some(path) => {
            let cache = ResponseCache::open(path)
                .map_err(|e| config_error(format!("cache {}: {e}", path.display())))?;
            let cached = CachedModel::new(&counted, Arc::new(cache));
            run_evaluation(&task, &cfg, &cached, Some(&counted))
        }
        None => run_evaluation(&task, &cfg, &counted, Some(&counted)),
    }
    .map_err(config_error)?;
    let s = &report.summary;
    if report.backend_exhausted() {
        let first = report
            .records
            .iter()
            .find_map(|r| r.error.clone())
            .unwrap_or_default();
        return Err(Failure {
            code: EXIT_BACKEND,
            message: format!("every example failed on the backend; first error: {first}"),
        });
    }
    match &args.report {
        Some(path) => write_report(&report, args.format, path).map_err(config_error)?,
        None => print!(
            "{}",
            render_report(&report, args.format).map_err(config_error)?
        ),
    }
    eprintln!(
        "{} on {}: {} = {} ({} of {} completed, {} fallbacks, {} backend calls)",
        s.pipeline,
        s.task,
        s.metric,
        s.aggregate.map_or("n/a".into(), |a| format!("{a:.4}")),
        s.completed,
        s.examples,
        s.fallbacks,
        s.backend_calls,
    );
    Ok(())
}

/// Parses `args` (program name first), runs, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let Command::Run(args) = cli.command;
    match run(args) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mock_table_sits_beside_the_task() {
        assert_eq!(
            default_mock_table(Path::new("fixtures/sports.json")),
            PathBuf::from("fixtures/sports.mock.json")
        );
    }

    #[test]
    fn missing_task_is_a_config_error() {
        assert_eq!(
            main_with_args(["thinksum", "run", "--task", "/nonexistent/t.json"]),
            EXIT_CONFIG
        );
        assert_eq!(main_with_args(["thinksum", "run"]), EXIT_CONFIG);
        assert_eq!(
            main_with_args([
                "thinksum",
                "run",
                "--task",
                "t.json",
                "--pipeline",
                "telepathy"
            ]),
            EXIT_CONFIG
        );
    }

    #[test]
    fn unreachable_backend_exits_3() {
        let dir = tempfile::tempdir().unwrap();
        let task = dir.path().join("t.json");
        std::fs::write(
            &task,
            r#"{"name": "t", "pipeline": "direct", "examples": [{"input": "Q", "target_scores": {"a": 1, "b": 0}}]}"#,
        )
        .unwrap();
        std::fs::write(dir.path().join("t.mock.json"), r#"{"unreachable": ["Q"]}"#).unwrap();
        let code = main_with_args(["thinksum", "run", "--task", task.to_str().unwrap()]);
        assert_eq!(code, EXIT_BACKEND);
        let code = main_with_args([
            "thinksum",
            "run",
            "--task",
            task.to_str().unwrap(),
            "--backend",
            "remote",
        ]);
        assert_eq!(code, EXIT_CONFIG);
    }
}
