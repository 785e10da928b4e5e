//! Evaluation harness: task files, runs, metrics, reports and the command line.

pub mod cli;
mod metric;
mod report;
mod run;
mod taskfile;

use thiserror::Error;

pub use metric::{compute_metric, example_score, sentence_bleu, Metric, BLEU_NOTE};
pub use report::{parse_report, recompute_aggregate, render_report, write_report, ReportFormat};
pub use run::{run_evaluation, CallCounter, ExampleRecord, RunReport, RunSummary};
pub use taskfile::{load_task_file, merge_config, TaskFile};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum HarnessError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("example {index}: {message}")]
    Field { index: usize, message: String },
    #[error("unknown task kind: {0}")]
    UnknownTaskKind(String),
    #[error("{0}")]
    Invalid(String),
    #[error("metric does not fit the results: {0}")]
    MetricShape(String),
    #[error("refusing to write an empty report: {0}")]
    EmptyReport(String),
    #[error("i/o error: {0}")]
    Io(String),
}
