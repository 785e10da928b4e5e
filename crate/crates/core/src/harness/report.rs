//! Report files: a readable table, or JSON lines with a summary header and
//! one record per example.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::metric::{compute_metric, example_score};
use super::{ExampleRecord, HarnessError, RunReport, RunSummary};
use crate::tasks::TaskInstance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Table,
    JsonLines,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table" => Ok(ReportFormat::Table),
            "json-lines" | "jsonl" => Ok(ReportFormat::JsonLines),
            _ => Err(format!(
                "unknown report format {s:?}; expected table or json-lines"
            )),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
enum Line {
    Summary(RunSummary),
    Example(ExampleRecord),
}

fn table(report: &RunReport) -> String {
    let s = &report.summary;
    let mut out = String::new();
    let _ = writeln!(out, "task      {}", s.task);
    let _ = writeln!(out, "pipeline  {}", s.pipeline);
    let _ = writeln!(
        out,
        "{:<9} {} over {} of {} examples ({} failed, {} fallbacks)",
        s.metric.name(),
        s.aggregate.map_or("n/a".to_string(), |a| format!("{a:.4}")),
        s.completed,
        s.examples,
        s.failures,
        s.fallbacks,
    );
    if let Some(e) = s.exact_set {
        let _ = writeln!(out, "exact-set {e:.4}");
    }
    let _ = writeln!(out, "metric    {}", s.metric_note);
    let _ = writeln!(out, "calls     {}", s.backend_calls);
    let _ = writeln!(out, "time      {} ms", s.wall_time_ms);
    let _ = writeln!(out);
    let _ = writeln!(out, "{:>5}  {:>6}  {:<40}  notes", "#", "score", "answer");
    for r in &report.records {
        let score = r.score.map_or("-".to_string(), |v| format!("{v:.3}"));
        let answer: String = r.chosen.as_deref().unwrap_or("").chars().take(40).collect();
        let mut notes: Vec<String> = r
            .flags
            .iter()
            .map(|f| {
                serde_json::to_value(f)
                    .ok()
                    .and_then(|v| v["flag"].as_str().map(str::to_string))
                    .unwrap_or_default()
            })
            .collect();
        if let Some(e) = &r.error {
            notes.push(format!("error: {e}"));
        }
        let _ = writeln!(
            out,
            "{:>5}  {:>6}  {:<40}  {}",
            r.index,
            score,
            answer,
            notes.join(", ")
        );
    }
    out
}

fn json_lines(report: &RunReport) -> Result<String, HarnessError> {
    let enc = |l: &Line| serde_json::to_string(l).map_err(|e| HarnessError::Io(e.to_string()));
    let mut out = enc(&Line::Summary(report.summary.clone()))?;
    out.push('\n');
    for r in &report.records {
        out.push_str(&enc(&Line::Example(r.clone()))?);
        out.push('\n');
    }
    Ok(out)
}

/// The report as text. Refuses when there is nothing to aggregate.
pub fn render_report(report: &RunReport, format: ReportFormat) -> Result<String, HarnessError> {
    if report.records.is_empty() {
        return Err(HarnessError::EmptyReport("the run has no examples".into()));
    }
    if report.summary.completed == 0 {
        return Err(HarnessError::EmptyReport(format!(
            "all {} examples failed, so there is no metric to report; first error: {}",
            report.records.len(),
            report
                .records
                .iter()
                .find_map(|r| r.error.as_deref())
                .unwrap_or("unknown"),
        )));
    }
    match format {
        ReportFormat::Table => Ok(table(report)),
        ReportFormat::JsonLines => json_lines(report),
    }
}

pub fn write_report(
    report: &RunReport,
    format: ReportFormat,
    path: impl AsRef<Path>,
) -> Result<(), HarnessError> {
    let text = render_report(report, format)?;
    let path = path.as_ref();
    std::fs::write(path, text).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
}

/// Reads a JSON-lines report back.
pub fn parse_report(text: &str) -> Result<RunReport, HarnessError> {
    let mut summary = None;
    let mut records = Vec::new();
    for (i, line) in text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
    {
        let parsed: Line = serde_json::from_str(line).map_err(|e| HarnessError::Parse {
            line: i + 1,
            column: e.column(),
            message: e.to_string(),
        })?;
        match parsed {
            Line::Summary(s) if summary.is_none() => summary = Some(s),
            Line::Summary(_) => {
                return Err(HarnessError::Invalid(format!(
                    "line {}: second summary",
                    i + 1
                )))
            }
            Line::Example(r) => records.push(r),
        }
    }
    let summary =
        summary.ok_or_else(|| HarnessError::Invalid("report has no summary line".into()))?;
    Ok(RunReport { summary, records })
}

/// Rescores every completed record from its stored answer and targets.
pub fn recompute_aggregate(report: &RunReport) -> Result<f64, HarnessError> {
    let mut scores = Vec::new();
    for r in report.records.iter().filter(|r| r.score.is_some()) {
        let inst = TaskInstance {
            input: r.input.clone(),
            choices: r.target_scores.iter().map(|t| t.0.clone()).collect(),
            target_scores: r.target_scores.clone(),
            targets: r.targets.clone(),
            metadata: Default::default(),
        };
        let chosen = r.chosen.as_deref().unwrap_or("");
        scores.push(example_score(
            report.summary.metric,
            &inst,
            chosen,
            r.chosen_index,
        )?);
    }
    compute_metric(&scores)
}
