//! Output encodings shared by the CLI and the HTTP API.

use std::fmt::Write as _;

use msvis_core::{SimStatus, SimulationRun};
use serde::Serialize;

use crate::session::MetricReport;

/// Pretty JSON with a trailing newline. Every JSON body the tool emits goes
/// through here, which is what keeps CLI and HTTP output byte-identical.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut out = serde_json::to_string_pretty(value).expect("engine types always serialize");
    out.push('\n');
    out
}

/// Plain-text table with `rank`, `key`/`id` and `score` columns.
pub fn metrics_table(report: &MetricReport) -> String {
    let rows: Vec<(usize, &str, u64)> = match report {
        MetricReport::Paths(r) => r
            .entries
            .iter()
            .map(|e| (e.rank, e.key.as_str(), e.score))
            .collect(),
        MetricReport::Dependency { rank, .. } => rank
            .entries
            .iter()
            .map(|e| (e.rank, e.id.as_str(), u64::from(e.dependents)))
            .collect(),
    };
    let label = match report {
        MetricReport::Paths(_) => "key",
        MetricReport::Dependency { .. } => "id",
    };
    let width = rows
        .iter()
        .map(|r| r.1.len())
        .chain([label.len()])
        .max()
        .unwrap_or(0);
    let mut out = String::new();
    let _ = writeln!(out, "{:>4}  {:<width$}  {:>5}", "rank", label, "score");
    for (rank, key, score) in rows {
        let _ = writeln!(out, "{rank:>4}  {key:<width$}  {score:>5}");
    }
    out
}

pub fn timeline(run: &SimulationRun) -> String {
    let mut out = String::new();
    for e in &run.events {
        let status = match e.status {
            SimStatus::Entered => "entered",
            SimStatus::Ok => "ok",
            SimStatus::Failed => "FAILED",
            SimStatus::NotReached => "not_reached",
        };
        let kind = match e.subject_kind {
            msvis_core::SubjectKind::Node => "node",
            msvis_core::SubjectKind::Edge => "edge",
        };
        let _ = writeln!(
            out,
            "{:>3}  {kind:<4}  {:<40}  {status:<11}  {}",
            e.step, e.subject, e.detail
        );
    }
    let state = match run.state {
        msvis_core::RunState::Pending => "pending",
        msvis_core::RunState::Running => "running",
        msvis_core::RunState::Completed => "completed",
        msvis_core::RunState::Failed => "failed",
    };
    let _ = writeln!(out, "path {}: {state}", run.resolved_path.key());
    out
}
