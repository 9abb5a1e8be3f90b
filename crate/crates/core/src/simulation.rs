//! Logical path replay with node and edge failure injection.
//!
//! A run is planned up front: the resolved path and the first matching
//! failure fix the complete event list. Stepping then releases those events
//! one at a time so a caller can pace them.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::DependencyGraph;
use crate::metrics::path_hits;
use crate::trace::{edge_key, extract_paths, ServicePath, TraceSet};

pub const DEFAULT_TICK_MS: u64 = 250;

/// `trace_ref` value selecting the most frequent path.
pub const AUTO_TRACE: &str = "auto";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StartMode {
    Mock,
    Trace,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FailureKind {
    #[default]
    Error,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "target", rename_all = "lowercase")]
pub enum FailureSpec {
    Node {
        node_id: String,
        #[serde(default)]
        kind: FailureKind,
    },
    Edge {
        from_id: String,
        to_id: String,
        #[serde(default)]
        kind: FailureKind,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub start_mode: StartMode,
    /// Canonical path key, required in mock mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mock_payload: Option<String>,
    /// Trace id or `"auto"`, required in trace mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_ref: Option<String>,
    #[serde(default)]
    pub failures: Vec<FailureSpec>,
    /// Milliseconds between streamed events. The engine itself is untimed.
    #[serde(default = "default_tick", rename = "tick")]
    pub tick_ms: u64,
}

fn default_tick() -> u64 {
    DEFAULT_TICK_MS
}

impl SimulationConfig {
    pub fn mock(path: &str, payload: &str) -> Self {
        SimulationConfig {
            start_mode: StartMode::Mock,
            path: Some(path.into()),
            mock_payload: Some(payload.into()),
            trace_ref: None,
            failures: Vec::new(),
            tick_ms: DEFAULT_TICK_MS,
        }
    }

    pub fn trace(trace_ref: &str) -> Self {
        SimulationConfig {
            start_mode: StartMode::Trace,
            path: None,
            mock_payload: None,
            trace_ref: Some(trace_ref.into()),
            failures: Vec::new(),
            tick_ms: DEFAULT_TICK_MS,
        }
    }

    pub fn with_failure(mut self, failure: FailureSpec) -> Self {
        self.failures.push(failure);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimStatus {
    Entered,
    Ok,
    Failed,
    NotReached,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubjectKind {
    Node,
    Edge,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimEvent {
    pub step: u32,
    pub subject_kind: SubjectKind,
    /// Node id, or `"from>to"` for an edge.
    pub subject: String,
    pub status: SimStatus,
    pub detail: String,
}

impl SimEvent {
    /// Everything but the free-text detail.
    pub fn structure(&self) -> (u32, SubjectKind, &str, SimStatus) {
        (self.step, self.subject_kind, &self.subject, self.status)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunState {
    Pending,
    Running,
    Completed,
    Failed,
}

impl RunState {
    pub fn is_finished(self) -> bool {
        matches!(self, RunState::Completed | RunState::Failed)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationRun {
    pub id: String,
    pub config: SimulationConfig,
    pub resolved_path: ServicePath,
    pub events: Vec<SimEvent>,
    pub state: RunState,
    #[serde(skip)]
    planned: Vec<SimEvent>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("path edge `{0}` is not in the graph")]
    PathNotInGraph(String),
    #[error("unknown trace `{0}`")]
    UnknownTrace(String),
    #[error("no traces to select a path from")]
    EmptyTraceSet,
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
}

impl SimulationRun {
    /// Number of events the run emits in total.
    pub fn planned_len(&self) -> usize {
        self.planned.len()
    }
}

/// Validates `config`, resolves the path to replay and precomputes the
/// outcome of every hop. Hops are checked in path order, the node before its
/// outgoing edge; the first matching failure is the failure point.
pub fn plan(
    config: &SimulationConfig,
    graph: &DependencyGraph,
    traces: &TraceSet,
) -> Result<SimulationRun, SimError> {
    let invalid = |msg: &str| SimError::InvalidConfig(msg.into());
    let (path, origin) = match config.start_mode {
        StartMode::Mock => {
            let key = config
                .path
                .as_deref()
                .ok_or_else(|| invalid("mock mode requires `path`"))?;
            let payload = config
                .mock_payload
                .as_deref()
                .ok_or_else(|| invalid("mock mode requires `mock_payload`"))?;
            let path =
                ServicePath::parse(key).map_err(|e| SimError::InvalidConfig(format!("{e}")))?;
            (path, format!("mock payload {payload}"))
        }
        StartMode::Trace => {
            let trace_ref = config
                .trace_ref
                .as_deref()
                .ok_or_else(|| invalid("trace mode requires `trace_ref`"))?;
            if trace_ref == AUTO_TRACE {
                let top = path_hits(traces)
                    .entries
                    .into_iter()
                    .next()
                    .ok_or(SimError::EmptyTraceSet)?;
                (top.path, format!("most frequent path ({} hits)", top.score))
            } else {
                let tree = traces
                    .traces
                    .get(trace_ref)
                    .ok_or_else(|| SimError::UnknownTrace(trace_ref.into()))?;
                let path = extract_paths(tree)
                    .into_iter()
                    .next()
                    .expect("a trace always has at least one path");
                (path, format!("trace {trace_ref}"))
            }
        }
    };

    check_path(&path, graph)?;
    for failure in &config.failures {
        check_failure(failure, graph)?;
    }

    let planned = plan_events(&path, &config.failures, &origin);
    Ok(SimulationRun {
        id: String::new(),
        config: config.clone(),
        resolved_path: path,
        events: Vec::new(),
        state: RunState::Pending,
        planned,
    })
}

fn check_path(path: &ServicePath, graph: &DependencyGraph) -> Result<(), SimError> {
    let services: Vec<&str> = path.services().collect();
    if let Some(missing) = services.iter().find(|s| graph.node(s).is_none()) {
        let idx = services.iter().position(|s| s == missing).unwrap_or(0);
        let key = match idx {
            0 if services.len() == 1 => String::from(*missing),
            0 => edge_key(services[0], services[1]),
            i => edge_key(services[i - 1], services[i]),
        };
        return Err(SimError::PathNotInGraph(key));
    }
    for pair in services.windows(2) {
        if !graph.edges.iter().any(|e| e.allows(pair[0], pair[1])) {
            return Err(SimError::PathNotInGraph(edge_key(pair[0], pair[1])));
        }
    }
    Ok(())
}

fn check_failure(failure: &FailureSpec, graph: &DependencyGraph) -> Result<(), SimError> {
    match failure {
        FailureSpec::Node { node_id, .. } if graph.node(node_id).is_none() => {
            Err(SimError::InvalidConfig(format!(
                "failure target node `{node_id}` is not in the graph"
            )))
        }
        FailureSpec::Edge { from_id, to_id, .. }
            if !graph.edges.iter().any(|e| e.allows(from_id, to_id)) =>
        {
            Err(SimError::InvalidConfig(format!(
                "failure target edge `{}` is not in the graph",
                edge_key(from_id, to_id)
            )))
        }
        _ => Ok(()),
    }
}

fn node_failure<'a>(failures: &'a [FailureSpec], node: &str) -> Option<&'a FailureKind> {
    failures.iter().find_map(|f| match f {
        FailureSpec::Node { node_id, kind } if node_id == node => Some(kind),
        _ => None,
    })
}

fn edge_failure<'a>(failures: &'a [FailureSpec], from: &str, to: &str) -> Option<&'a FailureKind> {
    failures.iter().find_map(|f| match f {
        FailureSpec::Edge {
            from_id,
            to_id,
            kind,
        } if from_id == from && to_id == to => Some(kind),
        _ => None,
    })
}

fn kind_label(kind: &FailureKind) -> &'static str {
    match kind {
        FailureKind::Error => "error",
        FailureKind::Timeout => "timeout",
    }
}

fn plan_events(path: &ServicePath, failures: &[FailureSpec], origin: &str) -> Vec<SimEvent> {
    let hops = path.hops();
    let mut events: Vec<SimEvent> = Vec::with_capacity(hops.len() + 1);
    let push = |events: &mut Vec<SimEvent>, kind, subject: String, status, detail: String| {
        let step = events.len() as u32 + 1;
        events.push(SimEvent {
            step,
            subject_kind: kind,
            subject,
            status,
            detail,
        });
    };

    let mut failed_at: Option<String> = None;
    for (i, hop) in hops.iter().enumerate() {
        let service = hop.service.as_str();
        if let Some(cause) = &failed_at {
            push(
                &mut events,
                SubjectKind::Node,
                service.into(),
                SimStatus::NotReached,
                format!("not reached after failure at {cause}"),
            );
            continue;
        }

        if let Some(kind) = node_failure(failures, service) {
            push(
                &mut events,
                SubjectKind::Node,
                service.into(),
                SimStatus::Failed,
                format!("injected {} in {service}", kind_label(kind)),
            );
            failed_at = Some(service.into());
            continue;
        }

        let mut detail = match &hop.endpoint {
            Some(ep) => format!("handled {ep}"),
            None => String::from("handled"),
        };
        if i == 0 {
            detail = format!("{detail}; started from {origin}");
        }
        push(
            &mut events,
            SubjectKind::Node,
            service.into(),
            SimStatus::Ok,
            detail,
        );

        if let Some(next) = hops.get(i + 1) {
            if let Some(kind) = edge_failure(failures, service, &next.service) {
                let key = edge_key(service, &next.service);
                push(
                    &mut events,
                    SubjectKind::Edge,
                    key.clone(),
                    SimStatus::Failed,
                    format!("injected {} on call {key}", kind_label(kind)),
                );
                failed_at = Some(key);
            }
        }
    }
    events
}

/// Releases the next planned event. Returns `None` once the run is finished;
/// the state flips to completed or failed together with the last event.
pub fn step(run: &mut SimulationRun) -> Option<SimEvent> {
    if run.state.is_finished() {
        return None;
    }
    run.state = RunState::Running;
    let next = run.planned.get(run.events.len()).cloned();
    if let Some(event) = &next {
        run.events.push(event.clone());
    }
    if run.events.len() >= run.planned.len() {
        run.state = if run.events.iter().any(|e| e.status == SimStatus::Failed) {
            RunState::Failed
        } else {
            RunState::Completed
        };
    }
    next
}

pub fn run_to_completion(mut run: SimulationRun) -> SimulationRun {
    while step(&mut run).is_some() {}
    run
}
