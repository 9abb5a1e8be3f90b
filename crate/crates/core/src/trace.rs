//! Span trees and the service paths extracted from them.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use alloc::{format, vec};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Separator of the canonical path key, `"svc1>svc2>svc3"`.
pub const PATH_SEPARATOR: char = '>';

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpanStatus {
    Ok,
    Error,
}

/// One recorded operation. Timestamps are integer microseconds.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub trace_id: String,
    pub span_id: String,
    #[serde(default)]
    pub parent_span_id: Option<String>,
    pub service: String,
    pub endpoint: String,
    pub start_time: u64,
    pub duration: u64,
    pub status: SpanStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Hop {
    pub service: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PathError {
    #[error("a path needs at least one hop")]
    Empty,
    #[error("empty service name in path `{0}`")]
    EmptyService(String),
    #[error("path `{0}` repeats a service on consecutive hops")]
    RepeatedHop(String),
}

/// An ordered sequence of services a request traverses.
///
/// Always has at least one hop and never repeats a service on consecutive
/// hops. Equality compares hops, endpoints included; use [`ServicePath::key`]
/// for service-level identity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawPath", into = "RawPath")]
pub struct ServicePath {
    hops: Vec<Hop>,
    key: String,
}

#[derive(Serialize, Deserialize)]
struct RawPath {
    key: String,
    hops: Vec<Hop>,
}

impl TryFrom<RawPath> for ServicePath {
    type Error = PathError;

    fn try_from(raw: RawPath) -> Result<Self, PathError> {
        ServicePath::new(raw.hops)
    }
}

impl From<ServicePath> for RawPath {
    fn from(path: ServicePath) -> Self {
        RawPath {
            key: path.key,
            hops: path.hops,
        }
    }
}

impl ServicePath {
    pub fn new(hops: Vec<Hop>) -> Result<Self, PathError> {
        if hops.is_empty() {
            return Err(PathError::Empty);
        }
        let key = join_key(hops.iter().map(|h| h.service.as_str()));
        if hops.iter().any(|h| h.service.is_empty()) {
            return Err(PathError::EmptyService(key));
        }
        if hops.windows(2).any(|w| w[0].service == w[1].service) {
            return Err(PathError::RepeatedHop(key));
        }
        Ok(ServicePath { hops, key })
    }

    /// Service-only path from a list of names.
    pub fn from_services<I, S>(services: I) -> Result<Self, PathError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::new(
            services
                .into_iter()
                .map(|s| Hop {
                    service: s.into(),
                    endpoint: None,
                })
                .collect(),
        )
    }

    /// Parses a canonical key such as `"S2>S1>S4>S6"`.
    pub fn parse(key: &str) -> Result<Self, PathError> {
        if key.trim().is_empty() {
            return Err(PathError::Empty);
        }
        Self::from_services(key.split(PATH_SEPARATOR).map(str::trim))
    }

    pub fn hops(&self) -> &[Hop] {
        &self.hops
    }

    pub fn key(&self) -> &str {
        &self.key
    }

    pub fn len(&self) -> usize {
        self.hops.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn services(&self) -> impl Iterator<Item = &str> {
        self.hops.iter().map(|h| h.service.as_str())
    }

    /// The same path with endpoint detail dropped.
    pub fn service_level(&self) -> ServicePath {
        ServicePath {
            hops: self
                .hops
                .iter()
                .map(|h| Hop {
                    service: h.service.clone(),
                    endpoint: None,
                })
                .collect(),
            key: self.key.clone(),
        }
    }
}

fn join_key<'a>(services: impl Iterator<Item = &'a str>) -> String {
    let mut key = String::new();
    for (i, s) in services.enumerate() {
        if i > 0 {
            key.push(PATH_SEPARATOR);
        }
        key.push_str(s);
    }
    key
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanNode {
    pub span: Span,
    pub children: Vec<SpanNode>,
}

// The derived drop would recurse once per tree level.
impl Drop for SpanNode {
    fn drop(&mut self) {
        let mut pending = core::mem::take(&mut self.children);
        while let Some(mut node) = pending.pop() {
            pending.append(&mut node.children);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceTree {
    pub trace_id: String,
    pub root: SpanNode,
}

/// Problems found while assembling traces. None of them is fatal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceWarning {
    /// The span's parent is not in the trace; the span and its subtree were dropped.
    OrphanParent { trace_id: String, span_id: String },
    /// The trace has more than one root span and was skipped.
    MultipleRoots { trace_id: String },
    /// Every span of the trace has a parent; the trace was skipped.
    NoRoot { trace_id: String },
    /// Two different spans share an id; the trace was skipped.
    DuplicateSpan { trace_id: String, span_id: String },
}

/// Parsed traces plus the paths extracted from them.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceSet {
    pub traces: BTreeMap<String, TraceTree>,
    /// Every root-to-leaf path, traces in id order.
    pub paths: Vec<ServicePath>,
    pub malformed_count: u64,
    /// Spans dropped because they were unreachable from the trace root.
    pub orphan_count: u64,
    pub warnings: Vec<TraceWarning>,
}

impl TraceSet {
    /// Groups spans into trees by trace id. Input order does not matter.
    /// `malformed_count` is carried through from the line parser.
    pub fn from_spans(spans: Vec<Span>, malformed_count: u64) -> TraceSet {
        let mut by_trace: BTreeMap<String, Vec<Span>> = BTreeMap::new();
        for span in spans {
            by_trace
                .entry(span.trace_id.clone())
                .or_default()
                .push(span);
        }

        let mut set = TraceSet {
            malformed_count,
            ..TraceSet::default()
        };
        for (trace_id, mut spans) in by_trace {
            spans.sort();
            spans.dedup();
            if let Some(w) = spans.windows(2).find(|w| w[0].span_id == w[1].span_id) {
                set.warnings.push(TraceWarning::DuplicateSpan {
                    trace_id,
                    span_id: w[0].span_id.clone(),
                });
                continue;
            }

            let roots = spans.iter().filter(|s| s.parent_span_id.is_none()).count();
            if roots == 0 {
                set.warnings.push(TraceWarning::NoRoot { trace_id });
                continue;
            }
            if roots > 1 {
                set.warnings.push(TraceWarning::MultipleRoots { trace_id });
                continue;
            }

            let total = spans.len();
            for s in &spans {
                if let Some(parent) = &s.parent_span_id {
                    if spans.binary_search_by(|p| p.span_id.cmp(parent)).is_err() {
                        set.warnings.push(TraceWarning::OrphanParent {
                            trace_id: trace_id.clone(),
                            span_id: s.span_id.clone(),
                        });
                    }
                }
            }

            let tree = assemble(trace_id.clone(), spans);
            set.orphan_count += (total - tree.span_count()) as u64;
            set.traces.insert(trace_id, tree);
        }
        set.warnings.sort();
        set.paths = set.traces.values().flat_map(extract_paths).collect();
        set
    }

    /// Combines two sets by re-assembling the union of their spans.
    /// Identical spans present in both are kept once.
    pub fn merge(&self, other: &TraceSet) -> TraceSet {
        let spans = self.spans().chain(other.spans()).cloned().collect();
        TraceSet::from_spans(spans, self.malformed_count + other.malformed_count)
    }

    pub fn spans(&self) -> impl Iterator<Item = &Span> {
        self.traces.values().flat_map(|t| t.spans())
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }
}

// Iterative so that very deep traces cannot exhaust the stack.
fn assemble(trace_id: String, spans: Vec<Span>) -> TraceTree {
    let mut root = None;
    let mut children: BTreeMap<String, Vec<Span>> = BTreeMap::new();
    for span in spans {
        match span.parent_span_id.clone() {
            None => root = Some(span),
            Some(parent) => children.entry(parent).or_default().push(span),
        }
    }
    let root = root.expect("caller checked for exactly one root");

    let mut take_children = |span: &Span| -> vec::IntoIter<Span> {
        let mut kids = children.remove(&span.span_id).unwrap_or_default();
        kids.sort_by(|x, y| (x.start_time, &x.span_id).cmp(&(y.start_time, &y.span_id)));
        kids.into_iter()
    };

    let root_kids = take_children(&root);
    let mut stack: Vec<(Span, vec::IntoIter<Span>, Vec<SpanNode>)> =
        vec![(root, root_kids, Vec::new())];
    loop {
        let top = stack
            .last_mut()
            .expect("stack holds the root until the end");
        if let Some(child) = top.1.next() {
            let kids = take_children(&child);
            stack.push((child, kids, Vec::new()));
            continue;
        }
        let (span, _, built) = stack.pop().expect("non-empty");
        let node = SpanNode {
            span,
            children: built,
        };
        match stack.last_mut() {
            Some(parent) => parent.2.push(node),
            None => {
                return TraceTree {
                    trace_id,
                    root: node,
                }
            }
        }
    }
}

impl TraceTree {
    /// Spans in depth-first order.
    pub fn spans(&self) -> impl Iterator<Item = &Span> {
        let mut stack = vec![&self.root];
        core::iter::from_fn(move || {
            let node = stack.pop()?;
            stack.extend(node.children.iter().rev());
            Some(&node.span)
        })
    }

    pub fn span_count(&self) -> usize {
        self.spans().count()
    }
}

/// One path per root-to-leaf branch. Siblings are visited by start time,
/// then span id; consecutive spans of the same service collapse into one hop
/// that keeps the outermost span's endpoint.
pub fn extract_paths(trace: &TraceTree) -> Vec<ServicePath> {
    let mut paths = Vec::new();
    let mut hops: Vec<Hop> = Vec::new();
    let mut stack: Vec<(&SpanNode, usize)> = vec![(&trace.root, 0)];
    while let Some((node, depth)) = stack.pop() {
        hops.truncate(depth);
        if hops.last().map(|h| h.service.as_str()) != Some(node.span.service.as_str()) {
            hops.push(Hop {
                service: node.span.service.clone(),
                endpoint: Some(node.span.endpoint.clone()),
            });
        }
        if node.children.is_empty() {
            let path = ServicePath::new(hops.clone()).expect("collapsed hops form a valid path");
            paths.push(path);
        } else {
            let depth = hops.len();
            stack.extend(node.children.iter().rev().map(|c| (c, depth)));
        }
    }
    paths
}

/// Renders an ordered edge as a path key fragment, `"A>B"`.
pub fn edge_key(from: &str, to: &str) -> String {
    format!("{from}{PATH_SEPARATOR}{to}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn span(trace: &str, id: &str, parent: Option<&str>, service: &str, start: u64) -> Span {
        Span {
            trace_id: trace.into(),
            span_id: id.into(),
            parent_span_id: parent.map(Into::into),
            service: service.into(),
            endpoint: format!("GET /{}", service.to_lowercase()),
            start_time: start,
            duration: 10,
            status: SpanStatus::Ok,
        }
    }

    fn keys(paths: &[ServicePath]) -> Vec<&str> {
        paths.iter().map(|p| p.key()).collect()
    }

    #[test]
    fn linear_trace_yields_one_path() {
        let set = TraceSet::from_spans(
            vec![
                span("t", "3", Some("2"), "C", 3),
                span("t", "1", None, "A", 1),
                span("t", "2", Some("1"), "B", 2),
            ],
            0,
        );
        assert_eq!(set.traces.len(), 1);
        assert_eq!(keys(&set.paths), vec!["A>B>C"]);
        assert_eq!(set.paths[0].hops()[1].endpoint.as_deref(), Some("GET /b"));
    }

    #[test]
    fn fan_out_yields_branch_per_leaf_in_start_order() {
        let set = TraceSet::from_spans(
            vec![
                span("t", "r", None, "A", 0),
                span("t", "late", Some("r"), "C", 20),
                span("t", "early", Some("r"), "B", 10),
            ],
            0,
        );
        assert_eq!(keys(&set.paths), vec!["A>B", "A>C"]);
    }

    #[test]
    fn start_time_ties_break_on_span_id() {
        let set = TraceSet::from_spans(
            vec![
                span("t", "r", None, "A", 0),
                span("t", "z", Some("r"), "B", 5),
                span("t", "y", Some("r"), "C", 5),
            ],
            0,
        );
        assert_eq!(keys(&set.paths), vec!["A>C", "A>B"]);
    }

    #[test]
    fn same_service_spans_collapse() {
        let set = TraceSet::from_spans(
            vec![
                span("t", "1", None, "A", 0),
                span("t", "2", Some("1"), "A", 1),
                span("t", "3", Some("2"), "B", 2),
            ],
            0,
        );
        assert_eq!(keys(&set.paths), vec!["A>B"]);
    }

    #[test]
    fn orphans_are_dropped_with_their_subtree() {
        let set = TraceSet::from_spans(
            vec![
                span("t", "1", None, "A", 0),
                span("t", "2", Some("missing"), "B", 1),
                span("t", "3", Some("2"), "C", 2),
            ],
            0,
        );
        assert_eq!(keys(&set.paths), vec!["A"]);
        assert_eq!(set.orphan_count, 2);
        assert_eq!(
            set.warnings,
            vec![TraceWarning::OrphanParent {
                trace_id: "t".into(),
                span_id: "2".into()
            }]
        );
    }

    #[test]
    fn multiple_roots_skip_the_trace() {
        let set = TraceSet::from_spans(
            vec![
                span("bad", "1", None, "A", 0),
                span("bad", "2", None, "B", 0),
                span("ok", "1", None, "A", 0),
            ],
            0,
        );
        assert_eq!(set.traces.len(), 1);
        assert!(set.traces.contains_key("ok"));
        assert_eq!(
            set.warnings,
            vec![TraceWarning::MultipleRoots {
                trace_id: "bad".into()
            }]
        );
    }

    #[test]
    fn rootless_cycle_is_skipped() {
        let set = TraceSet::from_spans(
            vec![
                span("t", "1", Some("2"), "A", 0),
                span("t", "2", Some("1"), "B", 0),
            ],
            0,
        );
        assert!(set.is_empty());
        assert!(matches!(set.warnings[0], TraceWarning::NoRoot { .. }));
    }

    #[test]
    fn conflicting_duplicate_span_ids_skip_the_trace() {
        let mut dup = span("t", "1", None, "A", 0);
        dup.duration = 99;
        let set = TraceSet::from_spans(vec![span("t", "1", None, "A", 0), dup], 0);
        assert!(set.is_empty());
        assert!(matches!(
            set.warnings[0],
            TraceWarning::DuplicateSpan { .. }
        ));
    }

    #[test]
    fn merge_keeps_identical_spans_once() {
        let a = TraceSet::from_spans(vec![span("t", "1", None, "A", 0)], 1);
        let b = TraceSet::from_spans(
            vec![span("t", "1", None, "A", 0), span("u", "1", None, "B", 0)],
            2,
        );
        let merged = a.merge(&b);
        assert_eq!(merged.traces.len(), 2);
        assert_eq!(merged.malformed_count, 3);
        assert_eq!(keys(&merged.paths), vec!["A", "B"]);
    }

    #[test]
    fn deep_chain_does_not_overflow() {
        let n = 50_000;
        let mut spans = vec![span("t", "0", None, "S0", 0)];
        for i in 1..n {
            let parent = format!("{}", i - 1);
            let id = format!("{i}");
            let svc = format!("S{}", i % 2);
            spans.push(span("t", &id, Some(&parent), &svc, i as u64));
        }
        let set = TraceSet::from_spans(spans, 0);
        assert_eq!(set.paths.len(), 1);
        assert_eq!(set.paths[0].len(), n);
    }

    #[test]
    fn path_parse_and_validation() {
        let p = ServicePath::parse("S2>S1>S4>S6").unwrap();
        assert_eq!(p.len(), 4);
        assert_eq!(p.key(), "S2>S1>S4>S6");
        assert_eq!(ServicePath::parse(""), Err(PathError::Empty));
        assert!(matches!(
            ServicePath::parse("A>A"),
            Err(PathError::RepeatedHop(_))
        ));
        assert!(matches!(
            ServicePath::parse("A>>B"),
            Err(PathError::EmptyService(_))
        ));
        assert!(ServicePath::parse("A>B>A").is_ok());
    }
}
