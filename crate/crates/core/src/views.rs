//! System, service and function level projections, plus the node and path
//! filters applied on top of them.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{DependencyGraph, GraphEdge, GraphNode, Level};
use crate::layout::LayoutResult;
use crate::manifest::{EndpointDecl, ServiceManifest};
use crate::trace::{edge_key, ServicePath};

pub type ViewLevel = Level;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewNode {
    #[serde(flatten)]
    pub node: GraphNode,
    /// Part of the highlighted path.
    pub on_path: bool,
    /// Rendered greyed out: a path is highlighted and this node is not on it.
    pub dimmed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HighlightEdge {
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathHighlight {
    pub key: String,
    pub nodes: Vec<String>,
    pub edges: Vec<HighlightEdge>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct View {
    pub level: ViewLevel,
    pub nodes: Vec<ViewNode>,
    pub edges: Vec<GraphEdge>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub highlight: Option<PathHighlight>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub focus: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<LayoutResult>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionMessage {
    pub seq: u32,
    pub endpoint: String,
    pub from: String,
    pub to: String,
}

/// Communication diagram of one service's internal functions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionView {
    pub service: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    /// Functions in order of first appearance.
    pub participants: Vec<String>,
    pub messages: Vec<FunctionMessage>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ViewError {
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("path edge `{0}` is not in the graph")]
    PathNotInGraph(String),
    #[error("unknown service `{0}`")]
    UnknownService(String),
    #[error("service `{service}` has no endpoint `{endpoint}`")]
    UnknownEndpoint { service: String, endpoint: String },
}

fn project(graph: &DependencyGraph) -> View {
    View {
        level: graph.level,
        nodes: graph
            .nodes
            .iter()
            .map(|n| ViewNode {
                node: n.clone(),
                on_path: false,
                dimmed: false,
            })
            .collect(),
        edges: graph.edges.clone(),
        highlight: None,
        focus: None,
        layout: None,
    }
}

/// Controller overview. Expects a graph built at [`Level::System`].
pub fn system_view(graph: &DependencyGraph) -> View {
    debug_assert_eq!(graph.level, Level::System);
    project(graph)
}

/// Service overview. Expects a graph built at [`Level::Service`].
pub fn service_view(graph: &DependencyGraph) -> View {
    debug_assert_eq!(graph.level, Level::Service);
    project(graph)
}

impl View {
    pub fn node(&self, id: &str) -> Option<&ViewNode> {
        self.nodes.iter().find(|n| n.node.id == id)
    }

    pub fn with_layout(mut self, layout: LayoutResult) -> View {
        self.layout = Some(layout);
        self
    }
}

/// Keeps `node_id`, its direct neighbors in both directions, and the edges
/// incident to it.
pub fn node_filter(view: &View, node_id: &str) -> Result<View, ViewError> {
    if view.node(node_id).is_none() {
        return Err(ViewError::UnknownNode(node_id.into()));
    }
    let edges: Vec<GraphEdge> = view
        .edges
        .iter()
        .filter(|e| e.touches(node_id))
        .cloned()
        .collect();
    let keep: BTreeSet<&str> = edges
        .iter()
        .flat_map(|e| [e.a.as_str(), e.b.as_str()])
        .chain(core::iter::once(node_id))
        .collect();
    let nodes = view
        .nodes
        .iter()
        .filter(|n| keep.contains(n.node.id.as_str()))
        .map(|n| ViewNode {
            node: n.node.clone(),
            on_path: false,
            dimmed: false,
        })
        .collect();
    Ok(View {
        level: view.level,
        nodes,
        edges,
        highlight: None,
        focus: Some(node_id.into()),
        layout: None,
    })
}

/// Highlights `path` hop by hop. Nodes off the path stay in the view but are
/// dimmed. Each consecutive hop pair needs an edge carrying a dependency in
/// that direction.
pub fn path_filter(view: &View, path: &ServicePath) -> Result<View, ViewError> {
    let services: Vec<&str> = path.services().collect();
    let mut edges = Vec::with_capacity(services.len().saturating_sub(1));
    for pair in services.windows(2) {
        let (from, to) = (pair[0], pair[1]);
        let present = view.node(from).is_some()
            && view.node(to).is_some()
            && view.edges.iter().any(|e| e.allows(from, to));
        if !present {
            return Err(ViewError::PathNotInGraph(edge_key(from, to)));
        }
        edges.push(HighlightEdge {
            from: from.into(),
            to: to.into(),
        });
    }
    if let [only] = services.as_slice() {
        if view.node(only).is_none() {
            return Err(ViewError::UnknownNode((*only).into()));
        }
    }

    let on_path: BTreeSet<&str> = services.iter().copied().collect();
    let mut out = view.clone();
    for n in &mut out.nodes {
        n.on_path = on_path.contains(n.node.id.as_str());
        n.dimmed = !n.on_path;
    }
    out.highlight = Some(PathHighlight {
        key: path.key().into(),
        nodes: services.iter().map(|s| (*s).into()).collect(),
        edges,
    });
    Ok(out)
}

/// Builds the communication diagram for `service`. With an endpoint, only
/// that endpoint's flow is used; without, every endpoint's flow is appended
/// in declaration order and messages are numbered consecutively across blocks.
pub fn function_view(
    manifest: &ServiceManifest,
    service: &str,
    endpoint: Option<&str>,
) -> Result<FunctionView, ViewError> {
    let svc = manifest
        .service(service)
        .ok_or_else(|| ViewError::UnknownService(service.into()))?;
    let endpoints: Vec<&EndpointDecl> = match endpoint {
        Some(id) => {
            let ep = svc.endpoint(id).ok_or_else(|| ViewError::UnknownEndpoint {
                service: service.into(),
                endpoint: id.into(),
            })?;
            alloc::vec![ep]
        }
        None => svc.endpoints.iter().collect(),
    };

    let mut participants: Vec<String> = Vec::new();
    let add = |name: &str, participants: &mut Vec<String>| {
        if !participants.iter().any(|p| p == name) {
            participants.push(name.into());
        }
    };
    let mut messages = Vec::new();
    for ep in endpoints {
        let id = ep.id();
        for step in &ep.flow {
            add(&step.function, &mut participants);
            for callee in &step.calls {
                add(callee, &mut participants);
                messages.push(FunctionMessage {
                    seq: messages.len() as u32 + 1,
                    endpoint: id.clone(),
                    from: step.function.clone(),
                    to: callee.clone(),
                });
            }
        }
    }
    Ok(FunctionView {
        service: service.into(),
        endpoint: endpoint.map(Into::into),
        participants,
        messages,
    })
}
