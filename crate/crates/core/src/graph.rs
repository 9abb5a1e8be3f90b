//! Dependency graph construction: controller grouping, node sizing and
//! coloring, and edge aggregation at the system and service levels.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::manifest::ServiceManifest;

/// Upper bound for [`node_size`].
pub const NODE_SIZE_CAP: u64 = 1_000_000;

/// Edges stop drawing cross-lines above this many dependencies.
pub const MAX_CROSS_LINES: u32 = 3;

const SATURATION_PCT: u32 = 70;
const LIGHTNESS_PCT: u32 = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    System,
    Service,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Service,
    Controller,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "a_to_b")]
    AToB,
    #[serde(rename = "b_to_a")]
    BToA,
    #[serde(rename = "bidirectional")]
    Bidirectional,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControllerGroup {
    pub key: String,
    pub members: Vec<String>,
    pub hue: u32,
    pub color: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: String,
    pub kind: NodeKind,
    pub controller_key: String,
    /// Number of distinct nodes that depend on this one.
    pub in_degree: u32,
    /// Number of distinct nodes this one depends on.
    pub out_degree: u32,
    pub size: u64,
    pub color: String,
    /// Distinct dependencies that stay inside the node (self-calls at service
    /// level, intra-controller service pairs at system level).
    pub self_calls: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub a: String,
    pub b: String,
    pub direction: Direction,
    pub dependency_count: u32,
    pub cross_lines: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyGraph {
    pub level: Level,
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
    pub controllers: Vec<ControllerGroup>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("call target `{0}` does not exist")]
    DanglingCallTarget(String),
}

/// Node size from dependents `x` and dependencies `y`: `max(x^y, x, y)`.
///
/// When one count is zero the other is used; an isolated node has size 1.
/// The result saturates at [`NODE_SIZE_CAP`].
pub fn node_size(x: u64, y: u64) -> u64 {
    let raw = match (x, y) {
        (0, 0) => 1,
        (0, v) | (v, 0) => v,
        _ => saturating_pow(x, y).max(x).max(y),
    };
    raw.min(NODE_SIZE_CAP)
}

fn saturating_pow(base: u64, exp: u64) -> u64 {
    if base == 1 {
        return 1;
    }
    let mut acc: u64 = 1;
    for _ in 0..exp {
        acc = acc.saturating_mul(base);
        if acc > NODE_SIZE_CAP {
            return acc;
        }
    }
    acc
}

/// Cross-line ticks drawn for an edge carrying `dependency_count` dependencies.
pub fn cross_lines(dependency_count: u32) -> u32 {
    if dependency_count <= MAX_CROSS_LINES {
        dependency_count
    } else {
        0
    }
}

/// Partitions services by controller key, groups sorted by key, members by name.
/// Colors are left empty; see [`assign_colors`].
pub fn derive_controllers(manifest: &ServiceManifest) -> Vec<ControllerGroup> {
    let mut groups: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for svc in &manifest.services {
        groups
            .entry(svc.controller_key())
            .or_default()
            .push(svc.name.clone());
    }
    groups
        .into_iter()
        .map(|(key, mut members)| {
            members.sort();
            ControllerGroup {
                key: key.into(),
                members,
                hue: 0,
                color: String::new(),
            }
        })
        .collect()
}

/// Evenly spaced hues: group `i` of `n` gets `floor(i * 360 / n)` degrees.
pub fn assign_colors(mut groups: Vec<ControllerGroup>) -> Vec<ControllerGroup> {
    let n = groups.len() as u64;
    for (i, group) in groups.iter_mut().enumerate() {
        group.hue = (i as u64 * 360 / n) as u32;
        group.color = hsl_token(group.hue);
    }
    groups
}

fn hsl_token(hue: u32) -> String {
    format!("hsl({hue},{SATURATION_PCT}%,{LIGHTNESS_PCT}%)")
}

/// Builds the dependency graph of `manifest` at `level`.
pub fn build_graph(
    manifest: &ServiceManifest,
    level: Level,
) -> Result<DependencyGraph, GraphError> {
    let controllers = assign_colors(derive_controllers(manifest));
    let controller_of: BTreeMap<&str, &ControllerGroup> = controllers
        .iter()
        .flat_map(|g| g.members.iter().map(move |m| (m.as_str(), g)))
        .collect();

    // (caller service, callee service) -> distinct (caller endpoint, callee endpoint)
    let mut service_deps: BTreeMap<(&str, &str), BTreeSet<(String, &str)>> = BTreeMap::new();
    for svc in &manifest.services {
        for ep in &svc.endpoints {
            for call in &ep.calls {
                if !controller_of.contains_key(call.service.as_str()) {
                    return Err(GraphError::DanglingCallTarget(call.service.clone()));
                }
                service_deps
                    .entry((svc.name.as_str(), call.service.as_str()))
                    .or_default()
                    .insert((ep.id(), call.endpoint.as_str()));
            }
        }
    }

    let (mut nodes, directed) = match level {
        Level::Service => {
            let nodes: Vec<GraphNode> = manifest
                .services
                .iter()
                .map(|svc| {
                    let group = controller_of[svc.name.as_str()];
                    blank_node(&svc.name, NodeKind::Service, group)
                })
                .collect();
            let directed: BTreeMap<(&str, &str), u32> = service_deps
                .iter()
                .map(|(pair, deps)| (*pair, deps.len() as u32))
                .collect();
            (nodes, directed)
        }
        Level::System => {
            let nodes: Vec<GraphNode> = controllers
                .iter()
                .map(|g| blank_node(&g.key, NodeKind::Controller, g))
                .collect();
            let mut directed: BTreeMap<(&str, &str), u32> = BTreeMap::new();
            for (caller, callee) in service_deps.keys() {
                let from = controller_of[caller].key.as_str();
                let to = controller_of[callee].key.as_str();
                *directed.entry((from, to)).or_default() += 1;
            }
            (nodes, directed)
        }
    };

    let mut in_degree: BTreeMap<&str, u32> = BTreeMap::new();
    let mut out_degree: BTreeMap<&str, u32> = BTreeMap::new();
    let mut self_calls: BTreeMap<&str, u32> = BTreeMap::new();
    let mut edges: BTreeMap<(&str, &str), (u32, u32)> = BTreeMap::new();
    for (&(from, to), &count) in &directed {
        if from == to {
            *self_calls.entry(from).or_default() += count;
            continue;
        }
        *out_degree.entry(from).or_default() += 1;
        *in_degree.entry(to).or_default() += 1;
        if from < to {
            edges.entry((from, to)).or_default().0 += count;
        } else {
            edges.entry((to, from)).or_default().1 += count;
        }
    }

    for node in &mut nodes {
        let id = node.id.as_str();
        node.in_degree = in_degree.get(id).copied().unwrap_or(0);
        node.out_degree = out_degree.get(id).copied().unwrap_or(0);
        node.size = node_size(node.in_degree.into(), node.out_degree.into());
        node.self_calls = self_calls.get(id).copied().unwrap_or(0);
    }
    nodes.sort_by(|x, y| x.id.cmp(&y.id));

    let edges = edges
        .into_iter()
        .map(|((a, b), (forward, backward))| {
            let direction = match (forward > 0, backward > 0) {
                (true, true) => Direction::Bidirectional,
                (true, false) => Direction::AToB,
                _ => Direction::BToA,
            };
            let dependency_count = forward + backward;
            GraphEdge {
                a: a.into(),
                b: b.into(),
                direction,
                dependency_count,
                cross_lines: cross_lines(dependency_count),
            }
        })
        .collect();

    Ok(DependencyGraph {
        level,
        nodes,
        edges,
        controllers,
    })
}

fn blank_node(id: &str, kind: NodeKind, group: &ControllerGroup) -> GraphNode {
    GraphNode {
        id: id.into(),
        kind,
        controller_key: group.key.clone(),
        in_degree: 0,
        out_degree: 0,
        size: 1,
        color: group.color.clone(),
        self_calls: 0,
    }
}

impl GraphEdge {
    /// True when the edge joins `x` and `y`, in either orientation.
    pub fn connects(&self, x: &str, y: &str) -> bool {
        (self.a == x && self.b == y) || (self.a == y && self.b == x)
    }

    /// True when the edge carries a dependency from `from` to `to`.
    pub fn allows(&self, from: &str, to: &str) -> bool {
        match self.direction {
            Direction::AToB => self.a == from && self.b == to,
            Direction::BToA => self.b == from && self.a == to,
            Direction::Bidirectional => self.connects(from, to),
        }
    }

    pub fn touches(&self, id: &str) -> bool {
        self.a == id || self.b == id
    }
}

impl DependencyGraph {
    pub fn node(&self, id: &str) -> Option<&GraphNode> {
        self.nodes
            .binary_search_by(|n| n.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.nodes[i])
    }

    pub fn edge_between(&self, x: &str, y: &str) -> Option<&GraphEdge> {
        self.edges.iter().find(|e| e.connects(x, y))
    }

    pub fn controller(&self, key: &str) -> Option<&ControllerGroup> {
        self.controllers.iter().find(|g| g.key == key)
    }
}
