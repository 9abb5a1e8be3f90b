//! Traceability metrics: path hits, path length and service dependency rank.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::graph::DependencyGraph;
use crate::trace::{ServicePath, TraceSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathMetric {
    PathHits,
    PathLength,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedPath {
    pub rank: usize,
    pub key: String,
    pub path: ServicePath,
    pub score: u64,
}

/// Paths sorted by score descending, ties by key ascending. Ranks start at 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedPaths {
    pub metric: PathMetric,
    pub entries: Vec<RankedPath>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyEntry {
    pub rank: usize,
    pub id: String,
    pub dependents: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyRank {
    pub entries: Vec<DependencyEntry>,
}

impl RankedPaths {
    /// Keeps the first `k` entries.
    pub fn top(mut self, k: usize) -> Self {
        self.entries.truncate(k);
        self
    }
}

impl DependencyRank {
    pub fn top(mut self, k: usize) -> Self {
        self.entries.truncate(k);
        self
    }
}

fn rank_paths(metric: PathMetric, scored: BTreeMap<&str, (&ServicePath, u64)>) -> RankedPaths {
    let mut rows: Vec<(&str, &ServicePath, u64)> =
        scored.into_iter().map(|(k, (p, s))| (k, p, s)).collect();
    rows.sort_by(|x, y| y.2.cmp(&x.2).then_with(|| x.0.cmp(y.0)));
    RankedPaths {
        metric,
        entries: rows
            .into_iter()
            .enumerate()
            .map(|(i, (key, path, score))| RankedPath {
                rank: i + 1,
                key: key.into(),
                path: path.service_level(),
                score,
            })
            .collect(),
    }
}

/// Number of root-to-leaf branches per distinct service-level path.
pub fn path_hits(traces: &TraceSet) -> RankedPaths {
    let mut counts: BTreeMap<&str, (&ServicePath, u64)> = BTreeMap::new();
    for path in &traces.paths {
        counts.entry(path.key()).or_insert((path, 0)).1 += 1;
    }
    rank_paths(PathMetric::PathHits, counts)
}

/// Distinct paths scored by their number of connected nodes.
pub fn path_length_rank(traces: &TraceSet) -> RankedPaths {
    let lengths: BTreeMap<&str, (&ServicePath, u64)> = traces
        .paths
        .iter()
        .map(|p| (p.key(), (p, p.len() as u64)))
        .collect();
    rank_paths(PathMetric::PathLength, lengths)
}

/// Every node ranked by its number of distinct dependents.
pub fn service_dependency_rank(graph: &DependencyGraph) -> DependencyRank {
    let mut rows: Vec<(&str, u32)> = graph
        .nodes
        .iter()
        .map(|n| (n.id.as_str(), n.in_degree))
        .collect();
    rows.sort_by(|x, y| y.1.cmp(&x.1).then_with(|| x.0.cmp(y.0)));
    DependencyRank {
        entries: rows
            .into_iter()
            .enumerate()
            .map(|(i, (id, dependents))| DependencyEntry {
                rank: i + 1,
                id: id.into(),
                dependents,
            })
            .collect(),
    }
}
