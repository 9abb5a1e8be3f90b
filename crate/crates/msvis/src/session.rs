//! A loaded system: manifest, both graph levels and accumulated traces.
//!
//! The CLI and the HTTP server both answer requests through [`System`], so a
//! given input produces the same JSON on either side.

use std::fmt;
use std::str::FromStr;

use msvis_core::{
    build_graph, function_view, layout_3d, node_filter, path_filter, path_hits, path_length_rank,
    plan, run_to_completion, service_dependency_rank, service_view, system_view, DependencyGraph,
    DependencyRank, FunctionView, GraphError, Level, PathError, RankedPaths, ServiceManifest,
    ServicePath, SimError, SimulationConfig, SimulationRun, TraceSet, View, ViewError,
    DEFAULT_ITERATIONS,
};
use serde::Serialize;

pub use msvis_core::DEFAULT_SEED;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum MetricKind {
    PathHits,
    PathLength,
    ServiceDependency,
}

impl MetricKind {
    pub fn needs_traces(self) -> bool {
        !matches!(self, MetricKind::ServiceDependency)
    }
}

impl FromStr for MetricKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "path-hits" => Ok(MetricKind::PathHits),
            "path-length" => Ok(MetricKind::PathLength),
            "service-dependency" => Ok(MetricKind::ServiceDependency),
            other => Err(format!("unknown metric `{other}`")),
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MetricKind::PathHits => "path-hits",
            MetricKind::PathLength => "path-length",
            MetricKind::ServiceDependency => "service-dependency",
        })
    }
}

pub fn parse_level(s: &str) -> Option<Level> {
    match s {
        "system" => Some(Level::System),
        "service" => Some(Level::Service),
        _ => None,
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum MetricReport {
    Paths(RankedPaths),
    Dependency {
        metric: MetricKind,
        #[serde(flatten)]
        rank: DependencyRank,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct SystemSummary {
    pub system_id: String,
    pub system_name: String,
    pub services: usize,
    pub controllers: usize,
    pub traces: usize,
    pub paths: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum QueryError {
    #[error(transparent)]
    View(#[from] ViewError),
    #[error("invalid path: {0}")]
    Path(#[from] PathError),
    #[error(transparent)]
    Simulation(#[from] SimError),
}

#[derive(Debug, Clone)]
pub struct System {
    pub id: String,
    pub manifest: ServiceManifest,
    pub system_graph: DependencyGraph,
    pub service_graph: DependencyGraph,
    pub traces: TraceSet,
}

/// Lowercase slug of a system name: runs of non-alphanumerics become `-`.
pub fn slug(name: &str) -> String {
    let mut out = String::new();
    for ch in name.chars() {
        if ch.is_ascii_alphanumeric() {
            out.push(ch.to_ascii_lowercase());
        } else if !out.ends_with('-') {
            out.push('-');
        }
    }
    let trimmed = out.trim_matches('-');
    if trimmed.is_empty() {
        "system".into()
    } else {
        trimmed.into()
    }
}

impl System {
    /// Builds both graph levels. The manifest must already be validated.
    pub fn new(manifest: ServiceManifest) -> Result<System, GraphError> {
        Ok(System {
            id: slug(&manifest.system_name),
            system_graph: build_graph(&manifest, Level::System)?,
            service_graph: build_graph(&manifest, Level::Service)?,
            manifest,
            traces: TraceSet::default(),
        })
    }

    /// A copy with `batch` merged into the accumulated traces.
    pub fn with_traces(&self, batch: &TraceSet) -> System {
        System {
            traces: self.traces.merge(batch),
            ..self.clone()
        }
    }

    pub fn graph(&self, level: Level) -> &DependencyGraph {
        match level {
            Level::System => &self.system_graph,
            Level::Service => &self.service_graph,
        }
    }

    fn base_view(&self, level: Level) -> View {
        match level {
            Level::System => system_view(&self.system_graph),
            Level::Service => service_view(&self.service_graph),
        }
    }

    /// Attaches a layout unless the view is empty.
    fn laid_out(view: View, seed: u64) -> View {
        match layout_3d(&view, seed, DEFAULT_ITERATIONS) {
            Ok(layout) => view.with_layout(layout),
            Err(_) => view,
        }
    }

    pub fn view(&self, level: Level, seed: u64) -> View {
        Self::laid_out(self.base_view(level), seed)
    }

    pub fn node_filter(&self, level: Level, node: &str, seed: u64) -> Result<View, QueryError> {
        let view = node_filter(&self.base_view(level), node)?;
        Ok(Self::laid_out(view, seed))
    }

    pub fn path_filter(&self, level: Level, path: &str, seed: u64) -> Result<View, QueryError> {
        let path = ServicePath::parse(path)?;
        let view = path_filter(&self.base_view(level), &path)?;
        Ok(Self::laid_out(view, seed))
    }

    pub fn function_view(
        &self,
        service: &str,
        endpoint: Option<&str>,
    ) -> Result<FunctionView, QueryError> {
        Ok(function_view(&self.manifest, service, endpoint)?)
    }

    pub fn metrics(&self, metric: MetricKind, top: Option<usize>) -> MetricReport {
        let top = top.unwrap_or(usize::MAX);
        match metric {
            MetricKind::PathHits => MetricReport::Paths(path_hits(&self.traces).top(top)),
            MetricKind::PathLength => MetricReport::Paths(path_length_rank(&self.traces).top(top)),
            MetricKind::ServiceDependency => MetricReport::Dependency {
                metric,
                rank: service_dependency_rank(&self.service_graph).top(top),
            },
        }
    }

    /// Plans and fully replays a run on the service-level graph.
    pub fn simulate(&self, config: &SimulationConfig) -> Result<SimulationRun, QueryError> {
        let run = plan(config, &self.service_graph, &self.traces)?;
        Ok(run_to_completion(run))
    }

    pub fn summary(&self) -> SystemSummary {
        SystemSummary {
            system_id: self.id.clone(),
            system_name: self.manifest.system_name.clone(),
            services: self.manifest.services.len(),
            controllers: self.system_graph.controllers.len(),
            traces: self.traces.traces.len(),
            paths: self.traces.paths.len(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slugs() {
        assert_eq!(slug("Train Ticket"), "train-ticket");
        assert_eq!(slug("  --Six__Services!! "), "six-services");
        assert_eq!(slug("???"), "system");
    }

    #[test]
    fn metric_names_round_trip() {
        for m in [
            MetricKind::PathHits,
            MetricKind::PathLength,
            MetricKind::ServiceDependency,
        ] {
            assert_eq!(m.to_string().parse::<MetricKind>(), Ok(m));
        }
        assert!("latency".parse::<MetricKind>().is_err());
    }
}
