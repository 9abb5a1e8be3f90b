//! Core model for microservice system visualization.
//!
//! The crate turns a service manifest (the serialized output of service
//! architecture reconstruction) into a leveled dependency graph, projects it
//! into system, service and function views, ranks request paths and services,
//! replays paths with injected failures, and lays views out in 3D.
//!
//! Everything here is pure and allocation-only: no IO, no clocks, no
//! threads. File formats, the HTTP API and the command line live in the
//! `msvis` crate.

#![no_std]

extern crate alloc;

pub mod graph;
pub mod layout;
pub mod manifest;
pub mod metrics;
pub mod simulation;
pub mod trace;
pub mod views;

pub use graph::{
    assign_colors, build_graph, cross_lines, derive_controllers, node_size, ControllerGroup,
    DependencyGraph, Direction, GraphEdge, GraphError, GraphNode, Level, NodeKind, NODE_SIZE_CAP,
};
pub use layout::{
    layout_3d, LayoutError, LayoutResult, DEFAULT_ITERATIONS, DEFAULT_SEED, MIN_SEPARATION,
};
pub use manifest::{
    CallDecl, EndpointDecl, FunctionDecl, FunctionStep, ManifestError, ServiceDecl, ServiceManifest,
};
pub use metrics::{
    path_hits, path_length_rank, service_dependency_rank, DependencyEntry, DependencyRank,
    PathMetric, RankedPath, RankedPaths,
};
pub use simulation::{
    plan, run_to_completion, step, FailureKind, FailureSpec, RunState, SimError, SimEvent,
    SimStatus, SimulationConfig, SimulationRun, StartMode, SubjectKind, AUTO_TRACE,
    DEFAULT_TICK_MS,
};
pub use trace::{
    edge_key, extract_paths, Hop, PathError, ServicePath, Span, SpanNode, SpanStatus, TraceSet,
    TraceTree, TraceWarning, PATH_SEPARATOR,
};
pub use views::{
    function_view, node_filter, path_filter, service_view, system_view, FunctionMessage,
    FunctionView, HighlightEdge, PathHighlight, View, ViewError, ViewLevel, ViewNode,
};
