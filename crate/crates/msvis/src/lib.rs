//! File formats, HTTP API and command line for `msvis-core`.

pub mod cli;
pub mod format;
pub mod ingest;
pub mod server;
pub mod session;

pub use ingest::{parse_manifest, parse_manifest_bytes, parse_traces, IngestError};
pub use session::{MetricKind, MetricReport, System};
