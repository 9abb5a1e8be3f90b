//! Manifest (JSON) and trace log (JSON Lines) readers.

use std::io::{BufRead, Read};

use msvis_core::{ManifestError, ServiceManifest, Span, TraceSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("read failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("input is not valid UTF-8")]
    NotUtf8,
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("no span records in input")]
    EmptyInput,
}

impl IngestError {
    /// Short machine-readable name used in API error bodies.
    pub fn kind(&self) -> &'static str {
        match self {
            IngestError::Io(_) => "Io",
            IngestError::NotUtf8 => "NotUtf8",
            IngestError::Schema { .. } => "SchemaError",
            IngestError::Manifest(e) => match e {
                ManifestError::DuplicateService { .. } => "DuplicateService",
                ManifestError::DanglingCallTarget { .. } => "DanglingCallTarget",
                ManifestError::BadRoute { .. } => "BadRoute",
                ManifestError::BadMethod { .. } => "BadMethod",
                ManifestError::DuplicateEndpoint { .. } => "DuplicateEndpoint",
                ManifestError::DuplicateFunction { .. } => "DuplicateFunction",
                ManifestError::BadFlowSequence { .. } => "BadFlowSequence",
                ManifestError::UnknownFlowFunction { .. } => "UnknownFlowFunction",
            },
            IngestError::EmptyInput => "EmptyInput",
        }
    }
}

/// Reads and validates a manifest.
pub fn parse_manifest<R: Read>(mut input: R) -> Result<ServiceManifest, IngestError> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    parse_manifest_bytes(&bytes)
}

pub fn parse_manifest_bytes(bytes: &[u8]) -> Result<ServiceManifest, IngestError> {
    let text = std::str::from_utf8(bytes).map_err(|_| IngestError::NotUtf8)?;
    let de = &mut serde_json::Deserializer::from_str(text);
    let manifest: ServiceManifest =
        serde_path_to_error::deserialize(de).map_err(|err| IngestError::Schema {
            path: err.path().to_string(),
            message: err.inner().to_string(),
        })?;
    manifest.validate()?;
    Ok(manifest)
}

/// Reads one span per line. Blank lines are skipped; lines that do not parse
/// as a span are counted in `malformed_count`.
pub fn parse_traces<R: BufRead>(input: R) -> Result<TraceSet, IngestError> {
    let mut spans = Vec::new();
    let mut malformed = 0u64;
    let mut records = 0usize;
    for line in input.split(b'\n') {
        let line = line?;
        let Ok(text) = std::str::from_utf8(&line) else {
            records += 1;
            malformed += 1;
            continue;
        };
        let text = text.trim();
        if text.is_empty() {
            continue;
        }
        records += 1;
        match serde_json::from_str::<Span>(text) {
            Ok(span) => spans.push(span),
            Err(err) => {
                tracing::debug!(%err, "skipping malformed span line");
                malformed += 1;
            }
        }
    }
    if records == 0 {
        return Err(IngestError::EmptyInput);
    }
    let set = TraceSet::from_spans(spans, malformed);
    if !set.warnings.is_empty() {
        tracing::warn!(count = set.warnings.len(), "trace assembly warnings");
    }
    Ok(set)
}
