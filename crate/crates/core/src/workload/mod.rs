//! Workload files and the synthetic trace generator.
//!
//! A workload is a `catalog.json` holding object sizes and a `trace.jsonl`
//! whose first line is a header naming the catalog, followed by one event per
//! line. Either file may be gzip-compressed; readers detect it from the magic
//! bytes.

mod format;
mod generate;
mod repartition;

pub use format::{
    load_catalog, load_trace, open_input, open_trace, parse_catalog, parse_header, parse_record,
    validate, write_catalog, write_trace, Record, TraceHeader, TraceReader, ValidationReport,
    CATALOG_SCHEMA, TRACE_SCHEMA,
};
pub use generate::{generate, GeneratorParams, Workload};
pub use repartition::{repartition, scale_updates};

use std::path::PathBuf;

use crate::model::ObjectId;

#[derive(Debug, thiserror::Error)]
pub enum WorkloadError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: {source}")]
    Json {
        line: u64,
        source: serde_json::Error,
    },
    #[error("line {line}: {message}")]
    Schema { line: u64, message: String },
    #[error("line {line}: event time {time} is earlier than the previous event ({previous})")]
    Unsorted { line: u64, time: u64, previous: u64 },
    #[error("line {line}: unknown object {object}")]
    UnknownObject { line: u64, object: ObjectId },
    #[error("line {line}: duplicate id {id}")]
    DuplicateId { line: u64, id: String },
    #[error("catalog: {0}")]
    Catalog(String),
    #[error("invalid generator parameters: {0}")]
    Params(String),
}

impl WorkloadError {
    /// The 1-based line the error refers to, if any.
    pub fn line(&self) -> Option<u64> {
        match self {
            WorkloadError::Json { line, .. }
            | WorkloadError::Schema { line, .. }
            | WorkloadError::Unsorted { line, .. }
            | WorkloadError::UnknownObject { line, .. }
            | WorkloadError::DuplicateId { line, .. } => Some(*line),
            _ => None,
        }
    }
}
