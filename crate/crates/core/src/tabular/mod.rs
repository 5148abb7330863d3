//! Tabular data: feature schemas, datasets, per-feature empirical statistics,
//! encoding, and deterministic splits.

mod dataset;
mod encode;
mod schema;
mod stats;
pub mod synth;

pub use dataset::{load_csv, load_csv_str, split, Dataset, GroupColumn, Instance};
pub use encode::{decode, encode, encode_into, encoded_len};
pub use schema::{FeatureKind, FeatureSchema, FeatureValue, Schema, SchemaConfig};
pub use stats::{fit_stats, DatasetStats, EmpiricalCdf, FeatureStats};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TabularError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("schema config: {0}")]
    Config(String),
    #[error("column mismatch: {0}")]
    ColumnMismatch(String),
    #[error("row {row}, column {column}: unparsable numerical cell {cell:?}")]
    BadNumber {
        row: usize,
        column: String,
        cell: String,
    },
    #[error("row {row}, column {column}: unknown category {cell:?}")]
    UnknownCategory {
        row: usize,
        column: String,
        cell: String,
    },
    #[error("row {row}, column {column}: missing value")]
    MissingValue { row: usize, column: String },
    #[error("label column {column} is not binary: saw {seen:?}")]
    NonBinaryLabel { column: String, seen: Vec<String> },
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("instance does not conform to schema: {0}")]
    Nonconforming(String),
    #[error("empty partition: {0}")]
    EmptyPartition(String),
}
