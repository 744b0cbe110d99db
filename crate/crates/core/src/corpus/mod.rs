//! Corpus ingestion: name cleaning, frequency tables, merging and dataset
//! statistics.

mod clean;
mod ingest;
mod stats;
mod table;

use std::path::Path;

use thiserror::Error;

pub use clean::{fold_diacritics, normalize_name, split_full_name, NameCleaner, RejectReason, DEFAULT_TITLES};
pub use ingest::{
    ingest_labeled_csv, ingest_labeled_reader, ingest_ssa_years, ingest_ssa_years_with, CsvSchema,
    GenderAliases, IngestReport, MalformedRow,
};
pub use stats::{
    ambiguity_histogram, cross_dataset_uniqueness, dataset_stats, last_token, pairwise_overlap,
    AmbiguityHistogram, DatasetStats, HistogramBin, OverlapMatrix, UniquenessRow,
};
pub use table::{FrequencyTable, Gender, GenderCounts, NameType};

pub(crate) use table::{read_table, write_table};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid year range {0}")]
    InvalidRange(String),
    #[error("no records survived cleaning{}", .first_malformed.as_ref().map(|m| format!(" (first malformed row: {}:{}: {})", m.source, m.line, m.message)).unwrap_or_default())]
    EmptyCorpus { first_malformed: Option<MalformedRow> },
    #[error("cannot merge tables of different name types ({0} and {1}); split full names first")]
    TypeMismatch(NameType, NameType),
    #[error("no ambiguous names to build a distribution from")]
    EmptyDistribution,
}

impl CorpusError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CorpusError::Io { path: path.display().to_string(), source }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        CorpusError::Parse { line, message: message.into() }
    }
}

/// Sums per-name counts across first-name tables. The merged table's source
/// id joins the inputs' ids with `+`.
pub fn merge_tables(tables: &[FrequencyTable]) -> Result<FrequencyTable, CorpusError> {
    let Some(first) = tables.first() else {
        return Err(CorpusError::InvalidInput("nothing to merge".into()));
    };
    if let Some(full) = tables.iter().find(|t| t.name_type() != NameType::First) {
        return Err(CorpusError::TypeMismatch(NameType::First, full.name_type()));
    }
    let source_id = tables.iter().map(FrequencyTable::source_id).collect::<Vec<_>>().join("+");
    let mut merged = FrequencyTable::new(first.name_type(), &source_id);
    for table in tables {
        for (name, counts) in table {
            merged.add_counts(name.clone(), *counts);
        }
    }
    Ok(merged)
}
