//! Maximum-likelihood gender estimates and thresholded classification.
//!
//! A name's estimate is the female share of its labeled occurrences. With a
//! threshold `tau`, the model answers Female when the share is strictly above
//! `tau`, Male when it is strictly below `1 - tau`, and Ambiguous otherwise.
//! Names missing from the table are Unknown. A share of exactly 0.5 is
//! therefore Ambiguous at every threshold.

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{read_table, write_table, CorpusError, FrequencyTable, GenderCounts};

pub const DEFAULT_TAU: f64 = 0.90;

/// Thresholds evaluated by default when sweeping.
pub const STANDARD_TAUS: [f64; 3] = [0.50, 0.75, 0.90];

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("counts must total at least one occurrence")]
    InvalidCounts,
    #[error("threshold {0} outside [0.5, 1.0]")]
    InvalidTau(f64),
    #[error("cannot train on an empty table")]
    EmptyTable,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// Female share `female / (female + male)`.
pub fn mle_female(counts: GenderCounts) -> Result<f64, ModelError> {
    counts.female_share().ok_or(ModelError::InvalidCounts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GenderLabel {
    Female,
    Male,
    Ambiguous,
    Unknown,
}

impl GenderLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            GenderLabel::Female => "female",
            GenderLabel::Male => "male",
            GenderLabel::Ambiguous => "ambiguous",
            GenderLabel::Unknown => "unknown",
        }
    }

    /// Female or Male.
    pub fn is_definite(&self) -> bool {
        matches!(self, GenderLabel::Female | GenderLabel::Male)
    }

    pub fn swapped(&self) -> GenderLabel {
        match self {
            GenderLabel::Female => GenderLabel::Male,
            GenderLabel::Male => GenderLabel::Female,
            other => *other,
        }
    }
}

impl fmt::Display for GenderLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GenderLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "female" | "f" => Ok(GenderLabel::Female),
            "male" | "m" => Ok(GenderLabel::Male),
            "ambiguous" | "a" => Ok(GenderLabel::Ambiguous),
            "unknown" | "u" => Ok(GenderLabel::Unknown),
            other => Err(format!("unknown label `{other}`")),
        }
    }
}

/// One inferrer's answer for one name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: GenderLabel,
    /// Present for every label except Unknown.
    pub p_female: Option<f64>,
    pub source: String,
}

impl Prediction {
    pub fn new(label: GenderLabel, p_female: Option<f64>, source: impl Into<String>) -> Self {
        debug_assert_eq!(p_female.is_some(), label != GenderLabel::Unknown);
        Self { label, p_female, source: source.into() }
    }

    pub fn unknown(source: impl Into<String>) -> Self {
        Self { label: GenderLabel::Unknown, p_female: None, source: source.into() }
    }

    pub fn p_male(&self) -> Option<f64> {
        self.p_female.map(|p| 1.0 - p)
    }

    pub fn with_source(mut self, source: impl Into<String>) -> Self {
        self.source = source.into();
        self
    }
}

/// Decision threshold, validated to lie in `[0.5, 1.0]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Tau(f64);

impl Tau {
    pub fn new(value: f64) -> Result<Tau, ModelError> {
        if (0.5..=1.0).contains(&value) {
            Ok(Tau(value))
        } else {
            Err(ModelError::InvalidTau(value))
        }
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

impl Default for Tau {
    fn default() -> Self {
        Tau(DEFAULT_TAU)
    }
}

/// Applies the strict two-sided threshold rule to a female share.
pub fn threshold_label(p_female: f64, tau: Tau) -> GenderLabel {
    if p_female > tau.0 {
        GenderLabel::Female
    } else if p_female < 1.0 - tau.0 {
        GenderLabel::Male
    } else {
        GenderLabel::Ambiguous
    }
}

/// Threshold rule on raw counts.
///
/// The male side compares the male share against `tau` rather than the
/// female share against `1 - tau`, so exchanging the counts exchanges the
/// labels exactly. Male still implies a female share strictly below
/// `1 - tau` after rounding.
pub fn threshold_counts(counts: GenderCounts, tau: Tau) -> Option<GenderLabel> {
    let total = counts.total();
    if total == 0 {
        return None;
    }
    let female = counts.female as f64 / total as f64;
    let male = counts.male as f64 / total as f64;
    Some(if female > tau.0 {
        GenderLabel::Female
    } else if male > tau.0 {
        GenderLabel::Male
    } else {
        GenderLabel::Ambiguous
    })
}

/// A frequency table plus a threshold. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct MleModel {
    table: FrequencyTable,
    tau: Tau,
}

impl MleModel {
    pub fn train(table: FrequencyTable, tau: Tau) -> Result<MleModel, ModelError> {
        if table.is_empty() {
            return Err(ModelError::EmptyTable);
        }
        Ok(MleModel { table, tau })
    }

    pub fn table(&self) -> &FrequencyTable {
        &self.table
    }

    pub fn tau(&self) -> Tau {
        self.tau
    }

    pub fn with_tau(&self, tau: Tau) -> MleModel {
        MleModel { table: self.table.clone(), tau }
    }

    /// Female share for a known name.
    pub fn estimate(&self, name: &str) -> Option<f64> {
        self.table.get(name).and_then(|c| c.female_share())
    }

    /// `name` must already be normalized.
    pub fn classify(&self, name: &str) -> Prediction {
        self.classify_as(name, "mle")
    }

    pub(crate) fn classify_as(&self, name: &str, source: &str) -> Prediction {
        let Some(counts) = self.table.get(name) else {
            return Prediction::unknown(source);
        };
        match (threshold_counts(counts, self.tau), counts.female_share()) {
            (Some(label), Some(p)) => Prediction::new(label, Some(p), source),
            _ => Prediction::unknown(source),
        }
    }

    /// Table serialization with an extra `tau=<value>` header field.
    pub fn write_to<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut header = self.table.header_fields();
        header.push(("tau".into(), self.tau.0.to_string()));
        write_table(out, &header, &self.table)
    }

    pub fn read_from<R: Read>(input: R) -> Result<MleModel, ModelError> {
        let (table, header) = read_table(input).map_err(|e| match e {
            CorpusError::Parse { line, message } => ModelError::Parse { line, message },
            other => ModelError::Corpus(other),
        })?;
        let raw = header
            .get("tau")
            .ok_or_else(|| ModelError::Parse { line: 1, message: "header lacks tau".into() })?;
        let value = raw
            .parse::<f64>()
            .map_err(|_| ModelError::Parse { line: 1, message: format!("invalid tau `{raw}`") })?;
        let tau = Tau::new(value).map_err(|e| ModelError::Parse { line: 1, message: e.to_string() })?;
        MleModel::train(table, tau)
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let io = |e| ModelError::Corpus(CorpusError::Io { path: path.display().to_string(), source: e });
        let file = File::create(path).map_err(io)?;
        self.write_to(BufWriter::new(file)).map_err(io)
    }

    pub fn load(path: &Path) -> Result<MleModel, ModelError> {
        let file = File::open(path)
            .map_err(|e| ModelError::Corpus(CorpusError::Io { path: path.display().to_string(), source: e }))?;
        MleModel::read_from(BufReader::new(file))
    }
}
