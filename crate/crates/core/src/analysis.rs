//! Error analysis over scored names: length distributions, non-English
//! share and character n-gram inventories, broken down by rate type.
//!
//! Only definite outcomes (TF, FF, TM, FM) are analyzed; names the inferrer
//! left undecided are dropped.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, BufWriter, Write};

use serde::Serialize;
use thiserror::Error;

use crate::corpus::Gender;
use crate::eval::LabeledTestSet;
use crate::mle::{GenderLabel, Prediction};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AnalysisError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("no names in the {0} category")]
    EmptyCategory(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum RateType {
    TF,
    FF,
    TM,
    FM,
}

impl RateType {
    pub const ALL: [RateType; 4] = [RateType::TF, RateType::FF, RateType::TM, RateType::FM];

    /// None for undecided predictions.
    pub fn of(observed: Gender, predicted: GenderLabel) -> Option<RateType> {
        match (observed, predicted) {
            (Gender::Female, GenderLabel::Female) => Some(RateType::TF),
            (Gender::Male, GenderLabel::Female) => Some(RateType::FF),
            (Gender::Male, GenderLabel::Male) => Some(RateType::TM),
            (Gender::Female, GenderLabel::Male) => Some(RateType::FM),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            RateType::TF => "TF",
            RateType::FF => "FF",
            RateType::TM => "TM",
            RateType::FM => "FM",
        }
    }

    pub fn is_correct(&self) -> bool {
        matches!(self, RateType::TF | RateType::TM)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoredName {
    pub name: String,
    pub rate: RateType,
}

impl ScoredName {
    pub fn new(name: impl Into<String>, rate: RateType) -> Self {
        Self { name: name.into(), rate }
    }
}

/// Pairs a test set with predictions, dropping undecided names.
pub fn scored_names(testset: &LabeledTestSet, predictions: &[Prediction]) -> Result<Vec<ScoredName>, AnalysisError> {
    if predictions.len() != testset.len() {
        return Err(AnalysisError::InvalidInput(format!(
            "{} predictions for {} names",
            predictions.len(),
            testset.len()
        )));
    }
    Ok(testset
        .entries()
        .iter()
        .zip(predictions)
        .filter_map(|((name, g), p)| RateType::of(*g, p.label).map(|r| ScoredName::new(name.clone(), r)))
        .collect())
}

fn by_rate(scored: &[ScoredName]) -> BTreeMap<RateType, Vec<&str>> {
    let mut groups: BTreeMap<RateType, Vec<&str>> = BTreeMap::new();
    for s in scored {
        groups.entry(s.rate).or_default().push(&s.name);
    }
    groups
}

fn omitted(groups: &BTreeMap<RateType, Vec<&str>>) -> Vec<RateType> {
    let missing: Vec<RateType> = RateType::ALL.into_iter().filter(|r| !groups.contains_key(r)).collect();
    for r in &missing {
        log::info!("rate type {} has no names; omitted", r.as_str());
    }
    missing
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LengthHistogram {
    pub rate: RateType,
    pub names: usize,
    /// Character length to (count, percentage of `names`).
    pub bins: BTreeMap<usize, (usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LengthReport {
    pub histograms: Vec<LengthHistogram>,
    pub omitted: Vec<RateType>,
}

/// Character-length distribution per rate type. Lengths count characters of
/// the name as given (the string the inferrer saw).
pub fn length_histograms(scored: &[ScoredName]) -> LengthReport {
    let groups = by_rate(scored);
    let histograms = groups
        .iter()
        .map(|(rate, names)| {
            let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
            for n in names {
                *counts.entry(n.chars().count()).or_default() += 1;
            }
            let total = names.len();
            let bins = counts.into_iter().map(|(len, c)| (len, (c, 100.0 * c as f64 / total as f64))).collect();
            LengthHistogram { rate: *rate, names: total, bins }
        })
        .collect();
    LengthReport { histograms, omitted: omitted(&groups) }
}

/// True if any letter falls outside a-z. Separators inside names (space,
/// hyphen, apostrophe, period) are not letters and are ignored.
pub fn is_non_english(name: &str) -> bool {
    name.chars()
        .filter(|c| !matches!(c, ' ' | '-' | '\'' | '.'))
        .flat_map(char::to_lowercase)
        .any(|c| !c.is_ascii_lowercase())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonEnglishRow {
    pub rate: RateType,
    pub names: usize,
    pub non_english: usize,
    pub percentage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonEnglishReport {
    pub rows: Vec<NonEnglishRow>,
    pub omitted: Vec<RateType>,
}

pub fn non_english_distribution(scored: &[ScoredName]) -> NonEnglishReport {
    let groups = by_rate(scored);
    let rows = groups
        .iter()
        .map(|(rate, names)| {
            let non_english = names.iter().filter(|n| is_non_english(n)).count();
            NonEnglishRow {
                rate: *rate,
                names: names.len(),
                non_english,
                percentage: 100.0 * non_english as f64 / names.len() as f64,
            }
        })
        .collect();
    NonEnglishReport { rows, omitted: omitted(&groups) }
}

/// Contiguous character n-grams of the lowercased name, in order.
pub fn extract_ngrams(name: &str, n: usize) -> Result<Vec<String>, AnalysisError> {
    if !(2..=3).contains(&n) {
        return Err(AnalysisError::InvalidInput(format!("n-gram size {n} is not 2 or 3")));
    }
    let chars: Vec<char> = name.chars().flat_map(char::to_lowercase).collect();
    Ok(chars.windows(n).map(|w| w.iter().collect()).collect())
}

/// Distinct n-grams of correctly (TF, TM) and incorrectly (FF, FM) labeled
/// names, split into grams seen only on one side and grams seen on both.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NgramInventory {
    pub n: usize,
    pub true_names: usize,
    pub false_names: usize,
    pub unique_true: BTreeSet<String>,
    pub unique_false: BTreeSet<String>,
    pub overlap: BTreeSet<String>,
}

pub fn ngram_inventory(scored: &[ScoredName], n: usize) -> Result<NgramInventory, AnalysisError> {
    let mut true_grams = BTreeSet::new();
    let mut false_grams = BTreeSet::new();
    let (mut true_names, mut false_names) = (0, 0);
    for s in scored {
        let grams = extract_ngrams(&s.name, n)?;
        if s.rate.is_correct() {
            true_names += 1;
            true_grams.extend(grams);
        } else {
            false_names += 1;
            false_grams.extend(grams);
        }
    }
    if true_names == 0 {
        return Err(AnalysisError::EmptyCategory("true"));
    }
    if false_names == 0 {
        return Err(AnalysisError::EmptyCategory("false"));
    }
    let overlap = true_grams.intersection(&false_grams).cloned().collect();
    let unique_true = true_grams.difference(&false_grams).cloned().collect();
    let unique_false = false_grams.difference(&true_grams).cloned().collect();
    Ok(NgramInventory { n, true_names, false_names, unique_true, unique_false, overlap })
}

impl LengthReport {
    pub fn write_tsv<W: Write>(&self, out: W) -> io::Result<()> {
        let mut out = BufWriter::new(out);
        writeln!(out, "rate_type\tlength\tnames\tpercentage")?;
        for h in &self.histograms {
            for (len, (count, pct)) in &h.bins {
                writeln!(out, "{}\t{len}\t{count}\t{pct:.4}", h.rate.as_str())?;
            }
        }
        out.flush()
    }
}

impl NonEnglishReport {
    pub fn write_tsv<W: Write>(&self, out: W) -> io::Result<()> {
        let mut out = BufWriter::new(out);
        writeln!(out, "rate_type\tnames\tnon_english\tpercentage")?;
        for r in &self.rows {
            writeln!(out, "{}\t{}\t{}\t{:.4}", r.rate.as_str(), r.names, r.non_english, r.percentage)?;
        }
        out.flush()
    }
}

impl NgramInventory {
    /// Three summary rows, then every gram with the set it belongs to.
    pub fn write_tsv<W: Write>(&self, out: W) -> io::Result<()> {
        let mut out = BufWriter::new(out);
        writeln!(out, "set\tngram\tcount")?;
        let sets = [("unique_true", &self.unique_true), ("unique_false", &self.unique_false), ("overlap", &self.overlap)];
        for (label, set) in sets {
            writeln!(out, "{label}\t*\t{}", set.len())?;
        }
        for (label, set) in sets {
            for g in set {
                writeln!(out, "{label}\t{g}\t1")?;
            }
        }
        out.flush()
    }
}
