use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::ops::RangeInclusive;
use std::path::Path;

use super::clean::{split_full_name, NameCleaner};
use super::table::{FrequencyTable, Gender, NameType};
use super::{CorpusError, RejectReason};

/// Maps free-form gender tags onto [`Gender`], case-insensitively.
#[derive(Debug, Clone)]
pub struct GenderAliases {
    female: BTreeSet<String>,
    male: BTreeSet<String>,
}

impl Default for GenderAliases {
    fn default() -> Self {
        Self::new(["f", "female", "w"], ["m", "male"])
    }
}

impl GenderAliases {
    pub fn new<I, J, S, T>(female: I, male: J) -> Self
    where
        I: IntoIterator<Item = S>,
        J: IntoIterator<Item = T>,
        S: AsRef<str>,
        T: AsRef<str>,
    {
        Self {
            female: female.into_iter().map(|s| s.as_ref().trim().to_lowercase()).collect(),
            male: male.into_iter().map(|s| s.as_ref().trim().to_lowercase()).collect(),
        }
    }

    pub fn resolve(&self, tag: &str) -> Option<Gender> {
        let tag = tag.trim().to_lowercase();
        if self.female.contains(&tag) {
            Some(Gender::Female)
        } else if self.male.contains(&tag) {
            Some(Gender::Male)
        } else {
            None
        }
    }
}

/// A row that could not be parsed. `line` is 1-based within `source`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MalformedRow {
    pub source: String,
    pub line: u64,
    pub message: String,
}

/// What happened to every input row during ingestion.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub rows_read: u64,
    pub retained: u64,
    pub rejected: BTreeMap<RejectReason, u64>,
    pub unknown_gender: u64,
    pub malformed: Vec<MalformedRow>,
    pub missing_years: Vec<i32>,
}

impl IngestReport {
    pub fn rejected_total(&self) -> u64 {
        self.rejected.values().sum()
    }

    pub fn first_malformed(&self) -> Option<&MalformedRow> {
        self.malformed.first()
    }

    fn reject(&mut self, reason: RejectReason) {
        *self.rejected.entry(reason).or_default() += 1;
    }

    fn malformed(&mut self, source: &str, line: u64, message: impl Into<String>) {
        let message = message.into();
        log::warn!("{source}:{line}: skipping malformed row: {message}");
        self.malformed.push(MalformedRow { source: source.to_string(), line, message });
    }

    /// Tab-separated `metric<TAB>value` lines followed by one line per
    /// malformed row.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "metric\tvalue")?;
        writeln!(out, "rows_read\t{}", self.rows_read)?;
        writeln!(out, "retained\t{}", self.retained)?;
        for reason in RejectReason::ALL {
            let n = self.rejected.get(&reason).copied().unwrap_or(0);
            writeln!(out, "rejected_{}\t{n}", reason.as_str())?;
        }
        writeln!(out, "unknown_gender\t{}", self.unknown_gender)?;
        writeln!(out, "malformed\t{}", self.malformed.len())?;
        for year in &self.missing_years {
            writeln!(out, "missing_year\t{year}")?;
        }
        for row in &self.malformed {
            writeln!(out, "malformed_row\t{}:{}: {}", row.source, row.line, row.message)?;
        }
        out.flush()
    }
}

/// Column mapping for a labeled CSV corpus with a header row.
#[derive(Debug, Clone)]
pub struct CsvSchema {
    pub name_column: String,
    pub gender_column: String,
    pub count_column: Option<String>,
    pub name_type: NameType,
    pub source_id: String,
    pub aliases: GenderAliases,
    pub cleaner: NameCleaner,
}

impl CsvSchema {
    pub fn new(name_column: &str, gender_column: &str, source_id: &str) -> Self {
        Self {
            name_column: name_column.to_string(),
            gender_column: gender_column.to_string(),
            count_column: None,
            name_type: NameType::First,
            source_id: source_id.to_string(),
            aliases: GenderAliases::default(),
            cleaner: NameCleaner::default(),
        }
    }

    pub fn with_count_column(mut self, column: &str) -> Self {
        self.count_column = Some(column.to_string());
        self
    }

    pub fn with_name_type(mut self, name_type: NameType) -> Self {
        self.name_type = name_type;
        self
    }
}

/// Cleans a raw name field into a table key.
///
/// For full names the cleaning rules apply to the first-name token; the
/// last-name token is only case-folded and must not contain digits.
fn clean_key(
    raw: &str,
    name_type: NameType,
    cleaner: &NameCleaner,
) -> Result<Option<String>, RejectReason> {
    match name_type {
        NameType::First => cleaner.normalize(raw).map(Some),
        NameType::Full => {
            let Ok((first, last)) = split_full_name(raw) else {
                return Err(RejectReason::TooShort);
            };
            let first = cleaner.normalize(&first)?;
            if last.is_empty() {
                return Ok(Some(first));
            }
            let last = last.to_lowercase();
            if !last.chars().all(|c| c.is_alphabetic() || "-'.".contains(c)) {
                return Err(RejectReason::InvalidCharacters);
            }
            Ok(Some(format!("{first} {last}")))
        }
    }
}

fn parse_count(field: Option<&str>) -> Result<u64, String> {
    match field.map(str::trim) {
        None | Some("") => Ok(1),
        Some(s) => match s.parse::<u64>() {
            Ok(0) => Err("count must be at least 1".to_string()),
            Ok(n) => Ok(n),
            Err(_) => Err(format!("invalid count `{s}`")),
        },
    }
}

/// Reads a labeled CSV corpus into a frequency table.
///
/// Rows failing the cleaning rules or carrying an unmappable gender tag are
/// dropped and tallied; malformed rows are skipped and listed with their line
/// number. Fails with [`CorpusError::EmptyCorpus`] when nothing survives.
pub fn ingest_labeled_csv(
    path: &Path,
    schema: &CsvSchema,
) -> Result<(FrequencyTable, IngestReport), CorpusError> {
    let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
    ingest_labeled_reader(BufReader::new(file), &path.display().to_string(), schema)
}

pub fn ingest_labeled_reader<R: Read>(
    input: R,
    source: &str,
    schema: &CsvSchema,
) -> Result<(FrequencyTable, IngestReport), CorpusError> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).has_headers(true).from_reader(input);
    let headers = reader
        .headers()
        .map_err(|e| CorpusError::Schema(format!("{source}: unreadable header: {e}")))?
        .clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| CorpusError::Schema(format!("{source}: no column named `{name}`")))
    };
    let name_idx = column(&schema.name_column)?;
    let gender_idx = column(&schema.gender_column)?;
    let count_idx = schema.count_column.as_deref().map(column).transpose()?;

    let mut table = FrequencyTable::new(schema.name_type, &schema.source_id);
    let mut report = IngestReport::default();
    let mut record = csv::StringRecord::new();
    loop {
        let line = reader.position().line() + 1;
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                report.rows_read += 1;
                let line = e.position().map(|p| p.line()).unwrap_or(line);
                report.malformed(source, line, e.to_string());
                continue;
            }
        }
        report.rows_read += 1;
        let line = record.position().map(|p| p.line()).unwrap_or(line);
        let needed = name_idx.max(gender_idx).max(count_idx.unwrap_or(0)) + 1;
        if record.len() < needed {
            report.malformed(source, line, format!("expected at least {needed} fields, found {}", record.len()));
            continue;
        }
        let tag = record[gender_idx].trim();
        if tag.is_empty() {
            report.malformed(source, line, "empty gender field");
            continue;
        }
        let count = match parse_count(count_idx.map(|i| &record[i])) {
            Ok(n) => n,
            Err(msg) => {
                report.malformed(source, line, msg);
                continue;
            }
        };
        let Some(gender) = schema.aliases.resolve(tag) else {
            report.unknown_gender += 1;
            continue;
        };
        match clean_key(&record[name_idx], schema.name_type, &schema.cleaner) {
            Ok(Some(key)) => {
                table.add(key, gender, count);
                report.retained += 1;
            }
            Ok(None) => {}
            Err(reason) => report.reject(reason),
        }
    }
    if table.is_empty() {
        return Err(CorpusError::EmptyCorpus { first_malformed: report.first_malformed().cloned() });
    }
    Ok((table, report))
}

/// Reads SSA-style `yobYYYY.txt` files (`Name,G,Count`, no header) for every
/// year in `years`, summing counts per cleaned name and gender. Missing years
/// are reported and skipped.
pub fn ingest_ssa_years(
    dir: &Path,
    years: RangeInclusive<i32>,
) -> Result<(FrequencyTable, IngestReport), CorpusError> {
    ingest_ssa_years_with(dir, years, &NameCleaner::default())
}

pub fn ingest_ssa_years_with(
    dir: &Path,
    years: RangeInclusive<i32>,
    cleaner: &NameCleaner,
) -> Result<(FrequencyTable, IngestReport), CorpusError> {
    if years.is_empty() {
        return Err(CorpusError::InvalidRange(format!("{}..={}", years.start(), years.end())));
    }
    let source_id = format!("ssa_{}-{}", years.start(), years.end());
    let mut table = FrequencyTable::new(NameType::First, &source_id);
    let mut report = IngestReport::default();
    // raw spellings repeat every year; clean each once
    let mut cleaned: BTreeMap<String, Result<String, RejectReason>> = BTreeMap::new();

    for year in years {
        let file_name = format!("yob{year}.txt");
        let path = dir.join(&file_name);
        let file = match File::open(&path) {
            Ok(f) => f,
            Err(e) => {
                log::warn!("{}: {e}; skipping year {year}", path.display());
                report.missing_years.push(year);
                continue;
            }
        };
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(BufReader::new(file));
        for result in reader.records() {
            report.rows_read += 1;
            let record = match result {
                Ok(r) => r,
                Err(e) => {
                    let line = e.position().map(|p| p.line()).unwrap_or(0);
                    report.malformed(&file_name, line, e.to_string());
                    continue;
                }
            };
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            if record.len() != 3 {
                report.malformed(&file_name, line, format!("expected 3 fields, found {}", record.len()));
                continue;
            }
            let Some(gender) = Gender::from_letter(record[1].trim()) else {
                if record[1].trim().is_empty() {
                    report.malformed(&file_name, line, "empty gender field");
                } else {
                    report.unknown_gender += 1;
                }
                continue;
            };
            let count = match parse_count(Some(&record[2])) {
                Ok(n) => n,
                Err(msg) => {
                    report.malformed(&file_name, line, msg);
                    continue;
                }
            };
            let key = cleaned
                .entry(record[0].to_string())
                .or_insert_with(|| cleaner.normalize(&record[0]));
            match key {
                Ok(name) => {
                    table.add(name.clone(), gender, count);
                    report.retained += 1;
                }
                Err(reason) => report.reject(*reason),
            }
        }
    }
    if table.is_empty() {
        return Err(CorpusError::EmptyCorpus { first_malformed: report.first_malformed().cloned() });
    }
    Ok((table, report))
}
