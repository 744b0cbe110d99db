use std::collections::btree_map;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::CorpusError;

/// Observed gender of a labeled record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Gender {
    Female,
    Male,
}

impl Gender {
    pub fn letter(&self) -> char {
        match self {
            Gender::Female => 'F',
            Gender::Male => 'M',
        }
    }

    pub fn from_letter(s: &str) -> Option<Gender> {
        match s {
            "F" | "f" => Some(Gender::Female),
            "M" | "m" => Some(Gender::Male),
            _ => None,
        }
    }
}

/// Female/male occurrence tallies for one name.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GenderCounts {
    pub female: u64,
    pub male: u64,
}

impl GenderCounts {
    pub fn new(female: u64, male: u64) -> Self {
        Self { female, male }
    }

    pub fn total(&self) -> u64 {
        self.female + self.male
    }

    /// Observed with both genders.
    pub fn is_ambiguous(&self) -> bool {
        self.female > 0 && self.male > 0
    }

    pub fn add(&mut self, gender: Gender, count: u64) {
        match gender {
            Gender::Female => self.female += count,
            Gender::Male => self.male += count,
        }
    }

    pub fn swapped(&self) -> Self {
        Self { female: self.male, male: self.female }
    }

    /// `female / (female + male)`, or `None` for an empty tally.
    pub fn female_share(&self) -> Option<f64> {
        let total = self.total();
        (total > 0).then(|| self.female as f64 / total as f64)
    }

    /// Gender with the larger count; `None` on an exact tie.
    pub fn majority(&self) -> Option<Gender> {
        use std::cmp::Ordering::*;
        match self.female.cmp(&self.male) {
            Greater => Some(Gender::Female),
            Less => Some(Gender::Male),
            Equal => None,
        }
    }
}

impl std::ops::AddAssign for GenderCounts {
    fn add_assign(&mut self, rhs: Self) {
        self.female += rhs.female;
        self.male += rhs.male;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NameType {
    First,
    Full,
}

impl NameType {
    pub fn as_str(&self) -> &'static str {
        match self {
            NameType::First => "first",
            NameType::Full => "full",
        }
    }
}

impl fmt::Display for NameType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NameType {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "first" => Ok(NameType::First),
            "full" => Ok(NameType::Full),
            other => Err(CorpusError::InvalidInput(format!("unknown name type `{other}`"))),
        }
    }
}

/// Per-name gender counts induced by a corpus.
///
/// Keys are cleaned names. Entries are kept sorted so iteration and
/// serialization are deterministic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyTable {
    entries: BTreeMap<String, GenderCounts>,
    name_type: NameType,
    source_id: String,
}

impl FrequencyTable {
    /// Whitespace in `source_id` is replaced with `_` so the header stays
    /// a single line of `key=value` tokens.
    pub fn new(name_type: NameType, source_id: impl AsRef<str>) -> Self {
        Self {
            entries: BTreeMap::new(),
            name_type,
            source_id: sanitize_id(source_id.as_ref()),
        }
    }

    pub fn from_entries<I, S>(name_type: NameType, source_id: &str, entries: I) -> Self
    where
        I: IntoIterator<Item = (S, GenderCounts)>,
        S: Into<String>,
    {
        let mut table = Self::new(name_type, source_id);
        for (name, counts) in entries {
            table.add_counts(name.into(), counts);
        }
        table
    }

    pub fn name_type(&self) -> NameType {
        self.name_type
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn set_source_id(&mut self, id: &str) {
        self.source_id = sanitize_id(id);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<GenderCounts> {
        self.entries.get(name).copied()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn iter(&self) -> btree_map::Iter<'_, String, GenderCounts> {
        self.entries.iter()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn add(&mut self, name: impl Into<String>, gender: Gender, count: u64) {
        self.entries.entry(name.into()).or_default().add(gender, count);
    }

    /// Zero tallies are ignored so every retained key has a positive total.
    pub fn add_counts(&mut self, name: impl Into<String>, counts: GenderCounts) {
        if counts.total() == 0 {
            return;
        }
        *self.entries.entry(name.into()).or_default() += counts;
    }

    pub fn total_occurrences(&self) -> u64 {
        self.entries.values().map(GenderCounts::total).sum()
    }

    /// Distinct first-name tokens of the keys. For first-name tables this is
    /// the key set itself.
    pub fn first_name_set(&self) -> BTreeSet<&str> {
        match self.name_type {
            NameType::First => self.names().collect(),
            NameType::Full => self.names().map(first_token).collect(),
        }
    }

    /// Collapses a full-name table onto first names by summing counts per
    /// first token. First-name tables are returned unchanged.
    pub fn to_first_names(&self) -> FrequencyTable {
        if self.name_type == NameType::First {
            return self.clone();
        }
        let mut out = FrequencyTable::new(NameType::First, &self.source_id);
        for (name, counts) in &self.entries {
            out.add_counts(first_token(name).to_string(), *counts);
        }
        out
    }

    /// Every entry with its female and male counts exchanged.
    pub fn swapped(&self) -> FrequencyTable {
        FrequencyTable {
            entries: self.entries.iter().map(|(k, v)| (k.clone(), v.swapped())).collect(),
            name_type: self.name_type,
            source_id: self.source_id.clone(),
        }
    }

    /// Keeps only the entries whose name satisfies `keep`.
    pub fn filtered(&self, mut keep: impl FnMut(&str) -> bool) -> FrequencyTable {
        FrequencyTable {
            entries: self
                .entries
                .iter()
                .filter(|(k, _)| keep(k))
                .map(|(k, v)| (k.clone(), *v))
                .collect(),
            name_type: self.name_type,
            source_id: self.source_id.clone(),
        }
    }

    pub(crate) fn header_fields(&self) -> Vec<(String, String)> {
        vec![
            ("name_type".into(), self.name_type.as_str().into()),
            ("source_id".into(), self.source_id.clone()),
        ]
    }

    /// Writes the tab-separated form: one `#` header line of `key=value`
    /// tokens, then `name<TAB>female<TAB>male` per entry.
    pub fn write_to<W: Write>(&self, out: W) -> std::io::Result<()> {
        write_table(out, &self.header_fields(), self)
    }

    pub fn read_from<R: Read>(input: R) -> Result<FrequencyTable, CorpusError> {
        read_table(input).map(|(table, _)| table)
    }

    pub fn save(&self, path: &Path) -> Result<(), CorpusError> {
        let file = File::create(path).map_err(|e| CorpusError::io(path, e))?;
        self.write_to(BufWriter::new(file)).map_err(|e| CorpusError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<FrequencyTable, CorpusError> {
        let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
        FrequencyTable::read_from(BufReader::new(file))
    }
}

impl<'a> IntoIterator for &'a FrequencyTable {
    type Item = (&'a String, &'a GenderCounts);
    type IntoIter = btree_map::Iter<'a, String, GenderCounts>;

    fn into_iter(self) -> Self::IntoIter {
        self.entries.iter()
    }
}

pub(crate) fn first_token(name: &str) -> &str {
    name.split(' ').next().unwrap_or(name)
}

fn sanitize_id(id: &str) -> String {
    let s: String = id
        .trim()
        .chars()
        .map(|c| if c.is_whitespace() || c == '=' { '_' } else { c })
        .collect();
    if s.is_empty() {
        "unnamed".to_string()
    } else {
        s
    }
}

pub(crate) fn write_table<W: Write>(
    mut out: W,
    header: &[(String, String)],
    table: &FrequencyTable,
) -> std::io::Result<()> {
    write!(out, "#")?;
    for (k, v) in header {
        write!(out, " {k}={v}")?;
    }
    writeln!(out)?;
    for (name, c) in &table.entries {
        writeln!(out, "{name}\t{}\t{}", c.female, c.male)?;
    }
    out.flush()
}

/// Parses a header line of the form `# key=value key=value ...`.
pub(crate) fn parse_header(line: &str) -> Result<BTreeMap<String, String>, CorpusError> {
    let body = line
        .strip_prefix('#')
        .ok_or_else(|| CorpusError::parse(1, "missing `#` header line"))?;
    body.split_whitespace()
        .map(|tok| {
            tok.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| CorpusError::parse(1, format!("header token `{tok}` is not key=value")))
        })
        .collect()
}

/// Reads a serialized table and returns it with the raw header fields.
pub(crate) fn read_table<R: Read>(
    input: R,
) -> Result<(FrequencyTable, BTreeMap<String, String>), CorpusError> {
    let mut lines = BufReader::new(input).lines();
    let header_line = match lines.next() {
        Some(line) => line.map_err(|e| CorpusError::parse(1, e.to_string()))?,
        None => return Err(CorpusError::parse(1, "empty table file")),
    };
    let header = parse_header(&header_line)?;
    let name_type = header
        .get("name_type")
        .ok_or_else(|| CorpusError::parse(1, "header lacks name_type"))?
        .parse::<NameType>()
        .map_err(|e| CorpusError::parse(1, e.to_string()))?;
    let source_id = header
        .get("source_id")
        .ok_or_else(|| CorpusError::parse(1, "header lacks source_id"))?;
    let mut table = FrequencyTable::new(name_type, source_id);

    for (idx, line) in lines.enumerate() {
        let lineno = idx + 2;
        let line = line.map_err(|e| CorpusError::parse(lineno, e.to_string()))?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [name, female, male] = fields.as_slice() else {
            return Err(CorpusError::parse(
                lineno,
                format!("expected 3 tab-separated fields, found {}", fields.len()),
            ));
        };
        let parse_count = |s: &str| {
            s.parse::<u64>()
                .map_err(|_| CorpusError::parse(lineno, format!("invalid count `{s}`")))
        };
        let counts = GenderCounts::new(parse_count(female)?, parse_count(male)?);
        if name.is_empty() {
            return Err(CorpusError::parse(lineno, "empty name"));
        }
        if counts.total() == 0 {
            return Err(CorpusError::parse(lineno, "entry with zero total count"));
        }
        if table.contains(name) {
            return Err(CorpusError::parse(lineno, format!("duplicate name `{name}`")));
        }
        table.add_counts(name.to_string(), counts);
    }
    Ok((table, header))
}
