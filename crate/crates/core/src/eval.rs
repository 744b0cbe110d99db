//! Train/test splits, scoring, metrics and size-weighted aggregation.
//!
//! Female is the positive class. Predictions that are neither Female nor
//! Male (Ambiguous, Unknown) are "undecided": they count as wrong for
//! accuracy, are left out of precision, and count against recall when the
//! observed gender is Female. All metrics are percentages; GBE lies in
//! [-100, 100]. A metric whose denominator is zero is NA (`None`).

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::ops::{Add, AddAssign};
use std::path::Path;
use std::thread;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::corpus::{FrequencyTable, Gender, NameType};
use crate::inferrer::{InferError, InferrerHandle};
use crate::mle::{GenderLabel, Prediction};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("degenerate split: {0}")]
    SplitDegenerate(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Infer(#[from] InferError),
}

fn io_err(path: &Path, source: io::Error) -> EvalError {
    EvalError::Io { path: path.display().to_string(), source }
}

/// Names with their observed gender, unique within the set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledTestSet {
    id: String,
    entries: Vec<(String, Gender)>,
}

impl LabeledTestSet {
    pub fn new(id: impl Into<String>, entries: Vec<(String, Gender)>) -> Result<LabeledTestSet, EvalError> {
        let id = id.into();
        if id.is_empty() || id.contains(char::is_whitespace) {
            return Err(EvalError::InvalidInput(format!("test set id `{id}` must be non-empty without whitespace")));
        }
        if entries.is_empty() {
            return Err(EvalError::InvalidInput(format!("test set `{id}` is empty")));
        }
        let mut seen = HashSet::with_capacity(entries.len());
        if let Some((dup, _)) = entries.iter().find(|(n, _)| !seen.insert(n.as_str())) {
            return Err(EvalError::InvalidInput(format!("test set `{id}` lists `{dup}` twice")));
        }
        Ok(LabeledTestSet { id, entries })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(String, Gender)] {
        &self.entries
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.iter().map(|(n, _)| n.clone()).collect()
    }

    pub fn female_count(&self) -> usize {
        self.entries.iter().filter(|(_, g)| *g == Gender::Female).count()
    }

    /// `# testset id=<id>` then one `name<TAB>F|M` line per entry.
    pub fn write_to<W: Write>(&self, out: W) -> io::Result<()> {
        let mut out = BufWriter::new(out);
        writeln!(out, "# testset id={}", self.id)?;
        for (name, g) in &self.entries {
            writeln!(out, "{name}\t{}", g.letter())?;
        }
        out.flush()
    }

    pub fn read_from<R: Read>(input: R) -> Result<LabeledTestSet, EvalError> {
        let parse = |line: usize, message: String| EvalError::Parse { line, message };
        let mut lines = BufReader::new(input).lines();
        let header = lines
            .next()
            .ok_or_else(|| parse(1, "empty file".into()))?
            .map_err(|e| parse(1, e.to_string()))?;
        let id = header
            .strip_prefix("# testset ")
            .and_then(|rest| rest.split_whitespace().find_map(|kv| kv.strip_prefix("id=")))
            .ok_or_else(|| parse(1, "expected `# testset id=<id>`".into()))?
            .to_string();
        let mut entries = Vec::new();
        for (idx, line) in lines.enumerate() {
            let n = idx + 2;
            let line = line.map_err(|e| parse(n, e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let (name, g) = line.split_once('\t').ok_or_else(|| parse(n, "expected `name<TAB>F|M`".into()))?;
            let g = Gender::from_letter(g.trim()).ok_or_else(|| parse(n, format!("gender `{g}` is not F or M")))?;
            entries.push((name.to_string(), g));
        }
        LabeledTestSet::new(id, entries)
    }

    pub fn save(&self, path: &Path) -> Result<(), EvalError> {
        File::create(path).and_then(|f| self.write_to(f)).map_err(|e| io_err(path, e))
    }

    pub fn load(path: &Path) -> Result<LabeledTestSet, EvalError> {
        Self::read_from(File::open(path).map_err(|e| io_err(path, e))?)
    }
}

#[derive(Debug, Clone)]
pub struct SplitOutcome {
    pub train: FrequencyTable,
    pub test: LabeledTestSet,
    /// Names drawn for the test set whose counts are exactly tied. They are
    /// in neither output.
    pub excluded_ties: Vec<String>,
}

/// Seeded random partition of the table's unique names. The test share is
/// `round(n * test_fraction)` names; each test name is labeled with its
/// majority gender. Full-name tables are projected to first names first.
pub fn split_dataset(table: &FrequencyTable, test_fraction: f64, seed: u64) -> Result<SplitOutcome, EvalError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(EvalError::InvalidInput(format!("test fraction {test_fraction} is outside (0, 1)")));
    }
    let projected;
    let table = if table.name_type() == NameType::Full {
        projected = table.to_first_names();
        &projected
    } else {
        table
    };
    let mut names: Vec<&str> = table.names().collect();
    let n = names.len();
    let k = (n as f64 * test_fraction).round() as usize;
    if k == 0 || k >= n {
        return Err(EvalError::SplitDegenerate(format!(
            "{n} names at fraction {test_fraction} leave an empty train or test side"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    names.shuffle(&mut rng);
    let (test_names, train_names) = names.split_at(k);

    let train_set: HashSet<&str> = train_names.iter().copied().collect();
    let mut train = table.filtered(|name| train_set.contains(name));
    train.set_source_id(&format!("{}.train", table.source_id()));

    let mut sorted_test = test_names.to_vec();
    sorted_test.sort_unstable();
    let mut entries = Vec::with_capacity(k);
    let mut excluded_ties = Vec::new();
    for name in sorted_test {
        let counts = table.get(name).expect("name drawn from table");
        match counts.majority() {
            Some(g) => entries.push((name.to_string(), g)),
            None => excluded_ties.push(name.to_string()),
        }
    }
    if entries.is_empty() {
        return Err(EvalError::SplitDegenerate("every test name has tied counts".into()));
    }
    let test = LabeledTestSet::new(table.source_id(), entries)?;
    Ok(SplitOutcome { train, test, excluded_ties })
}

/// Confusion counts with Female as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionCounts {
    /// predicted Female, observed Female
    pub tf: u64,
    /// predicted Male, observed Male
    pub tm: u64,
    /// predicted Female, observed Male
    pub ff: u64,
    /// predicted Male, observed Female
    pub fm: u64,
    pub undecided_female: u64,
    pub undecided_male: u64,
}

impl ConfusionCounts {
    pub fn record(&mut self, observed: Gender, predicted: GenderLabel) {
        let slot = match (observed, predicted) {
            (Gender::Female, GenderLabel::Female) => &mut self.tf,
            (Gender::Male, GenderLabel::Male) => &mut self.tm,
            (Gender::Male, GenderLabel::Female) => &mut self.ff,
            (Gender::Female, GenderLabel::Male) => &mut self.fm,
            (Gender::Female, _) => &mut self.undecided_female,
            (Gender::Male, _) => &mut self.undecided_male,
        };
        *slot += 1;
    }

    pub fn undecided(&self) -> u64 {
        self.undecided_female + self.undecided_male
    }

    pub fn decided(&self) -> u64 {
        self.tf + self.tm + self.ff + self.fm
    }

    pub fn total(&self) -> u64 {
        self.decided() + self.undecided()
    }
}

impl AddAssign for ConfusionCounts {
    fn add_assign(&mut self, o: Self) {
        self.tf += o.tf;
        self.tm += o.tm;
        self.ff += o.ff;
        self.fm += o.fm;
        self.undecided_female += o.undecided_female;
        self.undecided_male += o.undecided_male;
    }
}

impl Add for ConfusionCounts {
    type Output = Self;
    fn add(mut self, o: Self) -> Self {
        self += o;
        self
    }
}

/// Tallies predictions against a test set, pairwise by position.
pub fn score(testset: &LabeledTestSet, predictions: &[Prediction]) -> Result<ConfusionCounts, EvalError> {
    if predictions.len() != testset.len() {
        return Err(EvalError::InvalidInput(format!(
            "{} predictions for {} names in `{}`",
            predictions.len(),
            testset.len(),
            testset.id()
        )));
    }
    let mut counts = ConfusionCounts::default();
    for ((_, observed), pred) in testset.entries().iter().zip(predictions) {
        counts.record(*observed, pred.label);
    }
    Ok(counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MetricKind {
    Accuracy,
    Precision,
    Recall,
    F1,
    Gbe,
}

impl MetricKind {
    pub const ALL: [MetricKind; 5] =
        [MetricKind::Accuracy, MetricKind::Precision, MetricKind::Recall, MetricKind::F1, MetricKind::Gbe];

    pub fn as_str(&self) -> &'static str {
        match self {
            MetricKind::Accuracy => "accuracy",
            MetricKind::Precision => "precision",
            MetricKind::Recall => "recall",
            MetricKind::F1 => "f1",
            MetricKind::Gbe => "gbe",
        }
    }

    pub fn title(&self) -> &'static str {
        match self {
            MetricKind::Accuracy => "Accuracy",
            MetricKind::Precision => "Precision",
            MetricKind::Recall => "Recall",
            MetricKind::F1 => "F1",
            MetricKind::Gbe => "GBE",
        }
    }
}

/// Percentages; `None` is NA.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Metrics {
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub gbe: Option<f64>,
}

impl Metrics {
    pub fn get(&self, kind: MetricKind) -> Option<f64> {
        match kind {
            MetricKind::Accuracy => self.accuracy,
            MetricKind::Precision => self.precision,
            MetricKind::Recall => self.recall,
            MetricKind::F1 => self.f1,
            MetricKind::Gbe => self.gbe,
        }
    }

    fn set(&mut self, kind: MetricKind, v: Option<f64>) {
        match kind {
            MetricKind::Accuracy => self.accuracy = v,
            MetricKind::Precision => self.precision = v,
            MetricKind::Recall => self.recall = v,
            MetricKind::F1 => self.f1 = v,
            MetricKind::Gbe => self.gbe = v,
        }
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| 100.0 * num as f64 / den as f64)
}

/// F1 is NA when precision or recall is NA, and 0 when both are 0.
pub fn metrics(counts: &ConfusionCounts) -> Result<Metrics, EvalError> {
    let c = counts;
    if c.total() == 0 {
        return Err(EvalError::InvalidInput("no predictions to score".into()));
    }
    let precision = ratio(c.tf, c.tf + c.ff);
    let recall = ratio(c.tf, c.tf + c.fm + c.undecided_female);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        (Some(_), Some(_)) => Some(0.0),
        _ => None,
    };
    let decided = c.decided();
    let gbe = (decided > 0).then(|| 100.0 * (c.ff as f64 - c.fm as f64) / decided as f64);
    Ok(Metrics { accuracy: ratio(c.tf + c.tm, c.total()), precision, recall, f1, gbe })
}

/// Size-weighted mean over the non-NA entries; NA when all are NA.
pub fn aggregate(per_dataset: &[(Option<f64>, u64)]) -> Option<f64> {
    let (num, den) = per_dataset
        .iter()
        .filter_map(|(v, s)| v.map(|v| (v, *s)))
        .fold((0.0, 0u64), |(num, den), (v, s)| (num + v * s as f64, den + s));
    (den > 0).then(|| num / den as f64)
}

/// An inferrer to evaluate and the datasets on which its cells are NA
/// (typically the data it was trained on).
#[derive(Debug, Clone)]
pub struct EvalSubject {
    pub handle: InferrerHandle,
    pub na_datasets: BTreeSet<String>,
}

impl EvalSubject {
    pub fn new(handle: InferrerHandle) -> Self {
        Self { handle, na_datasets: BTreeSet::new() }
    }

    pub fn with_na(mut self, dataset: impl Into<String>) -> Self {
        self.na_datasets.insert(dataset.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub inferrer: String,
    pub dataset: String,
    pub size: u64,
    /// `None` for an NA cell.
    pub counts: Option<ConfusionCounts>,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub inferrer: String,
    pub metrics: Metrics,
}

/// Free-form per-inferrer counters (stage usage, vote ties) carried along
/// with a report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReportNote {
    pub inferrer: String,
    pub key: String,
    pub value: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MetricsReport {
    pub datasets: Vec<(String, u64)>,
    pub rows: Vec<ReportRow>,
    pub aggregates: Vec<AggregateRow>,
    pub notes: Vec<ReportNote>,
}

/// Scores every subject on every test set. Pairs run in parallel; rows
/// come out ordered by (inferrer id, dataset id).
pub fn evaluate_run(testsets: &[LabeledTestSet], subjects: &[EvalSubject]) -> Result<MetricsReport, EvalError> {
    let mut ids = BTreeSet::new();
    for t in testsets {
        if !ids.insert(t.id()) {
            return Err(EvalError::InvalidInput(format!("test set id `{}` appears twice", t.id())));
        }
    }
    let mut sids = BTreeSet::new();
    for s in subjects {
        if !sids.insert(s.handle.id()) {
            return Err(EvalError::InvalidInput(format!("inferrer id `{}` appears twice", s.handle.id())));
        }
    }

    let cells: Vec<Result<ReportRow, EvalError>> = thread::scope(|scope| {
        let jobs: Vec<_> = subjects
            .iter()
            .flat_map(|s| testsets.iter().map(move |t| (s, t)))
            .map(|(s, t)| scope.spawn(move || evaluate_cell(s, t)))
            .collect();
        jobs.into_iter().map(|j| j.join().expect("evaluation thread panicked")).collect()
    });
    let mut rows = cells.into_iter().collect::<Result<Vec<_>, _>>()?;
    rows.sort_by(|a, b| (&a.inferrer, &a.dataset).cmp(&(&b.inferrer, &b.dataset)));

    let mut datasets: Vec<(String, u64)> = testsets.iter().map(|t| (t.id().to_string(), t.len() as u64)).collect();
    datasets.sort();
    let mut aggregates: Vec<AggregateRow> = sids
        .iter()
        .map(|id| {
            let mine: Vec<&ReportRow> = rows.iter().filter(|r| r.inferrer == *id).collect();
            let mut m = Metrics::default();
            for kind in MetricKind::ALL {
                let entries: Vec<(Option<f64>, u64)> = mine.iter().map(|r| (r.metrics.get(kind), r.size)).collect();
                m.set(kind, aggregate(&entries));
            }
            AggregateRow { inferrer: id.to_string(), metrics: m }
        })
        .collect();
    aggregates.sort_by(|a, b| a.inferrer.cmp(&b.inferrer));
    Ok(MetricsReport { datasets, rows, aggregates, notes: Vec::new() })
}

fn evaluate_cell(subject: &EvalSubject, testset: &LabeledTestSet) -> Result<ReportRow, EvalError> {
    let mut row = ReportRow {
        inferrer: subject.handle.id().to_string(),
        dataset: testset.id().to_string(),
        size: testset.len() as u64,
        counts: None,
        metrics: Metrics::default(),
    };
    if subject.na_datasets.contains(testset.id()) {
        return Ok(row);
    }
    let preds = subject.handle.infer_batch(&testset.names())?;
    let counts = score(testset, &preds)?;
    row.metrics = metrics(&counts)?;
    row.counts = Some(counts);
    Ok(row)
}

fn cell(v: Option<f64>, decimals: usize) -> String {
    match v {
        Some(v) => format!("{v:.decimals$}"),
        None => "NA".to_string(),
    }
}

impl MetricsReport {
    pub fn aggregate_for(&self, inferrer: &str) -> Option<&Metrics> {
        self.aggregates.iter().find(|a| a.inferrer == inferrer).map(|a| &a.metrics)
    }

    pub fn row(&self, inferrer: &str, dataset: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.inferrer == inferrer && r.dataset == dataset)
    }

    /// One line per (inferrer, dataset) cell plus an `aggregate` line per
    /// inferrer. Metrics to four decimals; NA cells read `NA`.
    pub fn write_tsv<W: Write>(&self, out: W) -> io::Result<()> {
        let mut out = BufWriter::new(out);
        writeln!(
            out,
            "inferrer\tdataset\tsize\taccuracy\tprecision\trecall\tf1\tgbe\ttf\ttm\tff\tfm\tundecided_female\tundecided_male"
        )?;
        let metric_cells = |m: &Metrics| MetricKind::ALL.map(|k| cell(m.get(k), 4)).join("\t");
        for agg in &self.aggregates {
            let mine: Vec<&ReportRow> = self.rows.iter().filter(|r| r.inferrer == agg.inferrer).collect();
            for r in &mine {
                let counts = match &r.counts {
                    Some(c) => format!(
                        "{}\t{}\t{}\t{}\t{}\t{}",
                        c.tf, c.tm, c.ff, c.fm, c.undecided_female, c.undecided_male
                    ),
                    None => ["NA"; 6].join("\t"),
                };
                writeln!(out, "{}\t{}\t{}\t{}\t{counts}", r.inferrer, r.dataset, r.size, metric_cells(&r.metrics))?;
            }
            let scored: Vec<&&ReportRow> = mine.iter().filter(|r| r.counts.is_some()).collect();
            let size: u64 = scored.iter().map(|r| r.size).sum();
            let total = scored.iter().filter_map(|r| r.counts).fold(ConfusionCounts::default(), Add::add);
            writeln!(
                out,
                "{}\taggregate\t{size}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                agg.inferrer,
                metric_cells(&agg.metrics),
                total.tf,
                total.tm,
                total.ff,
                total.fm,
                total.undecided_female,
                total.undecided_male
            )?;
        }
        out.flush()
    }

    /// JSON lines: one record per cell, then one per aggregate, then one per
    /// note. NA is `null`.
    pub fn write_jsonl<W: Write>(&self, out: W) -> io::Result<()> {
        #[derive(Serialize)]
        #[serde(tag = "record", rename_all = "snake_case")]
        enum Record<'a> {
            Cell(&'a ReportRow),
            Aggregate(&'a AggregateRow),
            Note(&'a ReportNote),
        }
        let mut out = BufWriter::new(out);
        let records = self
            .rows
            .iter()
            .map(Record::Cell)
            .chain(self.aggregates.iter().map(Record::Aggregate))
            .chain(self.notes.iter().map(Record::Note));
        for r in records {
            serde_json::to_writer(&mut out, &r)?;
            out.write_all(b"\n")?;
        }
        out.flush()
    }

    /// Aligned text: a summary table of aggregates (Accuracy, Precision,
    /// Recall, F1, GBE), then one inferrer-by-dataset table per metric.
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let mut header = vec!["Inferrer".to_string()];
        header.extend(MetricKind::ALL.iter().map(|k| k.title().to_string()));
        let rows: Vec<Vec<String>> = self
            .aggregates
            .iter()
            .map(|a| {
                let mut r = vec![a.inferrer.clone()];
                r.extend(MetricKind::ALL.iter().map(|k| cell(a.metrics.get(*k), 2)));
                r
            })
            .collect();
        s.push_str(&align(&header, &rows));

        for kind in MetricKind::ALL {
            let _ = writeln!(s, "\n{}", kind.title());
            let mut header = vec!["Inferrer".to_string()];
            header.extend(self.datasets.iter().map(|(d, n)| format!("{d} ({n})")));
            header.push("Aggregate".to_string());
            let rows: Vec<Vec<String>> = self
                .aggregates
                .iter()
                .map(|a| {
                    let mut r = vec![a.inferrer.clone()];
                    for (d, _) in &self.datasets {
                        r.push(cell(self.row(&a.inferrer, d).and_then(|row| row.metrics.get(kind)), 2));
                    }
                    r.push(cell(a.metrics.get(kind), 2));
                    r
                })
                .collect();
            s.push_str(&align(&header, &rows));
        }
        if !self.notes.is_empty() {
            s.push('\n');
            for n in &self.notes {
                let _ = writeln!(s, "{} {}: {}", n.inferrer, n.key, n.value);
            }
        }
        s
    }
}

fn align(header: &[String], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: &[String]| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        parts.join("  ").trim_end().to_string() + "\n"
    };
    let mut s = line(header);
    s.push_str(&line(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>()));
    for r in rows {
        s.push_str(&line(r));
    }
    s
}
