//! The `namegender` command line.
//!
//! Inferrers are named on the command line as `[id=]kind:path`, where kind is
//! `mle` (a trained model file), `mock` (a prediction list), `http` (a
//! service adapter config) or `ensemble` (a hybrid config whose stage-2 ids
//! refer to other inferrers). A `--config` file may declare more inferrers
//! as `inferrer.<id> = kind:path` and NA cells as `na.<id> = dataset, ...`.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analysis::{length_histograms, ngram_inventory, non_english_distribution, scored_names, ScoredName};
use crate::config::KeyValues;
use crate::corpus::{
    ambiguity_histogram, cross_dataset_uniqueness, dataset_stats, ingest_labeled_csv, ingest_ssa_years_with,
    merge_tables, normalize_name, pairwise_overlap, CorpusError, CsvSchema, FrequencyTable, GenderAliases,
    IngestReport, NameCleaner, NameType,
};
use crate::ensemble::{BuiltEnsemble, EnsembleSpec};
use crate::eval::{evaluate_run, split_dataset, EvalSubject, LabeledTestSet, ReportNote};
use crate::inferrer::{ExternalAdapter, ExternalAdapterConfig, InferrerHandle, MockInferrer};
use crate::manifest::RunManifest;
use crate::mle::{MleModel, Prediction, Tau};

#[derive(Debug, Parser)]
#[command(name = "namegender", version, about = "Infer gender from first names and evaluate inferrers")]
pub struct Cli {
    /// Seed for every random choice (required by `split`)
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Key-value file declaring inferrers (`inferrer.<id> = kind:path`) and NA cells (`na.<id> = ...`)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for output files and manifests
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Format::Tsv)]
    pub format: Format,
    /// Log more (-v info, -vv debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Tsv,
    Structured,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Clean a labeled corpus into a frequency table
    #[command(subcommand)]
    Ingest(IngestSource),
    /// Sum several first-name tables into one
    Combine {
        #[arg(required = true, num_args = 1..)]
        tables: Vec<PathBuf>,
        #[arg(long)]
        id: String,
    },
    /// Dataset statistics, cross-dataset uniqueness and overlap, ambiguity histograms
    Stats {
        #[arg(required = true, num_args = 1..)]
        tables: Vec<PathBuf>,
        #[arg(long, default_value_t = 10)]
        bins: usize,
    },
    /// Seeded train/test split of a table
    Split {
        table: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        fraction: f64,
    },
    /// Build an MLE model from a table
    Train {
        table: PathBuf,
        #[arg(long, default_value_t = 0.9)]
        tau: f64,
        #[arg(long)]
        id: Option<String>,
    },
    /// Label names read from a file (one per line) or standard input
    Infer {
        #[arg(long)]
        inferrer: String,
        /// Defaults to standard input
        #[arg(long)]
        input: Option<PathBuf>,
        /// Defaults to standard output
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Score inferrers on test sets
    Eval {
        #[arg(long = "testset", required = true, num_args = 1..)]
        testsets: Vec<PathBuf>,
        #[arg(long = "inferrer", num_args = 1..)]
        inferrers: Vec<String>,
        /// Report `inferrer=dataset` as NA
        #[arg(long = "na")]
        na: Vec<String>,
        /// Output file stem
        #[arg(long, default_value = "report")]
        name: String,
    },
    /// Error analysis of one inferrer on one or more test sets
    Analyze {
        #[arg(long = "testset", required = true, num_args = 1..)]
        testsets: Vec<PathBuf>,
        #[arg(long)]
        inferrer: String,
    },
}

#[derive(Debug, Subcommand)]
pub enum IngestSource {
    /// A CSV file with a header row
    Csv(CsvArgs),
    /// A directory of yearly SSA files (yobYYYY.txt)
    Ssa {
        #[arg(long)]
        dir: PathBuf,
        /// Inclusive range, e.g. 1937-1999
        #[arg(long)]
        years: String,
        #[arg(long)]
        id: Option<String>,
        #[arg(long, value_delimiter = ',')]
        titles: Option<Vec<String>>,
    },
}

#[derive(Debug, Args)]
pub struct CsvArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub id: String,
    #[arg(long, default_value = "name")]
    pub name_column: String,
    #[arg(long, default_value = "gender")]
    pub gender_column: String,
    #[arg(long)]
    pub count_column: Option<String>,
    /// first or full
    #[arg(long, default_value = "first")]
    pub name_type: NameType,
    #[arg(long, value_delimiter = ',')]
    pub female_tags: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    pub male_tags: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    pub titles: Option<Vec<String>>,
}

/// Parses arguments, runs, and maps failure to a one-line diagnostic.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    let stdin = io::stdin();
    let stdout = io::stdout();
    match run(&cli, &args, &mut stdin.lock(), &mut stdout.lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}

/// Runs a parsed command with explicit standard streams.
pub fn run(cli: &Cli, args: &[OsString], stdin: &mut dyn BufRead, stdout: &mut dyn Write) -> Result<()> {
    fs::create_dir_all(&cli.out_dir).with_context(|| format!("creating {}", cli.out_dir.display()))?;
    let command_line = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let name = match &cli.command {
        Command::Ingest(_) => "ingest",
        Command::Combine { .. } => "combine",
        Command::Stats { .. } => "stats",
        Command::Split { .. } => "split",
        Command::Train { .. } => "train",
        Command::Infer { .. } => "infer",
        Command::Eval { .. } => "eval",
        Command::Analyze { .. } => "analyze",
    };
    let mut manifest = RunManifest::new(name, command_line, cli.seed);
    let config = match &cli.config {
        Some(path) => {
            manifest.add_config(path).with_context(|| format!("reading {}", path.display()))?;
            Some((KeyValues::load(path)?, path.parent().unwrap_or(Path::new(".")).to_path_buf()))
        }
        None => None,
    };
    let ctx = Ctx { out: &cli.out_dir, format: cli.format, config: config.as_ref().map(|(kv, dir)| (kv, dir.as_path())) };

    match &cli.command {
        Command::Ingest(source) => cmd_ingest(&ctx, source, &mut manifest)?,
        Command::Combine { tables, id } => cmd_combine(&ctx, tables, id, &mut manifest)?,
        Command::Stats { tables, bins } => cmd_stats(&ctx, tables, *bins, &mut manifest)?,
        Command::Split { table, fraction } => {
            let seed = cli.seed.ok_or_else(|| anyhow!("split needs --seed"))?;
            cmd_split(&ctx, table, *fraction, seed, &mut manifest)?
        }
        Command::Train { table, tau, id } => cmd_train(&ctx, table, *tau, id.as_deref(), &mut manifest)?,
        Command::Infer { inferrer, input, output } => {
            cmd_infer(&ctx, inferrer, input.as_deref(), output.as_deref(), stdin, stdout, &mut manifest)?
        }
        Command::Eval { testsets, inferrers, na, name } => cmd_eval(&ctx, testsets, inferrers, na, name, &mut manifest)?,
        Command::Analyze { testsets, inferrer } => cmd_analyze(&ctx, testsets, inferrer, &mut manifest)?,
    }
    manifest.write(&cli.out_dir).context("writing manifest")?;
    Ok(())
}

struct Ctx<'a> {
    out: &'a Path,
    format: Format,
    config: Option<(&'a KeyValues, &'a Path)>,
}

impl Ctx<'_> {
    fn ext(&self) -> &'static str {
        match self.format {
            Format::Tsv => "tsv",
            Format::Structured => "json",
        }
    }

    /// Creates `<out>/<file>`, hands a writer to `f`, records the output.
    fn write(&self, file: &str, manifest: &mut RunManifest, f: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<PathBuf> {
        let path = self.out.join(file);
        let mut w = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
        f(&mut w).and_then(|_| w.flush()).with_context(|| format!("writing {}", path.display()))?;
        manifest.add_output(&path)?;
        Ok(path)
    }
}

fn json_line<T: serde::Serialize>(w: &mut dyn Write, value: &T) -> io::Result<()> {
    serde_json::to_writer(&mut *w, value)?;
    w.write_all(b"\n")
}

fn load_table(path: &Path, manifest: &mut RunManifest) -> Result<FrequencyTable> {
    manifest.add_input(path).with_context(|| format!("reading {}", path.display()))?;
    FrequencyTable::load(path).with_context(|| format!("loading table {}", path.display()))
}

fn write_ingest_report(ctx: &Ctx, id: &str, report: &IngestReport, manifest: &mut RunManifest) -> Result<()> {
    let file = format!("{id}.ingest.{}", ctx.ext());
    ctx.write(&file, manifest, |w| match ctx.format {
        Format::Tsv => report.write_tsv(w),
        Format::Structured => {
            let rejected: BTreeMap<&str, u64> = report.rejected.iter().map(|(r, n)| (r.as_str(), *n)).collect();
            let malformed: Vec<_> = report
                .malformed
                .iter()
                .map(|m| serde_json::json!({"source": m.source, "line": m.line, "message": m.message}))
                .collect();
            json_line(
                w,
                &serde_json::json!({
                    "rows_read": report.rows_read,
                    "retained": report.retained,
                    "rejected": rejected,
                    "unknown_gender": report.unknown_gender,
                    "malformed": malformed,
                    "missing_years": report.missing_years,
                }),
            )
        }
    })?;
    Ok(())
}

fn cleaner(titles: &Option<Vec<String>>) -> NameCleaner {
    match titles {
        Some(t) => NameCleaner::with_titles(t.iter().map(|s| s.trim().to_string()).filter(|s| !s.is_empty())),
        None => NameCleaner::default(),
    }
}

fn cmd_ingest(ctx: &Ctx, source: &IngestSource, manifest: &mut RunManifest) -> Result<()> {
    let (table, report) = match source {
        IngestSource::Csv(a) => {
            manifest.add_input(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
            let mut schema = CsvSchema::new(&a.name_column, &a.gender_column, &a.id).with_name_type(a.name_type);
            if let Some(c) = &a.count_column {
                schema = schema.with_count_column(c);
            }
            if a.female_tags.is_some() || a.male_tags.is_some() {
                let female = a.female_tags.clone().unwrap_or_else(|| vec!["f".into(), "female".into()]);
                let male = a.male_tags.clone().unwrap_or_else(|| vec!["m".into(), "male".into()]);
                schema.aliases = GenderAliases::new(female, male);
            }
            schema.cleaner = cleaner(&a.titles);
            ingest_labeled_csv(&a.input, &schema).map_err(|e| corpus_error(&a.input, e))?
        }
        IngestSource::Ssa { dir, years, id, titles } => {
            let (start, end) = years
                .split_once('-')
                .and_then(|(a, b)| Some((a.trim().parse::<i32>().ok()?, b.trim().parse::<i32>().ok()?)))
                .ok_or_else(|| anyhow!("--years `{years}` is not START-END"))?;
            manifest.add_input(dir).with_context(|| format!("reading {}", dir.display()))?;
            let (mut table, report) =
                ingest_ssa_years_with(dir, start..=end, &cleaner(titles)).map_err(|e| corpus_error(dir, e))?;
            if let Some(id) = id {
                table.set_source_id(id);
            }
            (table, report)
        }
    };
    let id = table.source_id().to_string();
    ctx.write(&format!("{id}.table.tsv"), manifest, |w| table.write_to(w))?;
    write_ingest_report(ctx, &id, &report, manifest)?;
    manifest.note("retained", report.retained);
    manifest.note("rejected", report.rejected_total());
    manifest.note("malformed", report.malformed.len());
    Ok(())
}

fn corpus_error(path: &Path, e: CorpusError) -> anyhow::Error {
    anyhow!("{}: {e}", path.display())
}

fn cmd_combine(ctx: &Ctx, paths: &[PathBuf], id: &str, manifest: &mut RunManifest) -> Result<()> {
    let tables = paths.iter().map(|p| load_table(p, manifest)).collect::<Result<Vec<_>>>()?;
    let mut merged = merge_tables(&tables)?;
    merged.set_source_id(id);
    ctx.write(&format!("{}.table.tsv", merged.source_id()), manifest, |w| merged.write_to(w))?;
    Ok(())
}

fn cmd_stats(ctx: &Ctx, paths: &[PathBuf], bins: usize, manifest: &mut RunManifest) -> Result<()> {
    let tables = paths.iter().map(|p| load_table(p, manifest)).collect::<Result<Vec<_>>>()?;
    let ext = ctx.ext();
    ctx.write(&format!("stats.{ext}"), manifest, |w| {
        if ctx.format == Format::Tsv {
            writeln!(w, "dataset\tname_type\ttotal_names\tunique_names\tunique_first\tunique_last\tambiguous")?;
        }
        for t in &tables {
            let s = dataset_stats(t);
            match ctx.format {
                Format::Tsv => writeln!(
                    w,
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    t.source_id(),
                    t.name_type(),
                    s.total_names,
                    s.unique_names,
                    s.unique_first,
                    s.unique_last,
                    s.ambiguous
                )?,
                Format::Structured => json_line(
                    w,
                    &serde_json::json!({"dataset": t.source_id(), "name_type": t.name_type().as_str(), "stats": s}),
                )?,
            }
        }
        Ok(())
    })?;

    if tables.len() >= 2 {
        let rows = cross_dataset_uniqueness(&tables)?;
        ctx.write(&format!("uniqueness.{ext}"), manifest, |w| {
            if ctx.format == Format::Tsv {
                writeln!(w, "dataset\tunique_across\tpercentage")?;
            }
            for r in &rows {
                match ctx.format {
                    Format::Tsv => writeln!(w, "{}\t{}\t{:.4}", r.source_id, r.unique_across, r.percentage)?,
                    Format::Structured => json_line(w, r)?,
                }
            }
            Ok(())
        })?;
        let m = pairwise_overlap(&tables)?;
        ctx.write(&format!("overlap.{ext}"), manifest, |w| match ctx.format {
            Format::Tsv => {
                writeln!(w, "dataset\tother\tshared\tpercentage")?;
                for (i, a) in m.ids.iter().enumerate() {
                    for (j, b) in m.ids.iter().enumerate() {
                        writeln!(w, "{a}\t{b}\t{}\t{:.4}", m.counts[i][j], m.percentages[i][j])?;
                    }
                }
                Ok(())
            }
            Format::Structured => json_line(w, &m),
        })?;
    } else {
        log::info!("one table given; skipping uniqueness and overlap");
    }

    for t in &tables {
        match ambiguity_histogram(t, bins) {
            Ok(h) => {
                ctx.write(&format!("ambiguity.{}.{ext}", t.source_id()), manifest, |w| match ctx.format {
                    Format::Tsv => h.write_tsv(w),
                    Format::Structured => json_line(w, &h),
                })?;
            }
            Err(CorpusError::EmptyDistribution) => {
                log::warn!("{}: no ambiguous names; histogram skipped", t.source_id());
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(())
}

fn cmd_split(ctx: &Ctx, path: &Path, fraction: f64, seed: u64, manifest: &mut RunManifest) -> Result<()> {
    let table = load_table(path, manifest)?;
    let split = split_dataset(&table, fraction, seed)?;
    let id = split.test.id().to_string();
    ctx.write(&format!("{id}.train.tsv"), manifest, |w| split.train.write_to(w))?;
    ctx.write(&format!("{id}.test.tsv"), manifest, |w| split.test.write_to(w))?;
    ctx.write(&format!("{id}.ties.tsv"), manifest, |w| {
        writeln!(w, "name")?;
        for n in &split.excluded_ties {
            writeln!(w, "{n}")?;
        }
        Ok(())
    })?;
    manifest.note("test_fraction", fraction);
    manifest.note("excluded_ties", split.excluded_ties.len());
    if !split.excluded_ties.is_empty() {
        log::info!("{id}: {} tied names left out of the test set", split.excluded_ties.len());
    }
    Ok(())
}

/// Dataset ids a model's table came from: `acl.train+cmu.train` gives
/// {acl, cmu}.
fn trained_on(model: &MleModel) -> BTreeSet<String> {
    model
        .table()
        .source_id()
        .split('+')
        .map(|s| s.strip_suffix(".train").unwrap_or(s).to_string())
        .collect()
}

fn cmd_train(ctx: &Ctx, path: &Path, tau: f64, id: Option<&str>, manifest: &mut RunManifest) -> Result<()> {
    let mut table = load_table(path, manifest)?;
    if table.name_type() == NameType::Full {
        log::info!("{}: full names projected to first names for training", table.source_id());
        table = table.to_first_names();
    }
    let model = MleModel::train(table, Tau::new(tau)?)?;
    let id = match id {
        Some(id) => id.to_string(),
        None => format!("mle_{}", trained_on(&model).into_iter().collect::<Vec<_>>().join("+")),
    };
    ctx.write(&format!("{id}.model.tsv"), manifest, |w| model.write_to(w))?;
    manifest.note("tau", tau);
    Ok(())
}

fn format_p(p: Option<f64>) -> String {
    p.map_or_else(|| "NA".to_string(), |p| format!("{p:.6}"))
}

fn cmd_infer(
    ctx: &Ctx,
    spec: &str,
    input: Option<&Path>,
    output: Option<&Path>,
    stdin: &mut dyn BufRead,
    stdout: &mut dyn Write,
    manifest: &mut RunManifest,
) -> Result<()> {
    let mut registry = Registry::new(ctx.config, &[spec.to_string()])?;
    let id = registry.order[0].clone();
    let resolved = registry.resolve(&id)?;

    let raw: Vec<String> = match input {
        Some(path) => {
            manifest.add_input(path).with_context(|| format!("reading {}", path.display()))?;
            fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?
                .lines()
                .map(str::to_string)
                .collect()
        }
        None => {
            manifest.note("input", "stdin");
            stdin.lines().collect::<io::Result<_>>().context("reading standard input")?
        }
    };
    let raw: Vec<&str> = raw.iter().map(|l| l.trim()).filter(|l| !l.is_empty() && !l.starts_with('#')).collect();
    let cleaned: Vec<Result<String, _>> = raw.iter().map(|r| normalize_name(r)).collect();
    let to_ask: Vec<String> = cleaned.iter().filter_map(|c| c.as_ref().ok().cloned()).collect();
    let mut answers = resolved.handle.infer_batch(&to_ask)?.into_iter();

    let mut render = |w: &mut dyn Write| -> io::Result<()> {
        if ctx.format == Format::Tsv {
            writeln!(w, "input\tname\tlabel\tp_female\tsource")?;
        }
        for (raw, cleaned) in raw.iter().zip(&cleaned) {
            let (name, pred) = match cleaned {
                Ok(name) => (name.as_str(), answers.next().expect("one answer per cleaned name")),
                Err(reason) => ("", Prediction::unknown(format!("rejected:{}", reason.as_str()))),
            };
            match ctx.format {
                Format::Tsv => writeln!(
                    w,
                    "{raw}\t{name}\t{}\t{}\t{}",
                    pred.label,
                    format_p(pred.p_female),
                    pred.source
                )?,
                Format::Structured => json_line(
                    w,
                    &serde_json::json!({
                        "input": raw, "name": name, "label": pred.label.as_str(),
                        "p_female": pred.p_female, "source": pred.source,
                    }),
                )?,
            }
        }
        Ok(())
    };
    match output {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
            render(&mut w).and_then(|_| w.flush()).with_context(|| format!("writing {}", path.display()))?;
            manifest.add_output(path)?;
        }
        None => {
            render(stdout).context("writing standard output")?;
            stdout.flush()?;
        }
    }
    registry.record_notes(manifest);
    Ok(())
}

fn load_testsets(paths: &[PathBuf], manifest: &mut RunManifest) -> Result<Vec<LabeledTestSet>> {
    paths
        .iter()
        .map(|p| {
            manifest.add_input(p).with_context(|| format!("reading {}", p.display()))?;
            LabeledTestSet::load(p).with_context(|| format!("loading test set {}", p.display()))
        })
        .collect()
}

fn cmd_eval(
    ctx: &Ctx,
    testset_paths: &[PathBuf],
    specs: &[String],
    na: &[String],
    name: &str,
    manifest: &mut RunManifest,
) -> Result<()> {
    let testsets = load_testsets(testset_paths, manifest)?;
    let mut registry = Registry::new(ctx.config, specs)?;
    if registry.order.is_empty() {
        bail!("no inferrers given (use --inferrer or inferrer.<id> in --config)");
    }
    let mut na_map: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for entry in na {
        let (id, ds) = entry.split_once('=').ok_or_else(|| anyhow!("--na `{entry}` is not inferrer=dataset"))?;
        na_map.entry(id.trim().to_string()).or_default().insert(ds.trim().to_string());
    }
    if let Some((kv, _)) = ctx.config {
        for (id, list) in kv.with_prefix("na.") {
            let set = na_map.entry(id.to_string()).or_default();
            set.extend(list.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()));
        }
    }

    let mut subjects = Vec::new();
    for id in registry.order.clone() {
        let r = registry.resolve(&id)?;
        let mut s = EvalSubject::new(r.handle.clone());
        s.na_datasets.extend(r.trained_on.iter().cloned());
        s.na_datasets.extend(na_map.remove(&id).unwrap_or_default());
        subjects.push(s);
    }
    if let Some(id) = na_map.keys().next() {
        bail!("--na names unknown inferrer `{id}`");
    }
    let mut report = evaluate_run(&testsets, &subjects)?;
    for (id, key, value) in registry.counters() {
        report.notes.push(ReportNote { inferrer: id, key: key.to_string(), value });
    }

    match ctx.format {
        Format::Tsv => ctx.write(&format!("{name}.tsv"), manifest, |w| report.write_tsv(w))?,
        Format::Structured => ctx.write(&format!("{name}.jsonl"), manifest, |w| report.write_jsonl(w))?,
    };
    let text = report.render_text();
    ctx.write(&format!("{name}.txt"), manifest, |w| w.write_all(text.as_bytes()))?;
    registry.record_notes(manifest);
    Ok(())
}

fn cmd_analyze(ctx: &Ctx, testset_paths: &[PathBuf], spec: &str, manifest: &mut RunManifest) -> Result<()> {
    let testsets = load_testsets(testset_paths, manifest)?;
    let mut registry = Registry::new(ctx.config, &[spec.to_string()])?;
    let id = registry.order[0].clone();
    let handle = registry.resolve(&id)?.handle;
    let mut scored: Vec<ScoredName> = Vec::new();
    for t in &testsets {
        let preds = handle.infer_batch(&t.names())?;
        scored.extend(scored_names(t, &preds)?);
    }
    manifest.note("name_form", "names exactly as listed in the test sets");
    manifest.note("scored_names", scored.len());
    let ext = ctx.ext();

    let lengths = length_histograms(&scored);
    ctx.write(&format!("{id}.lengths.{ext}"), manifest, |w| match ctx.format {
        Format::Tsv => lengths.write_tsv(w),
        Format::Structured => json_line(w, &lengths),
    })?;
    let non_english = non_english_distribution(&scored);
    ctx.write(&format!("{id}.non_english.{ext}"), manifest, |w| match ctx.format {
        Format::Tsv => non_english.write_tsv(w),
        Format::Structured => json_line(w, &non_english),
    })?;
    for (n, label) in [(2, "bigrams"), (3, "trigrams")] {
        match ngram_inventory(&scored, n) {
            Ok(inv) => {
                ctx.write(&format!("{id}.{label}.{ext}"), manifest, |w| match ctx.format {
                    Format::Tsv => inv.write_tsv(w),
                    Format::Structured => json_line(w, &inv),
                })?;
            }
            Err(e) => log::warn!("{id}: {label} skipped: {e}"),
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SpecKind {
    Mle,
    Mock,
    Http,
    Ensemble,
}

#[derive(Debug, Clone)]
struct InferrerSpec {
    kind: SpecKind,
    path: PathBuf,
}

#[derive(Clone)]
struct Resolved {
    handle: InferrerHandle,
    trained_on: BTreeSet<String>,
    ensemble: Option<BuiltEnsemble>,
}

/// Inferrer specs by id, resolved lazily so ensembles can refer to others.
struct Registry {
    specs: BTreeMap<String, InferrerSpec>,
    /// Ids given on the command line (or, if none, in the config), in order.
    order: Vec<String>,
    resolved: BTreeMap<String, Resolved>,
    resolving: Vec<String>,
}

/// `acl.model.tsv` gives `acl`.
fn default_id(path: &Path) -> String {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    for suffix in [".model.tsv", ".mock.tsv", ".conf", ".tsv", ".txt"] {
        if let Some(stem) = name.strip_suffix(suffix) {
            return stem.to_string();
        }
    }
    name
}

fn parse_spec(raw: &str, base: &Path) -> Result<(String, InferrerSpec)> {
    let (explicit, rest) = match raw.split_once('=') {
        Some((id, rest)) if !id.contains(':') => (Some(id.trim().to_string()), rest),
        _ => (None, raw),
    };
    let (kind, path) = rest.split_once(':').ok_or_else(|| anyhow!("inferrer `{raw}` is not [id=]kind:path"))?;
    let kind = match kind.trim() {
        "mle" => SpecKind::Mle,
        "mock" => SpecKind::Mock,
        "http" => SpecKind::Http,
        "ensemble" => SpecKind::Ensemble,
        other => bail!("inferrer kind `{other}` is not one of mle, mock, http, ensemble"),
    };
    let path = base.join(path.trim());
    let id = match explicit {
        Some(id) => id,
        None => match kind {
            SpecKind::Mle | SpecKind::Mock => default_id(&path),
            SpecKind::Http | SpecKind::Ensemble => KeyValues::load(&path)?.require("id")?.to_string(),
        },
    };
    if id.is_empty() || id.contains(char::is_whitespace) {
        bail!("inferrer id `{id}` must be non-empty without whitespace");
    }
    Ok((id, InferrerSpec { kind, path }))
}

impl Registry {
    fn new(config: Option<(&KeyValues, &Path)>, cli_specs: &[String]) -> Result<Registry> {
        let mut specs = BTreeMap::new();
        let mut from_config = Vec::new();
        if let Some((kv, dir)) = config {
            for (id, raw) in kv.with_prefix("inferrer.") {
                let raw = if raw.contains('=') { raw.to_string() } else { format!("{id}={raw}") };
                let (id, spec) = parse_spec(&raw, dir)?;
                specs.insert(id.clone(), spec);
                from_config.push(id);
            }
        }
        let mut order = Vec::new();
        for raw in cli_specs {
            let (id, spec) = parse_spec(raw, Path::new(""))?;
            if order.contains(&id) {
                bail!("inferrer id `{id}` given twice");
            }
            specs.insert(id.clone(), spec);
            order.push(id);
        }
        if cli_specs.is_empty() {
            order = from_config;
        }
        Ok(Registry { specs, order, resolved: BTreeMap::new(), resolving: Vec::new() })
    }

    fn resolve(&mut self, id: &str) -> Result<Resolved> {
        if let Some(r) = self.resolved.get(id) {
            return Ok(r.clone());
        }
        if self.resolving.iter().any(|r| r == id) {
            bail!("inferrer `{id}` depends on itself ({})", self.resolving.join(" -> "));
        }
        let spec = self.specs.get(id).cloned().ok_or_else(|| anyhow!("unknown inferrer id `{id}`"))?;
        self.resolving.push(id.to_string());
        let built = self.build(id, &spec).with_context(|| format!("inferrer `{id}` ({})", spec.path.display()));
        self.resolving.pop();
        let built = built?;
        self.resolved.insert(id.to_string(), built.clone());
        Ok(built)
    }

    fn build(&mut self, id: &str, spec: &InferrerSpec) -> Result<Resolved> {
        let path = &spec.path;
        Ok(match spec.kind {
            SpecKind::Mle => {
                let model = Arc::new(MleModel::load(path)?);
                let trained_on = trained_on(&model);
                Resolved { handle: InferrerHandle::builtin_mle(id, model), trained_on, ensemble: None }
            }
            SpecKind::Mock => {
                let mock = Arc::new(MockInferrer::load(path)?);
                Resolved { handle: InferrerHandle::mock(id, mock), trained_on: BTreeSet::new(), ensemble: None }
            }
            SpecKind::Http => {
                let mut cfg = ExternalAdapterConfig::load(path)?;
                cfg.id = id.to_string();
                let handle = ExternalAdapter::connect(cfg)?.into_handle();
                Resolved { handle, trained_on: BTreeSet::new(), ensemble: None }
            }
            SpecKind::Ensemble => {
                let mut e = EnsembleSpec::load(path)?;
                e.id = id.to_string();
                let deps: Vec<String> = e.dependencies().into_iter().map(String::from).collect();
                let handles = deps.iter().map(|d| self.resolve(d).map(|r| r.handle)).collect::<Result<Vec<_>>>()?;
                let model = Arc::new(
                    MleModel::load(&e.model).with_context(|| format!("loading model {}", e.model.display()))?,
                );
                let trained_on = trained_on(&model);
                let built = e.build(model, handles)?;
                Resolved { handle: built.handle.clone(), trained_on, ensemble: Some(built) }
            }
        })
    }

    /// Hybrid counters for every resolved ensemble, ordered by id.
    fn counters(&self) -> Vec<(String, &'static str, u64)> {
        self.resolved
            .iter()
            .filter_map(|(id, r)| r.ensemble.as_ref().map(|e| (id, e)))
            .flat_map(|(id, e)| e.counters().into_iter().map(move |(k, v)| (id.clone(), k, v)))
            .collect()
    }

    fn record_notes(&self, manifest: &mut RunManifest) {
        for (id, spec) in &self.specs {
            if self.resolved.contains_key(id) {
                manifest.note(&format!("inferrer.{id}"), spec.path.display());
                let _ = manifest.add_input(&spec.path);
            }
        }
        for (id, key, value) in self.counters() {
            manifest.note(&format!("{id}.{key}"), value);
        }
    }
}
