use std::collections::BTreeSet;
use std::io::Write;

use serde::Serialize;

use super::table::{first_token, FrequencyTable, NameType};
use super::CorpusError;

/// Summary counts for one table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DatasetStats {
    pub total_names: u64,
    pub unique_names: u64,
    pub unique_first: u64,
    pub unique_last: u64,
    pub ambiguous: u64,
}

/// Totals, unique counts and the number of names seen with both genders.
///
/// For full-name tables, `ambiguous` is measured on the first-name
/// projection and `unique_last` counts distinct non-empty last tokens.
pub fn dataset_stats(table: &FrequencyTable) -> DatasetStats {
    let total_names = table.total_occurrences();
    let unique_names = table.len() as u64;
    match table.name_type() {
        NameType::First => DatasetStats {
            total_names,
            unique_names,
            unique_first: unique_names,
            unique_last: 0,
            ambiguous: table.iter().filter(|(_, c)| c.is_ambiguous()).count() as u64,
        },
        NameType::Full => {
            let firsts = table.to_first_names();
            let lasts: BTreeSet<&str> = table.names().filter_map(last_token).collect();
            DatasetStats {
                total_names,
                unique_names,
                unique_first: firsts.len() as u64,
                unique_last: lasts.len() as u64,
                ambiguous: firsts.iter().filter(|(_, c)| c.is_ambiguous()).count() as u64,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniquenessRow {
    pub source_id: String,
    pub unique_across: u64,
    pub percentage: f64,
}

/// For each table, how many of its first names appear in no other table,
/// and what share of its own first names that is.
pub fn cross_dataset_uniqueness(tables: &[FrequencyTable]) -> Result<Vec<UniquenessRow>, CorpusError> {
    if tables.len() < 2 {
        return Err(CorpusError::InvalidInput("uniqueness needs at least two tables".into()));
    }
    let sets: Vec<BTreeSet<&str>> = tables.iter().map(FrequencyTable::first_name_set).collect();
    Ok(tables
        .iter()
        .enumerate()
        .map(|(i, table)| {
            let unique_across = sets[i]
                .iter()
                .filter(|name| sets.iter().enumerate().all(|(j, other)| j == i || !other.contains(*name)))
                .count() as u64;
            UniquenessRow {
                source_id: table.source_id().to_string(),
                unique_across,
                percentage: percent(unique_across, sets[i].len() as u64),
            }
        })
        .collect())
}

/// Pairwise first-name overlaps. Counts are symmetric; percentages are
/// normalized by the row table's size. The diagonal holds each table's size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlapMatrix {
    pub ids: Vec<String>,
    pub counts: Vec<Vec<u64>>,
    pub percentages: Vec<Vec<f64>>,
}

pub fn pairwise_overlap(tables: &[FrequencyTable]) -> Result<OverlapMatrix, CorpusError> {
    if tables.len() < 2 {
        return Err(CorpusError::InvalidInput("overlap needs at least two tables".into()));
    }
    let sets: Vec<BTreeSet<&str>> = tables.iter().map(FrequencyTable::first_name_set).collect();
    let n = sets.len();
    let mut counts = vec![vec![0u64; n]; n];
    let mut percentages = vec![vec![0f64; n]; n];
    for i in 0..n {
        for j in 0..n {
            let c = if i == j {
                sets[i].len() as u64
            } else if j < i {
                counts[j][i]
            } else {
                sets[i].intersection(&sets[j]).count() as u64
            };
            counts[i][j] = c;
            percentages[i][j] = percent(c, sets[i].len() as u64);
        }
    }
    Ok(OverlapMatrix {
        ids: tables.iter().map(|t| t.source_id().to_string()).collect(),
        counts,
        percentages,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub count: u64,
    pub percentage: f64,
}

/// Distribution of the female share over a table's ambiguous names.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AmbiguityHistogram {
    pub source_id: String,
    pub ambiguous_names: u64,
    pub bins: Vec<HistogramBin>,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
}

impl AmbiguityHistogram {
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "# female-share distribution over ambiguous names: source={} n={} p25={} p50={} p75={}",
            self.source_id, self.ambiguous_names, self.p25, self.p50, self.p75
        )?;
        writeln!(out, "bin_lower\tbin_upper\tcount\tpercent")?;
        for b in &self.bins {
            writeln!(out, "{:.4}\t{:.4}\t{}\t{:.4}", b.lower, b.upper, b.count, b.percentage)?;
        }
        out.flush()
    }
}

/// Bins `[0, 1]` into `bin_count` equal half-open intervals (the last one
/// closed) and places each ambiguous name's female share. Percentiles use
/// linear interpolation between order statistics.
pub fn ambiguity_histogram(
    table: &FrequencyTable,
    bin_count: usize,
) -> Result<AmbiguityHistogram, CorpusError> {
    if bin_count < 2 {
        return Err(CorpusError::InvalidInput("bin count must be at least 2".into()));
    }
    let firsts = table.to_first_names();
    let mut shares: Vec<f64> = firsts
        .iter()
        .filter(|(_, c)| c.is_ambiguous())
        .filter_map(|(_, c)| c.female_share())
        .collect();
    if shares.is_empty() {
        return Err(CorpusError::EmptyDistribution);
    }
    shares.sort_by(f64::total_cmp);

    let mut counts = vec![0u64; bin_count];
    for &s in &shares {
        counts[bin_index(s, bin_count)] += 1;
    }
    let n = shares.len() as u64;
    let bins = counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistogramBin {
            lower: i as f64 / bin_count as f64,
            upper: (i + 1) as f64 / bin_count as f64,
            count,
            percentage: percent(count, n),
        })
        .collect();
    Ok(AmbiguityHistogram {
        source_id: table.source_id().to_string(),
        ambiguous_names: n,
        bins,
        p25: percentile(&shares, 0.25),
        p50: percentile(&shares, 0.50),
        p75: percentile(&shares, 0.75),
    })
}

pub(crate) fn bin_index(value: f64, bin_count: usize) -> usize {
    ((value * bin_count as f64).floor() as usize).min(bin_count - 1)
}

/// `sorted` must be ascending and non-empty.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn percent(part: u64, whole: u64) -> f64 {
    if whole == 0 {
        0.0
    } else {
        part as f64 / whole as f64 * 100.0
    }
}

/// Last name of a full-name key, or `None` for single-token keys.
pub fn last_token(name: &str) -> Option<&str> {
    let first = first_token(name);
    (first.len() < name.len()).then(|| name.rsplit(' ').next().unwrap_or(name))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::GenderCounts;

    fn table(id: &str, entries: &[(&str, u64, u64)]) -> FrequencyTable {
        FrequencyTable::from_entries(
            NameType::First,
            id,
            entries.iter().map(|(n, f, m)| (*n, GenderCounts::new(*f, *m))),
        )
    }

    #[test]
    fn stats_count_ambiguous_names() {
        let t = table("t", &[("anna", 3, 3), ("bob", 0, 5)]);
        let s = dataset_stats(&t);
        assert_eq!((s.unique_names, s.ambiguous, s.total_names), (2, 1, 11));
        let t = table("t", &[("anna", 3, 0), ("bob", 0, 5)]);
        assert_eq!(dataset_stats(&t).ambiguous, 0);
    }

    #[test]
    fn stats_for_full_names() {
        let t = FrequencyTable::from_entries(
            NameType::Full,
            "fl",
            [
                ("maria garcia", GenderCounts::new(1, 0)),
                ("maria lopez", GenderCounts::new(1, 0)),
                ("maria", GenderCounts::new(0, 1)),
                ("jose garcia", GenderCounts::new(0, 2)),
            ],
        );
        let s = dataset_stats(&t);
        assert_eq!(s.unique_names, 4);
        assert_eq!(s.unique_first, 2);
        assert_eq!(s.unique_last, 2);
        assert_eq!(s.ambiguous, 1);
        assert_eq!(s.total_names, 5);
    }

    #[test]
    fn uniqueness_and_overlap() {
        let a = table("a", &[("a", 1, 0), ("b", 1, 0)]);
        let b = table("b", &[("b", 1, 0), ("c", 0, 1)]);
        let u = cross_dataset_uniqueness(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(u[0].unique_across, 1);
        assert_eq!(u[0].percentage, 50.0);
        let m = pairwise_overlap(&[a.clone(), b]).unwrap();
        assert_eq!(m.counts[0][1], 1);
        assert_eq!(m.percentages[0][1], 50.0);
        assert_eq!(m.percentages[1][0], 50.0);
        assert_eq!(m.counts[0][0], 2);

        let same = cross_dataset_uniqueness(&[a.clone(), a.clone()]).unwrap();
        assert!(same.iter().all(|r| r.unique_across == 0 && r.percentage == 0.0));
        assert!(matches!(cross_dataset_uniqueness(std::slice::from_ref(&a)), Err(CorpusError::InvalidInput(_))));
        assert!(matches!(pairwise_overlap(&[a]), Err(CorpusError::InvalidInput(_))));
    }

    #[test]
    fn overlap_percentages_are_row_normalized() {
        let big = table("big", &[("a", 1, 0), ("b", 1, 0), ("c", 1, 0), ("d", 1, 0)]);
        let small = table("small", &[("a", 1, 0), ("z", 1, 0)]);
        let m = pairwise_overlap(&[big, small]).unwrap();
        assert_eq!(m.counts[0][1], m.counts[1][0]);
        assert_eq!(m.percentages[0][1], 25.0);
        assert_eq!(m.percentages[1][0], 50.0);
    }

    #[test]
    fn single_ambiguous_name_histogram() {
        let t = table("t", &[("sam", 1, 1), ("bob", 0, 3)]);
        let h = ambiguity_histogram(&t, 10).unwrap();
        assert_eq!(h.ambiguous_names, 1);
        assert_eq!(h.bins[5].count, 1);
        assert_eq!(h.bins[5].percentage, 100.0);
        assert_eq!((h.p25, h.p50, h.p75), (0.5, 0.5, 0.5));
    }

    #[test]
    fn histogram_median() {
        let t = table("t", &[("a1", 1, 3), ("b1", 1, 1), ("c1", 3, 1)]);
        let h = ambiguity_histogram(&t, 4).unwrap();
        assert_eq!(h.p50, 0.5);
        assert_eq!(h.p25, 0.375);
        assert_eq!(h.p75, 0.625);
    }

    #[test]
    fn histogram_matches_hand_binning() {
        // 20 ambiguous names; shares hand-placed into 5 bins of width 0.2
        let mut entries = Vec::new();
        let spec: &[(u64, u64, usize)] = &[
            (1, 9, 4), // 0.1 -> bin 0, four names
            (1, 3, 3), // 0.25 -> bin 1
            (1, 1, 6), // 0.5 -> bin 2
            (3, 1, 2), // 0.75 -> bin 3
            (9, 1, 5), // 0.9 -> bin 4
        ];
        let mut k = 0;
        for &(f, m, reps) in spec {
            for _ in 0..reps {
                entries.push((format!("n{k:02}"), f, m));
                k += 1;
            }
        }
        let t = FrequencyTable::from_entries(
            NameType::First,
            "t",
            entries.iter().map(|(n, f, m)| (n.clone(), GenderCounts::new(*f, *m))),
        );
        let h = ambiguity_histogram(&t, 5).unwrap();
        let counts: Vec<u64> = h.bins.iter().map(|b| b.count).collect();
        assert_eq!(counts, vec![4, 3, 6, 2, 5]);
        let pct: Vec<f64> = h.bins.iter().map(|b| b.percentage).collect();
        assert_eq!(pct, vec![20.0, 15.0, 30.0, 10.0, 25.0]);
        let sum: f64 = pct.iter().sum();
        assert!((sum - 100.0).abs() < 0.01);
    }

    #[test]
    fn histogram_errors() {
        let t = table("t", &[("bob", 0, 3)]);
        assert!(matches!(ambiguity_histogram(&t, 10), Err(CorpusError::EmptyDistribution)));
        assert!(matches!(ambiguity_histogram(&t, 1), Err(CorpusError::InvalidInput(_))));
    }

    #[test]
    fn last_tokens() {
        assert_eq!(last_token("jean claude damme"), Some("damme"));
        assert_eq!(last_token("maria"), None);
    }
}
