//! Descriptive statistics over faculty records: means, deviations,
//! percentiles, covariance and correlation matrices, histograms, kernel
//! density estimates and cohort comparisons.
//!
//! Deviations use the sample (n-1) convention throughout. Percentiles use
//! linear interpolation between closest ranks, i.e. the value at 1-based
//! rank `1 + (n-1)p/100`.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::config::CohortTable;
use crate::dataset::{Dataset, Field, Selector};
use crate::error::{Error, Result};
use crate::report::{fmt3, markdown_table};

/// Default percentile probes.
pub const DEFAULT_PROBES: [f64; 7] = [5.0, 10.0, 25.0, 50.0, 75.0, 90.0, 95.0];
pub const DEFAULT_BINS: usize = 20;
/// KDE grid resolution.
pub const KDE_POINTS: usize = 256;
/// Half-width of the KDE grid beyond the data range, in bandwidths.
pub const KDE_SPAN: f64 = 4.0;

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample deviation; zero for fewer than two values.
pub fn sample_deviation(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let mu = mean(xs);
    (xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

pub fn sample_covariance(xs: &[f64], ys: &[f64]) -> f64 {
    let (mx, my) = (mean(xs), mean(ys));
    xs.iter()
        .zip(ys)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum::<f64>()
        / (xs.len() - 1) as f64
}

/// Linear-interpolation percentile of already sorted values.
pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p / 100.0;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "cohorts")]
pub enum Grouping {
    All,
    University,
    /// Resolved cohorts as `(tag, member institutions)`.
    Cohorts(Vec<(String, Vec<String>)>),
}

impl Grouping {
    pub fn cohorts(table: &CohortTable, tags: &[&str]) -> Result<Self> {
        tags.iter()
            .map(|t| Ok((t.to_string(), table.members(t)?.to_vec())))
            .collect::<Result<Vec<_>>>()
            .map(Grouping::Cohorts)
    }

    fn key(&self) -> &'static str {
        match self {
            Grouping::All => "all",
            Grouping::University => "university",
            Grouping::Cohorts(_) => "cohort",
        }
    }
}

/// Splits `d` into labelled groups. University groups come out in byte order.
pub fn groups(d: &Dataset, grouping: &Grouping) -> Result<Vec<(String, Dataset)>> {
    if d.is_empty() {
        return Err(Error::EmptyDataset("no records to group".into()));
    }
    let out = match grouping {
        Grouping::All => vec![("all".to_string(), d.clone())],
        Grouping::University => {
            let names: BTreeSet<String> = d.records.iter().map(|r| r.university.clone()).collect();
            names
                .into_iter()
                .map(|u| {
                    let records = d.records.iter().filter(|r| r.university == u).cloned().collect();
                    let sub = Dataset {
                        records,
                        source: format!("{} [university={u}]", d.source),
                    };
                    (u, sub)
                })
                .collect()
        }
        Grouping::Cohorts(list) => {
            let mut out = Vec::with_capacity(list.len());
            for (tag, members) in list {
                let table = CohortTable {
                    cohorts: [(tag.to_ascii_lowercase(), members.clone())].into_iter().collect(),
                };
                let sub = d.filter(&Selector::Cohort(tag.clone()), &table)?;
                if sub.is_empty() {
                    return Err(Error::EmptyDataset(format!("cohort `{tag}` has no records")));
                }
                out.push((tag.clone(), sub));
            }
            out
        }
    };
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldStat {
    pub field: Field,
    pub mean: f64,
    pub deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub group: String,
    pub n: usize,
    pub stats: Vec<FieldStat>,
}

impl SummaryRow {
    pub fn stat(&self, field: Field) -> FieldStat {
        *self
            .stats
            .iter()
            .find(|s| s.field == field)
            .expect("field present in summary")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryTable {
    pub grouping: String,
    pub fields: Vec<Field>,
    pub rows: Vec<SummaryRow>,
}

pub fn summary(d: &Dataset, group_by: &Grouping) -> Result<SummaryTable> {
    summary_fields(d, group_by, &Field::ALL)
}

pub fn summary_fields(d: &Dataset, group_by: &Grouping, fields: &[Field]) -> Result<SummaryTable> {
    let rows = groups(d, group_by)?
        .into_iter()
        .map(|(group, sub)| SummaryRow {
            n: sub.len(),
            stats: fields
                .iter()
                .map(|&field| {
                    let xs = sub.values(field);
                    FieldStat {
                        field,
                        mean: mean(&xs),
                        deviation: sample_deviation(&xs),
                    }
                })
                .collect(),
            group,
        })
        .collect();
    Ok(SummaryTable {
        grouping: group_by.key().to_string(),
        fields: fields.to_vec(),
        rows,
    })
}

impl SummaryTable {
    /// One mean/deviation table for a single group, otherwise a means table
    /// followed by a deviations table.
    pub fn to_markdown(&self, scope: &str) -> String {
        if self.rows.len() == 1 {
            let row = &self.rows[0];
            let body: Vec<Vec<String>> = row
                .stats
                .iter()
                .map(|s| vec![s.field.long_label().to_string(), fmt3(s.mean), fmt3(s.deviation)])
                .collect();
            let mut out = markdown_table(&["Field", "Mean", "Standard Deviation"], &body);
            let _ = writeln!(out, "\n*Means and standard deviations across {scope} (n={})*", row.n);
            return out;
        }
        let header_label = if self.grouping == "cohort" { "Cohort" } else { "University" };
        let mut header = vec![header_label.to_string(), "n".to_string()];
        header.extend(self.fields.iter().map(|f| f.label().to_string()));
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let total: usize = self.rows.iter().map(|r| r.n).sum();

        let mut out = String::new();
        for (title, pick) in [
            ("Means", (|s: &FieldStat| s.mean) as fn(&FieldStat) -> f64),
            ("Standard deviations", |s: &FieldStat| s.deviation),
        ] {
            let body: Vec<Vec<String>> = self
                .rows
                .iter()
                .map(|r| {
                    let mut cells = vec![r.group.clone(), r.n.to_string()];
                    cells.extend(r.stats.iter().map(|s| fmt3(pick(s))));
                    cells
                })
                .collect();
            out.push_str(&markdown_table(&header, &body));
            let _ = writeln!(out, "\n*{title} across {scope}, by {} (n={total})*\n", self.grouping);
        }
        out.truncate(out.trim_end().len());
        out.push('\n');
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PercentileRow {
    pub label: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PercentileTable {
    /// Sorted, de-duplicated probes in percent.
    pub probes: Vec<f64>,
    pub rows: Vec<PercentileRow>,
}

fn normalize_probes(probes: &[f64]) -> Result<Vec<f64>> {
    if probes.is_empty() {
        return Err(Error::InvalidArgument("no percentile probes".into()));
    }
    if let Some(p) = probes.iter().find(|p| !(**p > 0.0 && **p < 100.0)) {
        return Err(Error::InvalidArgument(format!("percentile probe {p} outside (0, 100)")));
    }
    let mut out = probes.to_vec();
    out.sort_by(f64::total_cmp);
    out.dedup();
    Ok(out)
}

fn percentile_row(label: String, values: &[f64], probes: &[f64]) -> Result<PercentileRow> {
    if values.is_empty() {
        return Err(Error::EmptyDataset(format!("no values for `{label}`")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(PercentileRow {
        values: probes.iter().map(|&p| percentile_sorted(&sorted, p)).collect(),
        label,
    })
}

/// Percentiles of every field over the whole dataset.
pub fn percentiles(d: &Dataset, probes: &[f64]) -> Result<PercentileTable> {
    percentiles_fields(d, &Field::ALL, probes)
}

pub fn percentiles_fields(d: &Dataset, fields: &[Field], probes: &[f64]) -> Result<PercentileTable> {
    let probes = normalize_probes(probes)?;
    let rows = fields
        .iter()
        .map(|&f| percentile_row(f.label().to_string(), &d.values(f), &probes))
        .collect::<Result<_>>()?;
    Ok(PercentileTable { probes, rows })
}

/// Percentiles of one field, one row per group.
pub fn percentiles_by_group(d: &Dataset, field: Field, grouping: &Grouping, probes: &[f64]) -> Result<PercentileTable> {
    let probes = normalize_probes(probes)?;
    let rows = groups(d, grouping)?
        .into_iter()
        .map(|(g, sub)| percentile_row(g, &sub.values(field), &probes))
        .collect::<Result<_>>()?;
    Ok(PercentileTable { probes, rows })
}

impl PercentileTable {
    pub fn value(&self, label: &str, probe: f64) -> Option<f64> {
        let j = self.probes.iter().position(|&p| p == probe)?;
        self.rows.iter().find(|r| r.label == label).map(|r| r.values[j])
    }

    pub fn to_markdown(&self, first_column: &str, caption: &str) -> String {
        let mut header = vec![first_column.to_string()];
        header.extend(self.probes.iter().map(|p| fmt_probe(*p)));
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let body: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                let mut cells = vec![r.label.clone()];
                cells.extend(r.values.iter().map(|v| fmt3(*v)));
                cells
            })
            .collect();
        let mut out = markdown_table(&header, &body);
        let _ = writeln!(out, "\n*{caption}*");
        out
    }
}

fn fmt_probe(p: f64) -> String {
    if p.fract() == 0.0 {
        format!("{}", p as i64)
    } else {
        format!("{p}")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentKind {
    Covariance,
    Correlation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentMatrix {
    pub kind: MomentKind,
    pub fields: Vec<Field>,
    pub n: usize,
    pub values: Vec<Vec<f64>>,
}

pub fn covariance(d: &Dataset, fields: &[Field]) -> Result<MomentMatrix> {
    if d.len() < 2 {
        return Err(Error::EmptyDataset(format!(
            "covariance needs at least 2 records, got {}",
            d.len()
        )));
    }
    let cols: Vec<Vec<f64>> = fields.iter().map(|&f| d.values(f)).collect();
    let k = fields.len();
    let mut values = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i..k {
            let c = sample_covariance(&cols[i], &cols[j]);
            values[i][j] = c;
            values[j][i] = c;
        }
    }
    Ok(MomentMatrix {
        kind: MomentKind::Covariance,
        fields: fields.to_vec(),
        n: d.len(),
        values,
    })
}

pub fn correlation(d: &Dataset, fields: &[Field]) -> Result<MomentMatrix> {
    let cov = covariance(d, fields)?;
    let dev: Vec<f64> = (0..fields.len()).map(|i| cov.values[i][i].sqrt()).collect();
    if let Some(i) = dev.iter().position(|s| *s == 0.0) {
        return Err(Error::ZeroDeviation(fields[i].column().to_string()));
    }
    let k = fields.len();
    let mut values = cov.values;
    for i in 0..k {
        for j in 0..k {
            values[i][j] = if i == j {
                1.0
            } else {
                (values[i][j] / (dev[i] * dev[j])).clamp(-1.0, 1.0)
            };
        }
    }
    Ok(MomentMatrix {
        kind: MomentKind::Correlation,
        values,
        ..cov
    })
}

impl MomentMatrix {
    pub fn get(&self, a: Field, b: Field) -> Option<f64> {
        let i = self.fields.iter().position(|f| *f == a)?;
        let j = self.fields.iter().position(|f| *f == b)?;
        Some(self.values[i][j])
    }

    pub fn to_markdown(&self, scope: &str) -> String {
        let mut header = vec![String::new()];
        header.extend(self.fields.iter().map(|f| f.label().to_string()));
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let body: Vec<Vec<String>> = self
            .fields
            .iter()
            .zip(&self.values)
            .map(|(f, row)| {
                let mut cells = vec![f.label().to_string()];
                cells.extend(row.iter().map(|v| fmt3(*v)));
                cells
            })
            .collect();
        let kind = match self.kind {
            MomentKind::Covariance => "covariance",
            MomentKind::Correlation => "correlation",
        };
        let mut out = markdown_table(&header, &body);
        let _ = writeln!(out, "\n*The {kind} matrix for {scope} (n={})*", self.n);
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityKind {
    Histogram,
    Kde,
}

/// Plot-ready series: bin centres and counts (or densities) for histograms,
/// grid points and density values for KDEs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensitySeries {
    pub kind: DensityKind,
    pub field: Field,
    pub group: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Bin edges; empty for KDEs.
    pub edges: Vec<f64>,
    /// Bin width for equal-width histograms, bandwidth for KDEs.
    pub width: f64,
    pub normalized: bool,
}

impl DensitySeries {
    pub fn to_csv(&self) -> String {
        let (xh, yh) = match (self.kind, self.normalized) {
            (DensityKind::Histogram, false) => ("bin_center", "count"),
            (DensityKind::Histogram, true) => ("bin_center", "density"),
            (DensityKind::Kde, _) => ("x", "density"),
        };
        let mut out = format!("{xh},{yh}\n");
        for (x, y) in self.x.iter().zip(&self.y) {
            let _ = writeln!(out, "{x},{y}");
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bins {
    Count(usize),
    Edges(Vec<f64>),
}

/// Histogram with half-open bins, the last one right-closed.
pub fn histogram(d: &Dataset, field: Field, bins: &Bins, normalized: bool) -> Result<DensitySeries> {
    let xs = d.values(field);
    if xs.is_empty() {
        return Err(Error::EmptyDataset(format!("no values for `{field}`")));
    }
    let edges = match bins {
        Bins::Count(0) => return Err(Error::InvalidArgument("histogram needs at least one bin".into())),
        Bins::Count(k) => {
            let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let (lo, hi) = if lo == hi { (lo - 0.5, hi + 0.5) } else { (lo, hi) };
            let w = (hi - lo) / *k as f64;
            let mut e: Vec<f64> = (0..*k).map(|i| lo + w * i as f64).collect();
            e.push(hi);
            e
        }
        Bins::Edges(e) => {
            if e.len() < 2 || e.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::InvalidArgument("bin edges must be strictly increasing".into()));
            }
            let (lo, hi) = (e[0], e[e.len() - 1]);
            if xs.iter().any(|x| *x < lo || *x > hi) {
                return Err(Error::InvalidArgument(format!("bin edges do not cover the range of `{field}`")));
            }
            e.clone()
        }
    };
    let nb = edges.len() - 1;
    let mut counts = vec![0.0; nb];
    for x in &xs {
        // first edge strictly greater than x, minus one; clamp the right edge
        let i = edges.partition_point(|e| e <= x).saturating_sub(1).min(nb - 1);
        counts[i] += 1.0;
    }
    let n = xs.len() as f64;
    let widths: Vec<f64> = edges.windows(2).map(|w| w[1] - w[0]).collect();
    let y = if normalized {
        counts.iter().zip(&widths).map(|(c, w)| c / (n * w)).collect()
    } else {
        counts
    };
    Ok(DensitySeries {
        kind: DensityKind::Histogram,
        field,
        group: "all".into(),
        x: edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect(),
        y,
        width: widths[0],
        edges,
        normalized,
    })
}

/// Gaussian kernel density on a uniform grid spanning the data range
/// extended by `KDE_SPAN` bandwidths on each side.
pub fn kde(d: &Dataset, field: Field, bandwidth: Option<f64>) -> Result<DensitySeries> {
    let xs = d.values(field);
    if xs.len() < 2 {
        return Err(Error::EmptyDataset(format!(
            "kde needs at least 2 values for `{field}`, got {}",
            xs.len()
        )));
    }
    let h = match bandwidth {
        Some(h) if h > 0.0 && h.is_finite() => h,
        Some(h) => return Err(Error::InvalidArgument(format!("bandwidth must be positive, got {h}"))),
        None => {
            let sd = sample_deviation(&xs);
            if sd == 0.0 {
                return Err(Error::ZeroDeviation(field.column().to_string()));
            }
            1.06 * sd * (xs.len() as f64).powf(-0.2)
        }
    };
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min) - KDE_SPAN * h;
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max) + KDE_SPAN * h;
    let step = (hi - lo) / (KDE_POINTS - 1) as f64;
    let norm = 1.0 / (xs.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let grid: Vec<f64> = (0..KDE_POINTS).map(|i| lo + step * i as f64).collect();
    let y = grid
        .iter()
        .map(|g| norm * xs.iter().map(|x| (-0.5 * ((g - x) / h).powi(2)).exp()).sum::<f64>())
        .collect();
    Ok(DensitySeries {
        kind: DensityKind::Kde,
        field,
        group: "all".into(),
        x: grid,
        y,
        edges: Vec::new(),
        width: h,
        normalized: true,
    })
}

/// Trapezoid-rule integral of a sampled series.
pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xw, yw)| 0.5 * (xw[1] - xw[0]) * (yw[0] + yw[1]))
        .sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CohortSection {
    pub tag: String,
    pub n: usize,
    pub summary: SummaryTable,
    pub percentiles: PercentileTable,
    pub covariance: MomentMatrix,
    pub correlation: MomentMatrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CohortReport {
    pub fields: Vec<Field>,
    pub sections: Vec<CohortSection>,
}

/// Summary, percentiles, covariance and correlation for each of two cohorts.
pub fn cohort_report(d: &Dataset, pair: (&str, &str), table: &CohortTable, fields: &[Field]) -> Result<CohortReport> {
    let grouping = Grouping::cohorts(table, &[pair.0, pair.1])?;
    let sections = groups(d, &grouping)?
        .into_iter()
        .map(|(tag, sub)| {
            let probes = normalize_probes(&DEFAULT_PROBES)?;
            let rows = fields
                .iter()
                .map(|&f| percentile_row(f.label().to_string(), &sub.values(f), &probes))
                .collect::<Result<_>>()?;
            Ok(CohortSection {
                n: sub.len(),
                summary: summary_fields(&sub, &Grouping::All, fields)?,
                percentiles: PercentileTable { probes, rows },
                covariance: covariance(&sub, fields)?,
                correlation: correlation(&sub, fields)?,
                tag,
            })
        })
        .collect::<Result<_>>()?;
    Ok(CohortReport {
        fields: fields.to_vec(),
        sections,
    })
}

impl CohortReport {
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        for s in &self.sections {
            let scope = format!("{} universities", s.tag);
            let _ = writeln!(out, "### Cohort: {}\n", s.tag);
            out.push_str(&s.summary.to_markdown(&scope));
            out.push('\n');
            out.push_str(&s.percentiles.to_markdown("Field", &format!("Percentiles for all fields across {scope} (n={})", s.n)));
            out.push('\n');
            out.push_str(&s.covariance.to_markdown(&scope));
            out.push('\n');
            out.push_str(&s.correlation.to_markdown(&scope));
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::fixtures::{record, small};
    use proptest::prelude::*;

    fn with_ranks(ranks: &[u8]) -> Dataset {
        let records = ranks.iter().enumerate().map(|(i, &r)| record("U", r, 10 + i as u32, 0, 0, 0, 2000)).collect();
        Dataset::new(records, "ranks").unwrap()
    }

    #[test]
    fn constant_and_pair_summaries() {
        let s = summary(&with_ranks(&[2, 2, 2]), &Grouping::All).unwrap();
        let r = s.rows[0].stat(Field::Rank);
        assert_eq!((r.mean, r.deviation), (2.0, 0.0));

        let s = summary(&with_ranks(&[1, 3]), &Grouping::All).unwrap();
        let r = s.rows[0].stat(Field::Rank);
        assert_eq!(r.mean, 2.0);
        assert!((r.deviation - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn empty_dataset_is_error() {
        let d = Dataset::new(vec![], "none").unwrap();
        assert!(summary(&d, &Grouping::All).is_err());
    }

    #[test]
    fn university_groups_are_sorted() {
        let s = summary(&small(), &Grouping::University).unwrap();
        let names: Vec<_> = s.rows.iter().map(|r| r.group.as_str()).collect();
        assert_eq!(names, ["Harvard", "Rutgers", "UCLA"]);
        assert_eq!(s.rows[1].n, 2);
    }

    #[test]
    fn percentile_definitions() {
        let d = with_ranks(&[3]);
        let t = percentiles(&d, &DEFAULT_PROBES).unwrap();
        assert!(t.rows[0].values.iter().all(|v| *v == 3.0));

        let sorted: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(percentile_sorted(&sorted, 50.0), 50.5);

        let t = percentiles(&small(), &[90.0, 10.0, 50.0]).unwrap();
        assert_eq!(t.probes, vec![10.0, 50.0, 90.0]);
        for row in &t.rows {
            assert!(row.values.windows(2).all(|w| w[0] <= w[1]));
        }
        assert!(percentiles(&small(), &[0.0]).is_err());
        assert!(percentiles(&small(), &[100.0]).is_err());
    }

    #[test]
    fn covariance_hand_values() {
        let records = [(1, 2), (2, 4), (3, 6)]
            .iter()
            .map(|&(p, c)| record("U", 1, p, c, 0, 0, 2000))
            .collect();
        let d = Dataset::new(records, "cov").unwrap();
        let m = covariance(&d, &[Field::Publications, Field::Citations]).unwrap();
        assert_eq!(m.values[0][1], 2.0);
        assert_eq!(m.values[0][0], 1.0);
        assert_eq!(m.values[1][1], 4.0);
    }

    #[test]
    fn constant_field_covariance_and_correlation() {
        let d = small();
        let mut recs = d.records.clone();
        for r in &mut recs {
            r.ams_fellow = 1;
        }
        let d = Dataset::new(recs, "const").unwrap();
        let cov = covariance(&d, &Field::ALL).unwrap();
        assert!(cov.values[4].iter().all(|v| *v == 0.0));
        assert!(matches!(correlation(&d, &Field::ALL), Err(Error::ZeroDeviation(f)) if f == "ams_fellow"));
    }

    #[test]
    fn correlation_of_linear_relations() {
        let records = (0..6u32)
            .map(|i| {
                let mut r = record("U", 1, 2 * i + 1, 0, 0, 0, 2000 - i as i32);
                r.citations = 100 - i;
                r
            })
            .collect();
        let d = Dataset::new(records, "lin").unwrap();
        let c = correlation(&d, &[Field::Publications, Field::PhdYear, Field::Citations]).unwrap();
        assert_eq!(c.values[0][0], 1.0);
        assert!((c.values[0][1] + 1.0).abs() < 1e-12);
        assert!((c.values[1][2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn histogram_hand_binning() {
        let records = [1, 1, 2].iter().map(|&p| record("U", 1, p, 0, 0, 0, 2000)).collect();
        let d = Dataset::new(records, "h").unwrap();
        let h = histogram(&d, Field::Publications, &Bins::Count(2), false).unwrap();
        assert_eq!(h.y, vec![2.0, 1.0]);
        let h = histogram(&d, Field::Publications, &Bins::Count(1), false).unwrap();
        assert_eq!(h.y, vec![3.0]);
        let h = histogram(&d, Field::Publications, &Bins::Edges(vec![0.0, 1.5, 3.0]), true).unwrap();
        assert!((trapezoid_bins(&h) - 1.0).abs() < 1e-12);
        assert!(histogram(&d, Field::Publications, &Bins::Edges(vec![1.5, 3.0]), false).is_err());
        assert!(histogram(&d, Field::Publications, &Bins::Count(0), false).is_err());
    }

    fn trapezoid_bins(h: &DensitySeries) -> f64 {
        h.edges.windows(2).zip(&h.y).map(|(e, y)| (e[1] - e[0]) * y).sum()
    }

    #[test]
    fn kde_symmetry_and_mass() {
        let records = [0u32, 2].iter().map(|&p| record("U", 1, p, 0, 0, 0, 2000)).collect();
        let d = Dataset::new(records, "k").unwrap();
        // values 0 and 2 are +-1 around the centre 1
        let k = kde(&d, Field::Publications, Some(1.0)).unwrap();
        assert_eq!(k.x.len(), KDE_POINTS);
        for i in 0..KDE_POINTS {
            assert!((k.y[i] - k.y[KDE_POINTS - 1 - i]).abs() < 1e-9);
        }
        assert!((trapezoid(&k.x, &k.y) - 1.0).abs() < 1e-3);

        let wide = kde(&d, Field::Publications, Some(2.0)).unwrap();
        let peak = |s: &DensitySeries| s.y.iter().copied().fold(0.0, f64::max);
        assert!(peak(&wide) < peak(&k));
    }

    #[test]
    fn kde_rejects_degenerate_input() {
        let d = with_ranks(&[2, 2]);
        assert!(matches!(kde(&d, Field::Rank, None), Err(Error::ZeroDeviation(_))));
        assert!(kde(&d, Field::Rank, Some(0.0)).is_err());
        assert!(kde(&with_ranks(&[2]), Field::Rank, Some(1.0)).is_err());
    }

    #[test]
    fn cohort_report_preserves_cohorts() {
        let recs = vec![
            record("Rutgers", 3, 10, 50, 3, 0, 2010),
            record("UCLA", 3, 30, 70, 6, 1, 2000),
            record("Harvard", 2, 80, 2000, 20, 1, 1985),
            record("MIT", 2, 60, 900, 15, 0, 1990),
        ];
        let d = Dataset::new(recs, "coh").unwrap();
        let table = CohortTable::default();
        let fields = [Field::Publications, Field::Citations, Field::HIndex, Field::PhdYear];
        let rep = cohort_report(&d, ("public", "private"), &table, &fields).unwrap();
        assert_eq!(rep.sections.iter().map(|s| s.n).sum::<usize>(), d.len());
        let s = summary(&d, &Grouping::cohorts(&table, &["public", "private"]).unwrap()).unwrap();
        assert_eq!(s.rows[0].stat(Field::Rank).mean, 3.0);
        assert_eq!(s.rows[1].stat(Field::Rank).mean, 2.0);

        let same = cohort_report(&d, ("public", "public"), &table, &fields).unwrap();
        assert_eq!(same.sections[0], same.sections[1]);

        let only_public = Dataset::new(d.records[..2].to_vec(), "pub").unwrap();
        assert!(cohort_report(&only_public, ("public", "private"), &table, &fields).is_err());
    }

    fn arb_dataset() -> impl Strategy<Value = Dataset> {
        prop::collection::vec((1u8..=4, 0u32..500, 0u32..20000, 0u32..60, 0u8..=1, 1950i32..2020), 3..60).prop_map(|rows| {
            let records = rows
                .into_iter()
                .map(|(r, p, c, h, a, y)| record("U", r, p.max(h), c, h, a, y))
                .collect();
            Dataset::new(records, "prop").unwrap()
        })
    }

    proptest! {
        #[test]
        fn percentiles_are_monotone(d in arb_dataset(), probes in prop::collection::vec(0.5f64..99.5, 1..10)) {
            let t = percentiles(&d, &probes).unwrap();
            for row in &t.rows {
                prop_assert!(row.values.windows(2).all(|w| w[0] <= w[1]));
            }
        }

        #[test]
        fn correlation_is_normalized_covariance(d in arb_dataset()) {
            let cov = covariance(&d, &Field::ALL).unwrap();
            if let Ok(cor) = correlation(&d, &Field::ALL) {
                for i in 0..6 {
                    for j in 0..6 {
                        let expect = cov.values[i][j] / (cov.values[i][i].sqrt() * cov.values[j][j].sqrt());
                        prop_assert!((cor.values[i][j] - expect).abs() <= 1e-9);
                        prop_assert_eq!(cor.values[i][j], cor.values[j][i]);
                    }
                }
            }
        }

        #[test]
        fn histogram_totals(d in arb_dataset(), k in 1usize..40) {
            let h = histogram(&d, Field::Citations, &Bins::Count(k), false).unwrap();
            prop_assert_eq!(h.y.iter().sum::<f64>(), d.len() as f64);
            let hn = histogram(&d, Field::Citations, &Bins::Count(k), true).unwrap();
            prop_assert!((trapezoid_bins(&hn) - 1.0).abs() < 1e-9);
        }

        #[test]
        fn doubling_dataset_rescales_deviation(d in arb_dataset()) {
            let n = d.len() as f64;
            let a = summary(&d, &Grouping::All).unwrap();
            let b = summary(&d.concat(&d), &Grouping::All).unwrap();
            for f in Field::ALL {
                let (sa, sb) = (a.rows[0].stat(f), b.rows[0].stat(f));
                prop_assert!((sa.mean - sb.mean).abs() <= 1e-9 * (1.0 + sa.mean.abs()));
                // (2n-1) s2^2 = 2 (n-1) s1^2
                let expect = sa.deviation * (2.0 * (n - 1.0) / (2.0 * n - 1.0)).sqrt();
                prop_assert!((sb.deviation - expect).abs() <= 1e-9 * (1.0 + expect));
            }
        }
    }
}
