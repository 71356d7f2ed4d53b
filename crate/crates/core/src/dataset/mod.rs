//! Faculty-record ingestion, validation, selection and splitting.
//!
//! Records are read from a fixed-header CSV file, validated against the
//! record invariants, and kept in file order. Everything downstream (EDA,
//! regression, softmax, clustering) works on [`Dataset`] values or on
//! [`DesignMatrix`] values selected from them.

mod design;
mod synth;

use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::CohortTable;
use crate::error::{Error, Result};

pub use design::{
    feature_matrix, select_columns, select_features, standardize, DesignMatrix, FeatureStats,
    PredictorCombo, Target,
};
pub use synth::{default_profile, synth_generate, InstitutionProfile, Moments, SynthProfile};

/// Exact CSV header expected by [`load_csv`].
pub const CSV_HEADER: [&str; 9] = [
    "last_name",
    "first_name",
    "rank",
    "publications",
    "citations",
    "h_index",
    "ams_fellow",
    "phd_year",
    "university",
];

/// Numeric fields of a faculty record, in table order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    Rank,
    Publications,
    Citations,
    HIndex,
    AmsFellow,
    PhdYear,
}

impl Field {
    pub const ALL: [Field; 6] = [
        Field::Rank,
        Field::Publications,
        Field::Citations,
        Field::HIndex,
        Field::AmsFellow,
        Field::PhdYear,
    ];

    /// Column name in the CSV header.
    pub fn column(self) -> &'static str {
        match self {
            Field::Rank => "rank",
            Field::Publications => "publications",
            Field::Citations => "citations",
            Field::HIndex => "h_index",
            Field::AmsFellow => "ams_fellow",
            Field::PhdYear => "phd_year",
        }
    }

    /// Short label used in matrix and percentile tables.
    pub fn label(self) -> &'static str {
        match self {
            Field::Rank => "Rank",
            Field::Publications => "Publications",
            Field::Citations => "Citations",
            Field::HIndex => "h-index",
            Field::AmsFellow => "AMS Fellowship",
            Field::PhdYear => "Year of PhD",
        }
    }

    /// Long label used in mean/deviation tables.
    pub fn long_label(self) -> &'static str {
        match self {
            Field::Publications => "Number of Publications",
            Field::Citations => "Number of Citations",
            other => other.label(),
        }
    }

    pub fn value(self, r: &FacultyRecord) -> f64 {
        match self {
            Field::Rank => f64::from(r.rank),
            Field::Publications => f64::from(r.publications),
            Field::Citations => f64::from(r.citations),
            Field::HIndex => f64::from(r.h_index),
            Field::AmsFellow => f64::from(r.ams_fellow),
            Field::PhdYear => f64::from(r.phd_year),
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.column())
    }
}

impl FromStr for Field {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rank" => Ok(Field::Rank),
            "publications" | "pubs" => Ok(Field::Publications),
            "citations" | "cites" => Ok(Field::Citations),
            "h_index" | "h-index" | "h" => Ok(Field::HIndex),
            "ams_fellow" | "ams" => Ok(Field::AmsFellow),
            "phd_year" | "phd" | "year" => Ok(Field::PhdYear),
            other => Err(Error::InvalidArgument(format!("unknown field `{other}`"))),
        }
    }
}

/// One professor's observed fields.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FacultyRecord {
    pub last_name: String,
    pub first_name: String,
    /// 1 assistant, 2 associate, 3 full, 4 distinguished.
    pub rank: u8,
    pub publications: u32,
    pub citations: u32,
    pub h_index: u32,
    pub ams_fellow: u8,
    pub phd_year: i32,
    pub university: String,
}

impl FacultyRecord {
    /// Returns the first violated invariant as `(field, value)`.
    fn violation(&self) -> Option<(&'static str, String)> {
        if !(1..=4).contains(&self.rank) {
            return Some(("rank", self.rank.to_string()));
        }
        if self.ams_fellow > 1 {
            return Some(("ams_fellow", self.ams_fellow.to_string()));
        }
        if self.h_index > self.publications {
            return Some(("h_index", self.h_index.to_string()));
        }
        if !(1900..=2100).contains(&self.phd_year) {
            return Some(("phd_year", self.phd_year.to_string()));
        }
        if self.university.trim().is_empty() {
            return Some(("university", self.university.clone()));
        }
        None
    }

    pub fn validate(&self) -> Result<()> {
        match self.violation() {
            None => Ok(()),
            Some((field, value)) => Err(Error::InvalidRecord {
                field: field.to_string(),
                value,
            }),
        }
    }
}

/// Ordered collection of validated records.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub records: Vec<FacultyRecord>,
    pub source: String,
}

/// Record selection used by [`Dataset::filter`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum Selector {
    University(String),
    Cohort(String),
}

impl Dataset {
    pub fn new(records: Vec<FacultyRecord>, source: impl Into<String>) -> Result<Self> {
        for r in &records {
            r.validate()?;
        }
        Ok(Self {
            records,
            source: source.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn values(&self, field: Field) -> Vec<f64> {
        self.records.iter().map(|r| field.value(r)).collect()
    }

    /// Distinct university labels in first-appearance order.
    pub fn universities(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.records {
            if !out.iter().any(|u| u == &r.university) {
                out.push(r.university.clone());
            }
        }
        out
    }

    /// Subsequence of records matching `selector`. University names match
    /// case-insensitively; cohort tags resolve through `cohorts`.
    pub fn filter(&self, selector: &Selector, cohorts: &CohortTable) -> Result<Dataset> {
        let records = match selector {
            Selector::University(name) => self
                .records
                .iter()
                .filter(|r| r.university.trim().eq_ignore_ascii_case(name.trim()))
                .cloned()
                .collect(),
            Selector::Cohort(tag) => {
                let members = cohorts.members(tag)?;
                self.records
                    .iter()
                    .filter(|r| {
                        members
                            .iter()
                            .any(|m| m.trim().eq_ignore_ascii_case(r.university.trim()))
                    })
                    .cloned()
                    .collect()
            }
        };
        let label = match selector {
            Selector::University(n) => format!("university={n}"),
            Selector::Cohort(t) => format!("cohort={t}"),
        };
        Ok(Dataset {
            records,
            source: format!("{} [{}]", self.source, label),
        })
    }

    /// Dataset with its records repeated: `self` followed by `other`.
    pub fn concat(&self, other: &Dataset) -> Dataset {
        let mut records = self.records.clone();
        records.extend(other.records.iter().cloned());
        Dataset {
            records,
            source: format!("{} + {}", self.source, other.source),
        }
    }

    pub fn to_csv_string(&self) -> String {
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        w.write_record(CSV_HEADER).expect("in-memory write");
        for r in &self.records {
            w.write_record([
                r.last_name.clone(),
                r.first_name.clone(),
                r.rank.to_string(),
                r.publications.to_string(),
                r.citations.to_string(),
                r.h_index.to_string(),
                r.ams_fellow.to_string(),
                r.phd_year.to_string(),
                r.university.clone(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
    }
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(file, path.display().to_string())
}

/// Parses the faculty CSV format from any reader. Lines starting with `#`
/// are skipped.
pub fn read_csv<R: Read>(reader: R, source: impl Into<String>) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .comment(Some(b'#'))
        .from_reader(reader);

    let headers = rdr.headers().map_err(|e| Error::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    let got: Vec<&str> = headers.iter().map(str::trim).collect();
    if got != CSV_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "expected header `{}`, found `{}`",
                CSV_HEADER.join(","),
                got.join(",")
            ),
        });
    }

    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line());
        records.push(parse_row(&row, line)?);
    }

    Ok(Dataset {
        records,
        source: source.into(),
    })
}

fn parse_row(row: &csv::StringRecord, line: u64) -> Result<FacultyRecord> {
    let field = |i: usize| -> Result<&str> {
        let v = row.get(i).unwrap_or("").trim();
        if v.is_empty() {
            return Err(Error::Parse {
                line,
                message: format!("empty field `{}`", CSV_HEADER[i]),
            });
        }
        Ok(v)
    };
    fn num<T: FromStr>(v: &str, name: &str, line: u64) -> Result<T> {
        v.parse().map_err(|_| Error::Parse {
            line,
            message: format!("field `{name}` is not an integer: `{v}`"),
        })
    }

    // Parse wide then narrow, so out-of-range values surface as schema errors.
    let rank: i64 = num(field(2)?, "rank", line)?;
    let ams: i64 = num(field(6)?, "ams_fellow", line)?;
    let counts: Vec<i64> = (3..=5)
        .map(|i| num(field(i)?, CSV_HEADER[i], line))
        .collect::<Result<_>>()?;
    let phd_year: i64 = num(field(7)?, "phd_year", line)?;

    let schema = |name: &str, v: i64| Error::Schema {
        line,
        field: name.to_string(),
        value: v.to_string(),
    };
    if !(1..=4).contains(&rank) {
        return Err(schema("rank", rank));
    }
    if !(0..=1).contains(&ams) {
        return Err(schema("ams_fellow", ams));
    }
    for (i, &c) in counts.iter().enumerate() {
        if c < 0 || c > i64::from(u32::MAX) {
            return Err(schema(CSV_HEADER[3 + i], c));
        }
    }
    if !(1900..=2100).contains(&phd_year) {
        return Err(schema("phd_year", phd_year));
    }

    let rec = FacultyRecord {
        last_name: field(0)?.to_string(),
        first_name: field(1)?.to_string(),
        rank: rank as u8,
        publications: counts[0] as u32,
        citations: counts[1] as u32,
        h_index: counts[2] as u32,
        ams_fellow: ams as u8,
        phd_year: phd_year as i32,
        university: field(8)?.to_string(),
    };
    if let Some((name, value)) = rec.violation() {
        return Err(Error::Schema {
            line,
            field: name.to_string(),
            value,
        });
    }
    Ok(rec)
}

/// Random partition into `(train, test)` with `round_half_up(train_fraction * m)`
/// training records. Both halves keep the permuted order.
pub fn train_test_split(d: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let n_train = (train_fraction * d.len() as f64 + 0.5).floor() as usize;
    split_at_count(d, n_train, seed)
}

/// Permutes the records with `seed` and takes the first `n_train` as training.
pub fn split_at_count(d: &Dataset, n_train: usize, seed: u64) -> Result<(Dataset, Dataset)> {
    if d.len() < 2 {
        return Err(Error::EmptyDataset(format!(
            "split needs at least 2 records, got {}",
            d.len()
        )));
    }
    if n_train > d.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot take {n_train} training records from {}",
            d.len()
        )));
    }
    let order = permutation(d.len(), seed);
    let pick = |idx: &[usize]| idx.iter().map(|&i| d.records[i].clone()).collect();
    Ok((
        Dataset {
            records: pick(&order[..n_train]),
            source: format!("{} [train seed={seed}]", d.source),
        },
        Dataset {
            records: pick(&order[n_train..]),
            source: format!("{} [test seed={seed}]", d.source),
        },
    ))
}

pub(crate) fn permutation(m: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut rng);
    order
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn record(univ: &str, rank: u8, pubs: u32, cites: u32, h: u32, ams: u8, year: i32) -> FacultyRecord {
        FacultyRecord {
            last_name: format!("L{pubs}"),
            first_name: "F".into(),
            rank,
            publications: pubs,
            citations: cites,
            h_index: h,
            ams_fellow: ams,
            phd_year: year,
            university: univ.into(),
        }
    }

    pub fn small() -> Dataset {
        Dataset::new(
            vec![
                record("Rutgers", 1, 10, 50, 3, 0, 2010),
                record("Harvard", 3, 80, 2000, 20, 1, 1985),
                record("Rutgers", 2, 30, 300, 8, 0, 2001),
                record("UCLA", 4, 150, 5000, 35, 1, 1975),
            ],
            "fixture",
        )
        .unwrap()
    }
}
