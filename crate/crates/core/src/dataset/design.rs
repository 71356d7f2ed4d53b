use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{Dataset, Field};
use crate::error::{Error, Result};

/// Classification target.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Rank,
    Ams,
}

impl Target {
    pub fn field(self) -> Field {
        match self {
            Target::Rank => Field::Rank,
            Target::Ams => Field::AmsFellow,
        }
    }

    /// Ordered category values the classifier maps onto.
    pub fn categories(self) -> Vec<i64> {
        match self {
            Target::Rank => vec![1, 2, 3, 4],
            Target::Ams => vec![0, 1],
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Target::Rank => "rank",
            Target::Ams => "ams",
        })
    }
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rank" => Ok(Target::Rank),
            "ams" | "ams_fellow" => Ok(Target::Ams),
            other => Err(Error::InvalidArgument(format!(
                "target must be `rank` or `ams`, got `{other}`"
            ))),
        }
    }
}

/// One of the fourteen fixed predictor subsets.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PredictorCombo {
    pub index: u8,
    pub columns: Vec<Field>,
}

impl PredictorCombo {
    pub const COUNT: u8 = 14;

    pub fn from_index(index: u8) -> Result<Self> {
        use Field::{Citations as C, HIndex as H, PhdYear as Y, Publications as P};
        let columns = match index {
            1 => vec![P],
            2 => vec![C],
            3 => vec![H],
            4 => vec![Y],
            5 => vec![P, C],
            6 => vec![P, H],
            7 => vec![P, Y],
            8 => vec![C, H],
            9 => vec![C, Y],
            10 => vec![H, Y],
            11 => vec![P, C, H],
            12 => vec![P, C, Y],
            13 => vec![P, H, Y],
            14 => vec![P, C, H, Y],
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "predictor combination index must be in 1..=14, got {index}"
                )))
            }
        };
        Ok(Self { index, columns })
    }

    pub fn all() -> Vec<Self> {
        (1..=Self::COUNT)
            .map(|i| Self::from_index(i).expect("index in range"))
            .collect()
    }
}

/// Per-column affine standardization record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub columns: Vec<Field>,
    pub means: Vec<f64>,
    pub deviations: Vec<f64>,
}

impl FeatureStats {
    /// Column means and sample (n-1) deviations of `x`.
    pub fn fit(x: &DMatrix<f64>, columns: &[Field]) -> Result<Self> {
        if x.ncols() != columns.len() {
            return Err(Error::DimensionMismatch {
                expected: columns.len(),
                actual: x.ncols(),
            });
        }
        if x.nrows() < 2 {
            return Err(Error::EmptyDataset(format!(
                "standardization needs at least 2 rows, got {}",
                x.nrows()
            )));
        }
        let n = x.nrows() as f64;
        let mut means = Vec::with_capacity(x.ncols());
        let mut deviations = Vec::with_capacity(x.ncols());
        for (j, field) in columns.iter().enumerate() {
            let col = x.column(j);
            let mean = col.sum() / n;
            let ss: f64 = col.iter().map(|v| (v - mean).powi(2)).sum();
            let dev = (ss / (n - 1.0)).sqrt();
            if dev == 0.0 || !dev.is_finite() {
                return Err(Error::ZeroDeviation(field.column().to_string()));
            }
            means.push(mean);
            deviations.push(dev);
        }
        Ok(Self {
            columns: columns.to_vec(),
            means,
            deviations,
        })
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_width(x.ncols())?;
        Ok(DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
            (x[(i, j)] - self.means[j]) / self.deviations[j]
        }))
    }

    pub fn invert(&self, z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_width(z.ncols())?;
        Ok(DMatrix::from_fn(z.nrows(), z.ncols(), |i, j| {
            z[(i, j)] * self.deviations[j] + self.means[j]
        }))
    }

    fn check_width(&self, k: usize) -> Result<()> {
        if k != self.means.len() {
            return Err(Error::DimensionMismatch {
                expected: self.means.len(),
                actual: k,
            });
        }
        Ok(())
    }
}

/// Numeric feature matrix plus aligned target vector.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignMatrix {
    pub features: DMatrix<f64>,
    pub target: Vec<f64>,
    pub columns: Vec<Field>,
    pub target_field: Field,
    pub combo: Option<PredictorCombo>,
    /// Set once the features have been standardized.
    pub feature_stats: Option<FeatureStats>,
}

impl DesignMatrix {
    pub fn nrows(&self) -> usize {
        self.features.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.features.ncols()
    }

    /// Builds a matrix directly from rows, mostly for tests and synthetic fits.
    pub fn from_rows(rows: &[Vec<f64>], target: Vec<f64>) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidArgument("ragged feature rows".into()));
        }
        if rows.len() != target.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                actual: target.len(),
            });
        }
        let features = DMatrix::from_fn(rows.len(), k, |i, j| rows[i][j]);
        let all = [
            Field::Publications,
            Field::Citations,
            Field::HIndex,
            Field::PhdYear,
            Field::AmsFellow,
            Field::Rank,
        ];
        Ok(Self {
            features,
            target,
            columns: all.iter().copied().cycle().take(k).collect(),
            target_field: Field::Rank,
            combo: None,
            feature_stats: None,
        })
    }
}

/// Raw feature matrix for `fields`, one row per record.
pub fn feature_matrix(d: &Dataset, fields: &[Field]) -> DMatrix<f64> {
    DMatrix::from_fn(d.len(), fields.len(), |i, j| fields[j].value(&d.records[i]))
}

/// Design matrix over an arbitrary column list.
pub fn select_columns(d: &Dataset, columns: &[Field], target: Field) -> Result<DesignMatrix> {
    if d.is_empty() {
        return Err(Error::EmptyDataset("cannot select features".into()));
    }
    if columns.is_empty() {
        return Err(Error::InvalidArgument("no feature columns selected".into()));
    }
    if columns.contains(&target) {
        return Err(Error::InvalidArgument(format!(
            "target `{target}` cannot also be a feature"
        )));
    }
    Ok(DesignMatrix {
        features: feature_matrix(d, columns),
        target: d.values(target),
        columns: columns.to_vec(),
        target_field: target,
        combo: None,
        feature_stats: None,
    })
}

pub fn select_features(d: &Dataset, combo: &PredictorCombo, target: Target) -> Result<DesignMatrix> {
    let mut m = select_columns(d, &combo.columns, target.field())?;
    m.combo = Some(combo.clone());
    Ok(m)
}

/// Standardizes the features. Without `stats` the statistics are fitted on
/// `m` itself; with `stats` they are applied unchanged.
pub fn standardize(m: &DesignMatrix, stats: Option<&FeatureStats>) -> Result<(DesignMatrix, FeatureStats)> {
    let stats = match stats {
        Some(s) => s.clone(),
        None => FeatureStats::fit(&m.features, &m.columns)?,
    };
    let features = stats.apply(&m.features)?;
    Ok((
        DesignMatrix {
            features,
            feature_stats: Some(stats.clone()),
            ..m.clone()
        },
        stats,
    ))
}
