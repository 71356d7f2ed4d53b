use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Floor applied to distances before inversion.
pub const DISTANCE_FLOOR: f64 = 1e-8;

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `1 - a.b / (|a| |b|)`, or `None` when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Some((1.0 - dot / (na * nb)).clamp(0.0, 2.0))
}

pub(crate) fn rows(x: &DMatrix<f64>) -> Vec<Vec<f64>> {
    x.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Entrywise `alpha_euclid * d_euclid + alpha_cosine * d_cosine` over all row pairs.
pub fn pairwise_distance(x: &DMatrix<f64>, alpha_euclid: f64, alpha_cosine: f64) -> Result<DMatrix<f64>> {
    if x.ncols() == 0 {
        return Err(Error::InvalidArgument("distance needs at least one feature".into()));
    }
    if alpha_euclid < 0.0 || alpha_cosine < 0.0 {
        return Err(Error::InvalidArgument("distance weights must be nonnegative".into()));
    }
    let pts = rows(x);
    if alpha_cosine > 0.0 {
        if let Some(i) = pts.iter().position(|p| p.iter().all(|v| *v == 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "row {} is the zero vector, so its cosine distance is undefined",
                i + 1
            )));
        }
    }
    let m = pts.len();
    let flat: Vec<f64> = (0..m)
        .into_par_iter()
        .flat_map_iter(|i| {
            let pts = &pts;
            (0..m).map(move |j| {
                if i == j {
                    return 0.0;
                }
                let (a, b) = (&pts[i.min(j)], &pts[i.max(j)]);
                let mut d = 0.0;
                if alpha_euclid > 0.0 {
                    d += alpha_euclid * euclidean(a, b);
                }
                if alpha_cosine > 0.0 {
                    d += alpha_cosine * cosine(a, b).expect("nonzero rows");
                }
                d
            })
        })
        .collect();
    Ok(DMatrix::from_row_slice(m, m, &flat))
}

/// Nonnegative edge weights with their square roots cached.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightGraph {
    pub w: DMatrix<f64>,
    pub sqrt_w: DMatrix<f64>,
}

impl WeightGraph {
    pub fn from_weights(w: DMatrix<f64>) -> Result<Self> {
        if !w.is_square() {
            return Err(Error::DimensionMismatch {
                expected: w.nrows(),
                actual: w.ncols(),
            });
        }
        if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidArgument("weights must be finite and nonnegative".into()));
        }
        let sqrt_w = w.map(f64::sqrt);
        Ok(Self { w, sqrt_w })
    }

    pub fn len(&self) -> usize {
        self.w.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.w.nrows() == 0
    }

    /// Largest weighted degree over rows and columns.
    pub fn max_degree(&self) -> f64 {
        let rows = self.w.row_iter().map(|r| r.sum()).fold(0.0, f64::max);
        let cols = self.w.column_iter().map(|c| c.sum()).fold(0.0, f64::max);
        rows.max(cols)
    }

    /// Upper bound on the operator norm of the nonlocal gradient.
    pub fn operator_norm_bound(&self) -> f64 {
        2.0 * self.max_degree().sqrt()
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::from_weights(&self.w * c)
    }
}

/// `w = max(d, floor)^-2` off the diagonal, zero on it.
pub fn weight_graph(d: &DMatrix<f64>, floor: f64) -> Result<WeightGraph> {
    if !(floor > 0.0) {
        return Err(Error::InvalidArgument(format!("distance floor must be positive, got {floor}")));
    }
    let w = DMatrix::from_fn(d.nrows(), d.ncols(), |i, j| {
        if i == j {
            0.0
        } else {
            d[(i, j)].max(floor).powi(-2)
        }
    });
    WeightGraph::from_weights(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_examples() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 1.0, 1.0, 1.0, 2.0, 2.0, -1.0, 1.0]);
        let e = pairwise_distance(&x, 1.0, 0.0).unwrap();
        assert_eq!(e[(0, 1)], 0.0);
        assert!((e[(0, 2)] - 2f64.sqrt()).abs() < 1e-15);
        let c = pairwise_distance(&x, 0.0, 1.0).unwrap();
        assert!(c[(0, 2)].abs() < 1e-15);
        assert!((c[(0, 3)] - 1.0).abs() < 1e-15);
        assert_eq!(c, c.transpose());

        let zero = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]);
        assert!(pairwise_distance(&zero, 1.0, 1.0).is_err());
        assert!(pairwise_distance(&zero, 1.0, 0.0).is_ok());
    }

    #[test]
    fn weight_examples() {
        let d = DMatrix::from_row_slice(3, 3, &[0.0, 2.0, 0.0, 2.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        let g = weight_graph(&d, DISTANCE_FLOOR).unwrap();
        assert_eq!(g.w[(0, 1)], 0.25);
        assert!((g.w[(0, 2)] * DISTANCE_FLOOR * DISTANCE_FLOOR - 1.0).abs() < 1e-12);
        assert_eq!(g.w[(1, 1)], 0.0);
        assert_eq!(g.w, g.w.transpose());
        assert!((g.max_degree() / 1e16 - 1.0).abs() < 1e-12);
    }
}
