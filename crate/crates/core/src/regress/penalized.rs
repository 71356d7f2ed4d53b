//! Lasso and elastic net by cyclic coordinate descent.
//!
//! Objective, over centered data:
//!
//! ```text
//! (1/(2n)) ||y - X b||^2 + alpha * l1_ratio * ||b||_1 + alpha * (1 - l1_ratio) / 2 * ||b||^2
//! ```

use nalgebra::{DMatrix, DVector};

use super::linear::{center, Linear};
use crate::error::{Error, Result};

pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

pub(crate) struct CdFit {
    pub linear: Linear,
    pub iterations: usize,
}

pub(crate) fn elastic_net(
    x: &DMatrix<f64>,
    y: &[f64],
    alpha: f64,
    l1_ratio: f64,
    tol: f64,
    max_iter: usize,
) -> Result<CdFit> {
    if !(alpha >= 0.0) || !(0.0..=1.0).contains(&l1_ratio) {
        return Err(Error::InvalidArgument(format!(
            "elastic net needs alpha >= 0 and l1_ratio in [0, 1], got {alpha}, {l1_ratio}"
        )));
    }
    let c = center(x, y);
    let n = c.x.nrows() as f64;
    let k = c.x.ncols();
    let l1 = alpha * l1_ratio;
    let l2 = alpha * (1.0 - l1_ratio);
    let col_sq: Vec<f64> = (0..k).map(|j| c.x.column(j).norm_squared() / n).collect();

    let mut coef = DVector::zeros(k);
    let mut resid = c.y.clone();
    for it in 1..=max_iter {
        let mut max_change: f64 = 0.0;
        for j in 0..k {
            let denom = col_sq[j] + l2;
            if denom == 0.0 {
                continue;
            }
            let old = coef[j];
            let rho = c.x.column(j).dot(&resid) / n + col_sq[j] * old;
            let new = soft_threshold(rho, l1) / denom;
            if new != old {
                resid.axpy(old - new, &c.x.column(j), 1.0);
                coef[j] = new;
                max_change = max_change.max((new - old).abs());
            }
        }
        if !max_change.is_finite() {
            return Err(Error::NonFinite {
                iteration: it,
                message: "coordinate descent update".into(),
            });
        }
        if max_change < tol {
            let intercept = c.y_mean - c.x_mean.dot(&coef);
            return Ok(CdFit {
                linear: Linear { coef, intercept },
                iterations: it,
            });
        }
    }
    Err(Error::NonConvergence {
        method: "coordinate descent".into(),
        iterations: max_iter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn design() -> (DMatrix<f64>, Vec<f64>) {
        let x = DMatrix::from_row_slice(
            6,
            2,
            &[0.5, -1.0, 1.0, 0.3, -0.7, 0.2, 1.4, -0.6, -1.1, 0.9, 0.2, 1.2],
        );
        let y = (0..6).map(|i| 2.0 * x[(i, 0)] - x[(i, 1)] + 0.25).collect();
        (x, y)
    }

    #[test]
    fn huge_penalty_zeroes_everything() {
        let (x, y) = design();
        let fit = elastic_net(&x, &y, 1e6, 1.0, 1e-8, 1000).unwrap();
        assert!(fit.linear.coef.iter().all(|c| *c == 0.0));
        let mean_y = y.iter().sum::<f64>() / 6.0;
        assert!((fit.linear.intercept - mean_y).abs() < 1e-12);
    }

    #[test]
    fn zero_penalty_is_least_squares() {
        let (x, y) = design();
        let fit = elastic_net(&x, &y, 0.0, 1.0, 1e-12, 100_000).unwrap();
        assert!((fit.linear.coef[0] - 2.0).abs() < 1e-8);
        assert!((fit.linear.coef[1] + 1.0).abs() < 1e-8);
        assert!((fit.linear.intercept - 0.25).abs() < 1e-8);
    }

    #[test]
    fn kkt_conditions_hold() {
        let (x, y) = design();
        let alpha = 0.3;
        let fit = elastic_net(&x, &y, alpha, 1.0, 1e-12, 100_000).unwrap();
        let resid: Vec<f64> = (0..6)
            .map(|i| y[i] - fit.linear.intercept - x[(i, 0)] * fit.linear.coef[0] - x[(i, 1)] * fit.linear.coef[1])
            .collect();
        for j in 0..2 {
            let g: f64 = (0..6).map(|i| x[(i, j)] * resid[i]).sum::<f64>() / 6.0;
            let b = fit.linear.coef[j];
            if b == 0.0 {
                assert!(g.abs() <= alpha + 1e-9);
            } else {
                assert!((g - alpha * b.signum()).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold(5.0, 2.0), 3.0);
        assert_eq!(soft_threshold(-5.0, 2.0), -3.0);
        assert_eq!(soft_threshold(1.0, 2.0), 0.0);
    }
}
