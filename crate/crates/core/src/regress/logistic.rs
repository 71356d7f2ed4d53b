//! Multinomial logistic regression by full-batch gradient descent.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::softmax::softmax;

/// Mean cross-entropy plus `l2/2 * ||W||^2` and its gradient with respect to
/// the `classes x k` weights and the per-class intercepts.
pub fn logistic_objective(
    x: &DMatrix<f64>,
    labels: &[usize],
    weights: &DMatrix<f64>,
    intercepts: &DVector<f64>,
    l2: f64,
) -> (f64, DMatrix<f64>, DVector<f64>) {
    let n = x.nrows() as f64;
    let c = weights.nrows();
    let logits = x * weights.transpose();
    let mut gw = DMatrix::zeros(c, x.ncols());
    let mut gb = DVector::zeros(c);
    let mut loss = 0.0;
    for i in 0..x.nrows() {
        let z: Vec<f64> = (0..c).map(|l| logits[(i, l)] + intercepts[l]).collect();
        let mut q = softmax(&z);
        loss -= q[labels[i]].max(f64::MIN_POSITIVE).ln();
        q[labels[i]] -= 1.0;
        for l in 0..c {
            gb[l] += q[l];
            for j in 0..x.ncols() {
                gw[(l, j)] += q[l] * x[(i, j)];
            }
        }
    }
    loss = loss / n + 0.5 * l2 * weights.norm_squared();
    gw /= n;
    gw += weights * l2;
    gb /= n;
    (loss, gw, gb)
}

#[derive(Clone, Debug)]
pub(crate) struct LogisticFit {
    pub classes: Vec<f64>,
    pub weights: DMatrix<f64>,
    pub intercepts: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Gradient descent with step `1/L`, where `L` bounds the objective's
/// curvature by half the trace of the augmented Gram matrix over `n`, plus `l2`.
pub(crate) fn fit_logistic(x: &DMatrix<f64>, y: &[f64], l2: f64, tol: f64, max_iter: usize) -> Result<LogisticFit> {
    let mut classes: Vec<f64> = y.to_vec();
    classes.sort_by(f64::total_cmp);
    classes.dedup();
    let labels: Vec<usize> = y
        .iter()
        .map(|v| classes.iter().position(|c| c == v).expect("class present"))
        .collect();
    let c = classes.len();
    let k = x.ncols();
    let mut weights = DMatrix::zeros(c, k);
    let mut intercepts = DVector::zeros(c);
    if c == 1 {
        return Ok(LogisticFit {
            classes,
            weights,
            intercepts,
            iterations: 0,
            converged: true,
        });
    }

    let n = x.nrows() as f64;
    let trace = x.norm_squared() / n + 1.0;
    let step = 1.0 / (0.5 * trace + l2);

    for it in 1..=max_iter {
        let (loss, gw, gb) = logistic_objective(x, &labels, &weights, &intercepts, l2);
        if !loss.is_finite() {
            return Err(Error::NonFinite {
                iteration: it,
                message: format!("logistic loss with step {step}"),
            });
        }
        let gnorm = (gw.norm_squared() + gb.norm_squared()).sqrt();
        if gnorm < tol {
            return Ok(LogisticFit {
                classes,
                weights,
                intercepts,
                iterations: it,
                converged: true,
            });
        }
        weights -= gw * step;
        intercepts -= gb * step;
    }
    Ok(LogisticFit {
        classes,
        weights,
        intercepts,
        iterations: max_iter,
        converged: false,
    })
}
