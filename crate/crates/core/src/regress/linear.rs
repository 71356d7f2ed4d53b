//! Closed-form least-squares fits: ordinary, ridge (with cross-validated
//! penalty), polynomial, and Bayesian ridge.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Jitter added to the normal equations of every closed-form fit.
pub const RIDGE_JITTER: f64 = 1e-10;
pub const RIDGE_GRID: [f64; 6] = [1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0];
pub const CV_FOLDS: usize = 5;

/// Column means of `x` and the mean of `y`, plus the centered data.
pub(crate) struct Centered {
    pub x_mean: DVector<f64>,
    pub y_mean: f64,
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
}

pub(crate) fn center(x: &DMatrix<f64>, y: &[f64]) -> Centered {
    let n = x.nrows() as f64;
    let x_mean = DVector::from_fn(x.ncols(), |j, _| x.column(j).sum() / n);
    let y_mean = y.iter().sum::<f64>() / n;
    let xc = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] - x_mean[j]);
    let yc = DVector::from_iterator(y.len(), y.iter().map(|v| v - y_mean));
    Centered {
        x_mean,
        y_mean,
        x: xc,
        y: yc,
    }
}

/// Coefficients and intercept of a linear predictor.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Linear {
    pub coef: DVector<f64>,
    pub intercept: f64,
}

impl Linear {
    pub fn predict(&self, x: &DMatrix<f64>) -> DVector<f64> {
        x * &self.coef + DVector::from_element(x.nrows(), self.intercept)
    }

    fn from_centered(c: &Centered, coef: DVector<f64>) -> Self {
        let intercept = c.y_mean - c.x_mean.dot(&coef);
        Self { coef, intercept }
    }
}

/// Minimizer of `||y - Xb - b0||^2 + alpha ||b||^2` via the normal equations.
pub(crate) fn ridge(x: &DMatrix<f64>, y: &[f64], alpha: f64) -> Result<Linear> {
    let c = center(x, y);
    let coef = solve_normal(&c.x, &c.y, alpha + RIDGE_JITTER)?;
    Ok(Linear::from_centered(&c, coef))
}

fn solve_normal(x: &DMatrix<f64>, y: &DVector<f64>, shift: f64) -> Result<DVector<f64>> {
    let k = x.ncols();
    let gram = x.transpose() * x + DMatrix::identity(k, k) * shift;
    let rhs = x.transpose() * y;
    match gram.clone().cholesky() {
        Some(ch) => Ok(ch.solve(&rhs)),
        None => gram
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Singular("normal equations are singular".into())),
    }
}

/// Ridge penalty with the lowest k-fold cross-validated squared error.
/// Folds are contiguous row blocks; ties keep the smaller penalty.
pub(crate) fn ridge_cv(x: &DMatrix<f64>, y: &[f64], grid: &[f64], folds: usize) -> Result<(f64, Linear)> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::EmptyDataset(format!("ridge cross-validation needs 2 rows, got {n}")));
    }
    let k = folds.min(n);
    let mut best: Option<(f64, f64)> = None;
    for &alpha in grid {
        let mut sse = 0.0;
        for f in 0..k {
            let (lo, hi) = (f * n / k, (f + 1) * n / k);
            let train: Vec<usize> = (0..n).filter(|i| *i < lo || *i >= hi).collect();
            let xt = x.select_rows(&train);
            let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let model = ridge(&xt, &yt, alpha)?;
            let held: Vec<usize> = (lo..hi).collect();
            let pred = model.predict(&x.select_rows(&held));
            sse += held.iter().zip(pred.iter()).map(|(&i, p)| (y[i] - p).powi(2)).sum::<f64>();
        }
        if best.is_none_or(|(_, b)| sse < b) {
            best = Some((alpha, sse));
        }
    }
    let (alpha, _) = best.ok_or_else(|| Error::InvalidArgument("empty ridge grid".into()))?;
    Ok((alpha, ridge(x, y, alpha)?))
}

/// Exponent tuples of every monomial with total degree 1..=`degree`,
/// as sorted variable-index lists.
pub fn monomials(k: usize, degree: usize) -> Vec<Vec<usize>> {
    fn extend(prefix: &mut Vec<usize>, start: usize, k: usize, left: usize, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            out.push(prefix.clone());
            return;
        }
        for v in start..k {
            prefix.push(v);
            extend(prefix, v, k, left - 1, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    for d in 1..=degree {
        extend(&mut Vec::with_capacity(d), 0, k, d, &mut out);
    }
    out
}

pub fn polynomial_features(x: &DMatrix<f64>, degree: usize) -> DMatrix<f64> {
    let terms = monomials(x.ncols(), degree);
    DMatrix::from_fn(x.nrows(), terms.len(), |i, t| terms[t].iter().map(|&v| x[(i, v)]).product())
}

/// Least squares on an expanded design, refusing rank-deficient expansions.
pub(crate) fn least_squares_full_rank(x: &DMatrix<f64>, y: &[f64]) -> Result<Linear> {
    let c = center(x, y);
    let p = c.x.ncols();
    let svd = c.x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let tol = smax * (c.x.nrows().max(p) as f64) * 1e-12;
    let rank = svd.singular_values.iter().filter(|s| **s > tol).count();
    if rank < p {
        return Err(Error::Singular(format!(
            "polynomial design has rank {rank} < {p} columns ({} rows); use fewer predictors",
            c.x.nrows()
        )));
    }
    let coef = svd
        .solve(&c.y, tol)
        .map_err(|e| Error::Singular(e.to_string()))?;
    Ok(Linear::from_centered(&c, coef))
}

#[derive(Clone, Debug)]
pub(crate) struct BayesFit {
    pub linear: Linear,
    pub noise_precision: f64,
    pub weight_precision: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Bayesian ridge regression with Gamma(1e-6, 1e-6) hyperpriors on the noise
/// and weight precisions, updated by evidence maximization.
pub(crate) fn bayesian_ridge(x: &DMatrix<f64>, y: &[f64], max_iter: usize, tol: f64) -> Result<BayesFit> {
    const A1: f64 = 1e-6;
    const A2: f64 = 1e-6;
    const L1: f64 = 1e-6;
    const L2: f64 = 1e-6;

    let c = center(x, y);
    let n = c.x.nrows() as f64;
    let k = c.x.ncols();
    let gram = c.x.transpose() * &c.x;
    let xty = c.x.transpose() * &c.y;
    let eig = gram.clone().symmetric_eigen();

    let var_y = c.y.norm_squared() / n;
    let mut alpha = 1.0 / (var_y + f64::EPSILON);
    let mut lambda = 1.0;
    let mut coef = DVector::zeros(k);
    let mut converged = false;
    let mut iterations = 0;

    for it in 1..=max_iter {
        iterations = it;
        let a = &gram + DMatrix::identity(k, k) * (lambda / alpha);
        let next = a
            .cholesky()
            .map(|ch| ch.solve(&xty))
            .ok_or_else(|| Error::Singular("Bayesian ridge posterior is not positive definite".into()))?;
        let gamma: f64 = eig
            .eigenvalues
            .iter()
            .map(|s| alpha * s.max(0.0) / (lambda + alpha * s.max(0.0)))
            .sum();
        let resid = (&c.y - &c.x * &next).norm_squared();
        lambda = (gamma + 2.0 * L1) / (next.norm_squared() + 2.0 * L2);
        alpha = (n - gamma + 2.0 * A1) / (resid + 2.0 * A2);
        if !(lambda.is_finite() && alpha.is_finite()) || next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                iteration: it,
                message: "Bayesian ridge precision update".into(),
            });
        }
        let change: f64 = (&next - &coef).iter().map(|d| d.abs()).sum();
        coef = next;
        if it > 1 && change < tol {
            converged = true;
            break;
        }
    }
    // final posterior mean at the converged precisions
    let a = &gram + DMatrix::identity(k, k) * (lambda / alpha);
    if let Some(ch) = a.cholesky() {
        coef = ch.solve(&xty);
    }
    Ok(BayesFit {
        linear: Linear::from_centered(&c, coef),
        noise_precision: alpha,
        weight_precision: lambda,
        iterations,
        converged,
    })
}
