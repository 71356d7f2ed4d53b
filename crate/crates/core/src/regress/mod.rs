//! Regression methods used as classifiers.
//!
//! Every method produces a real-valued prediction `py` per row; the
//! classification operator [`classify`] then maps `py` to the nearest valid
//! category. Logistic regression predicts class probabilities, so its `py` is
//! the expected category value under those probabilities.

mod linear;
mod logistic;
mod metrics;
mod penalized;
mod sweep;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::{DesignMatrix, FeatureStats};
use crate::error::{Error, Result};
use crate::softmax::softmax;

pub use linear::{monomials, polynomial_features, CV_FOLDS, RIDGE_GRID, RIDGE_JITTER};
pub use logistic::logistic_objective;
pub use metrics::{add_metric, ams_threshold, ar_metric, classify};
pub use penalized::soft_threshold;
pub use sweep::{sweep, sweep_with, SweepCell, SweepConfig, SweepResult};

pub type Hyper = BTreeMap<String, f64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MethodTag {
    LnR,
    LgR,
    PoR,
    RR,
    LR,
    ENR,
    ByR,
}

impl MethodTag {
    pub const ALL: [MethodTag; 7] = [
        MethodTag::LnR,
        MethodTag::LgR,
        MethodTag::PoR,
        MethodTag::RR,
        MethodTag::LR,
        MethodTag::ENR,
        MethodTag::ByR,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MethodTag::LnR => "LnR",
            MethodTag::LgR => "LgR",
            MethodTag::PoR => "PoR",
            MethodTag::RR => "RR",
            MethodTag::LR => "LR",
            MethodTag::ENR => "ENR",
            MethodTag::ByR => "ByR",
        }
    }

    pub fn long_name(self) -> &'static str {
        match self {
            MethodTag::LnR => "Linear Regression",
            MethodTag::LgR => "Logistic Regression",
            MethodTag::PoR => "Polynomial Regression",
            MethodTag::RR => "RidgeCV Regression",
            MethodTag::LR => "Lasso Regression",
            MethodTag::ENR => "ElasticNet Regression",
            MethodTag::ByR => "Bayesian Ridge Regression",
        }
    }

    /// Fixed default hyperparameters.
    pub fn default_hyper(self) -> Hyper {
        let pairs: &[(&str, f64)] = match self {
            MethodTag::LnR => &[("jitter", RIDGE_JITTER)],
            MethodTag::LgR => &[("l2", 1e-4), ("tol", 1e-6), ("max_iter", 10_000.0)],
            MethodTag::PoR => &[("degree", 3.0)],
            MethodTag::RR => &[("cv_folds", CV_FOLDS as f64)],
            MethodTag::LR => &[("alpha", 0.01), ("l1_ratio", 1.0), ("tol", 1e-8), ("max_iter", 10_000.0)],
            MethodTag::ENR => &[("alpha", 0.01), ("l1_ratio", 0.5), ("tol", 1e-8), ("max_iter", 10_000.0)],
            MethodTag::ByR => &[("tol", 1e-6), ("max_iter", 300.0)],
        };
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    /// Keys a caller may override. Ridge additionally accepts `alpha`, which
    /// bypasses cross-validation.
    fn accepts(self, key: &str) -> bool {
        self.default_hyper().contains_key(key) || (self == MethodTag::RR && key == "alpha")
    }
}

impl fmt::Display for MethodTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MethodTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MethodTag::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown regression method `{s}`")))
    }
}

/// A trained regression or classifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitModel {
    pub method: MethodTag,
    /// One row for regressions; one row per class for logistic regression.
    pub coefficients: Vec<Vec<f64>>,
    pub intercepts: Vec<f64>,
    /// Ascending class values seen in training (logistic regression only).
    pub classes: Vec<f64>,
    pub hyperparameters: Hyper,
    pub feature_stats: Option<FeatureStats>,
    /// Width of the design matrix the model accepts.
    pub input_width: usize,
    pub iterations: usize,
    pub converged: bool,
}

fn resolve_hyper(method: MethodTag, overrides: &Hyper) -> Result<Hyper> {
    let mut h = method.default_hyper();
    for (k, v) in overrides {
        if !method.accepts(k) {
            return Err(Error::InvalidArgument(format!("{method} has no hyperparameter `{k}`")));
        }
        h.insert(k.clone(), *v);
    }
    Ok(h)
}

fn linear_model(method: MethodTag, fit: &linear::Linear, hyper: Hyper, m: &DesignMatrix) -> FitModel {
    FitModel {
        method,
        coefficients: vec![fit.coef.iter().copied().collect()],
        intercepts: vec![fit.intercept],
        classes: Vec::new(),
        hyperparameters: hyper,
        feature_stats: m.feature_stats.clone(),
        input_width: m.ncols(),
        iterations: 0,
        converged: true,
    }
}

/// Fits `method` to a design matrix (expected to be standardized with
/// training statistics).
pub fn fit(method: MethodTag, m: &DesignMatrix, overrides: &Hyper) -> Result<FitModel> {
    if m.nrows() == 0 {
        return Err(Error::EmptyDataset("cannot fit on zero rows".into()));
    }
    if m.target.len() != m.nrows() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            actual: m.target.len(),
        });
    }
    let mut hyper = resolve_hyper(method, overrides)?;
    let x = &m.features;
    let y = &m.target;
    let usize_of = |h: &Hyper, k: &str| h[k].max(1.0) as usize;

    let model = match method {
        MethodTag::LnR => linear_model(method, &linear::ridge(x, y, 0.0)?, hyper, m),
        MethodTag::RR => {
            let fit = match hyper.get("alpha").copied() {
                Some(alpha) if alpha >= 0.0 => linear::ridge(x, y, alpha)?,
                Some(alpha) => {
                    return Err(Error::InvalidArgument(format!("ridge penalty must be >= 0, got {alpha}")))
                }
                None => {
                    let (alpha, fit) = linear::ridge_cv(x, y, &RIDGE_GRID, usize_of(&hyper, "cv_folds"))?;
                    hyper.insert("alpha".into(), alpha);
                    fit
                }
            };
            linear_model(method, &fit, hyper, m)
        }
        MethodTag::PoR => {
            let degree = usize_of(&hyper, "degree");
            let px = polynomial_features(x, degree);
            let fit = linear::least_squares_full_rank(&px, y)?;
            linear_model(method, &fit, hyper, m)
        }
        MethodTag::LR | MethodTag::ENR => {
            let cd = penalized::elastic_net(
                x,
                y,
                hyper["alpha"],
                hyper["l1_ratio"],
                hyper["tol"],
                usize_of(&hyper, "max_iter"),
            )?;
            let mut model = linear_model(method, &cd.linear, hyper, m);
            model.iterations = cd.iterations;
            model
        }
        MethodTag::ByR => {
            let b = linear::bayesian_ridge(x, y, usize_of(&hyper, "max_iter"), hyper["tol"])?;
            hyper.insert("noise_precision".into(), b.noise_precision);
            hyper.insert("weight_precision".into(), b.weight_precision);
            let mut model = linear_model(method, &b.linear, hyper, m);
            model.iterations = b.iterations;
            model.converged = b.converged;
            model
        }
        MethodTag::LgR => {
            let lg = logistic::fit_logistic(x, y, hyper["l2"], hyper["tol"], usize_of(&hyper, "max_iter"))?;
            FitModel {
                method,
                coefficients: lg.weights.row_iter().map(|r| r.iter().copied().collect()).collect(),
                intercepts: lg.intercepts.iter().copied().collect(),
                classes: lg.classes,
                hyperparameters: hyper,
                feature_stats: m.feature_stats.clone(),
                input_width: m.ncols(),
                iterations: lg.iterations,
                converged: lg.converged,
            }
        }
    };
    Ok(model)
}

impl FitModel {
    fn check_width(&self, m: &DesignMatrix) -> Result<()> {
        if m.ncols() != self.input_width {
            return Err(Error::DimensionMismatch {
                expected: self.input_width,
                actual: m.ncols(),
            });
        }
        Ok(())
    }

    fn linear_part(&self, x: &DMatrix<f64>) -> DVector<f64> {
        let coef = DVector::from_row_slice(&self.coefficients[0]);
        x * coef + DVector::from_element(x.nrows(), self.intercepts[0])
    }

    /// Class probabilities per row (logistic regression only).
    pub fn class_probabilities(&self, m: &DesignMatrix) -> Result<Vec<Vec<f64>>> {
        self.check_width(m)?;
        if self.method != MethodTag::LgR {
            return Err(Error::InvalidArgument(format!("{} has no class probabilities", self.method)));
        }
        let x = &m.features;
        Ok((0..x.nrows())
            .map(|i| {
                let z: Vec<f64> = self
                    .coefficients
                    .iter()
                    .zip(&self.intercepts)
                    .map(|(w, b)| b + w.iter().enumerate().map(|(j, wj)| wj * x[(i, j)]).sum::<f64>())
                    .collect();
                softmax(&z)
            })
            .collect())
    }

    /// Most probable class per row (logistic regression only); ties go to the
    /// lower class.
    pub fn predict_argmax(&self, m: &DesignMatrix) -> Result<Vec<f64>> {
        Ok(self
            .class_probabilities(m)?
            .iter()
            .map(|p| {
                let best = p
                    .iter()
                    .enumerate()
                    .fold(0, |b, (i, v)| if *v > p[b] { i } else { b });
                self.classes[best]
            })
            .collect())
    }
}

/// Real-valued prediction `py` for each row.
pub fn predict_real(model: &FitModel, m: &DesignMatrix) -> Result<Vec<f64>> {
    model.check_width(m)?;
    let py = match model.method {
        MethodTag::LgR => model
            .class_probabilities(m)?
            .iter()
            .map(|p| p.iter().zip(&model.classes).map(|(pi, c)| pi * c).sum())
            .collect(),
        MethodTag::PoR => {
            let degree = model.hyperparameters["degree"].max(1.0) as usize;
            model.linear_part(&polynomial_features(&m.features, degree)).iter().copied().collect()
        }
        _ => model.linear_part(&m.features).iter().copied().collect(),
    };
    Ok(py)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn column(xs: &[f64], ys: &[f64]) -> DesignMatrix {
        let rows: Vec<Vec<f64>> = xs.iter().map(|x| vec![*x]).collect();
        DesignMatrix::from_rows(&rows, ys.to_vec()).unwrap()
    }

    #[test]
    fn lnr_recovers_noiseless_line() {
        let xs = [-1.0, -0.5, 0.0, 0.5, 1.0, 2.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x).collect();
        let m = column(&xs, &ys);
        let model = fit(MethodTag::LnR, &m, &Hyper::new()).unwrap();
        assert!((model.coefficients[0][0] - 2.0).abs() < 1e-8);
        assert!(model.intercepts[0].abs() < 1e-8);

        let py = predict_real(&model, &m).unwrap();
        for (p, y) in py.iter().zip(&ys) {
            assert!((p - y).abs() < 1e-8);
        }
        let at = predict_real(&model, &column(&[1.5], &[0.0])).unwrap();
        assert!((at[0] - 3.0).abs() < 1e-8);
    }

    #[test]
    fn ridge_zero_penalty_equals_lnr() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> = (0..20).map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let y: Vec<f64> = rows.iter().map(|r| r[0] - 2.0 * r[2] + rng.random_range(-0.1..0.1)).collect();
        let m = DesignMatrix::from_rows(&rows, y).unwrap();
        let a = fit(MethodTag::LnR, &m, &Hyper::new()).unwrap();
        let b = fit(MethodTag::RR, &m, &[("alpha".to_string(), 0.0)].into()).unwrap();
        for (x, y) in a.coefficients[0].iter().zip(&b.coefficients[0]) {
            assert!((x - y).abs() < 1e-6);
        }
        let cv = fit(MethodTag::RR, &m, &Hyper::new()).unwrap();
        assert!(RIDGE_GRID.contains(&cv.hyperparameters["alpha"]));
    }

    #[test]
    fn ridge_norm_shrinks_along_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rows: Vec<Vec<f64>> = (0..30).map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let y: Vec<f64> = (0..30).map(|_| rng.random_range(-3.0..3.0)).collect();
        let m = DesignMatrix::from_rows(&rows, y).unwrap();
        let norms: Vec<f64> = RIDGE_GRID
            .iter()
            .map(|a| {
                let model = fit(MethodTag::RR, &m, &[("alpha".to_string(), *a)].into()).unwrap();
                model.coefficients[0].iter().map(|c| c * c).sum::<f64>().sqrt()
            })
            .collect();
        assert!(norms.windows(2).all(|w| w[1] <= w[0]), "{norms:?}");
    }

    #[test]
    fn lasso_huge_penalty_is_zero() {
        let xs = [-1.0, 0.0, 1.0, 2.0, 3.0];
        let m = column(&xs, &[1.0, 2.0, 2.0, 3.0, 4.0]);
        let model = fit(MethodTag::LR, &m, &[("alpha".to_string(), 1e6)].into()).unwrap();
        assert_eq!(model.coefficients[0], vec![0.0]);
        let model = fit(MethodTag::ENR, &m, &[("alpha".to_string(), 1e6)].into()).unwrap();
        assert_eq!(model.coefficients[0], vec![0.0]);
    }

    #[test]
    fn logistic_uniform_probabilities_give_midpoint() {
        let m = column(&[0.0, 1.0], &[1.0, 2.0]);
        let model = FitModel {
            method: MethodTag::LgR,
            coefficients: vec![vec![0.0]; 4],
            intercepts: vec![0.0; 4],
            classes: vec![1.0, 2.0, 3.0, 4.0],
            hyperparameters: MethodTag::LgR.default_hyper(),
            feature_stats: None,
            input_width: 1,
            iterations: 0,
            converged: true,
        };
        assert_eq!(predict_real(&model, &m).unwrap(), vec![2.5, 2.5]);
        assert_eq!(model.predict_argmax(&m).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn logistic_separates_two_classes() {
        let xs: Vec<f64> = (0..20).map(|i| if i < 10 { -2.0 + 0.1 * f64::from(i) } else { 1.0 + 0.1 * f64::from(i) }).collect();
        let ys: Vec<f64> = (0..20).map(|i| if i < 10 { 0.0 } else { 1.0 }).collect();
        let m = column(&xs, &ys);
        let model = fit(MethodTag::LgR, &m, &Hyper::new()).unwrap();
        let labels = classify(&predict_real(&model, &m).unwrap(), &[0, 1]);
        let truth: Vec<i64> = ys.iter().map(|v| *v as i64).collect();
        assert_eq!(ar_metric(&labels, &truth).unwrap(), 1.0);
    }

    #[test]
    fn polynomial_rejects_underdetermined_design() {
        let rows: Vec<Vec<f64>> = (0..5).map(|i| vec![f64::from(i), f64::from(i * i % 3), f64::from(i % 2)]).collect();
        let m = DesignMatrix::from_rows(&rows, vec![1.0; 5]).unwrap();
        assert!(matches!(fit(MethodTag::PoR, &m, &Hyper::new()), Err(Error::Singular(_))));
    }

    #[test]
    fn bayesian_ridge_close_to_least_squares_on_clean_data() {
        let xs: Vec<f64> = (0..40).map(|i| f64::from(i) / 10.0 - 2.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 0.7 * x + 2.0).collect();
        let model = fit(MethodTag::ByR, &column(&xs, &ys), &Hyper::new()).unwrap();
        assert!((model.coefficients[0][0] - 0.7).abs() < 1e-4);
        assert!((model.intercepts[0] - 2.0).abs() < 1e-4);
    }

    #[test]
    fn width_mismatch_and_unknown_hyper() {
        let m = column(&[0.0, 1.0, 2.0], &[0.0, 1.0, 2.0]);
        let model = fit(MethodTag::LnR, &m, &Hyper::new()).unwrap();
        let wide = DesignMatrix::from_rows(&[vec![1.0, 2.0]], vec![0.0]).unwrap();
        assert!(matches!(predict_real(&model, &wide), Err(Error::DimensionMismatch { .. })));
        assert!(fit(MethodTag::LnR, &m, &[("alpha".to_string(), 1.0)].into()).is_err());
    }

    #[test]
    fn method_names_round_trip() {
        for m in MethodTag::ALL {
            assert_eq!(m.name().parse::<MethodTag>().unwrap(), m);
        }
        assert!("OLS".parse::<MethodTag>().is_err());
    }
}
