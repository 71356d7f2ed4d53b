//! One-layer softmax linear classifier trained by full-batch gradient descent.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{DesignMatrix, FeatureStats};
use crate::error::{Error, Result};

/// Lower clip applied to predicted probabilities inside the loss.
pub const PROB_FLOOR: f64 = 1e-12;
pub const INIT_SCALE: f64 = 0.01;
pub const GRAD_CHECK_STEP: f64 = 1e-5;

/// Indicator vector with a 1 at the 1-indexed `label`.
pub fn one_hot(label: usize, classes: usize) -> Result<Vec<f64>> {
    if label == 0 || label > classes {
        return Err(Error::InvalidArgument(format!("label {label} outside 1..={classes}")));
    }
    let mut v = vec![0.0; classes];
    v[label - 1] = 1.0;
    Ok(v)
}

/// Max-shifted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / total).collect()
}

/// `-sum p log q`, with `q` clipped below at [`PROB_FLOOR`].
pub fn cross_entropy(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(pi, _)| **pi != 0.0)
        .map(|(pi, qi)| -pi * qi.max(PROB_FLOOR).ln())
        .sum()
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold(0, |best, (i, x)| if *x > v[best] { i } else { best })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub reg_strength: f64,
    pub seed: u64,
    /// Number of classes; inferred from the largest label when absent.
    pub class_count: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            learning_rate: 0.1,
            reg_strength: 1e-3,
            seed: 0,
            class_count: None,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.reg_strength >= 0.0 && self.reg_strength.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "regularization strength must be nonnegative, got {}",
                self.reg_strength
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxModel {
    /// `class_count` rows of per-feature weights.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub class_count: usize,
    pub feature_stats: Option<FeatureStats>,
}

impl SoftmaxModel {
    pub fn zeros(class_count: usize, width: usize) -> Self {
        Self {
            weights: vec![vec![0.0; width]; class_count],
            biases: vec![0.0; class_count],
            class_count,
            feature_stats: None,
        }
    }

    pub fn width(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.width() {
            return Err(Error::DimensionMismatch {
                expected: self.width(),
                actual: x.len(),
            });
        }
        Ok(self
            .weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| b + w.iter().zip(x).map(|(a, c)| a * c).sum::<f64>())
            .collect())
    }

    pub fn weight_norm(&self) -> f64 {
        self.weights.iter().flatten().map(|w| w * w).sum::<f64>().sqrt()
    }

    fn weight_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.class_count, self.width(), |l, j| self.weights[l][j])
    }

    fn from_parts(w: &DMatrix<f64>, b: &DVector<f64>, feature_stats: Option<FeatureStats>) -> Self {
        Self {
            weights: w.row_iter().map(|r| r.iter().copied().collect()).collect(),
            biases: b.iter().copied().collect(),
            class_count: w.nrows(),
            feature_stats,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        crate::report::canonical_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text)?;
        if model.class_count < 2 || model.weights.len() != model.class_count || model.biases.len() != model.class_count {
            return Err(Error::InvalidArgument("softmax model needs at least two classes and one row per class".into()));
        }
        let k = model.width();
        if model.weights.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidArgument("ragged softmax weight rows".into()));
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }
}

/// Per-epoch training objective.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossCurve {
    pub losses: Vec<f64>,
}

impl LossCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,loss\n");
        for (e, l) in self.losses.iter().enumerate() {
            let _ = writeln!(out, "{},{l}", e + 1);
        }
        out
    }
}

/// Zero-based class indices from 1-indexed labels.
fn label_indices(target: &[f64], classes: usize) -> Result<Vec<usize>> {
    target
        .iter()
        .map(|&v| {
            let l = v.round();
            if l != v || l < 1.0 || l > classes as f64 {
                Err(Error::InvalidArgument(format!("label {v} outside 1..={classes}")))
            } else {
                Ok(l as usize - 1)
            }
        })
        .collect()
}

/// Summed cross-entropy plus `reg/2 * ||W||^2`, and the gradients with respect
/// to the weights and biases. `labels` are zero-based.
pub fn loss_and_gradient(
    x: &DMatrix<f64>,
    labels: &[usize],
    w: &DMatrix<f64>,
    b: &DVector<f64>,
    reg: f64,
) -> (f64, DMatrix<f64>, DVector<f64>) {
    let c = w.nrows();
    let logits = x * w.transpose();
    let mut gw = DMatrix::zeros(c, x.ncols());
    let mut gb = DVector::zeros(c);
    let mut loss = 0.0;
    for i in 0..x.nrows() {
        let z: Vec<f64> = (0..c).map(|l| logits[(i, l)] + b[l]).collect();
        let mut q = softmax(&z);
        loss -= q[labels[i]].max(PROB_FLOOR).ln();
        q[labels[i]] -= 1.0;
        for l in 0..c {
            gb[l] += q[l];
            for j in 0..x.ncols() {
                gw[(l, j)] += q[l] * x[(i, j)];
            }
        }
    }
    loss += 0.5 * reg * w.norm_squared();
    gw += w * reg;
    (loss, gw, gb)
}

/// Full-batch gradient descent. Each epoch takes a step of size
/// `learning_rate / n` on the cross-entropy and applies the L2 term
/// implicitly, which stays stable for any penalty strength.
pub fn train(m: &DesignMatrix, cfg: &TrainConfig) -> Result<(SoftmaxModel, LossCurve)> {
    cfg.validate()?;
    if m.nrows() == 0 {
        return Err(Error::EmptyDataset("softmax training set is empty".into()));
    }
    let max_label = m.target.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let classes = cfg.class_count.unwrap_or(max_label.max(0.0).round() as usize);
    if classes < 2 {
        return Err(Error::InvalidArgument(format!("softmax needs at least 2 classes, got {classes}")));
    }
    let labels = label_indices(&m.target, classes)?;
    let x = &m.features;
    let k = x.ncols();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = Normal::new(0.0, INIT_SCALE).expect("valid scale");
    let mut w = DMatrix::from_fn(classes, k, |_, _| normal.sample(&mut rng));
    let mut b = DVector::zeros(classes);

    let step = cfg.learning_rate / m.nrows() as f64;
    let shrink = 1.0 / (1.0 + step * cfg.reg_strength);
    let mut curve = LossCurve::default();
    for epoch in 1..=cfg.epochs {
        let (loss, _, _) = loss_and_gradient(x, &labels, &w, &b, cfg.reg_strength);
        let (_, gw, gb) = loss_and_gradient(x, &labels, &w, &b, 0.0);
        if !loss.is_finite() {
            return Err(Error::NonFinite {
                iteration: epoch,
                message: format!(
                    "softmax loss diverged at learning rate {}; try a smaller learning rate",
                    cfg.learning_rate
                ),
            });
        }
        curve.losses.push(loss);
        w = (w - gw * step) * shrink;
        b -= gb * step;
    }
    if w.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            iteration: cfg.epochs,
            message: format!(
                "softmax weights diverged at learning rate {}; try a smaller learning rate",
                cfg.learning_rate
            ),
        });
    }
    Ok((SoftmaxModel::from_parts(&w, &b, m.feature_stats.clone()), curve))
}

/// 1-indexed predicted label.
pub fn predict(model: &SoftmaxModel, x: &[f64]) -> Result<usize> {
    Ok(argmax(&model.logits(x)?) + 1)
}

pub fn predict_all(model: &SoftmaxModel, m: &DesignMatrix) -> Result<Vec<usize>> {
    (0..m.nrows())
        .map(|i| {
            let row: Vec<f64> = m.features.row(i).iter().copied().collect();
            predict(model, &row)
        })
        .collect()
}

/// Number of rows whose predicted label equals the target.
pub fn correct_count(model: &SoftmaxModel, m: &DesignMatrix) -> Result<usize> {
    Ok(predict_all(model, m)?
        .iter()
        .zip(&m.target)
        .filter(|(p, t)| **p as f64 == **t)
        .count())
}

/// Largest relative deviation between the analytic gradient of the training
/// objective and central finite differences with step [`GRAD_CHECK_STEP`].
pub fn grad_check(m: &DesignMatrix, model: &SoftmaxModel, reg: f64) -> Result<f64> {
    if m.ncols() != model.width() {
        return Err(Error::DimensionMismatch {
            expected: model.width(),
            actual: m.ncols(),
        });
    }
    let labels = label_indices(&m.target, model.class_count)?;
    let x = &m.features;
    let w = model.weight_matrix();
    let b = DVector::from_vec(model.biases.clone());
    let (_, gw, gb) = loss_and_gradient(x, &labels, &w, &b, reg);
    let f = |w: &DMatrix<f64>, b: &DVector<f64>| loss_and_gradient(x, &labels, w, b, reg).0;
    let h = GRAD_CHECK_STEP;
    let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-8);

    let mut worst: f64 = 0.0;
    for idx in 0..w.len() {
        let (mut wp, mut wm) = (w.clone(), w.clone());
        wp[idx] += h;
        wm[idx] -= h;
        worst = worst.max(rel(gw[idx], (f(&wp, &b) - f(&wm, &b)) / (2.0 * h)));
    }
    for l in 0..b.len() {
        let (mut bp, mut bm) = (b.clone(), b.clone());
        bp[l] += h;
        bm[l] -= h;
        worst = worst.max(rel(gb[l], (f(&w, &bp) - f(&w, &bm)) / (2.0 * h)));
    }
    Ok(worst)
}
