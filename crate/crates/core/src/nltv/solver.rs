use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::graph::{cosine, euclidean, WeightGraph, DISTANCE_FLOOR};
use super::ops::{fidelity_matrix, project_ball, project_simplex};
use crate::error::{Error, Result};

/// Smallest operator-norm estimate used to derive step sizes.
const MIN_OPERATOR_NORM: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Cosine,
    Mixed,
    Custom,
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Cosine => "cosine",
            Preset::Mixed => "mixed",
            Preset::Custom => "custom",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NltvParams {
    pub preset: Preset,
    pub n_clusters: usize,
    pub alpha_euclid: f64,
    pub alpha_cosine: f64,
    pub lambda: f64,
    /// Dual and primal steps; derived from the graph when absent.
    pub sigma: Option<f64>,
    pub tau: Option<f64>,
    pub theta: f64,
    pub inner_tol: f64,
    pub inner_max: usize,
    pub outer_max: usize,
    pub distance_floor: f64,
    pub seed: u64,
}

impl NltvParams {
    fn base(preset: Preset, n_clusters: usize, alpha_euclid: f64, alpha_cosine: f64, lambda: f64) -> Self {
        Self {
            preset,
            n_clusters,
            alpha_euclid,
            alpha_cosine,
            lambda,
            sigma: None,
            tau: None,
            theta: 1.0,
            inner_tol: 1e-6,
            inner_max: 5000,
            outer_max: 100,
            distance_floor: DISTANCE_FLOOR,
            seed: 0,
        }
    }

    pub fn cosine(n_clusters: usize) -> Self {
        Self::base(Preset::Cosine, n_clusters, 1e-10, 1.0, 1.0)
    }

    pub fn mixed(n_clusters: usize) -> Self {
        Self::base(Preset::Mixed, n_clusters, 1.0, 1e2, 1e4)
    }

    pub fn custom(n_clusters: usize, alpha_euclid: f64, alpha_cosine: f64, lambda: f64) -> Self {
        Self::base(Preset::Custom, n_clusters, alpha_euclid, alpha_cosine, lambda)
    }

    /// Parses `cosine`, `mixed`, or `custom(alpha_euclid,alpha_cosine,lambda)`.
    pub fn parse(spec: &str, n_clusters: usize) -> Result<Self> {
        let s = spec.trim();
        match s.to_ascii_lowercase().as_str() {
            "cosine" => return Ok(Self::cosine(n_clusters)),
            "mixed" => return Ok(Self::mixed(n_clusters)),
            _ => {}
        }
        let inner = s
            .strip_prefix("custom(")
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown parameter set `{spec}`")))?;
        let vals = inner
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::InvalidArgument(format!("bad custom parameters `{spec}`: {e}")))?;
        match vals.as_slice() {
            [a, b, l] => Ok(Self::custom(n_clusters, *a, *b, *l)),
            _ => Err(Error::InvalidArgument(format!(
                "custom parameters need three values (alpha_euclid,alpha_cosine,lambda), got `{spec}`"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.n_clusters == 0 {
            return bad("at least one cluster is required".into());
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be positive, got {}", self.lambda));
        }
        if !(self.alpha_euclid >= 0.0 && self.alpha_cosine >= 0.0) || self.alpha_euclid + self.alpha_cosine == 0.0 {
            return bad("distance weights must be nonnegative and not both zero".into());
        }
        if self.inner_max == 0 || self.outer_max == 0 || !(self.inner_tol > 0.0) {
            return bad("iteration limits and tolerance must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return bad(format!("theta must lie in [0, 1], got {}", self.theta));
        }
        Ok(())
    }

    /// Step sizes satisfying `sigma * tau * L^2 <= 1` for the graph's norm bound.
    pub fn steps(&self, g: &WeightGraph) -> Result<(f64, f64)> {
        let l = g.operator_norm_bound().max(MIN_OPERATOR_NORM);
        let auto = 0.95 / l;
        let (sigma, tau) = (self.sigma.unwrap_or(auto), self.tau.unwrap_or(auto));
        if !(sigma > 0.0 && tau > 0.0) {
            return Err(Error::InvalidArgument("step sizes must be positive".into()));
        }
        if sigma * tau * l * l > 1.0 + 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "step sizes sigma={sigma}, tau={tau} violate sigma*tau*L^2 <= 1 with L={l}"
            )));
        }
        Ok((sigma, tau))
    }
}

/// Primal-dual iterate for the relaxed labeling problem with fixed centroids.
#[derive(Clone, Debug)]
pub struct PrimalDual<'a> {
    g: &'a WeightGraph,
    /// `lambda * |x_i - c_l|^2`.
    fidelity: DMatrix<f64>,
    pub u: DMatrix<f64>,
    pub u_bar: DMatrix<f64>,
    /// One row-major `m x m` dual block per label.
    pub p: Vec<Vec<f64>>,
    pub sigma: f64,
    pub tau: f64,
    pub theta: f64,
    pub iterations: usize,
}

impl<'a> PrimalDual<'a> {
    /// Starts from uniform labels and a zero dual.
    pub fn new(g: &'a WeightGraph, x: &DMatrix<f64>, centroids: &DMatrix<f64>, params: &NltvParams) -> Result<Self> {
        let (m, n) = (x.nrows(), centroids.nrows());
        Self::warm(g, x, centroids, params, DMatrix::from_element(m, n, 1.0 / n as f64), vec![vec![0.0; m * m]; n])
    }

    pub fn warm(
        g: &'a WeightGraph,
        x: &DMatrix<f64>,
        centroids: &DMatrix<f64>,
        params: &NltvParams,
        u: DMatrix<f64>,
        p: Vec<Vec<f64>>,
    ) -> Result<Self> {
        params.validate()?;
        let (m, n) = (x.nrows(), centroids.nrows());
        if g.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                actual: g.len(),
            });
        }
        if centroids.ncols() != x.ncols() {
            return Err(Error::DimensionMismatch {
                expected: x.ncols(),
                actual: centroids.ncols(),
            });
        }
        if u.shape() != (m, n) || p.len() != n || p.iter().any(|b| b.len() != m * m) {
            return Err(Error::DimensionMismatch {
                expected: m * n,
                actual: u.len(),
            });
        }
        let (sigma, tau) = params.steps(g)?;
        Ok(Self {
            g,
            fidelity: fidelity_matrix(x, centroids) * params.lambda,
            u_bar: u.clone(),
            u,
            p,
            sigma,
            tau,
            theta: params.theta,
            iterations: 0,
        })
    }

    /// One dual ascent, primal descent and extrapolation; returns
    /// `|u_new - u_old|_F / |u_old|_F`.
    pub fn step(&mut self) -> Result<f64> {
        let m = self.g.len();
        let n = self.u.ncols();
        let s = &self.g.sqrt_w;
        let (sigma, tau) = (self.sigma, self.tau);
        let u_bar = &self.u_bar;

        // labels are independent until the simplex projection
        let div: Vec<Vec<f64>> = self
            .p
            .par_iter_mut()
            .enumerate()
            .map(|(l, pl)| {
                for i in 0..m {
                    let row = &mut pl[i * m..(i + 1) * m];
                    let ui = u_bar[(i, l)];
                    for (j, v) in row.iter_mut().enumerate() {
                        *v += sigma * s[(i, j)] * (u_bar[(j, l)] - ui);
                    }
                    project_ball(row);
                }
                (0..m)
                    .map(|i| (0..m).map(|j| s[(i, j)] * pl[i * m + j] - s[(j, i)] * pl[j * m + i]).sum())
                    .collect()
            })
            .collect();

        let prev = self.u.clone();
        for i in 0..m {
            let v: Vec<f64> = (0..n)
                .map(|l| prev[(i, l)] + tau * div[l][i] - tau * self.fidelity[(i, l)])
                .collect();
            for (l, val) in project_simplex(&v).into_iter().enumerate() {
                self.u[(i, l)] = val;
            }
        }
        self.iterations += 1;
        if self.u.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                iteration: self.iterations,
                message: format!("labeling became non-finite with sigma={sigma}, tau={tau}"),
            });
        }
        self.u_bar = &self.u + (&self.u - &prev) * self.theta;
        Ok((&self.u - &prev).norm() / prev.norm())
    }

    /// Iterates until the relative change drops below `tol` or `max_iter`
    /// steps; returns whether the tolerance was met.
    pub fn run(&mut self, tol: f64, max_iter: usize) -> Result<bool> {
        for _ in 0..max_iter {
            if self.step()? < tol {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

/// Relaxed labeling minimizing total variation plus fidelity for fixed centroids.
pub fn primal_dual_solve(g: &WeightGraph, x: &DMatrix<f64>, centroids: &DMatrix<f64>, params: &NltvParams) -> Result<DMatrix<f64>> {
    let mut pd = PrimalDual::new(g, x, centroids, params)?;
    pd.run(params.inner_tol, params.inner_max)?;
    Ok(pd.u)
}

/// 1-based argmax per row; ties go to the lowest cluster.
pub fn threshold(u: &DMatrix<f64>) -> Vec<usize> {
    u.row_iter()
        .map(|r| {
            let best = (0..r.len()).fold(0, |b, l| if r[l] > r[b] { l } else { b });
            best + 1
        })
        .collect()
}

/// One-hot labeling from 1-based assignments.
pub fn one_hot_labels(assignments: &[usize], n_clusters: usize) -> DMatrix<f64> {
    DMatrix::from_fn(assignments.len(), n_clusters, |i, l| f64::from(u8::from(assignments[i] == l + 1)))
}

/// Combined point-to-centroid distance. A zero centroid has cosine distance 1.
pub fn combined_distance(a: &[f64], b: &[f64], alpha_euclid: f64, alpha_cosine: f64) -> f64 {
    let mut d = 0.0;
    if alpha_euclid > 0.0 {
        d += alpha_euclid * euclidean(a, b);
    }
    if alpha_cosine > 0.0 {
        d += alpha_cosine * cosine(a, b).unwrap_or(1.0);
    }
    d
}

fn means(x: &DMatrix<f64>, assignments: &[usize], n: usize) -> (DMatrix<f64>, Vec<usize>) {
    let mut c = DMatrix::zeros(n, x.ncols());
    let mut counts = vec![0usize; n];
    for (i, &a) in assignments.iter().enumerate() {
        counts[a - 1] += 1;
        for k in 0..x.ncols() {
            c[(a - 1, k)] += x[(i, k)];
        }
    }
    for l in 0..n {
        if counts[l] > 0 {
            let inv = 1.0 / counts[l] as f64;
            c.row_mut(l).scale_mut(inv);
        }
    }
    (c, counts)
}

/// Cluster means of the assigned rows. Each empty cluster (in order) takes
/// over the point farthest from its own centroid among clusters with more
/// than one member, so every cluster is nonempty whenever `m >= n`.
/// Returns the centroids and the possibly changed assignments.
pub fn update_centroids(
    x: &DMatrix<f64>,
    assignments: &[usize],
    n_clusters: usize,
    alpha_euclid: f64,
    alpha_cosine: f64,
) -> Result<(DMatrix<f64>, Vec<usize>)> {
    if assignments.len() != x.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            actual: assignments.len(),
        });
    }
    if let Some(a) = assignments.iter().find(|a| **a == 0 || **a > n_clusters) {
        return Err(Error::InvalidArgument(format!("assignment {a} outside 1..={n_clusters}")));
    }
    let mut assign = assignments.to_vec();
    let (mut c, mut counts) = means(x, &assign, n_clusters);
    for empty in 0..n_clusters {
        if counts[empty] > 0 {
            continue;
        }
        let row = |i: usize| -> Vec<f64> { x.row(i).iter().copied().collect() };
        let crow = |c: &DMatrix<f64>, l: usize| -> Vec<f64> { c.row(l).iter().copied().collect() };
        let donor = (0..x.nrows())
            .filter(|&i| counts[assign[i] - 1] > 1)
            .map(|i| (i, combined_distance(&row(i), &crow(&c, assign[i] - 1), alpha_euclid, alpha_cosine)))
            .fold(None, |best: Option<(usize, f64)>, (i, d)| match best {
                Some((_, bd)) if bd >= d => best,
                _ => Some((i, d)),
            });
        let Some((i, _)) = donor else {
            break;
        };
        assign[i] = empty + 1;
        (c, counts) = means(x, &assign, n_clusters);
    }
    Ok((c, assign))
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cosine" => Ok(Preset::Cosine),
            "mixed" => Ok(Preset::Mixed),
            "custom" => Ok(Preset::Custom),
            other => Err(Error::InvalidArgument(format!("unknown preset `{other}`"))),
        }
    }
}
