use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::graph::{pairwise_distance, weight_graph, WeightGraph};
use super::ops::energy;
use super::solver::{one_hot_labels, threshold, update_centroids, NltvParams, PrimalDual};
use crate::dataset::{feature_matrix, Dataset, Field};
use crate::error::{Error, Result};
use crate::report::{csv_cell, fmt3, markdown_table};

/// Clustering features; rank is left out because it is the ground truth the
/// clusters are compared against.
pub const CLUSTER_FIELDS: [Field; 5] = [
    Field::Publications,
    Field::Citations,
    Field::HIndex,
    Field::AmsFellow,
    Field::PhdYear,
];

/// Slack when counting outer-loop energy increases.
pub const ENERGY_SLACK: f64 = 1e-6;

/// Column z-scoring that leaves constant columns centered but unscaled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZScore {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl ZScore {
    pub fn fit(x: &DMatrix<f64>) -> Self {
        let m = x.nrows() as f64;
        let means: Vec<f64> = x.column_iter().map(|c| c.sum() / m).collect();
        let scales = x
            .column_iter()
            .zip(&means)
            .map(|(c, mu)| {
                let ss: f64 = c.iter().map(|v| (v - mu).powi(2)).sum();
                let sd = if x.nrows() > 1 { (ss / (m - 1.0)).sqrt() } else { 0.0 };
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { means, scales }
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| (x[(i, j)] - self.means[j]) / self.scales[j])
    }

    pub fn invert(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(z.nrows(), z.ncols(), |i, j| z[(i, j)] * self.scales[j] + self.means[j])
    }
}

/// Result of the outer threshold / centroid loop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterOutcome {
    /// 1-based cluster per row.
    pub assignments: Vec<usize>,
    /// Centroids in standardized units.
    pub centroids: DMatrix<f64>,
    /// Centroids mapped back to raw units.
    pub centroids_raw: DMatrix<f64>,
    pub zscore: ZScore,
    pub params: NltvParams,
    pub sigma: f64,
    pub tau: f64,
    pub outer_iterations: usize,
    pub inner_iterations: Vec<usize>,
    pub converged: bool,
    /// Energy of the uniform labeling at the initial centroids.
    pub initial_energy: f64,
    /// Energy of each thresholded labeling at its updated centroids.
    pub energies: Vec<f64>,
    /// Outer steps whose energy rose by more than [`ENERGY_SLACK`].
    pub energy_increases: usize,
}

impl ClusterOutcome {
    pub fn final_energy(&self) -> f64 {
        self.energies.last().copied().unwrap_or(self.initial_energy)
    }
}

/// Seeded choice of `n` rows, preferring rows with distinct values.
fn initial_rows(x: &DMatrix<f64>, n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..x.nrows()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut picked: Vec<usize> = Vec::with_capacity(n);
    for &i in &order {
        if picked.len() == n {
            break;
        }
        if picked.iter().all(|&j| x.row(j) != x.row(i)) {
            picked.push(i);
        }
    }
    for &i in &order {
        if picked.len() == n {
            break;
        }
        if !picked.contains(&i) {
            picked.push(i);
        }
    }
    picked
}

/// Nonlocal total-variation clustering of raw feature rows.
pub fn cluster(x: &DMatrix<f64>, params: &NltvParams) -> Result<ClusterOutcome> {
    params.validate()?;
    let (m, n) = (x.nrows(), params.n_clusters);
    if m < n {
        return Err(Error::InvalidArgument(format!("{n} clusters requested for {m} points")));
    }
    let zscore = ZScore::fit(x);
    let z = zscore.apply(x);
    let dist = pairwise_distance(&z, params.alpha_euclid, params.alpha_cosine)?;
    let g = weight_graph(&dist, params.distance_floor)?;
    let (sigma, tau) = params.steps(&g)?;

    let seeds = initial_rows(&z, n, params.seed);
    let mut centroids = z.select_rows(&seeds);
    let mut u = DMatrix::from_element(m, n, 1.0 / n as f64);
    let mut p = vec![vec![0.0; m * m]; n];
    let initial_energy = energy(&g, &u, &z, &centroids, params.lambda);

    if n == m {
        // nonempty clusters over m points admit only singletons
        let mut assignments = vec![0; m];
        for (l, &i) in seeds.iter().enumerate() {
            assignments[i] = l + 1;
        }
        let final_energy = energy(&g, &one_hot_labels(&assignments, n), &z, &centroids, params.lambda);
        return Ok(ClusterOutcome {
            assignments,
            centroids_raw: zscore.invert(&centroids),
            centroids,
            zscore,
            params: params.clone(),
            sigma,
            tau,
            outer_iterations: 1,
            inner_iterations: vec![0],
            converged: true,
            initial_energy,
            energies: vec![final_energy],
            energy_increases: 0,
        });
    }

    let mut assignments: Option<Vec<usize>> = None;
    let mut energies = Vec::new();
    let mut inner_iterations = Vec::new();
    let mut converged = false;
    for _ in 0..params.outer_max {
        let mut pd = PrimalDual::warm(&g, &z, &centroids, params, u, p)?;
        pd.run(params.inner_tol, params.inner_max)?;
        inner_iterations.push(pd.iterations);
        (u, p) = (pd.u, pd.p);

        let (next_c, next_a) = update_centroids(&z, &threshold(&u), n, params.alpha_euclid, params.alpha_cosine)?;
        centroids = next_c;
        energies.push(energy(&g, &one_hot_labels(&next_a, n), &z, &centroids, params.lambda));
        if assignments.as_ref() == Some(&next_a) {
            converged = true;
            break;
        }
        assignments = Some(next_a);
    }
    let energy_increases = energies.windows(2).filter(|w| w[1] > w[0] + ENERGY_SLACK).count();
    Ok(ClusterOutcome {
        assignments: assignments.expect("at least one outer iteration"),
        centroids_raw: zscore.invert(&centroids),
        centroids,
        zscore,
        params: params.clone(),
        sigma,
        tau,
        outer_iterations: energies.len(),
        inner_iterations,
        converged,
        initial_energy,
        energies,
        energy_increases,
    })
}

/// Builds the weight graph [`cluster`] would use, for inspection.
pub fn cluster_graph(x: &DMatrix<f64>, params: &NltvParams) -> Result<WeightGraph> {
    let z = ZScore::fit(x).apply(x);
    weight_graph(&pairwise_distance(&z, params.alpha_euclid, params.alpha_cosine)?, params.distance_floor)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterRow {
    pub cluster: usize,
    pub count: usize,
    pub rank: f64,
    pub publications: f64,
    pub citations: f64,
    pub h_index: f64,
    pub ams: f64,
    pub phd_year: f64,
}

/// Per-cluster raw-unit means plus a cluster-by-rank count matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub rows: Vec<ClusterRow>,
    /// `crosstab[c][r]` counts records of rank `r + 1` in cluster `c + 1`.
    pub crosstab: Vec<Vec<usize>>,
    pub assignments: Vec<usize>,
}

pub fn cluster_report(d: &Dataset, assignments: &[usize], n_clusters: usize) -> Result<ClusterReport> {
    if assignments.len() != d.len() {
        return Err(Error::DimensionMismatch {
            expected: d.len(),
            actual: assignments.len(),
        });
    }
    let mut crosstab = vec![vec![0usize; 4]; n_clusters];
    let rows = (1..=n_clusters)
        .map(|c| {
            let members: Vec<_> = d.records.iter().zip(assignments).filter(|(_, a)| **a == c).map(|(r, _)| r).collect();
            let k = members.len() as f64;
            let avg = |f: Field| members.iter().map(|r| f.value(r)).sum::<f64>() / k;
            for r in &members {
                crosstab[c - 1][usize::from(r.rank) - 1] += 1;
            }
            ClusterRow {
                cluster: c,
                count: members.len(),
                rank: avg(Field::Rank),
                publications: avg(Field::Publications),
                citations: avg(Field::Citations),
                h_index: avg(Field::HIndex),
                ams: avg(Field::AmsFellow),
                phd_year: avg(Field::PhdYear),
            }
        })
        .collect();
    Ok(ClusterReport {
        rows,
        crosstab,
        assignments: assignments.to_vec(),
    })
}

/// Clusters `d` on `fields` and reports the clusters in raw units.
pub fn cluster_dataset(d: &Dataset, fields: &[Field], params: &NltvParams) -> Result<(ClusterOutcome, ClusterReport)> {
    if d.is_empty() {
        return Err(Error::EmptyDataset("nothing to cluster".into()));
    }
    let outcome = cluster(&feature_matrix(d, fields), params)?;
    let report = cluster_report(d, &outcome.assignments, params.n_clusters)?;
    Ok((outcome, report))
}

impl ClusterReport {
    pub fn to_markdown(&self, scope: &str, preset: &str) -> String {
        let header = ["", "Quantity", "Rank", "Publications", "Citations", "H-Index", "AMS", "Year of PhD"];
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    format!("Centroid {}", r.cluster),
                    r.count.to_string(),
                    fmt3(r.rank),
                    fmt3(r.publications),
                    fmt3(r.citations),
                    fmt3(r.h_index),
                    fmt3(r.ams),
                    fmt3(r.phd_year),
                ]
            })
            .collect();
        let mut out = format!("**{scope}**, *Parameters:* {preset}.\n\n");
        out.push_str(&markdown_table(&header, &rows));
        let cross: Vec<Vec<String>> = self
            .crosstab
            .iter()
            .enumerate()
            .map(|(c, counts)| {
                let mut row = vec![format!("Cluster {}", c + 1)];
                row.extend(counts.iter().map(ToString::to_string));
                row
            })
            .collect();
        let _ = write!(out, "\n*Sorted clusters vs ground-truth rank.*\n\n");
        out.push_str(&markdown_table(&["", "Rank 1", "Rank 2", "Rank 3", "Rank 4"], &cross));
        out
    }

    /// One line per record: names, university, cluster.
    pub fn assignments_csv(&self, d: &Dataset) -> String {
        let mut out = String::from("last_name,first_name,university,cluster\n");
        for (r, a) in d.records.iter().zip(&self.assignments) {
            let _ = writeln!(
                out,
                "{},{},{},{a}",
                csv_cell(&r.last_name),
                csv_cell(&r.first_name),
                csv_cell(&r.university)
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::fixtures::record;

    #[test]
    fn zscore_round_trip_keeps_constant_columns() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 5.0, 2.0, 5.0, 3.0, 5.0]);
        let z = ZScore::fit(&x);
        assert_eq!(z.scales, vec![1.0, 1.0]);
        let t = z.apply(&x);
        assert_eq!(t.column(1).iter().copied().collect::<Vec<_>>(), vec![0.0; 3]);
        assert!((z.invert(&t) - x).amax() < 1e-12);
    }

    #[test]
    fn degenerate_cluster_counts() {
        let x = DMatrix::from_row_slice(5, 2, &[0.0, 1.0, 3.0, 1.0, 2.0, 7.0, 9.0, 4.0, 5.0, 5.0]);
        let one = cluster(&x, &NltvParams::mixed(1)).unwrap();
        assert_eq!(one.assignments, vec![1; 5]);
        let all = cluster(&x, &NltvParams::cosine(5)).unwrap();
        let mut sorted = all.assignments.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![1, 2, 3, 4, 5]);
        assert!(cluster(&x, &NltvParams::mixed(6)).is_err());
    }

    #[test]
    fn report_shape() {
        let d = Dataset::new(
            vec![
                record("Harvard", 3, 10, 100, 5, 0, 1990),
                record("Harvard", 3, 30, 300, 9, 1, 1980),
                record("Harvard", 1, 5, 20, 2, 0, 2015),
            ],
            "fixture",
        )
        .unwrap();
        let r = cluster_report(&d, &[1, 1, 2], 2).unwrap();
        assert_eq!(r.rows[0].count, 2);
        assert_eq!(r.rows[0].publications, 20.0);
        assert_eq!(r.rows[0].ams, 0.5);
        assert_eq!(r.crosstab, vec![vec![0, 0, 2, 0], vec![1, 0, 0, 0]]);
        let md = r.to_markdown("Harvard", "cosine");
        assert!(md.contains("|  | Quantity | Rank | Publications | Citations | H-Index | AMS | Year of PhD |"));
        assert!(md.contains("| Centroid 1 | 2 | 3.000 | 20.000 | 200.000 | 7.000 | 0.500 | 1985.000 |"));
        assert!(r.assignments_csv(&d).starts_with("last_name,first_name,university,cluster\n"));
    }
}
