use nalgebra::{DMatrix, DVector};

use super::graph::WeightGraph;

/// `(grad u)_{ij} = sqrt(w_ij) (u_j - u_i)`.
pub fn nonlocal_gradient(g: &WeightGraph, u: &DVector<f64>) -> DMatrix<f64> {
    let m = g.len();
    DMatrix::from_fn(m, m, |i, j| g.sqrt_w[(i, j)] * (u[j] - u[i]))
}

/// `(div v)_i = sum_j sqrt(w_ij) v_ij - sqrt(w_ji) v_ji`, the negative adjoint
/// of [`nonlocal_gradient`].
pub fn nonlocal_divergence(g: &WeightGraph, v: &DMatrix<f64>) -> DVector<f64> {
    let m = g.len();
    let s = &g.sqrt_w;
    DVector::from_fn(m, |i, _| (0..m).map(|j| s[(i, j)] * v[(i, j)] - s[(j, i)] * v[(j, i)]).sum())
}

/// Sum over nodes of the L2 norm of each gradient row.
pub fn total_variation(g: &WeightGraph, u: &DMatrix<f64>) -> f64 {
    let m = g.len();
    (0..u.ncols())
        .map(|l| {
            (0..m)
                .map(|i| {
                    (0..m)
                        .map(|j| g.w[(i, j)] * (u[(j, l)] - u[(i, l)]).powi(2))
                        .sum::<f64>()
                        .sqrt()
                })
                .sum::<f64>()
        })
        .sum()
}

/// Squared Euclidean distance from every point to every centroid.
pub fn fidelity_matrix(x: &DMatrix<f64>, centroids: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), centroids.nrows(), |i, l| {
        (0..x.ncols()).map(|k| (x[(i, k)] - centroids[(l, k)]).powi(2)).sum()
    })
}

/// Total variation plus `lambda * sum_i sum_l u_il |x_i - c_l|^2`.
pub fn energy(g: &WeightGraph, u: &DMatrix<f64>, x: &DMatrix<f64>, centroids: &DMatrix<f64>, lambda: f64) -> f64 {
    let phi = fidelity_matrix(x, centroids);
    total_variation(g, u) + lambda * u.component_mul(&phi).sum()
}

/// Scales a row to L2 norm at most 1.
pub fn project_ball(row: &mut [f64]) {
    let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 1.0 {
        row.iter_mut().for_each(|v| *v /= norm);
    }
}

/// Projects every row of every per-label dual matrix onto the unit ball.
pub fn project_dual(p: &mut [DMatrix<f64>]) {
    for pl in p.iter_mut() {
        for i in 0..pl.nrows() {
            let norm = pl.row(i).norm();
            if norm > 1.0 {
                pl.row_mut(i).unscale_mut(norm);
            }
        }
    }
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    if v.is_empty() {
        return Vec::new();
    }
    // the projection commutes with shifts along the all-ones vector
    let top = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let shifted: Vec<f64> = v.iter().map(|x| x - top).collect();
    let mut sorted = shifted.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (k, s) in sorted.iter().enumerate() {
        cumulative += s;
        let t = (cumulative - 1.0) / (k + 1) as f64;
        if s - t > 0.0 {
            theta = t;
        } else {
            break;
        }
    }
    let mut out: Vec<f64> = shifted.iter().map(|x| (x - theta).max(0.0)).collect();
    let total: f64 = out.iter().sum();
    if total > 0.0 && total != 1.0 {
        out.iter_mut().for_each(|x| *x /= total);
    }
    out
}
