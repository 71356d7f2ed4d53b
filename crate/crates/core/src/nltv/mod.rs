//! Nonlocal total-variation clustering.
//!
//! Points are nodes of a dense graph with weights `w = d^-2`. A relaxed
//! labeling `u` (rows on the probability simplex) minimizes
//!
//! ```text
//! E(u) = sum_l sum_i sqrt(sum_j w_ij (u_jl - u_il)^2) + lambda sum_i sum_l u_il |x_i - c_l|^2
//! ```
//!
//! by a primal-dual iteration with fixed centroids `c`. The outer loop
//! thresholds `u`, recomputes centroids and repeats until the assignment is
//! stable.
//!
//! Because the fidelity is linear in `u`, the primal proximal step is a
//! row-wise simplex projection of `u + tau div p - tau lambda Phi` with
//! `Phi_il = |x_i - c_l|^2`.

mod cluster;
mod graph;
mod ops;
mod solver;

pub use cluster::{
    cluster, cluster_dataset, cluster_graph, cluster_report, ClusterOutcome, ClusterReport, ClusterRow, ZScore,
    CLUSTER_FIELDS, ENERGY_SLACK,
};
pub use graph::{cosine, euclidean, pairwise_distance, weight_graph, WeightGraph, DISTANCE_FLOOR};
pub use ops::{
    energy, fidelity_matrix, nonlocal_divergence, nonlocal_gradient, project_ball, project_dual, project_simplex,
    total_variation,
};
pub use solver::{
    combined_distance, one_hot_labels, primal_dual_solve, threshold, update_centroids, NltvParams, Preset,
    PrimalDual,
};
