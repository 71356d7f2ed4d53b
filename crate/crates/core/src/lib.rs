//! Statistical analysis of academic faculty records.
//!
//! - [`dataset`]: CSV ingestion, validation, predictor selection,
//!   standardization, seeded splitting and a synthetic record generator.
//! - [`eda`]: summaries, percentiles, covariance/correlation, histograms,
//!   kernel density estimates and cohort comparisons.
//! - [`regress`]: seven regression methods used as classifiers through a
//!   nearest-category operator, scored by accuracy rate (AR) and average
//!   degree of deviation (ADD) over fourteen predictor combinations.
//! - [`softmax`]: a one-layer softmax classifier trained by full-batch
//!   gradient descent on cross-entropy.
//! - [`nltv`]: nonlocal total-variation clustering solved with a
//!   primal-dual inner loop and a threshold/centroid outer loop.

pub mod config;
pub mod dataset;
pub mod eda;
pub mod error;
pub mod nltv;
pub mod regress;
pub mod report;
pub mod softmax;

pub use error::{Error, Result};

/// Derives an independent seed for a named purpose from a master seed.
pub fn sub_seed(seed: u64, name: &str) -> u64 {
    // FNV-1a over the name, folded into the seed, then a splitmix64 finalizer.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = seed ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
