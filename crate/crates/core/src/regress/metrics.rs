use crate::error::{Error, Result};

/// Maps each real prediction to the nearest category value, rounding halves
/// up and clamping to the category range.
pub fn classify(py: &[f64], categories: &[i64]) -> Vec<i64> {
    let (lo, hi) = category_range(categories);
    py.iter()
        .map(|&v| {
            let r = (v + 0.5).floor();
            if r.is_nan() {
                lo
            } else {
                (r.clamp(lo as f64, hi as f64)) as i64
            }
        })
        .collect()
}

fn category_range(categories: &[i64]) -> (i64, i64) {
    let lo = *categories.iter().min().expect("non-empty category set");
    let hi = *categories.iter().max().expect("non-empty category set");
    (lo, hi)
}

fn check_lengths(py: &[i64], y: &[i64]) -> Result<()> {
    if py.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            actual: py.len(),
        });
    }
    if y.is_empty() {
        return Err(Error::EmptyDataset("metric over zero labels".into()));
    }
    Ok(())
}

/// Average degree of deviation: mean absolute label difference.
pub fn add_metric(py: &[i64], y: &[i64]) -> Result<f64> {
    check_lengths(py, y)?;
    let total: i64 = py.iter().zip(y).map(|(a, b)| (a - b).abs()).sum();
    Ok(total as f64 / y.len() as f64)
}

/// Accuracy rate: fraction of exact label matches.
pub fn ar_metric(py: &[i64], y: &[i64]) -> Result<f64> {
    check_lengths(py, y)?;
    let hits = py.iter().zip(y).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / y.len() as f64)
}

/// Binary AMS decision from a fitted score: 1 when the score reaches 1.
pub fn ams_threshold(f_value: f64) -> u8 {
    u8::from(f_value >= 1.0)
}
