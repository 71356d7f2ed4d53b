use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Dataset, FacultyRecord};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub sd: f64,
}

impl Moments {
    pub const fn new(mean: f64, sd: f64) -> Self {
        Self { mean, sd }
    }
}

/// Target means and deviations for one institution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstitutionProfile {
    pub university: String,
    pub rank: Moments,
    pub publications: Moments,
    pub citations: Moments,
    pub h_index: Moments,
    pub ams_fellow: Moments,
    pub phd_year: Moments,
}

impl InstitutionProfile {
    fn moments(&self) -> [Moments; 6] {
        [
            self.rank,
            self.publications,
            self.citations,
            self.h_index,
            self.ams_fellow,
            self.phd_year,
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthProfile {
    pub institutions: Vec<InstitutionProfile>,
}

impl SynthProfile {
    fn validate(&self) -> Result<()> {
        if self.institutions.is_empty() {
            return Err(Error::InvalidArgument("profile lists no institutions".into()));
        }
        for inst in &self.institutions {
            for m in inst.moments() {
                if !(m.sd >= 0.0) || !m.mean.is_finite() || !m.sd.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "profile for `{}` has invalid moments {m:?}",
                        inst.university
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Per-university means and deviations of the ten surveyed departments.
pub fn default_profile() -> SynthProfile {
    // (name, means, deviations) in field order.
    #[rustfmt::skip]
    const ROWS: [(&str, [f64; 6], [f64; 6]); 10] = [
        ("Berkeley",  [2.741, 64.914, 1579.017, 17.207, 0.362, 1992.776], [0.609, 48.665, 2174.119, 9.472, 0.485, 12.445]),
        ("Dartmouth", [2.478, 36.783, 360.435, 8.652, 0.043, 1993.652],   [0.790, 30.705, 399.379, 4.914, 0.209, 12.463]),
        ("Florida",   [2.500, 50.568, 416.477, 9.136, 0.045, 1992.091],   [0.876, 37.279, 507.301, 5.129, 0.211, 15.397]),
        ("Harvard",   [3.000, 100.400, 2810.800, 24.500, 0.400, 1984.000],[0.000, 106.460, 3291.795, 11.390, 0.503, 12.645]),
        ("MIT",       [2.642, 63.491, 1460.094, 16.377, 0.415, 1995.717], [0.787, 59.765, 2083.936, 10.895, 0.497, 15.468]),
        ("Michigan",  [2.871, 54.258, 936.742, 12.887, 0.339, 1991.694],  [0.614, 45.168, 1364.324, 7.378, 0.477, 13.745]),
        ("Penn",      [2.800, 53.960, 633.200, 12.320, 0.400, 1989.440],  [0.645, 31.798, 465.785, 5.429, 0.500, 14.509]),
        ("Princeton", [2.452, 73.524, 2123.738, 19.357, 0.452, 1995.071], [0.889, 90.541, 2465.433, 13.483, 0.504, 17.374]),
        ("Rutgers",   [3.153, 71.661, 1027.525, 14.271, 0.559, 1989.051], [0.979, 62.757, 1128.886, 7.850, 0.501, 15.234]),
        ("UCLA",      [2.776, 60.241, 1371.379, 14.517, 0.379, 1994.397], [0.531, 59.434, 2898.606, 10.881, 0.489, 13.124]),
    ];
    SynthProfile {
        institutions: ROWS
            .iter()
            .map(|(name, mu, sd)| InstitutionProfile {
                university: (*name).to_string(),
                rank: Moments::new(mu[0], sd[0]),
                publications: Moments::new(mu[1], sd[1]),
                citations: Moments::new(mu[2], sd[2]),
                h_index: Moments::new(mu[3], sd[3]),
                ams_fellow: Moments::new(mu[4], sd[4]),
                phd_year: Moments::new(mu[5], sd[5]),
            })
            .collect(),
    }
}

const MAX_REJECTIONS: usize = 64;

fn truncated_normal<R: Rng>(rng: &mut R, m: Moments, lo: f64, hi: f64) -> f64 {
    if m.sd == 0.0 {
        return m.mean.clamp(lo, hi);
    }
    let normal = Normal::new(m.mean, m.sd).expect("validated deviation");
    for _ in 0..MAX_REJECTIONS {
        let x = normal.sample(rng);
        if (lo..=hi).contains(&x) {
            return x;
        }
    }
    normal.sample(rng).clamp(lo, hi)
}

fn round_half_up(x: f64) -> f64 {
    (x + 0.5).floor()
}

/// Draws `m` records, cycling through the profile's institutions.
///
/// Counts come from truncated normals rounded to integers. AMS status is a
/// Bernoulli draw with the profile mean as probability, or the rounded mean
/// when its deviation is zero.
pub fn synth_generate(profile: &SynthProfile, m: usize, seed: u64) -> Result<Dataset> {
    if m == 0 {
        return Err(Error::InvalidArgument("cannot generate 0 records".into()));
    }
    profile.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count_hi = f64::from(u32::MAX);

    let mut records = Vec::with_capacity(m);
    for i in 0..m {
        let inst = &profile.institutions[i % profile.institutions.len()];
        let rank = round_half_up(truncated_normal(&mut rng, inst.rank, 1.0, 4.0)).clamp(1.0, 4.0);
        let publications = round_half_up(truncated_normal(&mut rng, inst.publications, 0.0, count_hi));
        let citations = round_half_up(truncated_normal(&mut rng, inst.citations, 0.0, count_hi));
        let h_index = round_half_up(truncated_normal(&mut rng, inst.h_index, 0.0, count_hi)).min(publications);
        let ams = if inst.ams_fellow.sd == 0.0 {
            round_half_up(inst.ams_fellow.mean.clamp(0.0, 1.0))
        } else {
            f64::from(u8::from(rng.random_bool(inst.ams_fellow.mean.clamp(0.0, 1.0))))
        };
        let phd_year = round_half_up(truncated_normal(&mut rng, inst.phd_year, 1900.0, 2100.0)).clamp(1900.0, 2100.0);

        records.push(FacultyRecord {
            last_name: format!("Synth{i:05}"),
            first_name: inst.university.chars().take(3).collect(),
            rank: rank as u8,
            publications: publications as u32,
            citations: citations as u32,
            h_index: h_index as u32,
            ams_fellow: ams as u8,
            phd_year: phd_year as i32,
            university: inst.university.clone(),
        });
    }
    Dataset::new(records, format!("synthetic(m={m}, seed={seed})"))
}
