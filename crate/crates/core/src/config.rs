//! Cohort tables and generator profiles, read from a TOML file.
//!
//! ```toml
//! [cohorts]
//! public = ["Berkeley", "Florida", "Michigan", "Rutgers", "UCLA"]
//! private = ["Dartmouth", "Harvard", "MIT", "Penn", "Princeton"]
//! fields = ["Fields"]
//!
//! [[institution]]
//! university = "Berkeley"
//! rank = { mean = 2.741, sd = 0.609 }
//! publications = { mean = 64.914, sd = 48.665 }
//! citations = { mean = 1579.017, sd = 2174.119 }
//! h_index = { mean = 17.207, sd = 9.472 }
//! ams_fellow = { mean = 0.362, sd = 0.485 }
//! phd_year = { mean = 1992.776, sd = 12.445 }
//! ```
//!
//! Cohort tags given in the file replace or extend the built-in
//! public/private table. A non-empty `[[institution]]` list replaces the
//! built-in generator profile.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{default_profile, InstitutionProfile, SynthProfile};
use crate::error::{Error, Result};

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "FACSTAT_CONFIG";

/// Cohort tag to member-institution list.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortTable {
    pub cohorts: BTreeMap<String, Vec<String>>,
}

impl Default for CohortTable {
    fn default() -> Self {
        let list = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        let mut cohorts = BTreeMap::new();
        cohorts.insert(
            "public".to_string(),
            list(&["Berkeley", "Florida", "Michigan", "Rutgers", "UCLA"]),
        );
        cohorts.insert(
            "private".to_string(),
            list(&["Dartmouth", "Harvard", "MIT", "Penn", "Princeton"]),
        );
        Self { cohorts }
    }
}

impl CohortTable {
    pub fn members(&self, tag: &str) -> Result<&[String]> {
        let key = tag.trim().to_ascii_lowercase();
        self.cohorts
            .get(&key)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownCohort(tag.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub cohorts: CohortTable,
    pub profile: SynthProfile,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            cohorts: CohortTable::default(),
            profile: default_profile(),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    cohorts: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    institution: Vec<InstitutionProfile>,
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut cfg = Config::default();
        for (tag, members) in raw.cohorts {
            cfg.cohorts.cohorts.insert(tag.to_ascii_lowercase(), members);
        }
        if !raw.institution.is_empty() {
            cfg.profile = SynthProfile {
                institutions: raw.institution,
            };
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }
}
