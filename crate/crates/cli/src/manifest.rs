use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use crate::args::{Command, Format, Global};

pub const TOOL: &str = "facstat";
const MD_PREFIX: &str = "<!-- manifest: ";
const MD_SUFFIX: &str = " -->";
const CSV_PREFIX: &str = "# manifest: ";

/// Everything needed to rerun a report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub input: Option<PathBuf>,
    pub filters: BTreeMap<String, String>,
    pub seed: u64,
    pub format: Format,
    pub config: Option<PathBuf>,
    pub command: Command,
}

impl RunManifest {
    pub fn new(global: &Global, command: &Command) -> Self {
        let mut filters = BTreeMap::new();
        let mut input = None;
        if let Some(src) = command.source() {
            input = Some(src.input.clone());
            if let Some(u) = &src.university {
                filters.insert("university".to_string(), u.clone());
            }
            if let Some(c) = &src.cohort {
                filters.insert("cohort".to_string(), c.clone());
            }
        }
        Self {
            tool: TOOL.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            subcommand: command.name().to_string(),
            input,
            filters,
            seed: global.seed,
            format: global.format,
            config: global.config.clone(),
            command: command.clone(),
        }
    }

    pub fn to_value(&self) -> Result<serde_json::Value> {
        Ok(serde_json::to_value(self)?)
    }

    /// Single-line JSON with sorted keys.
    pub fn to_line(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_value()?)?)
    }

    pub fn md_header(&self) -> Result<String> {
        Ok(format!("{MD_PREFIX}{}{MD_SUFFIX}\n", self.to_line()?))
    }

    pub fn csv_header(&self) -> Result<String> {
        Ok(format!("{CSV_PREFIX}{}\n", self.to_line()?))
    }

    /// Recovers the manifest from a report in any of the three formats.
    pub fn extract(text: &str) -> Result<Self> {
        let first = text.lines().next().unwrap_or("");
        let manifest: RunManifest = if let Some(rest) = first.strip_prefix(MD_PREFIX) {
            let body = rest
                .strip_suffix(MD_SUFFIX)
                .context("unterminated manifest comment")?;
            serde_json::from_str(body).context("malformed manifest in Markdown report")?
        } else if let Some(body) = first.strip_prefix(CSV_PREFIX) {
            serde_json::from_str(body).context("malformed manifest in CSV report")?
        } else {
            let v: serde_json::Value = serde_json::from_str(text).context("report is not JSON, Markdown or CSV with a manifest")?;
            let m = v.get("manifest").context("JSON report has no `manifest` key")?;
            serde_json::from_value(m.clone()).context("malformed manifest in JSON report")?
        };
        if manifest.tool != TOOL {
            bail!("report was written by `{}`, not {TOOL}", manifest.tool);
        }
        if manifest.subcommand != manifest.command.name() {
            bail!(
                "manifest subcommand `{}` does not match its recorded command `{}`",
                manifest.subcommand,
                manifest.command.name()
            );
        }
        Ok(manifest)
    }
}
