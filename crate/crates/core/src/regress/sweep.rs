//! Method x predictor-combination sweep scored by AR and ADD on a held-out split.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{add_metric, ar_metric, classify, fit, predict_real, Hyper, MethodTag};
use crate::dataset::{select_features, standardize, train_test_split, Dataset, Field, PredictorCombo, Target};
use crate::error::{Error, Result};
use crate::report::{fmt2, markdown_table};

pub const MIN_SWEEP_RECORDS: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub train_fraction: f64,
    pub methods: Vec<MethodTag>,
    pub combos: Vec<u8>,
    /// Per-method overrides of the default hyperparameters.
    pub hyper: BTreeMap<MethodTag, Hyper>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            train_fraction: 0.7,
            methods: MethodTag::ALL.to_vec(),
            combos: (1..=PredictorCombo::COUNT).collect(),
            hyper: BTreeMap::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub method: MethodTag,
    pub combo: u8,
    pub columns: Vec<Field>,
    pub ar: Option<f64>,
    pub add: Option<f64>,
    /// Why the cell is absent, when it is.
    pub error: Option<String>,
    pub hyperparameters: Hyper,
    pub converged: Option<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellKey {
    pub method: MethodTag,
    pub combo: u8,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub target: Target,
    pub seed: u64,
    pub train_size: usize,
    pub test_size: usize,
    pub config: SweepConfig,
    /// Row-major over combos, then methods.
    pub cells: Vec<SweepCell>,
    pub best_by_ar: Vec<CellKey>,
    pub best_by_add: Vec<CellKey>,
}

pub fn sweep(d: &Dataset, target: Target, seed: u64) -> Result<SweepResult> {
    sweep_with(d, target, seed, &SweepConfig::default())
}

/// Runs every configured cell on one shared train/test split.
pub fn sweep_with(d: &Dataset, target: Target, seed: u64, cfg: &SweepConfig) -> Result<SweepResult> {
    if d.len() < MIN_SWEEP_RECORDS {
        return Err(Error::EmptyDataset(format!(
            "sweep needs at least {MIN_SWEEP_RECORDS} records, got {}",
            d.len()
        )));
    }
    if cfg.methods.is_empty() || cfg.combos.is_empty() {
        return Err(Error::InvalidArgument("sweep needs at least one method and one combination".into()));
    }
    let combos = cfg
        .combos
        .iter()
        .map(|&i| PredictorCombo::from_index(i))
        .collect::<Result<Vec<_>>>()?;
    let (train, test) = train_test_split(d, cfg.train_fraction, seed)?;

    let jobs: Vec<(&PredictorCombo, MethodTag)> = combos
        .iter()
        .flat_map(|c| cfg.methods.iter().map(move |m| (c, *m)))
        .collect();
    let empty = Hyper::new();
    let cells: Vec<SweepCell> = jobs
        .par_iter()
        .map(|(combo, method)| {
            let hyper = cfg.hyper.get(method).unwrap_or(&empty);
            run_cell(&train, &test, combo, *method, target, hyper)
        })
        .collect();

    let best_by_ar = best(&cells, |c| c.ar, f64::max);
    let best_by_add = best(&cells, |c| c.add, f64::min);
    Ok(SweepResult {
        target,
        seed,
        train_size: train.len(),
        test_size: test.len(),
        config: cfg.clone(),
        cells,
        best_by_ar,
        best_by_add,
    })
}

fn run_cell(
    train: &Dataset,
    test: &Dataset,
    combo: &PredictorCombo,
    method: MethodTag,
    target: Target,
    hyper: &Hyper,
) -> SweepCell {
    let mut cell = SweepCell {
        method,
        combo: combo.index,
        columns: combo.columns.clone(),
        ar: None,
        add: None,
        error: None,
        hyperparameters: Hyper::new(),
        converged: None,
    };
    let scored = || -> Result<(f64, f64, Hyper, bool)> {
        let (tr, stats) = standardize(&select_features(train, combo, target)?, None)?;
        let (te, _) = standardize(&select_features(test, combo, target)?, Some(&stats))?;
        let model = fit(method, &tr, hyper)?;
        let cats = target.categories();
        let labels = classify(&predict_real(&model, &te)?, &cats);
        let truth: Vec<i64> = te.target.iter().map(|v| *v as i64).collect();
        Ok((
            ar_metric(&labels, &truth)?,
            add_metric(&labels, &truth)?,
            model.hyperparameters,
            model.converged,
        ))
    };
    match scored() {
        Ok((ar, add, h, conv)) => {
            cell.ar = Some(ar);
            cell.add = Some(add);
            cell.hyperparameters = h;
            cell.converged = Some(conv);
        }
        Err(e) => cell.error = Some(e.to_string()),
    }
    cell
}

fn best(cells: &[SweepCell], score: impl Fn(&SweepCell) -> Option<f64>, pick: fn(f64, f64) -> f64) -> Vec<CellKey> {
    let Some(opt) = cells.iter().filter_map(&score).reduce(pick) else {
        return Vec::new();
    };
    cells
        .iter()
        .filter(|c| score(c) == Some(opt))
        .map(|c| CellKey {
            method: c.method,
            combo: c.combo,
        })
        .collect()
}

impl SweepResult {
    pub fn cell(&self, method: MethodTag, combo: u8) -> Option<&SweepCell> {
        self.cells.iter().find(|c| c.method == method && c.combo == combo)
    }

    fn grid(&self, score: impl Fn(&SweepCell) -> Option<f64>) -> String {
        let mut header = vec!["Combination"];
        header.extend(self.config.methods.iter().map(|m| m.name()));
        let rows: Vec<Vec<String>> = self
            .config
            .combos
            .iter()
            .map(|&i| {
                let mut row = vec![i.to_string()];
                row.extend(self.config.methods.iter().map(|&m| {
                    self.cell(m, i).and_then(&score).map_or_else(|| "n/a".to_string(), fmt2)
                }));
                row
            })
            .collect();
        markdown_table(&header, &rows)
    }

    pub fn to_markdown(&self, scope: &str) -> String {
        let mut out = String::new();
        let target = match self.target {
            Target::Rank => "rank",
            Target::Ams => "AMS fellowship",
        };
        let _ = writeln!(out, "{}", self.grid(|c| c.ar));
        let _ = writeln!(out, "*AR of {target} prediction for {scope} (seed {}).*\n", self.seed);
        let _ = writeln!(out, "{}", self.grid(|c| c.add));
        let _ = writeln!(out, "*ADD of {target} prediction for {scope} (seed {}).*\n", self.seed);
        let pairs = |keys: &[CellKey]| {
            keys.iter()
                .map(|k| format!("{} + {}", k.method, k.combo))
                .collect::<Vec<_>>()
                .join(", ")
        };
        let _ = writeln!(out, "Best by AR: {}", pairs(&self.best_by_ar));
        let _ = writeln!(out, "Best by ADD: {}", pairs(&self.best_by_add));
        let failed: Vec<&SweepCell> = self.cells.iter().filter(|c| c.error.is_some()).collect();
        if !failed.is_empty() {
            let _ = writeln!(out);
            for c in failed {
                let _ = writeln!(out, "- {} + {}: {}", c.method, c.combo, c.error.as_deref().unwrap_or(""));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{default_profile, synth_generate};

    fn fixture(m: usize, seed: u64) -> Dataset {
        synth_generate(&default_profile(), m, seed).unwrap()
    }

    #[test]
    fn grid_is_complete_and_deterministic() {
        let d = fixture(60, 1);
        let a = sweep(&d, Target::Rank, 9).unwrap();
        let b = sweep(&d, Target::Rank, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.cells.len(), 7 * 14);
        assert_eq!((a.train_size, a.test_size), (42, 18));
        for c in &a.cells {
            if let (Some(ar), Some(add)) = (c.ar, c.add) {
                assert!((0.0..=1.0).contains(&ar) && add >= 0.0);
            } else {
                assert!(c.error.is_some());
            }
        }
    }

    #[test]
    fn best_pairs_attain_optimum() {
        let r = sweep(&fixture(50, 2), Target::Rank, 4).unwrap();
        let max_ar = r.cells.iter().filter_map(|c| c.ar).fold(f64::MIN, f64::max);
        let min_add = r.cells.iter().filter_map(|c| c.add).fold(f64::MAX, f64::min);
        assert!(!r.best_by_ar.is_empty());
        for k in &r.best_by_ar {
            assert_eq!(r.cell(k.method, k.combo).unwrap().ar, Some(max_ar));
        }
        for k in &r.best_by_add {
            assert_eq!(r.cell(k.method, k.combo).unwrap().add, Some(min_add));
        }
    }

    #[test]
    fn constant_target_scores_perfectly() {
        let mut d = fixture(40, 3);
        for r in &mut d.records {
            r.ams_fellow = 0;
        }
        let r = sweep(&d, Target::Ams, 5).unwrap();
        let defined: Vec<f64> = r.cells.iter().filter_map(|c| c.ar).collect();
        assert!(!defined.is_empty());
        assert!(defined.iter().all(|ar| *ar == 1.0));
    }

    #[test]
    fn single_cell_and_small_dataset() {
        let d = fixture(30, 4);
        let cfg = SweepConfig {
            methods: vec![MethodTag::PoR],
            combos: vec![5],
            ..SweepConfig::default()
        };
        let r = sweep_with(&d, Target::Rank, 1, &cfg).unwrap();
        assert_eq!(r.cells.len(), 1);
        assert!(r.to_markdown("fixture").contains("| 5 | "));
        assert!(sweep(&fixture(9, 1), Target::Rank, 1).is_err());
    }
}
