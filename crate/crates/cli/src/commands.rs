use std::fmt::Write as _;

use anyhow::{bail, Context, Result};
use facstat_core::config::Config;
use facstat_core::dataset::{
    load_csv, select_columns, standardize, synth_generate, train_test_split, Dataset, FacultyRecord, Field,
    PredictorCombo, Selector,
};
use facstat_core::eda::{
    correlation, covariance, groups, histogram, kde, percentiles_fields, summary_fields, Bins, DensitySeries,
    Grouping, MomentMatrix, PercentileTable, SummaryTable,
};
use facstat_core::nltv::{cluster_dataset, ClusterReport, NltvParams, CLUSTER_FIELDS};
use facstat_core::regress::{sweep_with, MethodTag, SweepConfig, SweepResult};
use facstat_core::report::{canonical_json, csv_cell, fmt3, markdown_table};
use facstat_core::softmax::{predict_all, train, SoftmaxModel, TrainConfig};
use facstat_core::sub_seed;
use serde::Serialize;

use crate::args::{By, ClusterArgs, Command, EdaArgs, Format, RegressArgs, SoftmaxArgs, Source, SynthArgs, NON_RANK_FIELDS};
use crate::manifest::RunManifest;

/// A rendered report plus auxiliary files for `--out-dir`.
pub struct Output {
    pub report: String,
    pub files: Vec<(String, String)>,
    /// One-line summary for stderr.
    pub notice: Option<String>,
}

/// Long-format CSV: one value per line.
#[derive(Default)]
struct LongCsv {
    rows: Vec<[String; 5]>,
}

impl LongCsv {
    fn push(&mut self, section: &str, group: &str, row: impl ToString, column: impl ToString, value: impl ToString) {
        self.rows.push([
            section.to_string(),
            group.to_string(),
            row.to_string(),
            column.to_string(),
            value.to_string(),
        ]);
    }

    fn render(&self) -> String {
        let mut out = String::from("section,group,row,column,value\n");
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|c| csv_cell(c)).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn render<T: Serialize>(
    manifest: &RunManifest,
    report: &T,
    md: impl FnOnce() -> String,
    csv: impl FnOnce() -> LongCsv,
) -> Result<String> {
    Ok(match manifest.format {
        Format::Json => canonical_json(&serde_json::json!({
            "manifest": manifest.to_value()?,
            "report": report,
        }))?,
        Format::Md => format!("{}\n{}", manifest.md_header()?, md()),
        Format::Csv => format!("{}{}", manifest.csv_header()?, csv().render()),
    })
}

pub fn run(manifest: &RunManifest) -> Result<Output> {
    let config = match &manifest.config {
        Some(p) => Config::load(p).with_context(|| format!("loading config {}", p.display()))?,
        None => Config::default(),
    };
    match &manifest.command {
        Command::Eda(a) => eda(manifest, &config, a),
        Command::Regress(a) => regress(manifest, &config, a),
        Command::Softmax(a) => softmax(manifest, &config, a),
        Command::Cluster(a) => cluster(manifest, &config, a),
        Command::Synth(a) => synth(manifest, &config, a),
        Command::Replay(_) => bail!("a replay cannot be recorded in a manifest"),
    }
}

fn load(src: &Source, config: &Config) -> Result<(Dataset, String)> {
    let mut d = load_csv(&src.input).with_context(|| format!("reading {}", src.input.display()))?;
    let mut scope = "all universities".to_string();
    if let Some(tag) = &src.cohort {
        d = d.filter(&Selector::Cohort(tag.clone()), &config.cohorts)?;
        scope = format!("{tag} universities");
    }
    if let Some(u) = &src.university {
        d = d.filter(&Selector::University(u.clone()), &config.cohorts)?;
        scope = u.clone();
    }
    if d.is_empty() {
        bail!("no records in {} match the filters", src.input.display());
    }
    Ok((d, scope))
}

fn slug(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect()
}

#[derive(Serialize)]
struct EdaGroup {
    group: String,
    n: usize,
    percentiles: PercentileTable,
    covariance: Option<MomentMatrix>,
    correlation: Option<MomentMatrix>,
    histograms: Vec<DensitySeries>,
    kdes: Vec<DensitySeries>,
    notes: Vec<String>,
}

#[derive(Serialize)]
struct EdaReport {
    scope: String,
    fields: Vec<Field>,
    summary: SummaryTable,
    groups: Vec<EdaGroup>,
}

fn eda(manifest: &RunManifest, config: &Config, a: &EdaArgs) -> Result<Output> {
    let (d, scope) = load(&a.source, config)?;
    let grouping = if a.cohorts.is_empty() {
        match a.by {
            By::All => Grouping::All,
            By::University => Grouping::University,
        }
    } else {
        let tags: Vec<&str> = a.cohorts.iter().map(String::as_str).collect();
        Grouping::cohorts(&config.cohorts, &tags)?
    };
    let fields = a.fields.resolve(&Field::ALL);
    let summary = summary_fields(&d, &grouping, &fields)?;
    let bins = Bins::Count(usize::try_from(a.bins)?);

    let mut out_groups = Vec::new();
    for (group, sub) in groups(&d, &grouping)? {
        let mut notes = Vec::new();
        let mut note = |what: &str, e: facstat_core::Error| notes.push(format!("{what}: {e}"));
        let cov = covariance(&sub, &fields).map_err(|e| note("covariance", e)).ok();
        let corr = if cov.is_some() {
            correlation(&sub, &fields).map_err(|e| note("correlation", e)).ok()
        } else {
            None
        };
        let mut histograms = Vec::new();
        let mut kdes = Vec::new();
        for &f in &fields {
            let mut h = histogram(&sub, f, &bins, false)?;
            h.group = group.clone();
            histograms.push(h);
            match kde(&sub, f, a.bandwidth) {
                Ok(mut k) => {
                    k.group = group.clone();
                    kdes.push(k);
                }
                Err(e) => note(&format!("kde of {f}"), e),
            }
        }
        out_groups.push(EdaGroup {
            n: sub.len(),
            percentiles: percentiles_fields(&sub, &fields, &a.probes)?,
            covariance: cov,
            correlation: corr,
            histograms,
            kdes,
            notes,
            group,
        });
    }
    let report = EdaReport {
        scope: scope.clone(),
        fields: fields.clone(),
        summary,
        groups: out_groups,
    };

    let group_scope = |g: &str| match &grouping {
        Grouping::All => scope.clone(),
        Grouping::University => g.to_string(),
        Grouping::Cohorts(_) => format!("{g} universities"),
    };
    let md = || {
        let mut out = String::new();
        let _ = writeln!(out, "## Summary\n");
        out.push_str(&report.summary.to_markdown(&scope));
        for g in &report.groups {
            let s = group_scope(&g.group);
            let _ = writeln!(out, "\n## {s}\n");
            out.push_str(
                &g.percentiles
                    .to_markdown("Field", &format!("Percentiles for all fields across {s} (n={})", g.n)),
            );
            for m in [&g.covariance, &g.correlation].into_iter().flatten() {
                out.push('\n');
                out.push_str(&m.to_markdown(&s));
            }
            if !g.notes.is_empty() {
                out.push('\n');
                for n in &g.notes {
                    let _ = writeln!(out, "- {n}");
                }
            }
        }
        out
    };
    let csv = || {
        let mut c = LongCsv::default();
        for r in &report.summary.rows {
            c.push("summary", &r.group, "all", "n", r.n);
            for s in &r.stats {
                c.push("summary", &r.group, s.field, "mean", s.mean);
                c.push("summary", &r.group, s.field, "deviation", s.deviation);
            }
        }
        for g in &report.groups {
            for (f, row) in report.fields.iter().zip(&g.percentiles.rows) {
                for (p, v) in g.percentiles.probes.iter().zip(&row.values) {
                    c.push("percentile", &g.group, f, p, v);
                }
            }
            for (name, m) in [("covariance", &g.covariance), ("correlation", &g.correlation)] {
                if let Some(m) = m {
                    for (fi, row) in m.fields.iter().zip(&m.values) {
                        for (fj, v) in m.fields.iter().zip(row) {
                            c.push(name, &g.group, fi, fj, v);
                        }
                    }
                }
            }
            for s in g.histograms.iter().chain(&g.kdes) {
                let name = if s.edges.is_empty() { "kde" } else { "histogram" };
                for (x, y) in s.x.iter().zip(&s.y) {
                    c.push(name, &g.group, s.field, x, y);
                }
            }
        }
        c
    };
    let text = render(manifest, &report, md, csv)?;

    let mut files = Vec::new();
    for g in &report.groups {
        for s in &g.histograms {
            files.push((format!("hist_{}_{}.csv", slug(&g.group), s.field), s.to_csv()));
        }
        for s in &g.kdes {
            files.push((format!("kde_{}_{}.csv", slug(&g.group), s.field), s.to_csv()));
        }
    }
    Ok(Output {
        report: text,
        files,
        notice: None,
    })
}

#[derive(Serialize)]
struct RegressScope {
    scope: String,
    n: usize,
    sweep: Option<SweepResult>,
    error: Option<String>,
}

fn regress(manifest: &RunManifest, config: &Config, a: &RegressArgs) -> Result<Output> {
    let (d, scope) = load(&a.source, config)?;
    let cfg = SweepConfig {
        train_fraction: a.train_fraction,
        methods: a.method.map_or_else(|| MethodTag::ALL.to_vec(), |m| vec![m]),
        combos: a.combo.map_or_else(|| (1..=PredictorCombo::COUNT).collect(), |c| vec![c]),
        ..SweepConfig::default()
    };
    let seed = sub_seed(manifest.seed, "split");
    let scopes: Vec<(String, Dataset)> = match a.by {
        By::All => vec![(scope, d)],
        By::University => groups(&d, &Grouping::University)?,
    };
    let single = scopes.len() == 1;
    let mut results = Vec::new();
    for (name, sub) in scopes {
        let r = sweep_with(&sub, a.target, seed, &cfg);
        if single {
            let sweep = r?;
            results.push(RegressScope {
                scope: name,
                n: sub.len(),
                sweep: Some(sweep),
                error: None,
            });
            continue;
        }
        let (sweep, error) = match r {
            Ok(s) => (Some(s), None),
            Err(e) => (None, Some(e.to_string())),
        };
        results.push(RegressScope {
            scope: name,
            n: sub.len(),
            sweep,
            error,
        });
    }

    let md = || {
        let mut out = String::new();
        for r in &results {
            let _ = writeln!(out, "## {} (n={})\n", r.scope, r.n);
            match (&r.sweep, &r.error) {
                (Some(s), _) => out.push_str(&s.to_markdown(&r.scope)),
                (None, Some(e)) => {
                    let _ = writeln!(out, "Skipped: {e}");
                }
                (None, None) => {}
            }
            out.push('\n');
        }
        out.truncate(out.trim_end().len());
        out.push('\n');
        out
    };
    let csv = || {
        let mut c = LongCsv::default();
        for r in &results {
            let Some(s) = &r.sweep else {
                c.push("error", &r.scope, "", "", r.error.as_deref().unwrap_or(""));
                continue;
            };
            for cell in &s.cells {
                c.push("ar", &r.scope, cell.combo, cell.method, opt(cell.ar));
                c.push("add", &r.scope, cell.combo, cell.method, opt(cell.add));
            }
            for k in &s.best_by_ar {
                c.push("best_by_ar", &r.scope, k.combo, k.method, opt(s.cell(k.method, k.combo).and_then(|x| x.ar)));
            }
            for k in &s.best_by_add {
                c.push("best_by_add", &r.scope, k.combo, k.method, opt(s.cell(k.method, k.combo).and_then(|x| x.add)));
            }
        }
        c
    };
    let text = render(manifest, &results, md, csv)?;
    Ok(Output {
        report: text,
        files: Vec::new(),
        notice: None,
    })
}

#[derive(Serialize)]
struct Prediction {
    last_name: String,
    first_name: String,
    university: String,
    rank: u8,
    predicted: usize,
}

#[derive(Serialize)]
struct SoftmaxReport {
    scope: String,
    features: Vec<Field>,
    split: String,
    train_size: usize,
    test_size: usize,
    config: TrainConfig,
    model: SoftmaxModel,
    losses: Vec<f64>,
    predictions: Vec<Prediction>,
    correct: usize,
    total: usize,
}

impl SoftmaxReport {
    fn accuracy_line(&self) -> String {
        format!("{}/{} correct", self.correct, self.total)
    }
}

fn softmax(manifest: &RunManifest, config: &Config, a: &SoftmaxArgs) -> Result<Output> {
    let (d, scope) = load(&a.source, config)?;
    let features = a.features.resolve(&NON_RANK_FIELDS);
    let (train_set, test_set, split) = match a.train {
        Some(n) => {
            let n = usize::try_from(n)?;
            if n >= d.len() {
                bail!("--train {n} leaves no test records out of {}", d.len());
            }
            let part = |r: &[FacultyRecord]| Dataset {
                records: r.to_vec(),
                source: d.source.clone(),
            };
            (part(&d.records[..n]), part(&d.records[n..]), format!("first {n} records"))
        }
        None => {
            let (tr, te) = train_test_split(&d, a.train_fraction, sub_seed(manifest.seed, "split"))?;
            let s = format!("seeded {} split", a.train_fraction);
            (tr, te, s)
        }
    };
    if test_set.is_empty() {
        bail!("the split leaves no test records");
    }
    let (tr, stats) = standardize(&select_columns(&train_set, &features, Field::Rank)?, None)?;
    let (te, _) = standardize(&select_columns(&test_set, &features, Field::Rank)?, Some(&stats))?;
    let cfg = TrainConfig {
        epochs: usize::try_from(a.epochs)?,
        learning_rate: a.lr,
        reg_strength: a.reg,
        seed: sub_seed(manifest.seed, "init"),
        class_count: Some(4),
    };
    let (model, curve) = train(&tr, &cfg)?;
    let predicted = predict_all(&model, &te)?;
    let predictions: Vec<Prediction> = test_set
        .records
        .iter()
        .zip(&predicted)
        .map(|(r, &p)| Prediction {
            last_name: r.last_name.clone(),
            first_name: r.first_name.clone(),
            university: r.university.clone(),
            rank: r.rank,
            predicted: p,
        })
        .collect();
    let correct = predictions.iter().filter(|p| usize::from(p.rank) == p.predicted).count();
    let report = SoftmaxReport {
        scope,
        split,
        train_size: train_set.len(),
        test_size: test_set.len(),
        total: predictions.len(),
        correct,
        predictions,
        losses: curve.losses.clone(),
        model,
        config: cfg,
        features,
    };

    let md = || {
        let labels: Vec<&str> = report.features.iter().map(|f| f.label()).collect();
        let mut out = format!(
            "**{}**, softmax on {}; trained on the {} ({} train, {} test).\n\n",
            report.scope,
            labels.join(", "),
            report.split,
            report.train_size,
            report.test_size
        );
        let first = report.losses.first().copied().unwrap_or(f64::NAN);
        let last = report.losses.last().copied().unwrap_or(f64::NAN);
        out.push_str(&markdown_table(
            &["Epochs", "Learning rate", "Regularization", "Initial loss", "Final loss"],
            &[vec![
                report.config.epochs.to_string(),
                report.config.learning_rate.to_string(),
                report.config.reg_strength.to_string(),
                fmt3(first),
                fmt3(last),
            ]],
        ));
        out.push('\n');
        let rows: Vec<Vec<String>> = report
            .predictions
            .iter()
            .map(|p| {
                vec![
                    p.last_name.clone(),
                    p.first_name.clone(),
                    p.university.clone(),
                    p.rank.to_string(),
                    p.predicted.to_string(),
                ]
            })
            .collect();
        out.push_str(&markdown_table(&["Last name", "First name", "University", "Rank", "Predicted"], &rows));
        let _ = writeln!(out, "\n{}", report.accuracy_line());
        out
    };
    let csv = || {
        let mut c = LongCsv::default();
        for (e, l) in report.losses.iter().enumerate() {
            c.push("loss", &report.scope, e + 1, "loss", l);
        }
        for (i, p) in report.predictions.iter().enumerate() {
            c.push("prediction", &report.scope, i + 1, "rank", p.rank);
            c.push("prediction", &report.scope, i + 1, "predicted", p.predicted);
        }
        c.push("accuracy", &report.scope, "test", "correct", report.correct);
        c.push("accuracy", &report.scope, "test", "total", report.total);
        c
    };
    let text = render(manifest, &report, md, csv)?;

    let mut pred_csv = String::from("last_name,first_name,university,rank,predicted\n");
    for p in &report.predictions {
        let _ = writeln!(
            pred_csv,
            "{},{},{},{},{}",
            csv_cell(&p.last_name),
            csv_cell(&p.first_name),
            csv_cell(&p.university),
            p.rank,
            p.predicted
        );
    }
    Ok(Output {
        report: text,
        files: vec![
            ("model.json".into(), report.model.to_json()?),
            ("loss.csv".into(), curve.to_csv()),
            ("predictions.csv".into(), pred_csv),
        ],
        notice: Some(report.accuracy_line()),
    })
}

#[derive(Serialize)]
struct ClusterSummary {
    scope: String,
    parameters: String,
    fields: Vec<Field>,
    params: NltvParams,
    sigma: f64,
    tau: f64,
    outer_iterations: usize,
    inner_iterations: Vec<usize>,
    converged: bool,
    initial_energy: f64,
    energies: Vec<f64>,
    report: ClusterReport,
}

fn cluster(manifest: &RunManifest, config: &Config, a: &ClusterArgs) -> Result<Output> {
    let (d, scope) = load(&a.source, config)?;
    let fields = a.fields.resolve(&CLUSTER_FIELDS);
    let mut params = NltvParams::parse(&a.params, usize::try_from(a.clusters)?)?;
    params.seed = sub_seed(manifest.seed, "init");
    params.validate()?;
    let (outcome, report) = cluster_dataset(&d, &fields, &params)?;
    let summary = ClusterSummary {
        scope,
        parameters: a.params.clone(),
        fields,
        params,
        sigma: outcome.sigma,
        tau: outcome.tau,
        outer_iterations: outcome.outer_iterations,
        inner_iterations: outcome.inner_iterations.clone(),
        converged: outcome.converged,
        initial_energy: outcome.initial_energy,
        energies: outcome.energies.clone(),
        report,
    };

    let md = || {
        let mut out = summary.report.to_markdown(&summary.scope, &summary.parameters);
        let _ = writeln!(
            out,
            "\n{} after {} outer iterations; energy {:.6e} at the uniform start, {:.6e} at the end.",
            if summary.converged { "Converged" } else { "Stopped unconverged" },
            summary.outer_iterations,
            summary.initial_energy,
            summary.energies.last().copied().unwrap_or(summary.initial_energy)
        );
        out
    };
    let csv = || {
        let mut c = LongCsv::default();
        let g = summary.scope.as_str();
        for r in &summary.report.rows {
            let id = format!("centroid_{}", r.cluster);
            c.push("centroid", g, &id, "count", r.count);
            c.push("centroid", g, &id, "rank", r.rank);
            c.push("centroid", g, &id, "publications", r.publications);
            c.push("centroid", g, &id, "citations", r.citations);
            c.push("centroid", g, &id, "h_index", r.h_index);
            c.push("centroid", g, &id, "ams_fellow", r.ams);
            c.push("centroid", g, &id, "phd_year", r.phd_year);
        }
        for (i, row) in summary.report.crosstab.iter().enumerate() {
            for (r, n) in row.iter().enumerate() {
                c.push("crosstab", g, format!("cluster_{}", i + 1), format!("rank_{}", r + 1), n);
            }
        }
        for (i, e) in summary.energies.iter().enumerate() {
            c.push("energy", g, i + 1, "energy", e);
        }
        c
    };
    let text = render(manifest, &summary, md, csv)?;

    let mut cross = String::from("cluster,rank_1,rank_2,rank_3,rank_4\n");
    for (i, row) in summary.report.crosstab.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(ToString::to_string).collect();
        let _ = writeln!(cross, "{},{}", i + 1, cells.join(","));
    }
    Ok(Output {
        report: text,
        files: vec![
            ("assignments.csv".into(), summary.report.assignments_csv(&d)),
            ("crosstab.csv".into(), cross),
        ],
        notice: None,
    })
}

#[derive(Serialize)]
struct SynthReport {
    m: usize,
    records: Vec<FacultyRecord>,
}

fn synth(manifest: &RunManifest, config: &Config, a: &SynthArgs) -> Result<Output> {
    let m = usize::try_from(a.m)?;
    let d = synth_generate(&config.profile, m, sub_seed(manifest.seed, "generator"))?;
    let plain = d.to_csv_string();
    let report = SynthReport {
        m,
        records: d.records.clone(),
    };
    let text = match manifest.format {
        // the CSV report is itself a loadable faculty file
        Format::Csv => format!("{}{plain}", manifest.csv_header()?),
        _ => render(
            manifest,
            &report,
            || {
                let rows: Vec<Vec<String>> = d
                    .records
                    .iter()
                    .map(|r| {
                        vec![
                            r.last_name.clone(),
                            r.first_name.clone(),
                            r.rank.to_string(),
                            r.publications.to_string(),
                            r.citations.to_string(),
                            r.h_index.to_string(),
                            r.ams_fellow.to_string(),
                            r.phd_year.to_string(),
                            r.university.clone(),
                        ]
                    })
                    .collect();
                let mut out = markdown_table(
                    &[
                        "Last name",
                        "First name",
                        "Rank",
                        "Publications",
                        "Citations",
                        "H-Index",
                        "AMS",
                        "Year of PhD",
                        "University",
                    ],
                    &rows,
                );
                let _ = writeln!(out, "\n*{m} synthetic records.*");
                out
            },
            LongCsv::default,
        )?,
    };
    Ok(Output {
        report: text,
        files: vec![("records.csv".into(), plain)],
        notice: None,
    })
}
