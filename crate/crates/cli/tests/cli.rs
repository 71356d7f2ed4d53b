use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn fixture_dir() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    let src = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/faculty.csv");
    std::fs::copy(src, dir.path().join("faculty.csv")).unwrap();
    dir
}

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_facstat"))
        .current_dir(dir)
        .env_remove("FACSTAT_CONFIG")
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = fixture_dir();
    let d = dir.path();
    let cases: [&[&str]; 12] = [
        &[],
        &["frobnicate"],
        &["eda", "--input", "faculty.csv", "--bogus"],
        &["eda"],
        &["eda", "--input", "faculty.csv", "--format", "xml"],
        &["eda", "--input", "faculty.csv", "--by", "university", "--cohorts", "public"],
        &["softmax", "--input", "faculty.csv", "--epochs", "0"],
        &["softmax", "--input", "faculty.csv", "--features", "pubs,salary"],
        &["cluster", "--input", "faculty.csv", "--clusters", "0"],
        &["cluster", "--input", "faculty.csv", "--params", "custom(1,2)"],
        &["regress", "--input", "faculty.csv", "--combo", "15"],
        &["regress", "--input", "faculty.csv", "--train-fraction", "1.5"],
    ];
    for args in cases {
        assert_eq!(code(&run(d, args)), 2, "{args:?}");
    }
}

#[test]
fn runtime_errors_exit_with_one() {
    let dir = fixture_dir();
    let d = dir.path();
    std::fs::write(d.join("bad.csv"), "name,rank\nx,1\n").unwrap();
    std::fs::write(d.join("notes.txt"), "hello\n").unwrap();
    let cases: [&[&str]; 7] = [
        &["eda", "--input", "missing.csv"],
        &["eda", "--input", "bad.csv"],
        &["eda", "--input", "faculty.csv", "--university", "Nowhere"],
        &["eda", "--input", "faculty.csv", "--cohorts", "ivy"],
        &["softmax", "--input", "faculty.csv", "--train", "40"],
        &["cluster", "--input", "faculty.csv", "--university", "MIT", "--clusters", "5"],
        &["replay", "notes.txt"],
    ];
    for args in cases {
        let o = run(d, args);
        assert_eq!(code(&o), 1, "{args:?}");
        assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"), "{args:?}");
    }
}

#[test]
fn help_and_version_succeed() {
    let dir = fixture_dir();
    assert_eq!(code(&run(dir.path(), &["--help"])), 0);
    assert_eq!(code(&run(dir.path(), &["--version"])), 0);
    let help = stdout(&run(dir.path(), &["cluster", "--help"]));
    assert!(help.contains("--params") && help.contains("--clusters"));
}

#[test]
fn eda_groupings() {
    let dir = fixture_dir();
    let by_uni = stdout(&run(dir.path(), &["eda", "--input", "faculty.csv", "--by", "university", "--format", "md"]));
    for u in ["Berkeley", "Harvard", "UCLA"] {
        assert!(by_uni.contains(&format!("\n## {u}\n")), "{u}");
    }
    assert!(by_uni.contains("| University | n | Rank |"));

    let cohorts = stdout(&run(dir.path(), &["eda", "--input", "faculty.csv", "--cohorts", "public,private", "--format", "md"]));
    assert!(cohorts.contains("## public universities") && cohorts.contains("## private universities"));
    assert!(cohorts.contains("| Cohort | n |"));
}

#[test]
fn eda_writes_series_to_out_dir() {
    let dir = fixture_dir();
    let o = run(dir.path(), &["eda", "--input", "faculty.csv", "--out-dir", "out", "--fields", "pubs,h"]);
    assert_eq!(code(&o), 0);
    let out = dir.path().join("out");
    for f in ["report.json", "hist_all_publications.csv", "kde_all_h_index.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let kde = std::fs::read_to_string(out.join("kde_all_publications.csv")).unwrap();
    assert!(kde.starts_with("x,density\n"));
    assert_eq!(kde.lines().count(), 257);
}

#[test]
fn regress_restricts_to_one_cell() {
    let dir = fixture_dir();
    let md = stdout(&run(
        dir.path(),
        &["regress", "--input", "faculty.csv", "--combo", "5", "--method", "PoR", "--format", "md"],
    ));
    assert!(md.contains("| Combination | PoR |"));
    assert!(md.contains("Best by AR: PoR + 5"));
    let csv = stdout(&run(dir.path(), &["regress", "--input", "faculty.csv", "--combo", "5", "--method", "PoR", "--format", "csv"]));
    assert_eq!(csv.lines().filter(|l| l.starts_with("ar,")).count(), 1);
}

#[test]
fn regress_constant_ams_prints_perfect_grid() {
    let dir = fixture_dir();
    let text = std::fs::read_to_string(dir.path().join("faculty.csv")).unwrap();
    let flat: String = text
        .lines()
        .enumerate()
        .map(|(i, l)| {
            if i == 0 {
                return format!("{l}\n");
            }
            let mut cells: Vec<&str> = l.split(',').collect();
            cells[6] = "0";
            format!("{}\n", cells.join(","))
        })
        .collect();
    std::fs::write(dir.path().join("flat.csv"), flat).unwrap();
    let md = stdout(&run(dir.path(), &["regress", "--input", "flat.csv", "--target", "ams", "--format", "md"]));
    let ar_grid: Vec<&str> = md
        .lines()
        .skip_while(|l| !l.starts_with("| Combination"))
        .skip(2)
        .take(14)
        .collect();
    assert_eq!(ar_grid.len(), 14);
    for row in ar_grid {
        for cell in row.split('|').skip(2).filter(|c| !c.trim().is_empty()) {
            assert!(matches!(cell.trim(), "1.00" | "n/a"), "{row}");
        }
    }
}

#[test]
fn softmax_reports_accuracy_and_files() {
    let dir = fixture_dir();
    let o = run(
        dir.path(),
        &["softmax", "--input", "faculty.csv", "--train", "30", "--epochs", "200", "--seed", "3", "--format", "md", "--out-dir", "sm"],
    );
    assert_eq!(code(&o), 0);
    let line = String::from_utf8(o.stderr.clone()).unwrap();
    let (a, b) = line.trim().strip_suffix(" correct").unwrap().split_once('/').unwrap();
    assert_eq!(b.parse::<usize>().unwrap(), 10);
    assert!(a.parse::<usize>().unwrap() <= 10);
    assert!(stdout(&o).ends_with(&format!("{}\n", line.trim())));
    let sm = dir.path().join("sm");
    let loss = std::fs::read_to_string(sm.join("loss.csv")).unwrap();
    assert_eq!(loss.lines().count(), 201);
    let model: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(sm.join("model.json")).unwrap()).unwrap();
    assert_eq!(model["weights"].as_array().unwrap().len(), 4);
    assert_eq!(model["weights"][0].as_array().unwrap().len(), 5);
    assert!(sm.join("predictions.csv").exists());
}

#[test]
fn softmax_reduced_feature_set() {
    let dir = fixture_dir();
    let o = run(dir.path(), &["softmax", "--input", "faculty.csv", "--features", "pubs,cites,h"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["report"]["model"]["weights"][0].as_array().unwrap().len(), 3);
    assert_eq!(v["report"]["features"], serde_json::json!(["publications", "citations", "h_index"]));
}

#[test]
fn cluster_report_shape_and_determinism() {
    let dir = fixture_dir();
    let args = [
        "cluster", "--input", "faculty.csv", "--university", "Harvard", "--clusters", "3", "--params", "cosine", "--seed", "1",
        "--format", "md", "--out-dir", "cl",
    ];
    let a = run(dir.path(), &args);
    let b = run(dir.path(), &args);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let md = stdout(&a);
    assert_eq!(md.lines().filter(|l| l.starts_with("| Centroid ")).count(), 3);
    assert!(md.contains("|  | Quantity | Rank | Publications | Citations | H-Index | AMS | Year of PhD |"));
    assert!(md.contains("**Harvard**, *Parameters:* cosine."));
    let assignments = std::fs::read_to_string(dir.path().join("cl/assignments.csv")).unwrap();
    assert_eq!(assignments.lines().count(), 5);
    let cross = std::fs::read_to_string(dir.path().join("cl/crosstab.csv")).unwrap();
    assert_eq!(cross.lines().next(), Some("cluster,rank_1,rank_2,rank_3,rank_4"));
}

#[test]
fn synth_output_loads_as_input() {
    let dir = fixture_dir();
    let o = run(dir.path(), &["synth", "--m", "50", "--seed", "2", "--format", "csv"]);
    std::fs::write(dir.path().join("synth.csv"), &o.stdout).unwrap();
    let e = run(dir.path(), &["eda", "--input", "synth.csv"]);
    assert_eq!(code(&e), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&e)).unwrap();
    assert_eq!(v["report"]["summary"]["rows"][0]["n"], 50);
    let again = run(dir.path(), &["synth", "--m", "50", "--seed", "3", "--format", "csv"]);
    assert_ne!(o.stdout, again.stdout);
}

#[test]
fn config_from_environment() {
    let dir = fixture_dir();
    let cfg: PathBuf = dir.path().join("cohorts.toml");
    std::fs::write(&cfg, "[cohorts]\ncoastal = [\"Berkeley\", \"UCLA\", \"Harvard\"]\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_facstat"))
        .current_dir(dir.path())
        .env("FACSTAT_CONFIG", &cfg)
        .args(["eda", "--input", "faculty.csv", "--cohort", "coastal"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["report"]["summary"]["rows"][0]["n"], 12);
    assert_eq!(v["manifest"]["config"], serde_json::json!(cfg));
    assert_eq!(v["manifest"]["filters"]["cohort"], "coastal");
}

#[test]
fn manifest_is_embedded_in_every_format() {
    let dir = fixture_dir();
    let md = stdout(&run(dir.path(), &["eda", "--input", "faculty.csv", "--format", "md"]));
    assert!(md.starts_with("<!-- manifest: {"));
    let csv = stdout(&run(dir.path(), &["eda", "--input", "faculty.csv", "--format", "csv"]));
    assert!(csv.starts_with("# manifest: {"));
    assert_eq!(csv.lines().nth(1), Some("section,group,row,column,value"));
    let json: serde_json::Value = serde_json::from_str(&stdout(&run(dir.path(), &["eda", "--input", "faculty.csv", "--seed", "9"]))).unwrap();
    let m = &json["manifest"];
    assert_eq!(m["tool"], "facstat");
    assert_eq!(m["subcommand"], "eda");
    assert_eq!(m["seed"], 9);
    assert_eq!(m["format"], "json");
    assert_eq!(m["input"], "faculty.csv");
}
