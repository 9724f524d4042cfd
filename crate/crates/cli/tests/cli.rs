use std::fs::File;
use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use vrf_sentinel::groupfeatures::{manifest_path, read_features, read_manifest, EventLabel, FeatureConfig, GroupKey};
use vrf_sentinel::modmatrix::{csv_to_matrix, Interval};
use vrf_sentinel::synthgen::{labeled_group_features, plan_scenario, ScenarioConfig};
use vrf_sentinel::vrf_io::{csv_to_changes, parse_date, ChangeType};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vrf-sentinel"))
        .args(args)
        .env("VRF_SENTINEL_LOG", "error")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) {
    let out = bin(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn p(dir: &Path, rel: &str) -> String {
    dir.join(rel).display().to_string()
}

fn small_scenario(dir: &Path) {
    ok(&[
        "--seed", "11", "synth", "--out", &p(dir, "syn"), "--n-locales", "6", "--n-intervals", "20",
        "--population-median", "300", "--population-min", "80", "--rate-scale", "5", "--labels", "12",
    ]);
    ok(&["diff", "--snapshots", &p(dir, "syn/snapshots"), "--out", &p(dir, "diff")]);
}

#[test]
fn usage_errors_exit_2() {
    let out = bin(&["detect", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    let out = bin(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let out = bin(&["detect", "--matrix", &p(dir.path(), "missing.csv"), "--method", "nmf", "--out", &p(dir.path(), "o")]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_values_and_bad_data() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["synth", "--out", &p(d, "syn"), "--n-locales", "5", "--n-intervals", "12", "--matrix-only"]);
    let m = p(d, "syn/matrix_deactivation.csv");
    let out = bin(&["detect", "--matrix", &m, "--method", "cl_std", "--window", "4", "--out", &p(d, "o")]);
    assert_eq!(out.status.code(), Some(2), "even window is a usage error");
    let out = bin(&["detect", "--matrix", &m, "--method", "median", "--out", &p(d, "o")]);
    assert_eq!(out.status.code(), Some(2));
    let out = bin(&["detect", "--matrix", &p(d, "syn/truth.json"), "--method", "nmf", "--out", &p(d, "o")]);
    assert_eq!(out.status.code(), Some(3), "unparseable matrix is a data error");
    std::fs::create_dir(d.join("empty")).unwrap();
    let out = bin(&["diff", "--snapshots", &p(d, "empty"), "--out", &p(d, "o")]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn detect_records_parameters_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["--seed", "9", "synth", "--out", &p(d, "syn"), "--n-locales", "12", "--n-intervals", "30", "--matrix-only"]);
    ok(&["--seed", "4", "detect", "--matrix", &p(d, "syn/matrix_deactivation.csv"), "--method", "nmf", "--k", "5", "--out", &p(d, "nmf")]);
    let scores = std::fs::read_to_string(d.join("nmf/scores_nmf.csv")).unwrap();
    let params = scores.lines().next().unwrap();
    assert!(params.starts_with("# method=nmf;"));
    assert!(params.split(';').any(|kv| kv == "k=5"), "{params}");

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("nmf/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 4);
    assert_eq!(manifest["subcommand"], "detect");
    assert_eq!(manifest["config"]["k"], 5);
    assert_eq!(manifest["config"]["method"], "nmf");
    assert_eq!(manifest["converged"], true);
    let outputs = manifest["outputs"].as_object().unwrap();
    for name in ["scores_nmf.csv", "ranked_nmf.csv", "scores_nmf.svg"] {
        assert!(outputs.contains_key(name), "{name}");
    }
    assert_eq!(manifest["inputs"].as_object().unwrap().len(), 1);

    ok(&["detect", "--matrix", &p(d, "syn/matrix_deactivation.csv"), "--method", "temporal_iqr", "--out", &p(d, "t")]);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("t/manifest.json")).unwrap()).unwrap();
    assert!(manifest["converged"].is_null());
}

#[test]
fn replay_refuses_changed_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["synth", "--out", &p(d, "syn"), "--n-locales", "6", "--n-intervals", "16", "--matrix-only"]);
    let m = p(d, "syn/matrix_deactivation.csv");
    ok(&["detect", "--matrix", &m, "--method", "global_std", "--out", &p(d, "g")]);
    ok(&["replay", "--manifest", &p(d, "g/manifest.json"), "--out", &p(d, "g2"), "--check"]);
    ok(&["synth", "--seed", "1", "--out", &p(d, "syn"), "--n-locales", "6", "--n-intervals", "16", "--matrix-only"]);
    let out = bin(&["replay", "--manifest", &p(d, "g/manifest.json"), "--out", &p(d, "g3")]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("changed"));
}

#[test]
fn synth_diff_matrix_agree_with_the_plan() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_scenario(d);
    ok(&["matrix", "--changes", &p(d, "diff/changes.csv"), "--population", &p(d, "diff/population.csv"), "--out", &p(d, "m")]);
    let config: ScenarioConfig =
        serde_json::from_str(&std::fs::read_to_string(d.join("syn/scenario.json")).unwrap()).unwrap();
    let plan = plan_scenario(&config).unwrap();
    for ct in ChangeType::ALL {
        let built = csv_to_matrix(d.join(format!("m/matrix_{ct}.csv"))).unwrap();
        let expected = plan.matrix(ct).unwrap();
        assert_eq!(built.raw_counts(), expected.raw_counts(), "{ct}");
        assert_eq!(built.populations(), expected.populations(), "{ct}");
        assert!(d.join(format!("m/matrix_{ct}.svg")).exists());
    }
    let changes = csv_to_changes(d.join("diff/changes.csv")).unwrap();
    assert_eq!(
        changes.iter().filter(|c| c.change_type == ChangeType::Registration).count() as u64,
        plan.truth().inserted_voters
    );
}

fn read_labels(path: &Path) -> Vec<(GroupKey, EventLabel)> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|row| {
            let row = row.unwrap();
            (
                GroupKey {
                    locale: row[0].to_string(),
                    interval: Interval {
                        start: parse_date(&row[1]).unwrap(),
                        end: parse_date(&row[2]).unwrap(),
                    },
                    change_type: row[3].parse().unwrap(),
                },
                row[4].parse().unwrap(),
            )
        })
        .collect()
}

#[test]
fn features_from_files_match_features_from_the_generator() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_scenario(d);
    ok(&[
        "features", "--snapshots", &p(d, "syn/snapshots"), "--changes", &p(d, "diff/changes.csv"),
        "--labels", &p(d, "syn/labels.csv"), "--out", &p(d, "f"),
    ]);
    let csv_path = d.join("f/features.csv");
    let manifest = read_manifest(manifest_path(&csv_path)).unwrap();
    let from_files = read_features(File::open(&csv_path).unwrap(), &manifest).unwrap();

    let config: ScenarioConfig =
        serde_json::from_str(&std::fs::read_to_string(d.join("syn/scenario.json")).unwrap()).unwrap();
    let plan = plan_scenario(&config).unwrap();
    let labels = read_labels(&d.join("syn/labels.csv"));
    assert_eq!(labels.len(), 12);
    let direct = labeled_group_features(&plan, &labels, FeatureConfig::default()).unwrap();
    assert_eq!(from_files.len(), direct.len());
    for (a, b) in from_files.iter().zip(&direct) {
        assert_eq!(a.key, b.key);
        assert_eq!(a.label, b.label);
        assert_eq!(a.n_voters, b.n_voters);
        for (x, y) in a.features.iter().zip(&b.features) {
            assert!(x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan()), "{:?}: {x} vs {y}", a.key);
        }
    }

    ok(&["--seed", "2", "train", "--features", &p(d, "f/features.csv"), "--holdout", "0.25", "--out", &p(d, "t")]);
    ok(&["predict", "--model", &p(d, "t/model.json"), "--features", &p(d, "f/features.csv"), "--out", &p(d, "pr")]);
    let predictions = std::fs::read_to_string(d.join("pr/predictions.csv")).unwrap();
    assert_eq!(predictions.lines().count(), 13);
    let confusion = std::fs::read_to_string(d.join("t/confusion.csv")).unwrap();
    let total: u64 = confusion
        .lines()
        .skip(1)
        .flat_map(|l| l.split(',').skip(1).map(|v| v.parse::<u64>().unwrap()).collect::<Vec<_>>())
        .sum();
    assert_eq!(total, 3);
}

#[test]
fn default_shape_pipeline_runs_within_five_minutes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let start = Instant::now();
    ok(&["synth", "--out", &p(d, "syn"), "--matrix-only"]);
    let m = p(d, "syn/matrix_deactivation.csv");
    ok(&["detect", "--matrix", &m, "--method", "cl_std", "--window", "5", "--out", &p(d, "det")]);
    ok(&["evaluate", "--matrix", &m, "--method", "cl_std", "--window", "5", "--truth", &p(d, "syn/truth.json"), "--out", &p(d, "ev")]);
    assert!(start.elapsed() < Duration::from_secs(300), "{:?}", start.elapsed());

    let ranks = std::fs::read_to_string(d.join("ev/planted_ranks.csv")).unwrap();
    let row = ranks.lines().nth(1).unwrap();
    let fields: Vec<&str> = row.split(',').collect();
    assert_eq!(fields[0], "cl_std_5");
    assert_eq!(fields[2], "14751");
    assert!(d.join("ev/auc_summary.csv").exists());
    assert!(d.join("ev/sweep_deactivation.svg").exists());
}
