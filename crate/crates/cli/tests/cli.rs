#[path = "../../core/tests/oracles/mod.rs"]
mod oracles;

use std::fs;
use std::path::Path;
use std::process::Command;

use ndarray::Array3;
use tsfed_cli::config::Selector;
use tsfed_cli::*;
use tsfed_core::data::{save_csv, TimeSeriesDataset};
use tsfed_core::eval::TpdTask;

fn experiment(dir: &Path, body: &str) -> Experiment {
    let text = format!("{body}\n[output]\ndir = {:?}\n", dir.to_str().unwrap());
    Experiment::from_toml(&text, dir).unwrap()
}

const SMALL: &str = r#"
[dataset]
kind = "sine2"
seed = 4
n_per_class = 8
steps = 20

[train]
iterations = 12
batch_size = 8
checkpoint_every = 4
"#;

fn tsfed(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_tsfed")).args(args).output().unwrap()
}

#[test]
fn default_sine2_has_2048_samples_and_reruns_byte_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let exp = experiment(tmp.path(), "[dataset]\nkind = \"sine2\"\nseed = 0\n");
    let first = cmd_gen_data(&exp).unwrap();
    assert_eq!(first.manifest.dataset.samples, 2048);
    let read = |name: &str| fs::read(tmp.path().join(name)).unwrap();
    let before: Vec<Vec<u8>> = ["data.csv", "data.meta.json", "gen-data.manifest.json"].iter().map(|n| read(n)).collect();
    cmd_gen_data(&exp).unwrap();
    let after: Vec<Vec<u8>> = ["data.csv", "data.meta.json", "gen-data.manifest.json"].iter().map(|n| read(n)).collect();
    assert_eq!(before, after);
}

#[test]
fn config_errors_exit_with_code_2() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "[dataset]\nkind = \"sine9\"\nseed = 0\n").unwrap();
    assert_eq!(tsfed(&["gen-data", bad.to_str().unwrap()]).status.code(), Some(2));

    let missing_seed = tmp.path().join("seedless.toml");
    fs::write(&missing_seed, "[dataset]\nkind = \"sine2\"\n").unwrap();
    assert_eq!(tsfed(&["train", missing_seed.to_str().unwrap()]).status.code(), Some(2));

    let both = format!("{SMALL}\n[dp]\nsigma = 1.0\nepsilon = 10.0\ndelta = 1e-3\n");
    assert!(matches!(Experiment::from_toml(&both, "."), Err(CliError::Config(_))));
    let neither = format!("{SMALL}\n[dp]\nclip = 1.0\n");
    assert!(matches!(Experiment::from_toml(&neither, "."), Err(CliError::Config(_))));
    assert_eq!(tsfed(&["account", "--sigma", "1"]).status.code(), Some(2));
}

#[test]
fn infeasible_budget_exits_with_code_4() {
    let out = tsfed(&["calibrate", "--epsilon", "0.001", "--delta", "1e-5", "--gamma", "0.5", "--steps", "100", "--sigma-max", "1"]);
    assert_eq!(out.status.code(), Some(4));
    let tmp = tempfile::tempdir().unwrap();
    let exp = experiment(tmp.path(), &format!("{SMALL}\n[dp]\nepsilon = 0.001\ndelta = 1e-5\nsigma_range = [0.01, 1.0]\n"));
    let err = cmd_train(&exp).unwrap_err();
    assert_eq!(err.exit_code(), 4);
}

#[test]
fn local_only_training_logs_no_messages() {
    let tmp = tempfile::tempdir().unwrap();
    let body = SMALL.replace("[train]", "[train]\ntopology = \"local_only\"");
    let run = cmd_train(&experiment(tmp.path(), &body)).unwrap();
    assert_eq!(run.manifest.training.unwrap().messages, 0);
}

#[test]
fn budget_run_records_calibration_within_budget() {
    let tmp = tempfile::tempdir().unwrap();
    let exp = experiment(tmp.path(), &format!("{SMALL}\n[dp]\nclip = 1.0\nepsilon = 10.0\ndelta = 1e-3\n"));
    let run = cmd_train(&exp).unwrap();
    let p = run.manifest.privacy.unwrap();
    let achieved = p.achieved.unwrap();
    assert!(achieved.epsilon <= 10.0, "{achieved:?}");
    assert_eq!(p.steps, 12);
    assert_eq!(p.sampling_rate, 0.5);
    let report = p.report.unwrap();
    assert_eq!(report.generator_external, achieved);
    assert!(report.discriminator_external.epsilon <= report.generator_external.epsilon);
    assert!(tmp.path().join("privacy.json").exists());
}

#[test]
fn training_reruns_are_bit_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let body = format!("{SMALL}\n[dp]\nsigma = 0.5\ndelta = 1e-5\n");
    let ra = cmd_train(&experiment(a.path(), &body)).unwrap();
    let rb = cmd_train(&experiment(b.path(), &body)).unwrap();
    for name in ["history.csv", "best_generators.json", "final_generators.json"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
    // Only the output directory (inside the hashed config) differs.
    let mut ma = ra.manifest;
    ma.config_sha256 = rb.manifest.config_sha256.clone();
    assert_eq!(ma, rb.manifest);
}

#[test]
fn run_directory_is_self_describing() {
    let tmp = tempfile::tempdir().unwrap();
    let exp = experiment(tmp.path(), SMALL);
    let run = cmd_train(&exp).unwrap();
    let copy = fs::read_to_string(tmp.path().join(CONFIG_COPY)).unwrap();
    assert_eq!(copy, exp.source);
    let manifest = Manifest::from_json(&fs::read_to_string(tmp.path().join("train.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest, run.manifest);
    // Rerunning from the copy alone reproduces the history.
    let history = fs::read(tmp.path().join("history.csv")).unwrap();
    cmd_train(&Experiment::from_toml(&copy, tmp.path()).unwrap()).unwrap();
    assert_eq!(fs::read(tmp.path().join("history.csv")).unwrap(), history);
}

#[test]
fn csv_dataset_trains_like_the_generated_one() {
    let (gen, direct) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    cmd_gen_data(&experiment(gen.path(), SMALL)).unwrap();
    let csv_body = SMALL.replace("kind = \"sine2\"", &format!("kind = \"csv\"\npath = {:?}", gen.path().join("data.csv")));
    let a = tempfile::tempdir().unwrap();
    cmd_train(&experiment(a.path(), &csv_body)).unwrap();
    cmd_train(&experiment(direct.path(), SMALL)).unwrap();
    assert_eq!(fs::read(a.path().join("history.csv")).unwrap(), fs::read(direct.path().join("history.csv")).unwrap());
}

#[test]
fn identity_synthesis_scores_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let body = format!("{SMALL}\n[eval]\nmetrics = [\"awd\", \"amplitude_awd\", \"tpd\"]\ntask = \"classify\"\ntpd = {{ epochs = 5 }}\n");
    let exp = experiment(tmp.path(), &body);
    assert_eq!(exp.config.eval.task, TpdTask::Classify);
    cmd_evaluate(&exp, &Synthesis::Identity).unwrap();
    let reports: Vec<tsfed_core::eval::MetricReport> =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("eval_report.json")).unwrap()).unwrap();
    for r in &reports {
        assert_eq!(r.value, 0.0, "{}", r.metric);
    }
    let cells = fs::read_to_string(tmp.path().join("awd_cells.csv")).unwrap();
    assert_eq!(cells.lines().count(), 1 + 2 * 20);
    let pca = fs::read_to_string(tmp.path().join("pca.csv")).unwrap();
    assert_eq!(pca.lines().count(), 1 + 2 * 16);
}

#[test]
fn evaluate_reads_the_trained_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let exp = experiment(tmp.path(), SMALL);
    cmd_train(&exp).unwrap();
    cmd_evaluate(&exp, &Synthesis::Checkpoint(None)).unwrap();
    let reports: Vec<tsfed_core::eval::MetricReport> =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("eval_report.json")).unwrap()).unwrap();
    let names: Vec<&str> = reports.iter().map(|r| r.metric.as_str()).collect();
    assert_eq!(names, ["awd", "amplitude_awd", "sine_mae", "amplitude_ratio_median"]);
    assert!(reports.iter().all(|r| r.value.is_finite()));
    let missing = Synthesis::Checkpoint(Some(tmp.path().join("nope.json")));
    assert_eq!(cmd_evaluate(&exp, &missing).unwrap_err().exit_code(), 2);
}

#[test]
fn account_matches_the_oracle_at_order_two() {
    let args = AccountArgs { sigma: 1.0, gamma: 0.01, steps: 1, delta: 1e-5, orders: Some(vec![2]), curve: None };
    let csv = cmd_account(&args).unwrap();
    let mut oracle = oracles::rdp::Oracle::new();
    for (curve, scale) in [("generator", 1.0), ("discriminator", 0.5)] {
        let row = csv.lines().find(|l| l.starts_with(&format!("{curve},2,"))).unwrap();
        let value: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
        let expect = oracle.composed(scale, 0.01, 1, &[2])[0];
        assert!(((value - expect) / expect).abs() < 1e-9, "{curve}: {value} vs {expect}");
    }
    let disc: f64 = csv.lines().find(|l| l.starts_with("discriminator,2,")).unwrap().split(',').nth(2).unwrap().parse().unwrap();
    assert!((disc - 5.4355e-4).abs() < 5e-8, "{disc}");
    assert!(csv.contains("\n\ncurve,surface,epsilon,delta,order\n"));
}

#[test]
fn calibrate_round_trips_through_the_binary() {
    let out = tsfed(&["calibrate", "--epsilon", "10", "--delta", "1e-3", "--gamma", "0.05", "--steps", "2000"]);
    assert!(out.status.success());
    let c: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let eps = c["achieved"]["epsilon"].as_f64().unwrap();
    assert!((9.5..=10.0).contains(&eps), "{eps}");

    let args = CalibrateArgs {
        epsilon: 10.0,
        delta: 1e-3,
        gamma: 0.05,
        steps: None,
        sigma: Some(c["sigma"].as_f64().unwrap()),
        max_steps: Some(10_000),
        sigma_range: (0.01, 1000.0),
        curve: Default::default(),
    };
    assert!(cmd_calibrate(&args).unwrap().steps >= 2000);
}

#[test]
fn audit_outlier_on_the_toy_set_echoes_the_far_sample() {
    let tmp = tempfile::tempdir().unwrap();
    let values = [0.0, 0.1, 5.0];
    let data = Array3::from_shape_fn((3, 1, 2), |(n, _, _)| values[n]);
    let ds = TimeSeriesDataset::new(data, None).unwrap();
    save_csv(&ds, tmp.path().join("toy.csv")).unwrap();
    fs::write(tmp.path().join("toy.meta.json"), ds.describe().to_json()).unwrap();
    let body = r#"
[dataset]
kind = "csv"
path = "toy.csv"
seed = 0

[audit]
selector = "outlier"
trainer = "copy"
params = { shadow_pairs = 2, k = 1, m = 3, rounds = 10 }
"#;
    let exp = experiment(tmp.path(), body);
    assert_eq!(exp.config.audit.selector, Selector::Outlier);
    cmd_audit(&exp).unwrap();
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("audit_report.json")).unwrap()).unwrap();
    assert_eq!(report["target_index"], 2);
    assert_eq!(report["auc"], 1.0);
    let features = fs::read_to_string(tmp.path().join("audit_features.csv")).unwrap();
    assert_eq!(features.lines().count(), 1 + 4);
}

#[test]
fn output_root_override_relocates_relative_dirs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("exp.toml");
    fs::write(&cfg, format!("{SMALL}\n[output]\ndir = \"nested/run\"\n")).unwrap();
    let root = tmp.path().join("root");
    let out = Command::new(env!("CARGO_BIN_EXE_tsfed"))
        .args(["gen-data", cfg.to_str().unwrap()])
        .env(config::OUTPUT_ROOT_VAR, &root)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(root.join("nested/run/data.csv").exists());
}
