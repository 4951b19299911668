use std::fs;
use std::path::Path;
use std::process::Command;

use pear::config::TrainConfig;
use pear::experiments::{Experiment, RunArtifact};
use pear::io::read_json;
use pear_core::explain::ExplainerConfig;
use pear_core::metrics::DisagreementMatrix;
use serde_json::Value;

fn tiny() -> TrainConfig {
    TrainConfig {
        synthetic_samples: 300,
        hidden: vec![6],
        epochs: Some(2),
        trials: 2,
        eval_points: Some(15),
        explainers: ExplainerConfig {
            lime_samples: 80,
            shap_coalitions: 64,
            intgrad_steps: 8,
            smoothgrad_samples: 4,
            ..ExplainerConfig::default()
        },
        planes: 2,
        grid_resolution: 7,
        lambdas: vec![0.0, 0.5],
        decays: vec![0.0002, 0.2],
        mus: vec![0.0, 1.0],
        ..TrainConfig::default()
    }
}

fn pear(args: &[&str]) -> (i32, Value) {
    let out = Command::new(env!("CARGO_BIN_EXE_pear"))
        .args(args)
        .output()
        .unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    let json = serde_json::from_str(text.trim()).unwrap_or(Value::Null);
    (out.status.code().unwrap(), json)
}

fn header(path: &Path) -> Vec<String> {
    let text = fs::read_to_string(path).unwrap();
    text.lines()
        .next()
        .unwrap()
        .split(',')
        .map(str::to_string)
        .collect()
}

#[test]
fn invalid_config_reports_every_problem_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(
        &cfg,
        r#"{"trials": 0, "k": 0, "explainer_pair": ["lime", "grad"]}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let (code, json) = pear(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--lambda",
        "1.5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 1);
    assert_eq!(json["error"], "config");
    assert_eq!(json["problems"].as_array().unwrap().len(), 4, "{json}");
    assert!(!out.exists(), "nothing is written before validation passes");
}

#[test]
fn unknown_fields_and_missing_files_are_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("typo.json");
    fs::write(&cfg, r#"{"lamda": 0.5}"#).unwrap();
    let (code, json) = pear(&["train", "--config", cfg.to_str().unwrap()]);
    assert_eq!((code, json["error"].as_str()), (1, Some("json")));

    let cfg = dir.path().join("csv.json");
    fs::write(&cfg, r#"{"dataset": "electricity", "data_dir": "/nonexistent"}"#).unwrap();
    let (code, json) = pear(&["train", "--config", cfg.to_str().unwrap()]);
    assert_eq!((code, json["error"].as_str()), (1, Some("io")));

    let (code, json) = pear(&["frobnicate"]);
    assert_eq!((code, json["error"].as_str()), (2, Some("usage")));
}

#[test]
fn train_writes_checkpoints_history_and_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let mut exp = Experiment::new(tiny(), dir.path()).unwrap();
    let run = exp.run_train().unwrap();
    assert_eq!(run.checkpoints, ["model_trial0.json", "model_trial1.json"]);
    assert_eq!(run.seeds.len(), 2);
    assert_ne!(run.seeds[0].init, run.seeds[1].init);
    let stored: RunArtifact = read_json(&dir.path().join("run.json")).unwrap();
    assert_eq!(stored, run);
    let cols = header(&dir.path().join("history.csv"));
    assert!(cols.contains(&"config_hash".to_string()) && cols.contains(&"seed".to_string()));
    let prov: Value = read_json(&dir.path().join("provenance.json")).unwrap();
    assert_eq!(prov["provenance"]["train_count"], 225);
    assert_eq!(prov["provenance"]["test_count"], 75);
    assert_eq!(prov["config_hash"], run.config_hash);
}

#[test]
fn csv_dataset_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("a,b,c,label\n");
    for i in 0..120 {
        let (a, b) = ((i % 7) as f64 - 3.0, (i % 5) as f64 * 0.5);
        text.push_str(&format!(
            "{a},{b},{},{}\n",
            (i % 3) as f64,
            usize::from(a + b > 0.0)
        ));
    }
    let csv = dir.path().join("toy.csv");
    fs::write(&csv, text).unwrap();
    let cfg = TrainConfig {
        dataset: "toy".into(),
        csv_path: Some(csv.clone()),
        train_count: Some(90),
        trials: 1,
        k: 3,
        ..tiny()
    };
    let mut exp = Experiment::new(cfg, dir.path().join("out")).unwrap();
    let matrices = exp.run_matrix().unwrap();
    assert_eq!(matrices.len(), 1);
    let prov: Value = read_json(&dir.path().join("out/provenance.json")).unwrap();
    assert_eq!(prov["provenance"]["source"], csv.display().to_string());
    assert_eq!(prov["feature_names"], serde_json::json!(["a", "b", "c"]));
}

#[test]
fn matrix_is_symmetric_with_unit_diagonal() {
    let dir = tempfile::tempdir().unwrap();
    let mut exp = Experiment::new(TrainConfig { trials: 1, ..tiny() }, dir.path()).unwrap();
    exp.run_matrix().unwrap();
    let stored: Vec<DisagreementMatrix> = read_json(&dir.path().join("matrix.json")).unwrap();
    let m = &stored[0];
    for i in 0..m.explainers.len() {
        assert_eq!(m.means[i][i], Some(1.0));
        for j in 0..m.explainers.len() {
            assert_eq!(m.means[i][j], m.means[j][i]);
        }
    }
    assert_eq!(
        header(&dir.path().join("matrix.csv")),
        [
            "trial",
            "metric",
            "k",
            "explainer_a",
            "explainer_b",
            "mean",
            "std_err",
            "count",
            "config_hash",
            "seed"
        ]
    );
}

#[test]
fn mu_ablation_counts_pathways() {
    let dir = tempfile::tempdir().unwrap();
    let mut exp = Experiment::new(tiny(), dir.path()).unwrap();
    let rows = exp.mu_ablation().unwrap();
    assert_eq!(rows.len(), 4);
    for r in &rows {
        if r.lambda == 0.0 {
            assert_eq!((r.pearson_calls, r.spearman_calls), (0, 0));
        } else if r.mu == 1.0 {
            assert!(r.pearson_calls == 0 && r.spearman_calls > 0);
        } else {
            assert!(r.pearson_calls > 0 && r.spearman_calls == 0);
        }
    }
}

#[test]
fn junk_reports_both_chance_baselines() {
    let dir = tempfile::tempdir().unwrap();
    let mut exp = Experiment::new(TrainConfig { trials: 1, ..tiny() }, dir.path()).unwrap();
    let rows = exp.junk().unwrap();
    assert_eq!(rows.len(), 6);
    for r in &rows {
        assert_eq!((r.real_features, r.junk_features), (7, 7));
        assert!((r.chance_hypergeometric - (1.0 - 21.0 / 2002.0)).abs() < 1e-12);
        assert!((r.chance_monte_carlo - r.chance_hypergeometric).abs() < 0.005);
    }
    let cfg: TrainConfig = read_json(&dir.path().join("config.json")).unwrap();
    assert!(cfg.junk_features);
}

#[test]
fn sweeps_cover_their_grids() {
    let dir = tempfile::tempdir().unwrap();
    let mut exp = Experiment::new(tiny(), dir.path()).unwrap();
    let lambdas = exp.lambda_sweep().unwrap();
    assert_eq!(lambdas.iter().map(|r| r.lambda).collect::<Vec<_>>(), [0.0, 0.5]);
    assert!(lambdas
        .iter()
        .all(|r| r.trials == 2 && r.linear_fit_mae_mean.is_none()));
    let wd = exp.weight_decay_sweep().unwrap();
    assert_eq!(
        wd.iter().map(|r| r.weight_decay).collect::<Vec<_>>(),
        [0.0002, 0.2]
    );
    assert!(wd
        .iter()
        .all(|r| r.lambda == 0.0 && r.linear_fit_mae_mean.is_some()));
    let trials = fs::read_to_string(dir.path().join("wd_sweep_trials.csv")).unwrap();
    assert_eq!(trials.lines().count(), 5);
}

#[test]
fn planes_use_test_point_anchors_and_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let mut exp = Experiment::new(TrainConfig { trials: 1, ..tiny() }, dir.path().join("train")).unwrap();
    exp.run_train().unwrap();
    let ckpt = dir.path().join("train/model_trial0.json");
    let cfg = TrainConfig {
        checkpoint: Some(ckpt),
        ..tiny()
    };
    let mut exp = Experiment::new(cfg, dir.path().join("planes")).unwrap();
    let fit = exp.planes().unwrap();
    assert_eq!(fit.planes.len(), 2);
    let surface = fs::read_to_string(dir.path().join("planes/plane_0.csv")).unwrap();
    assert_eq!(surface.lines().count(), 1 + 7 * 7);
    let linfit = exp.linfit().unwrap();
    assert_eq!(linfit.len(), 1, "a checkpoint is one model");
    assert!((linfit[0].mean_mae - fit.mean_mae).abs() < 1e-15);
}

#[test]
fn training_verbs_refuse_a_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    for verb in ["train", "sweep-lambda", "sweep-wd", "ablate-mu", "junk"] {
        let (code, json) = pear(&[verb, "--checkpoint", "model.json", "--out", out.to_str().unwrap()]);
        assert_eq!((code, json["error"].as_str()), (1, Some("config")), "{verb}");
    }
    assert!(!out.exists());
}
