use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mimeforge")).args(args).env("RUST_LOG", "error").output().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn tiny() -> Value {
    json!({
        "cylinder": {"rows": 4, "cols": 6, "col_spacing_rad": std::f64::consts::PI / 6.0, "raw_duration_ms": 32.0},
        "dataset": {"mu_count": 2, "samples": 12,
            "grid": {"fibre_count": [150.0, 300.0], "nmj": [0.5], "velocity": [3.0, 3.5, 4.0], "length_ratio": [1.0]}},
        "model": {"rows": 4, "cols": 6, "samples": 12, "latent": 4, "cond_proj": 5,
            "enc_channels": [3, 3, 4, 4, 4], "dec_channels": [4, 3, 3, 2], "up_channels": 2, "gate_hidden": 6,
            "disc_channels": [3, 3, 4, 4, 4]},
        "train": {"lr": 1e-4, "batch": 4, "epochs": 2, "iterations_per_epoch": 3},
        "synth": {"pool": {"n": 4}, "excitation": {"knots": [[0.0, 0.0], [0.5, 0.8], [1.0, 0.0]], "duration_s": 0.5, "rate_hz": 2000.0}},
        "eval": {"informativeness": false}
    })
}

struct Fixture {
    dir: TempDir,
    config: PathBuf,
}

impl Fixture {
    fn new(cfg: Value) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let config = dir.path().join("run.json");
        std::fs::write(&config, cfg.to_string()).unwrap();
        Fixture { dir, config }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str]) -> Output {
        let mut a = vec!["--config", p(&self.config)];
        a.extend(args);
        run(&a)
    }

    fn ok(&self, args: &[&str]) -> Output {
        let out = self.run(args);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        out
    }

    fn generate(&self) -> PathBuf {
        let out = self.path("gen");
        self.ok(&["teacher-gen", "--out", p(&out)]);
        out.join("dataset.bmds")
    }
}

fn read(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn usage_errors_exit_64_and_bad_values_exit_3() {
    assert_eq!(run(&[]).status.code(), Some(64));
    assert_eq!(run(&["train", "--bogus"]).status.code(), Some(64));
    assert!(run(&["--help"]).status.success());
    let f = Fixture::new(tiny());
    let out = f.run(&["train", "--out", p(&f.path("t"))]);
    assert_eq!(out.status.code(), Some(64));
    assert!(String::from_utf8_lossy(&out.stderr).contains("category=usage"));
    let out = f.run(&["sample", "--checkpoint", "x", "--conditions", "1,2,3", "--out", p(&f.path("s"))]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn unknown_config_fields_are_rejected() {
    let mut cfg = tiny();
    cfg["train"]["learning_rate"] = json!(0.1);
    let f = Fixture::new(cfg);
    let out = f.run(&["teacher-gen", "--out", p(&f.path("g"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("category=config"));
}

#[test]
fn invalid_config_values_are_rejected() {
    let mut cfg = tiny();
    cfg["train"]["batch"] = json!(0);
    let f = Fixture::new(cfg);
    assert_eq!(f.run(&["teacher-gen", "--out", p(&f.path("g"))]).status.code(), Some(2));
}

#[test]
fn missing_inputs_exit_with_io_code() {
    let f = Fixture::new(tiny());
    let out = f.run(&["train", "--dataset", p(&f.path("absent.bmds")), "--out", p(&f.path("t"))]);
    assert_eq!(out.status.code(), Some(9));
}

#[test]
fn corrupt_dataset_exits_7() {
    let f = Fixture::new(tiny());
    let data = f.generate();
    let bytes = std::fs::read(&data).unwrap();
    let cut = f.path("cut.bmds");
    std::fs::write(&cut, &bytes[..bytes.len() - 9]).unwrap();
    let out = f.run(&["train", "--dataset", p(&cut), "--out", p(&f.path("t"))]);
    assert_eq!(out.status.code(), Some(7));
    assert!(String::from_utf8_lossy(&out.stderr).contains("category=corrupt"));
}

#[test]
fn checkpoint_from_another_architecture_exits_8() {
    let f = Fixture::new(tiny());
    let data = f.generate();
    f.ok(&["train", "--dataset", p(&data), "--out", p(&f.path("t"))]);
    let mut other = tiny();
    other["model"]["latent"] = json!(5);
    let g = Fixture::new(other);
    let ck = f.path("t/model.bmck");
    let out = g.run(&["sample", "--checkpoint", p(&ck), "--conditions", "0,0,0,0,0,0", "--out", p(&g.path("s"))]);
    assert_eq!(out.status.code(), Some(8));
}

#[test]
fn grid_mismatch_is_a_shape_error() {
    let f = Fixture::new(tiny());
    let data = f.generate();
    let mut other = tiny();
    other["model"]["cols"] = json!(8);
    other["cylinder"]["cols"] = json!(8);
    let g = Fixture::new(other);
    let out = g.run(&["train", "--dataset", p(&data), "--out", p(&g.path("t"))]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn manifest_records_inputs_and_outputs() {
    let f = Fixture::new(tiny());
    let data = f.generate();
    let gen = read(&f.path("gen/manifest.json"));
    assert_eq!(gen["command"], "teacher-gen");
    let outputs: Vec<&str> = gen["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    for name in ["dataset.bmds", "conditions.csv", "motor_units.json", "split.json"] {
        assert!(outputs.contains(&name), "{name} missing from {outputs:?}");
    }
    f.ok(&["train", "--dataset", p(&data), "--out", p(&f.path("t"))]);
    let m = read(&f.path("t/manifest.json"));
    let input = &m["inputs"][1];
    assert_eq!(m["inputs"][0]["path"], p(&f.config));
    let digest: String = Sha256::digest(std::fs::read(&data).unwrap()).iter().map(|b| format!("{b:02x}")).collect();
    assert_eq!(input["sha256"], digest.as_str());
    assert_eq!(m["config"]["train"]["batch"], 4);
    assert!(f.path("t/config.json").exists());
    let summary = read(&f.path("t/train.json"));
    assert_eq!(summary["iterations"], 6);
    assert!(f.path("t/epoch_000.bmck").exists() && f.path("t/epoch_001.bmck").exists());
}

#[test]
fn generation_commands_write_their_artifacts() {
    let f = Fixture::new(tiny());
    let data = f.generate();
    f.ok(&["train", "--dataset", p(&data), "--out", p(&f.path("t"))]);
    let ck = f.path("t/model.bmck");
    let (ck, data) = (p(&ck), p(&data));
    f.ok(&["morph", "--checkpoint", ck, "--dataset", data, "--index", "1", "--out", p(&f.path("m"))]);
    assert!(f.path("m/morph.bmds").exists());
    f.ok(&["sample", "--checkpoint", ck, "--conditions", "0.5,0.5,0.5,0.5,0.5,0.5", "--count", "2", "--out", p(&f.path("s"))]);
    assert_eq!(std::fs::read_to_string(f.path("s/steps.csv")).unwrap().lines().count(), 3);
    f.ok(&["sweep", "--checkpoint", ck, "--dataset", data, "--index", "0", "--from", "0,0,0,0,0,0", "--to", "1,1,1,1,1,1", "--steps", "4", "--out", p(&f.path("w"))]);
    assert_eq!(std::fs::read_to_string(f.path("w/steps.csv")).unwrap().lines().count(), 5);
    f.ok(&["traverse", "--checkpoint", ck, "--dataset", data, "--out", p(&f.path("v"))]);
    assert!(f.path("v/curve.csv").exists());
    f.ok(&["synth", "--dataset", data, "--csv", "--out", p(&f.path("e"))]);
    assert!(f.path("e/emg.bmeg").exists() && f.path("e/emg.csv").exists());
    f.ok(&["eval", "--checkpoint", ck, "--dataset", data, "--out", p(&f.path("x"))]);
    let ev = read(&f.path("x/eval.json"));
    assert!(ev["train_nrmse"].as_f64().unwrap().is_finite());
}

#[test]
fn repeated_runs_are_identical() {
    let f = Fixture::new(tiny());
    let data = f.generate();
    let digest = |dir: &Path, name: &str| -> String {
        Sha256::digest(std::fs::read(dir.join(name)).unwrap()).iter().map(|b| format!("{b:02x}")).collect()
    };
    let mut runs = Vec::new();
    for r in 0..2 {
        let out = f.path(&format!("t{r}"));
        f.ok(&["train", "--dataset", p(&data), "--out", p(&out)]);
        runs.push((digest(&out, "model.bmck"), digest(&out, "train.json")));
    }
    assert_eq!(runs[0], runs[1]);
    let a = f.path("t0/model.bmck");
    f.ok(&["--threads", "1", "train", "--dataset", p(&data), "--out", p(&f.path("one"))]);
    assert_eq!(digest(&f.path("one"), "model.bmck"), digest(a.parent().unwrap(), "model.bmck"));
}

#[test]
fn gradcheck_reports_every_family() {
    let f = Fixture::new(tiny());
    let out = f.ok(&["gradcheck", "--out", p(&f.path("g"))]);
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 10);
    assert_eq!(std::fs::read_to_string(f.path("g/gradcheck.csv")).unwrap().lines().count(), 11);
}
