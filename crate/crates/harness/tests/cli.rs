use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sirlab_harness::ExperimentConfig;

fn sirlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sirlab")).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn small_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::standard();
    cfg.sim.t_end = 0.5;
    cfg.sim.n = vec![100, 200];
    cfg.sim.replicates = 8;
    cfg.sim.record_stride = 10;
    cfg.dict.size = 4;
    cfg.study.sample_times = vec![0.25, 0.5];
    cfg
}

fn write_json(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn repo_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/standard.json")
}

#[test]
fn validate_echoes_the_shipped_config() {
    let path = repo_config();
    let out = sirlab(&["validate", "--config", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let echoed: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let expected: serde_json::Value = serde_json::from_str(&ExperimentConfig::standard().to_json()).unwrap();
    assert_eq!(echoed, expected);
}

#[test]
fn minimal_config_gets_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let mut full: serde_json::Value = serde_json::from_str(&ExperimentConfig::standard().to_json()).unwrap();
    let obj = full.as_object_mut().unwrap();
    obj.remove("study");
    let sim = obj["sim"].as_object_mut().unwrap();
    for key in ["n", "replicates", "seed", "scheme", "record_stride"] {
        sim.remove(key);
    }
    let pde = obj["pde"].as_object_mut().unwrap();
    pde.remove("picard");
    pde.remove("output_stride");
    let path = write_json(dir.path(), "min.json", &full.to_string());
    let out = sirlab(&["validate", "--config", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let echoed: ExperimentConfig = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(echoed.sim.n, vec![1000]);
    assert_eq!(echoed.sim.replicates, 100);
    assert_eq!(echoed.pde.output_stride, 1);
    assert_eq!(echoed.pde.picard.max_iters, 60);
    // The echo is itself a valid configuration with the same meaning.
    let again = write_json(dir.path(), "echo.json", &String::from_utf8(out.stdout).unwrap());
    let out2 = sirlab(&["validate", "--config", again.to_str().unwrap()]);
    assert!(out2.status.success());
    let echoed2: ExperimentConfig = serde_json::from_slice(&out2.stdout).unwrap();
    assert_eq!(echoed.to_json(), echoed2.to_json());
}

#[test]
fn gamma_other_than_one_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::standard();
    cfg.model.gamma = 0.5;
    let path = write_json(dir.path(), "g.json", &cfg.to_json());
    let out = sirlab(&["validate", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("gamma = 1"), "{}", stderr(&out));
}

#[test]
fn negative_step_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::standard();
    cfg.sim.dt = -0.01;
    let path = write_json(dir.path(), "dt.json", &cfg.to_json());
    let out = sirlab(&["validate", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("time step must be positive"), "{}", stderr(&out));
}

#[test]
fn unknown_key_reports_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let text = ExperimentConfig::standard().to_json().replacen("\"alpha\"", "\"alpah\"", 1);
    let line = text.lines().position(|l| l.contains("alpah")).unwrap() + 1;
    let path = write_json(dir.path(), "typo.json", &text);
    let out = sirlab(&["validate", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let msg = stderr(&out);
    assert!(msg.contains(&format!("typo.json:{line}:")), "{msg}");
    assert!(msg.contains("alpah"), "{msg}");
}

#[test]
fn missing_config_is_a_run_error() {
    let out = sirlab(&["simulate", "--config", "/nonexistent/config.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_json(dir.path(), "small.json", &small_config().to_json());
    let mut runs = Vec::new();
    for threads in ["1", "2", "8"] {
        let out = dir.path().join(format!("t{threads}"));
        for cmd in ["simulate", "lln-study"] {
            let o = sirlab(&[cmd, "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", threads]);
            assert!(o.status.code() == Some(0) || o.status.code() == Some(2), "{}", stderr(&o));
        }
        let files: Vec<Vec<u8>> = ["counts.csv", "snapshots.bin", "lln_errors.csv", "lln_summary.csv", "lln_summary.svg"]
            .iter()
            .map(|f| fs::read(out.join(f)).unwrap())
            .collect();
        runs.push(files);
    }
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[0], runs[2]);
}

#[test]
fn seed_override_changes_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_json(dir.path(), "small.json", &small_config().to_json());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for (out, seed) in [(&a, "1"), (&b, "2")] {
        let o = sirlab(&["simulate", "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", seed]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_ne!(fs::read(a.join("snapshots.bin")).unwrap(), fs::read(b.join("snapshots.bin")).unwrap());
}

#[test]
fn plot_of_empty_csv_warns() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("nothing.csv");
    fs::write(&csv, "").unwrap();
    let out = dir.path().join("plots");
    let o = sirlab(&["plot", csv.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let svg = fs::read_to_string(out.join("nothing.svg")).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
    assert!(svg.contains("warning"));
}

#[test]
fn plot_rejects_unknown_schema() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("odd.csv");
    fs::write(&csv, "a,b\n1,2\n").unwrap();
    let o = sirlab(&["plot", csv.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("schema"), "{}", stderr(&o));
}

#[test]
fn acceptance_criterion_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = sirlab(&["acceptance", "--criterion", "10", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("criterion 10 PASS"));
    let o = sirlab(&["acceptance", "--criterion", "13"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn clt_study_refuses_small_ensembles() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_json(dir.path(), "small.json", &small_config().to_json());
    let o = sirlab(&["clt-study", "--config", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("200 replicates"), "{}", stderr(&o));
}
