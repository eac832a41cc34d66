use std::path::Path;

use sirlab_harness::study::{picard_window, PICARD_BURN_IN};
use sirlab_harness::{load_config, parse_config, ExperimentConfig, HarnessError};

fn rejects(cfg: &ExperimentConfig, needle: &str) {
    match cfg.validate() {
        Err(e) => assert!(e.to_string().contains(needle), "expected '{needle}' in: {e}"),
        Ok(()) => panic!("configuration accepted, expected rejection mentioning '{needle}'"),
    }
}

#[test]
fn shipped_config_is_the_standard_preset() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/standard.json");
    let cfg = load_config(&path).unwrap();
    assert_eq!(cfg.to_json(), ExperimentConfig::standard().to_json());
}

#[test]
fn round_trip_preserves_the_config() {
    let cfg = ExperimentConfig::standard();
    let back = parse_config(&cfg.to_json(), "memory").unwrap();
    assert_eq!(back.to_json(), cfg.to_json());
}

#[test]
fn parse_errors_carry_position() {
    let err = parse_config("{\n  \"model\": 3\n}", "inline").unwrap_err();
    match err {
        HarnessError::Parse { path, line, column, .. } => {
            assert_eq!(path, "inline");
            assert_eq!(line, 2);
            assert!(column > 0);
        }
        other => panic!("unexpected error {other}"),
    }
}

#[test]
fn population_sizes_must_increase() {
    let mut cfg = ExperimentConfig::standard();
    cfg.sim.n = vec![1000, 500];
    rejects(&cfg, "strictly increasing");
    cfg.sim.n = vec![0, 10];
    rejects(&cfg, "positive population");
}

#[test]
fn sample_times_must_sit_on_both_grids() {
    let mut cfg = ExperimentConfig::standard();
    cfg.study.sample_times = vec![0.505];
    rejects(&cfg, "time grids");
    cfg.study.sample_times = vec![3.0];
    rejects(&cfg, "outside");
}

#[test]
fn horizon_must_be_a_stored_step() {
    let mut cfg = ExperimentConfig::standard();
    cfg.pde.output_stride = 7;
    rejects(&cfg, "stored PDE step");
}

#[test]
fn small_grid_is_rejected() {
    let mut cfg = ExperimentConfig::standard();
    cfg.pde.lo = vec![-2.0];
    cfg.pde.hi = vec![2.0];
    rejects(&cfg, "grid too small");
}

#[test]
fn clt_member_must_exist() {
    let mut cfg = ExperimentConfig::standard();
    cfg.study.clt.member = cfg.dict.size;
    rejects(&cfg, "exceeds the dictionary size");
}

#[test]
fn oversized_rate_step_is_rejected() {
    let mut cfg = ExperimentConfig::standard();
    cfg.sim.dt = 0.05;
    assert!(cfg.validate().is_err());
}

#[test]
fn output_directory_precedence() {
    let mut cfg = ExperimentConfig::standard();
    assert_eq!(cfg.output_dir(None), Path::new("out"));
    cfg.study.output = Some("results".into());
    assert_eq!(cfg.output_dir(None), Path::new("results"));
    assert_eq!(cfg.output_dir(Some(Path::new("x"))), Path::new("x"));
}

#[test]
fn picard_window_skips_burn_in_and_round_off() {
    assert_eq!(picard_window(&[1.0, 0.5, 0.1, 1e-13, 1e-14]), (PICARD_BURN_IN, 3));
    assert_eq!(picard_window(&[1e-15]), (0, 0));
    assert_eq!(picard_window(&[0.3]), (1, 1));
}
