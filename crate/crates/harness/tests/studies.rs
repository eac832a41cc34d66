use std::fs;

use sirlab_core::model::{CoefficientField, CompartmentCoefficients, ContactKernel};
use sirlab_harness::plot::emit_plots;
use sirlab_harness::study::{run_pde, run_simulation};
use sirlab_harness::{run_clt_study, run_lln_study, ExperimentConfig};

fn small() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::standard();
    cfg.sim.t_end = 0.5;
    cfg.sim.n = vec![200, 400];
    cfg.sim.replicates = 200;
    cfg.dict.size = 4;
    cfg.study.sample_times = vec![0.25, 0.5];
    cfg
}

fn frozen() -> ExperimentConfig {
    let mut cfg = small();
    cfg.model.coefficients = CompartmentCoefficients::uniform(CoefficientField::constant(vec![0.0], 0.0));
    cfg.model.kernel = ContactKernel::zero();
    cfg.model.alpha = 0.0;
    cfg.pde.lo = vec![-12.0];
    cfg.pde.hi = vec![12.0];
    cfg
}

fn read_header(path: &std::path::Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap_or_default().to_string()
}

#[test]
fn clt_study_writes_its_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small();
    cfg.validate().unwrap();
    let result = run_clt_study(&cfg, dir.path()).unwrap();
    assert!(result.checks.iter().any(|c| c.name == "centering"));
    assert!(result.checks.iter().any(|c| c.name == "variance stabilization"));
    assert_eq!(
        read_header(&dir.path().join("clt_covariance.csv")),
        "n,t,variant,i,j,empirical,theoretical,ratio,ci_low,ci_high,std_error"
    );
    let rows = fs::read_to_string(dir.path().join("clt_gaussianity.csv")).unwrap().lines().count();
    // Header plus 2 sizes x 2 times x 3 compartments x 4 members.
    assert_eq!(rows, 1 + 2 * 2 * 3 * 4);
    assert!(dir.path().join("clt_covariance.svg").exists());
    assert!(dir.path().join("clt_checks.csv").exists());
}

#[test]
fn frozen_dynamics_keep_the_covariance_constant() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = frozen();
    cfg.validate().unwrap();
    let result = run_clt_study(&cfg, dir.path()).unwrap();
    let check = result.checks.iter().find(|c| c.name == "covariance time-constant").unwrap();
    assert!(check.passed, "{}", check.detail);
}

#[test]
fn frozen_population_gives_zero_lln_error_growth() {
    // With nothing moving, errors are the initial sampling errors at every time.
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = frozen();
    cfg.sim.replicates = 20;
    let result = run_lln_study(&cfg, dir.path()).unwrap();
    let table = fs::read_to_string(dir.path().join("lln_errors.csv")).unwrap();
    let rows: Vec<Vec<String>> = table.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect();
    for pair in rows.chunks(2) {
        let a: f64 = pair[0][2].parse().unwrap();
        let b: f64 = pair[1][2].parse().unwrap();
        assert!((a - b).abs() <= 1e-3 * a, "{a} vs {b}");
    }
    assert!(result.slope.is_some());
}

#[test]
fn single_population_size_gives_no_slope() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small();
    cfg.sim.n = vec![300];
    cfg.sim.replicates = 5;
    let result = run_lln_study(&cfg, dir.path()).unwrap();
    assert!(result.slope.is_none());
    assert!(result.passed());
    assert!(dir.path().join("lln_summary.csv").exists());
}

#[test]
fn slope_annotation_matches_the_study() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small();
    cfg.sim.replicates = 10;
    let result = run_lln_study(&cfg, dir.path()).unwrap();
    let slope = result.slope.unwrap().slope;
    let svg = fs::read_to_string(dir.path().join("lln_summary.svg")).unwrap();
    assert!(svg.contains(&format!("{slope:.4}")), "slope {slope:.4} missing from plot");
}

#[test]
fn plots_are_byte_identical_for_identical_input() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small();
    run_simulation(&cfg, dir.path()).unwrap();
    let csv = dir.path().join("counts.csv");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    fs::create_dir_all(&a).unwrap();
    fs::create_dir_all(&b).unwrap();
    emit_plots(&[csv.clone()], &a).unwrap();
    emit_plots(&[csv], &b).unwrap();
    assert_eq!(fs::read(a.join("counts.svg")).unwrap(), fs::read(b.join("counts.svg")).unwrap());
}

#[test]
fn pde_run_reports_bounds_and_picard() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small();
    let result = run_pde(&cfg, dir.path(), true).unwrap();
    assert!(result.passed(), "{result}");
    for name in ["l1 bounds", "picard agreement", "picard contraction"] {
        assert!(result.checks.iter().any(|c| c.name == name));
    }
    assert!(dir.path().join("picard_gaps.csv").exists());
}

#[test]
fn contact_free_errors_decay_at_the_sampling_rate() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small();
    cfg.model.kernel = ContactKernel::zero();
    cfg.model.alpha = 0.0;
    cfg.pde.lo = vec![-12.0];
    cfg.pde.hi = vec![12.0];
    cfg.sim.n = vec![200, 800, 3200];
    cfg.sim.replicates = 60;
    cfg.validate().unwrap();
    let result = run_lln_study(&cfg, dir.path()).unwrap();
    let slope = result.slope.unwrap().slope;
    assert!((-0.65..=-0.35).contains(&slope), "slope {slope}");
}
