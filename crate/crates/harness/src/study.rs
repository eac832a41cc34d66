//! LLN and CLT studies and the single-run commands behind the CLI.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;
use sirlab_core::fluct::{
    cov_compare, gaussianity_report, initial_fluct_cov, ou_covariance, ou_galerkin_build, run_ensemble, BracketVariant,
    CovarianceRow, OuBuildOptions, MIN_REPLICATES,
};
use sirlab_core::io::{write_counts_csv, write_frame, Frame};
use sirlab_core::measure::{field_dictionary, pair_dictionary};
use sirlab_core::model::Compartment;
use sirlab_core::particle::{simulate, simulate_observed, SimConfig};
use sirlab_core::pde::{
    l1_bounds_check, picard_solve, solve_with_stride, sup_l1_distance, write_series_csv, write_series_frames, DensityField,
    Grid, L1BoundCheck,
};
use sirlab_core::rng::replicate_seed;
use sirlab_core::stats::{log_log_fit, mean, std_error, variance, LinearFit};

use crate::config::ExperimentConfig;
use crate::error::{validation, HarnessError, Result};
use crate::plot;

/// One pass/fail verdict. Informational checks do not gate the exit code.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub gate: bool,
    pub detail: String,
}

impl Check {
    pub fn gate(name: &str, passed: bool, detail: String) -> Self {
        Check { name: name.to_string(), passed, gate: true, detail }
    }

    pub fn info(name: &str, passed: bool, detail: String) -> Self {
        Check { name: name.to_string(), passed, gate: false, detail }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct StudyResult {
    pub artifacts: Vec<PathBuf>,
    pub slope: Option<LinearFit>,
    pub checks: Vec<Check>,
}

impl StudyResult {
    pub fn passed(&self) -> bool {
        self.checks.iter().filter(|c| c.gate).all(|c| c.passed)
    }

    /// Writes `checks.csv` next to the other artifacts.
    fn finish(mut self, out: &Path, stem: &str) -> Result<Self> {
        let path = out.join(format!("{stem}_checks.csv"));
        let mut w = csv::Writer::from_path(&path)?;
        for c in &self.checks {
            w.serialize(c)?;
        }
        w.flush()?;
        self.artifacts.push(path);
        Ok(self)
    }
}

impl std::fmt::Display for StudyResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for c in &self.checks {
            let tag = match (c.passed, c.gate) {
                (true, _) => "PASS",
                (false, true) => "FAIL",
                (false, false) => "note",
            };
            writeln!(f, "{tag} {}: {}", c.name, c.detail)?;
        }
        for a in &self.artifacts {
            writeln!(f, "wrote {}", a.display())?;
        }
        Ok(())
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).map_err(|source| HarnessError::File { path: path.to_path_buf(), source })?;
    Ok(BufWriter::new(file))
}

fn ensure_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|source| HarnessError::File { path: out.to_path_buf(), source })
}

/// Mean-field densities at every stored step up to the horizon.
pub fn mean_field(cfg: &ExperimentConfig) -> Result<(Grid, Vec<DensityField>)> {
    let grid = cfg.grid()?;
    let series = solve_with_stride(&cfg.model, &grid, cfg.pde.dt, cfg.sim.t_end, cfg.pde.output_stride)?;
    Ok((grid, series))
}

/// Fields of `series` at the given times.
pub fn fields_at(series: &[DensityField], times: &[f64]) -> Result<Vec<DensityField>> {
    times
        .iter()
        .map(|&t| {
            series
                .iter()
                .find(|f| (f.time - t).abs() <= 1e-9 * t.max(1.0))
                .cloned()
                .ok_or_else(|| validation(format!("no stored mean-field density at t = {t}")))
        })
        .collect()
}

fn sample_steps(times: &[f64], dt: f64) -> Vec<usize> {
    times.iter().map(|t| (t / dt).round() as usize).collect()
}

/// Seed of replicate `r` at population size `n`.
pub fn size_seed(master: u64, n: usize) -> u64 {
    replicate_seed(master, n as u64 ^ 0x5eed_0000_0000_0000)
}

/// Squared dictionary-coordinate errors against the mean field, `[time]`, for one run.
fn lln_errors(cfg: &ExperimentConfig, n: usize, seed: u64, refs: &[[Vec<f64>; 3]], steps: &[usize]) -> Result<Vec<f64>> {
    let dict = cfg.dictionary()?;
    let run = SimConfig { seed, t_end: cfg.sample_times().last().copied().unwrap_or(0.0), record_stride: 0, ..cfg.sim_config() };
    let mut out = Vec::with_capacity(steps.len());
    let mut next = 0;
    simulate_observed(&cfg.model, n, &run, |step, state, _| {
        if next < steps.len() && steps[next] == step {
            let emp = pair_dictionary(state, &dict);
            let mut e2 = 0.0;
            for (a, b) in emp.iter().zip(&refs[next]) {
                for (x, y) in a.iter().zip(b) {
                    e2 += (x - y).powi(2);
                }
            }
            out.push(e2);
            next += 1;
        }
        Ok(())
    })?;
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
struct LlnRow {
    n: usize,
    t: f64,
    rms_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LlnSummaryRow {
    pub n: usize,
    pub rms_error: f64,
}

/// Root-mean-square dictionary-coordinate error of the empirical measures
/// against the mean field at each population size, with the log-log slope.
pub fn lln_table(cfg: &ExperimentConfig) -> Result<(Vec<(usize, f64, f64)>, Vec<LlnSummaryRow>, Option<LinearFit>)> {
    let (grid, series) = mean_field(cfg)?;
    let times = cfg.sample_times();
    let fields = fields_at(&series, &times)?;
    let dict = cfg.dictionary()?;
    let refs: Vec<[Vec<f64>; 3]> = fields.iter().map(|f| field_dictionary(f, &grid, &dict)).collect();
    let steps = sample_steps(&times, cfg.sim.dt);
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for &n in &cfg.sim.n {
        let master = size_seed(cfg.sim.seed, n);
        let per_rep: Vec<Vec<f64>> = (0..cfg.sim.replicates as u64)
            .into_par_iter()
            .map(|r| lln_errors(cfg, n, replicate_seed(master, r), &refs, &steps))
            .collect::<Result<_>>()?;
        let mut all = 0.0;
        for (k, &t) in times.iter().enumerate() {
            let ms = per_rep.iter().map(|e| e[k]).sum::<f64>() / per_rep.len() as f64;
            rows.push((n, t, ms.sqrt()));
            all += ms;
        }
        summary.push(LlnSummaryRow { n, rms_error: (all / times.len() as f64).sqrt() });
    }
    let fit = if summary.len() >= 2 {
        let x: Vec<f64> = summary.iter().map(|r| r.n as f64).collect();
        let y: Vec<f64> = summary.iter().map(|r| r.rms_error).collect();
        log_log_fit(&x, &y)
    } else {
        None
    };
    Ok((rows, summary, fit))
}

/// Accepted range of the LLN log-log slope.
pub const LLN_SLOPE_RANGE: (f64, f64) = (-0.65, -0.35);

pub fn run_lln_study(cfg: &ExperimentConfig, out: &Path) -> Result<StudyResult> {
    ensure_dir(out)?;
    let (rows, summary, fit) = lln_table(cfg)?;
    let mut result = StudyResult { slope: fit.clone(), ..Default::default() };

    let errors = out.join("lln_errors.csv");
    let mut w = csv::Writer::from_writer(create(&errors)?);
    for &(n, t, e) in &rows {
        w.serialize(LlnRow { n, t, rms_error: e })?;
    }
    w.flush()?;
    result.artifacts.push(errors);

    let summary_path = out.join("lln_summary.csv");
    let mut w = csv::Writer::from_writer(create(&summary_path)?);
    for r in &summary {
        w.serialize(r)?;
    }
    w.flush()?;
    result.artifacts.push(summary_path.clone());
    result.artifacts.extend(plot::emit_plots(&[summary_path], out)?);

    match &fit {
        Some(f) => {
            let (lo, hi) = LLN_SLOPE_RANGE;
            result.checks.push(Check::gate(
                "lln slope",
                (lo..=hi).contains(&f.slope),
                format!("log-log slope {:.4} (se {:.4}), accepted [{lo}, {hi}]", f.slope, f.slope_se),
            ));
        }
        None => result.checks.push(Check::info(
            "lln slope",
            true,
            "a single population size gives no slope".into(),
        )),
    }
    result.finish(out, "lln")
}

#[derive(Debug, Clone, Serialize)]
struct GaussianityRow {
    n: usize,
    t: f64,
    compartment: Compartment,
    member_id: usize,
    mean: f64,
    mean_se: f64,
    variance: f64,
    skewness: f64,
    excess_kurtosis: f64,
    ks_distance: f64,
    ks_critical: f64,
    skewness_lo: f64,
    skewness_hi: f64,
    kurtosis_lo: f64,
    kurtosis_hi: f64,
    degenerate: bool,
    normal_plausible: bool,
}

#[derive(Debug, Clone, Serialize)]
struct CovarianceCsvRow {
    n: usize,
    t: f64,
    variant: &'static str,
    i: usize,
    j: usize,
    empirical: f64,
    theoretical: f64,
    ratio: f64,
    ci_low: f64,
    ci_high: f64,
    std_error: f64,
}

impl CovarianceCsvRow {
    fn new(n: usize, t: f64, variant: &'static str, r: CovarianceRow) -> Self {
        CovarianceCsvRow {
            n,
            t,
            variant,
            i: r.i,
            j: r.j,
            empirical: r.empirical,
            theoretical: r.theoretical,
            ratio: r.ratio,
            ci_low: r.ci_low,
            ci_high: r.ci_high,
            std_error: r.std_error,
        }
    }
}

/// Galerkin covariances at the sample times, per variant.
pub fn galerkin_covariances(
    cfg: &ExperimentConfig,
    grid: &Grid,
    series: &[DensityField],
    times: &[f64],
) -> Result<[Vec<DMatrix<f64>>; 2]> {
    let dict = cfg.dictionary()?;
    let opts = OuBuildOptions { time_stride: cfg.study.clt.ou_stride, ..Default::default() };
    let sys = ou_galerkin_build(&cfg.model, series, grid, &dict, &opts)?;
    let cov0 = initial_fluct_cov(&cfg.model, &dict);
    let pick = |covs: Vec<DMatrix<f64>>| -> Result<Vec<DMatrix<f64>>> {
        times
            .iter()
            .map(|&t| {
                sys.times
                    .iter()
                    .position(|s| (s - t).abs() <= 1e-9 * t.max(1.0))
                    .map(|k| covs[k].clone())
                    .ok_or_else(|| validation(format!("sample time {t} is not a Galerkin node; adjust study.clt.ou_stride")))
            })
            .collect()
    };
    Ok([
        pick(ou_covariance(&sys, BracketVariant::Representation, &cov0))?,
        pick(ou_covariance(&sys, BracketVariant::Theorem, &cov0))?,
    ])
}

fn coordinate_index(c: Compartment, p: usize, members: usize) -> usize {
    c.index() * members + p
}

pub fn run_clt_study(cfg: &ExperimentConfig, out: &Path) -> Result<StudyResult> {
    if cfg.sim.replicates < MIN_REPLICATES {
        return Err(validation(format!(
            "the CLT study needs at least {MIN_REPLICATES} replicates for the Gaussianity report, got {}",
            cfg.sim.replicates
        )));
    }
    ensure_dir(out)?;
    let (grid, series) = mean_field(cfg)?;
    let times = cfg.sample_times();
    let fields = fields_at(&series, &times)?;
    let dict = cfg.dictionary()?;
    let p = dict.len();
    let clt = &cfg.study.clt;
    let target = coordinate_index(clt.compartment, clt.member, p);
    let theory = galerkin_covariances(cfg, &grid, &series, &times)?;
    let mut result = StudyResult::default();

    let gauss_path = out.join("clt_gaussianity.csv");
    let cov_path = out.join("clt_covariance.csv");
    let mut gauss = csv::Writer::from_writer(create(&gauss_path)?);
    let mut covw = csv::Writer::from_writer(create(&cov_path)?);
    let pairs: Vec<(usize, usize)> = (0..3 * p).map(|i| (i, i)).chain((0..p).map(|q| (q, p + q))).collect();
    // Target-coordinate variance per population size at the last time.
    let mut last_var = Vec::new();
    let mut frozen_spread = 0.0f64;
    let last = times.len() - 1;
    for &n in &cfg.sim.n {
        let sim = SimConfig { seed: size_seed(cfg.sim.seed, n), ..cfg.sim_config() };
        let ens = run_ensemble(&cfg.model, n, cfg.sim.replicates, &dict, &fields, &grid, &sim)?;
        let ens_path = out.join(format!("clt_ensemble_n{n}.csv"));
        ens.write_csv(create(&ens_path)?)?;
        result.artifacts.push(ens_path);
        let mut cov_by_time = Vec::new();
        for (k, &t) in times.iter().enumerate() {
            for c in Compartment::ALL {
                for q in 0..p {
                    let samples = ens.samples(k, c, q);
                    let rep = gaussianity_report(&samples, cfg.sim.seed ^ (k * 3 * p + c.index() * p + q) as u64)?;
                    gauss.serialize(GaussianityRow {
                        n,
                        t,
                        compartment: c,
                        member_id: q,
                        mean: rep.mean,
                        mean_se: std_error(&samples),
                        variance: rep.variance,
                        skewness: rep.skewness,
                        excess_kurtosis: rep.excess_kurtosis,
                        ks_distance: rep.ks_distance,
                        ks_critical: rep.ks_critical,
                        skewness_lo: rep.skewness_band.0,
                        skewness_hi: rep.skewness_band.1,
                        kurtosis_lo: rep.kurtosis_band.0,
                        kurtosis_hi: rep.kurtosis_band.1,
                        degenerate: rep.degenerate,
                        normal_plausible: rep.normal_plausible,
                    })?;
                }
            }
            let rows = ens.rows(k);
            for (variant, covs) in BracketVariant::ALL.iter().zip(&theory) {
                for row in cov_compare(&rows, &covs[k], &pairs, cfg.sim.seed ^ k as u64) {
                    covw.serialize(CovarianceCsvRow::new(n, t, variant.as_str(), row))?;
                }
            }
            let emp: Vec<f64> = (0..3 * p).map(|i| variance(&rows.iter().map(|r| r[i]).collect::<Vec<_>>())).collect();
            cov_by_time.push(emp);
        }
        for v in &cov_by_time {
            for (a, b) in v.iter().zip(&cov_by_time[0]) {
                frozen_spread = frozen_spread.max((a - b).abs() / b.abs().max(1e-300));
            }
        }
        let samples = ens.samples(last, clt.compartment, clt.member);
        last_var.push((n, variance(&samples)));
        if n == *cfg.sim.n.last().expect("nonempty") {
            let m = mean(&samples);
            let se = std_error(&samples);
            result.checks.push(Check::gate(
                "centering",
                m.abs() <= 3.0 * se.max(1e-300) || se == 0.0,
                format!("mean {m:.4e}, 3 SE = {:.4e}", 3.0 * se),
            ));
            let rep = gaussianity_report(&samples, cfg.sim.seed)?;
            result.checks.push(Check::gate(
                "gaussianity",
                rep.skewness.abs() <= 0.2 && rep.excess_kurtosis.abs() <= 0.4,
                format!(
                    "N = {n}, R = {}: skewness {:.4}, excess kurtosis {:.4} (limits 0.2, 0.4)",
                    samples.len(),
                    rep.skewness,
                    rep.excess_kurtosis
                ),
            ));
            let var = variance(&samples);
            for (variant, covs) in BracketVariant::ALL.iter().zip(&theory) {
                let ou = covs[last][(target, target)];
                let rel = var / ou - 1.0;
                let passed = rel.abs() <= clt.ou_tolerance;
                let name = format!("galerkin variance ({})", variant.as_str());
                let detail = format!("empirical {var:.5e}, Galerkin {ou:.5e}, relative difference {rel:+.4}");
                result.checks.push(if *variant == clt.gate_variant {
                    Check::gate(&name, passed, detail)
                } else {
                    Check::info(&name, passed, detail)
                });
            }
        }
    }
    gauss.flush()?;
    covw.flush()?;
    result.artifacts.push(gauss_path);
    result.artifacts.push(cov_path.clone());

    if last_var.len() >= 2 {
        let (n1, v1) = last_var[last_var.len() - 2];
        let (n2, v2) = last_var[last_var.len() - 1];
        let ratio = v1 / v2;
        result.checks.push(Check::gate(
            "variance stabilization",
            (0.7..=1.3).contains(&ratio),
            format!("Var at N = {n1} over N = {n2}: {ratio:.4}, accepted [0.7, 1.3]"),
        ));
    }
    if is_frozen(cfg) {
        result.checks.push(Check::gate(
            "covariance time-constant",
            frozen_spread <= 1e-9,
            format!("largest relative change of a coordinate variance over time {frozen_spread:.3e}"),
        ));
    }
    result.artifacts.extend(plot::emit_plots(&[cov_path], out)?);
    result.finish(out, "clt")
}

/// No motion, no contacts and no recovery.
pub fn is_frozen(cfg: &ExperimentConfig) -> bool {
    let m = &cfg.model;
    m.kernel.is_zero()
        && m.alpha == 0.0
        && Compartment::ALL.iter().all(|&c| {
            let coeff = m.coeff(c);
            coeff.drift.sup_norm() == 0.0 && coeff.diffusion.sup_norm() == 0.0
        })
}

/// One particle run: counts CSV, and position frames when snapshots are kept.
pub fn run_simulation(cfg: &ExperimentConfig, out: &Path) -> Result<StudyResult> {
    ensure_dir(out)?;
    let n = cfg.sim.n[0];
    let record = simulate(&cfg.model, n, &cfg.sim_config())?;
    let mut result = StudyResult::default();
    let counts = out.join("counts.csv");
    write_counts_csv(create(&counts)?, &record)?;
    result.artifacts.push(counts.clone());
    if !record.snapshots.is_empty() {
        let frames = out.join("snapshots.bin");
        let mut w = create(&frames)?;
        for s in &record.snapshots {
            write_frame(&mut w, &Frame::from_state(s))?;
        }
        w.flush()?;
        result.artifacts.push(frames);
    }
    let conserved = record.counts.iter().all(|c| c.iter().sum::<usize>() == n);
    let labels = record.replay();
    result.checks.push(Check::gate(
        "conservation",
        conserved && labels == record.final_state.labels,
        format!("S + I + R = {n} at all {} steps; event log replays to the final labels", record.counts.len()),
    ));
    result.artifacts.extend(plot::emit_plots(&[counts], out)?);
    result.finish(out, "simulate")
}

/// Mean-field solve with the L¹ bound checks, and optionally the Picard comparison.
pub fn run_pde(cfg: &ExperimentConfig, out: &Path, picard: bool) -> Result<StudyResult> {
    ensure_dir(out)?;
    let (grid, series) = mean_field(cfg)?;
    let mut result = StudyResult::default();
    let csv_path = out.join("pde_series.csv");
    write_series_csv(create(&csv_path)?, &series, &grid)?;
    result.artifacts.push(csv_path);
    let bin = out.join("pde_series.bin");
    let mut w = create(&bin)?;
    write_series_frames(&mut w, &series, &grid)?;
    w.flush()?;
    result.artifacts.push(bin);

    let bounds = l1_bounds_check(&series, &grid, cfg.model.kernel.sup_norm(), cfg.model.alpha, 1e-3);
    let bounds_path = out.join("pde_l1_bounds.csv");
    write_bounds(&bounds_path, &bounds)?;
    result.artifacts.push(bounds_path);
    let failures = bounds.iter().filter(|b| !b.passed).count();
    let leak = series.last().map(|f| f.leakage).unwrap_or(0.0);
    result.checks.push(Check::gate(
        "l1 bounds",
        failures == 0,
        format!("{failures} of {} stored times violate the bounds; boundary leakage {leak:.3e}", bounds.len()),
    ));
    if picard {
        let outcome = picard_solve(&cfg.model, &grid, cfg.sim.t_end, &cfg.picard())?;
        let stride = cfg.pde.output_stride;
        let thinned: Vec<DensityField> = outcome.series.iter().step_by(stride).cloned().collect();
        let dist = sup_l1_distance(&thinned, &series, &grid);
        result.checks.push(Check::gate(
            "picard agreement",
            dist <= 1e-3,
            format!("sup-over-time L1 distance {dist:.3e} after {} sweeps", outcome.sweeps()),
        ));
        let ratios = outcome.gap_ratios();
        let (burn, live) = picard_window(&outcome.gaps);
        let worst = ratios.iter().take(live.saturating_sub(1)).skip(burn).fold(0.0f64, |a, b| a.max(*b));
        result.checks.push(Check::gate(
            "picard contraction",
            worst <= 0.8,
            format!("largest gap ratio after {burn} burn-in sweeps {worst:.4}"),
        ));
        let gaps_path = out.join("picard_gaps.csv");
        let mut w = csv::Writer::from_writer(create(&gaps_path)?);
        w.write_record(["sweep", "gap"])?;
        for (k, g) in outcome.gaps.iter().enumerate() {
            w.write_record([(k + 1).to_string(), format!("{g:e}")])?;
        }
        w.flush()?;
        result.artifacts.push(gaps_path);
    }
    result.finish(out, "pde")
}

/// Burn-in sweeps and the number of leading gaps above the round-off floor;
/// the contraction check covers the ratios between those two.
pub fn picard_window(gaps: &[f64]) -> (usize, usize) {
    let live = gaps.iter().take_while(|g| **g > PICARD_GAP_FLOOR).count();
    (PICARD_BURN_IN.min(live), live)
}

pub const PICARD_BURN_IN: usize = 2;

/// Gaps below this are round-off and carry no contraction information.
pub const PICARD_GAP_FLOOR: f64 = 1e-12;

#[derive(Serialize)]
struct BoundRow {
    t: f64,
    mass_s: f64,
    mass_i: f64,
    mass_r: f64,
    bound_s: f64,
    bound_i: f64,
    bound_r: f64,
    passed: bool,
}

fn write_bounds(path: &Path, bounds: &[L1BoundCheck]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for b in bounds {
        w.serialize(BoundRow {
            t: b.time,
            mass_s: b.mass[0],
            mass_i: b.mass[1],
            mass_r: b.mass[2],
            bound_s: b.bound[0],
            bound_i: b.bound[1],
            bound_r: b.bound[2],
            passed: b.passed,
        })?;
    }
    w.flush()?;
    Ok(())
}
