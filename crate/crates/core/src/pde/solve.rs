use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{Compartment, ModelSpec};
use crate::pde::field::{sup_l1_distance, DensityField};
use crate::pde::fp::FokkerPlanck;
use crate::pde::grid::Grid;
use crate::pde::reaction::{react, KernelConvolution};

/// Largest admitted cumulative boundary leakage.
pub const MAX_LEAKAGE: f64 = 1e-3;

/// Number of steps of size `dt` in `[0, t_end]`; `t_end` must be a multiple of `dt`.
pub fn step_count(dt: f64, t_end: f64) -> Result<usize> {
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(invalid(format!("need dt > 0 and t_end >= 0, got dt = {dt}, t_end = {t_end}")));
    }
    let n = (t_end / dt).round();
    if (n * dt - t_end).abs() > 1e-9 * t_end.max(1.0) {
        return Err(invalid(format!("t_end = {t_end} is not a whole number of steps dt = {dt}")));
    }
    Ok(n as usize)
}

/// Lie splitting: transport of every compartment, then the reaction with the
/// pressure taken from the transported infected density.
struct Splitting {
    fp: [FokkerPlanck; 3],
    conv: KernelConvolution,
    alpha: f64,
    dt: f64,
}

impl Splitting {
    fn new(spec: &ModelSpec, grid: &Grid, dt: f64) -> Result<Self> {
        if spec.dim != grid.dim() {
            return Err(Error::DimensionMismatch { expected: spec.dim, got: grid.dim() });
        }
        let fp = Compartment::ALL.map(|c| FokkerPlanck::new(spec.coeff(c), grid));
        for op in &fp {
            op.check_step(dt)?;
        }
        Ok(Splitting { fp, conv: KernelConvolution::new(&spec.kernel, grid), alpha: spec.alpha, dt })
    }

    fn transport(&self, field: &mut DensityField) -> Result<()> {
        let (s, ls) = self.fp[0].step(&field.s, self.dt)?;
        let (i, li) = self.fp[1].step(&field.i, self.dt)?;
        let (r, lr) = self.fp[2].step(&field.r, self.dt)?;
        field.s = s;
        field.i = i;
        field.r = r;
        field.leakage += ls + li + lr;
        Ok(())
    }

    /// Advances one step; `source` overrides the infected density used for the pressure.
    fn step(&self, field: &mut DensityField, source: Option<&[f64]>) -> Result<Vec<f64>> {
        self.transport(field)?;
        let transported_i = field.i.clone();
        let c = self.conv.apply(source.unwrap_or(&transported_i));
        react(field, &c, self.alpha, self.dt);
        field.time += self.dt;
        check_leakage(field)?;
        Ok(transported_i)
    }
}

fn check_leakage(field: &DensityField) -> Result<()> {
    if field.leakage > MAX_LEAKAGE {
        return Err(Error::GridTooSmall(format!(
            "boundary leakage {:.3e} exceeds {MAX_LEAKAGE:e} at t = {}; enlarge the box",
            field.leakage, field.time
        )));
    }
    Ok(())
}

/// Mean-field densities at every step from the initial law.
pub fn solve(spec: &ModelSpec, grid: &Grid, dt: f64, t_end: f64) -> Result<Vec<DensityField>> {
    solve_with_stride(spec, grid, dt, t_end, 1)
}

/// As [`solve`], keeping every `stride`-th time (and always `t = 0`).
pub fn solve_with_stride(spec: &ModelSpec, grid: &Grid, dt: f64, t_end: f64, stride: usize) -> Result<Vec<DensityField>> {
    let n = step_count(dt, t_end)?;
    let stride = stride.max(1);
    let split = Splitting::new(spec, grid, dt)?;
    let mut field = DensityField::initial(spec, grid);
    check_leakage(&field)?;
    let mut out = vec![field.clone()];
    for k in 1..=n {
        split.step(&mut field, None)?;
        field.time = k as f64 * dt;
        if k % stride == 0 {
            out.push(field.clone());
        }
    }
    Ok(out)
}

/// Stopping rule of the Picard iteration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardConfig {
    pub max_iters: usize,
    /// Stop once successive iterates differ by at most this in sup-over-time L¹.
    pub tol_l1: f64,
    pub dt: f64,
    /// Weight of the new iterate in the infected source, in `(0, 1]`.
    #[serde(default = "one")]
    pub relaxation: f64,
}

fn one() -> f64 {
    1.0
}

impl PicardConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.tol_l1 > 0.0) {
            return Err(invalid("Picard tolerance must be positive"));
        }
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return Err(invalid("Picard relaxation must lie in (0, 1]"));
        }
        if self.max_iters == 0 {
            return Err(invalid("Picard iteration needs at least one sweep"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PicardOutcome {
    /// Final iterate at every step.
    pub series: Vec<DensityField>,
    /// `gaps[n]` is the sup-over-time L¹ distance between iterates `n + 1` and `n`;
    /// iterate 0 is the initial data held constant in time.
    pub gaps: Vec<f64>,
}

impl PicardOutcome {
    pub fn sweeps(&self) -> usize {
        self.gaps.len()
    }

    /// Ratios of successive gaps.
    pub fn gap_ratios(&self) -> Vec<f64> {
        self.gaps.windows(2).map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 }).collect()
    }
}

/// Fixed-point iteration on the infected density: each sweep solves the
/// linear system in which the infection pressure is computed from the previous
/// iterate's infected density, while the susceptible and infected equations use
/// the current iterate's susceptible density.
pub fn picard_solve(spec: &ModelSpec, grid: &Grid, t_end: f64, cfg: &PicardConfig) -> Result<PicardOutcome> {
    cfg.check()?;
    let n = step_count(cfg.dt, t_end)?;
    let split = Splitting::new(spec, grid, cfg.dt)?;
    let init = DensityField::initial(spec, grid);
    check_leakage(&init)?;
    let mut prev: Vec<DensityField> = (0..=n)
        .map(|k| DensityField { time: k as f64 * cfg.dt, ..init.clone() })
        .collect();
    let mut sources: Vec<Vec<f64>> = vec![init.i.clone(); n];
    let mut gaps = Vec::new();
    for _ in 0..cfg.max_iters {
        let mut field = init.clone();
        let mut series = Vec::with_capacity(n + 1);
        series.push(field.clone());
        let mut new_sources = Vec::with_capacity(n);
        for (k, src) in sources.iter().enumerate() {
            new_sources.push(split.step(&mut field, Some(src))?);
            field.time = (k + 1) as f64 * cfg.dt;
            series.push(field.clone());
        }
        let gap = sup_l1_distance(&series, &prev, grid);
        gaps.push(gap);
        let w = cfg.relaxation;
        for (old, new) in sources.iter_mut().zip(new_sources) {
            if w == 1.0 {
                *old = new;
            } else {
                for (o, v) in old.iter_mut().zip(new) {
                    *o = w * v + (1.0 - w) * *o;
                }
            }
        }
        prev = series;
        if gap <= cfg.tol_l1 {
            return Ok(PicardOutcome { series: prev, gaps });
        }
    }
    Err(Error::NoConvergence { iterations: cfg.max_iters, gap: *gaps.last().expect("at least one sweep") })
}
