use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{Compartment, ModelSpec};
use crate::particle::state::{init_population, PopulationState};
use crate::particle::step::{
    epidemic_step, epidemic_step_pairwise, epidemic_step_thinning, motion_step, Event, StepKey,
};

/// How transitions are sampled within a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Per-susceptible Bernoulli with probability `1 - exp(-lambda_i dt)`,
    /// pressures from the cell index.
    #[default]
    FrozenRate,
    /// Same law as `FrozenRate`, sampled through pairwise contact attempts.
    FrozenRatePairwise,
    /// Exact continuous-time jumps within each step against the majorant `sup K`.
    Thinning,
}

/// Largest admitted `dt sup K` and `dt alpha`.
pub const RATE_STEP_CAP: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
    #[serde(default)]
    pub scheme: Scheme,
    /// Snapshot every `record_stride` steps; 0 keeps counts only.
    #[serde(default)]
    pub record_stride: usize,
}

impl SimConfig {
    pub fn new(dt: f64, t_end: f64, seed: u64) -> Self {
        SimConfig { dt, t_end, seed, scheme: Scheme::FrozenRate, record_stride: 0 }
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt - 1e-9).ceil().max(0.0) as usize
    }

    /// Checks `dt > 0` and the step caps `dt sup K <= 0.1`, `dt alpha <= 0.1`.
    pub fn validate(&self, spec: &ModelSpec) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(invalid(format!("time step must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(invalid(format!("horizon must be nonnegative, got {}", self.t_end)));
        }
        let k = spec.kernel.sup_norm();
        if self.dt * k > RATE_STEP_CAP * (1.0 + 1e-12) {
            return Err(Error::StepTooLarge(format!(
                "dt * sup K = {:.4} exceeds {RATE_STEP_CAP}",
                self.dt * k
            )));
        }
        if self.dt * spec.alpha > RATE_STEP_CAP * (1.0 + 1e-12) {
            return Err(Error::StepTooLarge(format!(
                "dt * alpha = {:.4} exceeds {RATE_STEP_CAP}",
                self.dt * spec.alpha
            )));
        }
        Ok(())
    }
}

/// Counts per step, optional snapshots and the full event log.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub n: usize,
    pub dim: usize,
    pub dt: f64,
    /// Time of every step, starting with 0.
    pub times: Vec<f64>,
    /// `[S, I, R]` counts aligned with `times`.
    pub counts: Vec<[usize; 3]>,
    pub snapshot_stride: usize,
    pub snapshots: Vec<PopulationState>,
    pub events: Vec<Event>,
    pub initial_labels: Vec<Compartment>,
    pub final_state: PopulationState,
}

impl TrajectoryRecord {
    /// Labels obtained by applying the event log to the initial labels.
    pub fn replay(&self) -> Vec<Compartment> {
        let mut labels = self.initial_labels.clone();
        for e in &self.events {
            labels[e.individual] = e.to;
        }
        labels
    }
}

/// Advances one full step (motion, then transitions at the moved positions).
pub fn advance(state: &mut PopulationState, spec: &ModelSpec, cfg: &SimConfig, step: usize) -> Result<Vec<Event>> {
    let key = StepKey { seed: cfg.seed, step: step as u64 };
    motion_step(state, spec, cfg.dt, key);
    state.time = (step + 1) as f64 * cfg.dt;
    match cfg.scheme {
        Scheme::FrozenRate => epidemic_step(state, spec, cfg.dt, key),
        Scheme::FrozenRatePairwise => epidemic_step_pairwise(state, spec, cfg.dt, key),
        Scheme::Thinning => epidemic_step_thinning(state, spec, cfg.dt, key),
    }
}

/// Runs the model from a fresh initial population, calling `observe` with the
/// step number and state at every time point (including step 0).
pub fn simulate_observed<F>(spec: &ModelSpec, n: usize, cfg: &SimConfig, mut observe: F) -> Result<PopulationState>
where
    F: FnMut(usize, &PopulationState, &[Event]) -> Result<()>,
{
    spec.check()?;
    cfg.validate(spec)?;
    let mut state = init_population(spec, n, cfg.seed)?;
    observe(0, &state, &[])?;
    for step in 0..cfg.n_steps() {
        let events = advance(&mut state, spec, cfg, step)?;
        observe(step + 1, &state, &events)?;
    }
    Ok(state)
}

/// Simulates and records counts at every step, snapshots every
/// `record_stride` steps, and all transition events.
pub fn simulate(spec: &ModelSpec, n: usize, cfg: &SimConfig) -> Result<TrajectoryRecord> {
    let mut times = Vec::new();
    let mut counts = Vec::new();
    let mut snapshots = Vec::new();
    let mut log = Vec::new();
    let mut initial_labels = Vec::new();
    let stride = cfg.record_stride;
    let final_state = simulate_observed(spec, n, cfg, |step, state, events| {
        if step == 0 {
            initial_labels = state.labels.clone();
        }
        times.push(state.time);
        counts.push(state.counts());
        log.extend_from_slice(events);
        if stride > 0 && step % stride == 0 {
            snapshots.push(state.clone());
        }
        Ok(())
    })?;
    Ok(TrajectoryRecord {
        n,
        dim: spec.dim,
        dt: cfg.dt,
        times,
        counts,
        snapshot_stride: stride,
        snapshots,
        events: log,
        initial_labels,
        final_state,
    })
}
