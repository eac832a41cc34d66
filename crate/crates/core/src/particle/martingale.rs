use crate::error::{Error, Result};
use crate::model::{generator_from_derivatives, Compartment, ModelSpec, TestFunction, MAX_DIM};
use crate::particle::cell::build_compartment_index;
use crate::particle::pressure::susceptible_pressures;
use crate::particle::sim::TrajectoryRecord;
use crate::particle::state::PopulationState;

/// Empirical integrals of one test function at one time.
#[derive(Debug, Clone, Copy, Default)]
struct Pairings {
    /// `(mu^A, phi)` per compartment.
    value: [f64; 3],
    /// `(mu^A, Q_A phi)` per compartment.
    generator: [f64; 3],
    /// `(mu^S, phi lambda)`.
    infection: f64,
}

/// Online computation of the compensated processes of the three compartments:
///
/// * S: `(mu_t^S, phi) - (mu_0^S, phi) - int (mu^S, Q_S phi) + int (mu^S, phi lambda)`
/// * I: `(mu_t^I, phi) - (mu_0^I, phi) - int (mu^I, Q_I phi) - int (mu^S, phi lambda) + alpha int (mu^I, phi)`
/// * R: `(mu_t^R, phi) - (mu_0^R, phi) - int (mu^R, Q_R phi) - alpha int (mu^I, phi)`
///
/// Time integrals use the left-endpoint rule at the observation spacing `dt`;
/// states must be observed at every step.
pub struct MartingaleTracker<'a> {
    spec: &'a ModelSpec,
    functions: Vec<&'a dyn TestFunction>,
    tracks: Vec<(Compartment, usize)>,
    dt: f64,
    initial: Vec<f64>,
    integral: Vec<f64>,
    last_rate: Option<Vec<f64>>,
}

impl<'a> MartingaleTracker<'a> {
    /// `tracks` pairs a compartment with an index into `functions`.
    pub fn new(spec: &'a ModelSpec, functions: Vec<&'a dyn TestFunction>, tracks: Vec<(Compartment, usize)>, dt: f64) -> Self {
        let k = tracks.len();
        MartingaleTracker {
            spec,
            functions,
            tracks,
            dt,
            initial: vec![0.0; k],
            integral: vec![0.0; k],
            last_rate: None,
        }
    }

    fn pairings(&self, state: &PopulationState) -> Result<Vec<Pairings>> {
        let d = state.dim;
        let n = state.len() as f64;
        let needs_lambda = !self.spec.kernel.is_zero()
            && self.tracks.iter().any(|(c, _)| *c != Compartment::R);
        let lambda = if needs_lambda {
            let index = build_compartment_index(state, Compartment::I, self.spec.kernel.support_radius());
            Some(susceptible_pressures(state, &self.spec.kernel, &index)?)
        } else {
            None
        };
        let mut out = vec![Pairings::default(); self.functions.len()];
        let mut grad = [0.0; MAX_DIM];
        let mut hess = [0.0; MAX_DIM * MAX_DIM];
        for i in 0..state.len() {
            let x = state.position(i);
            let label = state.labels[i];
            let a = label.index();
            let coeff = self.spec.coeff(label);
            for (f, p) in self.functions.iter().zip(out.iter_mut()) {
                let v = f.derivatives(x, &mut grad[..d], &mut hess[..d * d]);
                p.value[a] += v;
                p.generator[a] += generator_from_derivatives(coeff, x, &grad[..d], &hess[..d * d]);
                if let (Compartment::S, Some(l)) = (label, &lambda) {
                    p.infection += v * l[i];
                }
            }
        }
        for p in &mut out {
            for a in 0..3 {
                p.value[a] /= n;
                p.generator[a] /= n;
            }
            p.infection /= n;
        }
        Ok(out)
    }

    /// Records `state` and returns the current value of every track.
    pub fn observe(&mut self, state: &PopulationState) -> Result<Vec<f64>> {
        let p = self.pairings(state)?;
        let alpha = self.spec.alpha;
        let mut rates = Vec::with_capacity(self.tracks.len());
        let mut values = Vec::with_capacity(self.tracks.len());
        let first = self.last_rate.is_none();
        for (k, &(c, f)) in self.tracks.iter().enumerate() {
            let q = &p[f];
            let (value, rate) = match c {
                Compartment::S => (q.value[0], q.generator[0] - q.infection),
                Compartment::I => (q.value[1], q.generator[1] + q.infection - alpha * q.value[1]),
                Compartment::R => (q.value[2], q.generator[2] + alpha * q.value[1]),
            };
            if first {
                self.initial[k] = value;
            } else {
                let prev = self.last_rate.as_ref().expect("previous rate")[k];
                self.integral[k] += self.dt * prev;
            }
            values.push(value - self.initial[k] - self.integral[k]);
            rates.push(rate);
        }
        self.last_rate = Some(rates);
        Ok(values)
    }
}

/// Compensated process of `(compartment, phi)` along a recorded trajectory.
/// The trajectory must hold a snapshot at every step.
pub fn martingale_track(
    traj: &TrajectoryRecord,
    spec: &ModelSpec,
    phi: &dyn TestFunction,
    compartment: Compartment,
) -> Result<Vec<(f64, f64)>> {
    if traj.snapshot_stride != 1 {
        return Err(Error::StrideNotOne(traj.snapshot_stride));
    }
    let mut tracker = MartingaleTracker::new(spec, vec![phi], vec![(compartment, 0)], traj.dt);
    traj.snapshots
        .iter()
        .map(|s| Ok((s.time, tracker.observe(s)?[0])))
        .collect()
}
