use rand::Rng;
use rand_distr::{Distribution, Exp, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::model::{Compartment, ModelSpec, MAX_DIM};
use crate::particle::cell::build_compartment_index;
use crate::particle::pressure::susceptible_pressures;
use crate::particle::state::PopulationState;
use crate::rng::{stream, Phase};

/// A single compartment transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Event {
    pub time: f64,
    pub individual: usize,
    pub from: Compartment,
    pub to: Compartment,
}

/// Identifies the random streams of one time step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepKey {
    pub seed: u64,
    pub step: u64,
}

/// Euler–Maruyama update `X += m(E, X) dt + theta(E, X) sqrt(dt) Z` for every
/// individual; advances the time by `dt`.
pub fn motion_step(state: &mut PopulationState, spec: &ModelSpec, dt: f64, key: StepKey) {
    let d = state.dim;
    let sq = dt.sqrt();
    state
        .positions
        .par_chunks_mut(d)
        .zip(state.labels.par_iter())
        .enumerate()
        .with_min_len(512)
        .for_each(|(i, (x, &label))| {
            let coeff = spec.coeff(label);
            let mut rng = stream(key.seed, Phase::Motion, i as u64, key.step);
            let mut z = [0.0; MAX_DIM];
            for zk in z.iter_mut().take(d) {
                *zk = StandardNormal.sample(&mut rng);
            }
            let mut m = [0.0; MAX_DIM];
            let mut th = [0.0; MAX_DIM * MAX_DIM];
            coeff.drift(x, &mut m[..d]);
            coeff.theta(x, &mut th[..d * d]);
            for l in 0..d {
                let mut noise = 0.0;
                for k in 0..d {
                    noise += th[l * d + k] * z[k];
                }
                x[l] += m[l] * dt + noise * sq;
            }
        });
    state.time += dt;
}

/// Probability that an infected individual recovers within `dt`.
fn recovery_probability(alpha: f64, dt: f64) -> f64 {
    -(-alpha * dt).exp_m1()
}

fn apply(state: &mut PopulationState, events: &[Event]) {
    for e in events {
        state.labels[e.individual] = e.to;
    }
}

/// Frozen-rate transitions: with rates evaluated on the current state, each
/// susceptible becomes infected with probability `1 - exp(-lambda_i dt)` and
/// each infected recovers with probability `1 - exp(-alpha dt)`.
pub fn epidemic_step(state: &mut PopulationState, spec: &ModelSpec, dt: f64, key: StepKey) -> Result<Vec<Event>> {
    let index = build_compartment_index(state, Compartment::I, spec.kernel.support_radius());
    let lambda = susceptible_pressures(state, &spec.kernel, &index)?;
    let p_rec = recovery_probability(spec.alpha, dt);
    let t_event = state.time;
    let labels = &state.labels;
    let events: Vec<Event> = (0..state.len())
        .into_par_iter()
        .with_min_len(512)
        .filter_map(|i| {
            let label = labels[i];
            let p = match label {
                Compartment::S => -(-lambda[i] * dt).exp_m1(),
                Compartment::I => p_rec,
                Compartment::R => return None,
            };
            if p <= 0.0 {
                return None;
            }
            let u: f64 = stream(key.seed, Phase::Epidemic, i as u64, key.step).random();
            if u < p {
                let to = if label == Compartment::S { Compartment::I } else { Compartment::R };
                Some(Event { time: t_event, individual: i, from: label, to })
            } else {
                None
            }
        })
        .collect();
    apply(state, &events);
    Ok(events)
}

/// Same transition law as [`epidemic_step`], sampled through pairwise contacts.
///
/// Each infected `j` emits `Poisson(sup K dt)` contact attempts at uniformly
/// chosen individuals; an attempt on a susceptible `i` succeeds with
/// probability `K(X^i, X^j) / sup K`. A pair therefore transmits at Poisson rate
/// `K(X^i, X^j) dt / N`, and `i` is infected with probability
/// `1 - exp(-lambda_i dt)`, independently over `i`. Cost scales with the number
/// of infected rather than the number of susceptible-infected neighbors.
pub fn epidemic_step_pairwise(state: &mut PopulationState, spec: &ModelSpec, dt: f64, key: StepKey) -> Result<Vec<Event>> {
    let n = state.len();
    let k_sup = spec.kernel.sup_norm();
    let p_rec = recovery_probability(spec.alpha, dt);
    let t_event = state.time;
    let infected = state.members(Compartment::I);
    let contact = if k_sup > 0.0 {
        Some(Poisson::new(k_sup * dt).map_err(|e| crate::error::invalid(format!("contact rate: {e}")))?)
    } else {
        None
    };
    let st = &*state;
    let per_infected: Vec<(Vec<usize>, bool)> = infected
        .par_iter()
        .with_min_len(64)
        .map(|&j| {
            let mut hits = Vec::new();
            if let Some(pois) = &contact {
                let mut rng = stream(key.seed, Phase::Contact, j as u64, key.step);
                let attempts = pois.sample(&mut rng) as u64;
                let xj = st.position(j);
                for _ in 0..attempts {
                    let i = rng.random_range(0..n);
                    let u: f64 = rng.random();
                    if st.labels[i] == Compartment::S && u * k_sup < spec.kernel.eval(st.position(i), xj) {
                        hits.push(i);
                    }
                }
            }
            let recovers = p_rec > 0.0 && stream(key.seed, Phase::Epidemic, j as u64, key.step).random::<f64>() < p_rec;
            (hits, recovers)
        })
        .collect();
    let mut newly: Vec<usize> = per_infected.iter().flat_map(|(h, _)| h.iter().copied()).collect();
    newly.sort_unstable();
    newly.dedup();
    let mut events: Vec<Event> = newly
        .into_iter()
        .map(|i| Event { time: t_event, individual: i, from: Compartment::S, to: Compartment::I })
        .chain(
            infected
                .iter()
                .zip(&per_infected)
                .filter(|(_, (_, r))| *r)
                .map(|(&j, _)| Event { time: t_event, individual: j, from: Compartment::I, to: Compartment::R }),
        )
        .collect();
    events.sort_by_key(|e| e.individual);
    apply(state, &events);
    Ok(events)
}

/// Exact continuous-time transitions over the step `(time - dt, time]` with
/// positions frozen at their current values.
///
/// Candidate events arrive at total rate `n_I (sup K + alpha)`; a candidate is
/// a recovery with probability `alpha / (sup K + alpha)`, otherwise a contact
/// attempt at a uniformly chosen individual accepted with probability
/// `K(X^i, X^j) / sup K` if that individual is susceptible.
pub fn epidemic_step_thinning(state: &mut PopulationState, spec: &ModelSpec, dt: f64, key: StepKey) -> Result<Vec<Event>> {
    let n = state.len();
    let k_sup = spec.kernel.sup_norm();
    let alpha = spec.alpha;
    let per_infected = k_sup + alpha;
    let mut infected = state.members(Compartment::I);
    let mut events = Vec::new();
    if per_infected <= 0.0 {
        return Ok(events);
    }
    let mut rng = stream(key.seed, Phase::Thinning, 0, key.step);
    let t0 = state.time - dt;
    let mut t = 0.0;
    while !infected.is_empty() {
        let rate = infected.len() as f64 * per_infected;
        let wait: f64 = Exp::new(rate).expect("positive rate").sample(&mut rng);
        t += wait;
        if t >= dt {
            break;
        }
        let slot = rng.random_range(0..infected.len());
        let j = infected[slot];
        let v: f64 = rng.random::<f64>() * per_infected;
        if v < alpha {
            infected.swap_remove(slot);
            state.labels[j] = Compartment::R;
            events.push(Event { time: t0 + t, individual: j, from: Compartment::I, to: Compartment::R });
        } else {
            let i = rng.random_range(0..n);
            let u: f64 = rng.random();
            if state.labels[i] == Compartment::S && u * k_sup < spec.kernel.eval(state.position(i), state.position(j)) {
                state.labels[i] = Compartment::I;
                infected.push(i);
                events.push(Event { time: t0 + t, individual: i, from: Compartment::S, to: Compartment::I });
            }
        }
    }
    Ok(events)
}
