use std::io::Write;

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::io::csv_err;
use crate::measure::{fluctuation_coords, pair_dictionary, TestDictionary};
use crate::model::{Compartment, ModelSpec, TestFunction};
use crate::particle::{init_population, simulate_observed, MartingaleTracker, SimConfig};
use crate::pde::{DensityField, Grid};
use crate::rng::replicate_seed;

use super::initial::initial_means;

/// Fluctuation coordinates of independent replicates, indexed
/// `[replicate][time][compartment][member]`.
#[derive(Debug, Clone)]
pub struct ReplicateEnsemble {
    pub n: usize,
    pub master_seed: u64,
    pub seeds: Vec<u64>,
    pub times: Vec<f64>,
    pub members: usize,
    coords: Vec<f64>,
}

impl ReplicateEnsemble {
    pub fn replicates(&self) -> usize {
        self.seeds.len()
    }

    fn offset(&self, r: usize, t: usize, c: Compartment, p: usize) -> usize {
        ((r * self.times.len() + t) * 3 + c.index()) * self.members + p
    }

    pub fn get(&self, r: usize, t: usize, c: Compartment, p: usize) -> f64 {
        self.coords[self.offset(r, t, c, p)]
    }

    /// One coordinate across replicates.
    pub fn samples(&self, t: usize, c: Compartment, p: usize) -> Vec<f64> {
        (0..self.replicates()).map(|r| self.get(r, t, c, p)).collect()
    }

    /// All `3P` coordinates at time index `t`, one row per replicate.
    pub fn rows(&self, t: usize) -> Vec<Vec<f64>> {
        (0..self.replicates())
            .map(|r| {
                let start = self.offset(r, t, Compartment::S, 0);
                self.coords[start..start + 3 * self.members].to_vec()
            })
            .collect()
    }

    /// Rows `replicate, t, compartment, member_id, value`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["replicate", "t", "compartment", "member_id", "value"]).map_err(csv_err)?;
        for r in 0..self.replicates() {
            for (ti, t) in self.times.iter().enumerate() {
                for c in Compartment::ALL {
                    for p in 0..self.members {
                        out.write_record([
                            r.to_string(),
                            t.to_string(),
                            c.to_string(),
                            p.to_string(),
                            self.get(r, ti, c, p).to_string(),
                        ])
                        .map_err(csv_err)?;
                    }
                }
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Step numbers of the sample times; each must be a whole number of steps.
fn sample_steps(times: &[f64], dt: f64) -> Result<Vec<usize>> {
    let mut steps = Vec::with_capacity(times.len());
    for &t in times {
        let k = (t / dt).round();
        if (k * dt - t).abs() > 1e-9 * t.max(1.0) || k < 0.0 {
            return Err(invalid(format!("sample time {t} is not a whole number of steps {dt}")));
        }
        steps.push(k as usize);
    }
    if steps.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("sample times must be strictly increasing"));
    }
    Ok(steps)
}

/// Runs `replicates` simulations of `n` individuals, seeded from `cfg.seed`,
/// and records the fluctuation coordinates against the mean-field densities
/// `fields` (one per sample time).
pub fn run_ensemble(
    spec: &ModelSpec,
    n: usize,
    replicates: usize,
    dict: &TestDictionary,
    fields: &[DensityField],
    grid: &Grid,
    cfg: &SimConfig,
) -> Result<ReplicateEnsemble> {
    let times: Vec<f64> = fields.iter().map(|f| f.time).collect();
    let steps = sample_steps(&times, cfg.dt)?;
    let p = dict.len();
    let seeds: Vec<u64> = (0..replicates as u64).map(|r| replicate_seed(cfg.seed, r)).collect();
    let per_replicate: Vec<Vec<f64>> = seeds
        .par_iter()
        .map(|&seed| {
            let run = SimConfig { seed, t_end: times.last().copied().unwrap_or(0.0), record_stride: 0, ..cfg.clone() };
            let mut out = Vec::with_capacity(times.len() * 3 * p);
            let mut next = 0;
            simulate_observed(spec, n, &run, |step, state, _| {
                if next < steps.len() && steps[next] == step {
                    let c = fluctuation_coords(state, &fields[next], grid, dict)?;
                    for row in c {
                        out.extend(row);
                    }
                    next += 1;
                }
                Ok(())
            })?;
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(ReplicateEnsemble {
        n,
        master_seed: cfg.seed,
        seeds,
        times,
        members: p,
        coords: per_replicate.concat(),
    })
}

/// Initial fluctuation coordinates `sqrt(N) ((mu_0^A, phi_p) - (f_0^A, phi_p))`
/// of `replicates` fresh populations, with exact means; `[replicate][compartment][member]` rows.
pub fn sample_initial_coords(
    spec: &ModelSpec,
    n: usize,
    replicates: usize,
    dict: &TestDictionary,
    master_seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let [ms, mi] = initial_means(spec, dict);
    let scale = (n as f64).sqrt();
    (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let state = init_population(spec, n, replicate_seed(master_seed, r))?;
            let [s, i, rr] = pair_dictionary(&state, dict);
            let mut row = Vec::with_capacity(3 * dict.len());
            row.extend(s.iter().zip(&ms).map(|(a, b)| scale * (a - b)));
            row.extend(i.iter().zip(&mi).map(|(a, b)| scale * (a - b)));
            row.extend(rr.iter().map(|a| scale * a));
            Ok(row)
        })
        .collect()
}

/// Compensated-process values of independent replicates, `[replicate][time][track]`.
#[derive(Debug, Clone)]
pub struct MartingaleEnsemble {
    pub times: Vec<f64>,
    pub tracks: Vec<(Compartment, usize)>,
    pub values: Vec<Vec<Vec<f64>>>,
}

impl MartingaleEnsemble {
    pub fn samples(&self, t: usize, track: usize) -> Vec<f64> {
        self.values.iter().map(|r| r[t][track]).collect()
    }
}

/// Tracks the compensated processes of `(compartment, function)` pairs along
/// `replicates` simulations, scaled by `sqrt(N)`, at the sample times.
pub fn run_martingale_ensemble(
    spec: &ModelSpec,
    n: usize,
    replicates: usize,
    functions: &[&dyn TestFunction],
    tracks: &[(Compartment, usize)],
    times: &[f64],
    cfg: &SimConfig,
) -> Result<MartingaleEnsemble> {
    let steps = sample_steps(times, cfg.dt)?;
    let scale = (n as f64).sqrt();
    let values = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let seed = replicate_seed(cfg.seed, r);
            let run = SimConfig { seed, t_end: times.last().copied().unwrap_or(0.0), record_stride: 0, ..cfg.clone() };
            let mut tracker = MartingaleTracker::new(spec, functions.to_vec(), tracks.to_vec(), cfg.dt);
            let mut out = Vec::with_capacity(times.len());
            let mut next = 0;
            simulate_observed(spec, n, &run, |step, state, _| {
                let v = tracker.observe(state)?;
                if next < steps.len() && steps[next] == step {
                    out.push(v.into_iter().map(|x| scale * x).collect());
                    next += 1;
                }
                Ok(())
            })?;
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(MartingaleEnsemble { times: times.to_vec(), tracks: tracks.to_vec(), values })
}
