use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{Compartment, ModelSpec};
use crate::rng::{mix64, stream, Phase};
use rand::Rng;

/// Positions (row-major `N×d`) and compartment labels at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationState {
    pub time: f64,
    pub dim: usize,
    pub positions: Vec<f64>,
    pub labels: Vec<Compartment>,
}

impl PopulationState {
    pub fn new(time: f64, dim: usize, positions: Vec<f64>, labels: Vec<Compartment>) -> Result<Self> {
        if dim == 0 || positions.len() != labels.len() * dim {
            return Err(Error::DimensionMismatch { expected: labels.len() * dim, got: positions.len() });
        }
        Ok(PopulationState { time, dim, positions, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    #[inline]
    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for l in &self.labels {
            c[l.index()] += 1;
        }
        c
    }

    pub fn count(&self, c: Compartment) -> usize {
        self.labels.iter().filter(|&&l| l == c).count()
    }

    /// Indices in compartment `c`, ascending.
    pub fn members(&self, c: Compartment) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == c).collect()
    }

    /// Hash of the coordinate bit patterns, used to detect stale indexes.
    pub fn position_fingerprint(&self) -> u64 {
        fingerprint_f64(&self.positions)
    }
}

pub(crate) fn fingerprint_f64(values: &[f64]) -> u64 {
    let mut h = mix64(values.len() as u64);
    for v in values {
        h = mix64(h ^ v.to_bits());
    }
    h
}

pub(crate) fn fingerprint_indices(indices: impl Iterator<Item = usize>) -> u64 {
    let mut h = 0x243F_6A88_85A3_08D3u64;
    for i in indices {
        h = mix64(h ^ i as u64);
    }
    h
}

/// Draws `n` i.i.d. positions from the initial density; an individual in the
/// infected region is labeled `I` with probability `p`, otherwise `S`.
pub fn init_population(spec: &ModelSpec, n: usize, seed: u64) -> Result<PopulationState> {
    if n == 0 {
        return Err(Error::InvalidParameter("population size must be at least 1".into()));
    }
    let d = spec.dim;
    let law = &spec.initial;
    let mut positions = vec![0.0; n * d];
    let mut labels = vec![Compartment::S; n];
    positions
        .par_chunks_mut(d)
        .zip(labels.par_iter_mut())
        .enumerate()
        .try_for_each(|(i, (x, label))| -> Result<()> {
            let mut rng = stream(seed, Phase::Init, i as u64, 0);
            law.density.sample(&mut rng, x)?;
            let u: f64 = rng.random();
            if law.region.contains(x) && u < law.p_infect {
                *label = Compartment::I;
            }
            Ok(())
        })?;
    PopulationState::new(0.0, d, positions, labels)
}
