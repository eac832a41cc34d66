use rayon::prelude::*;

use crate::error::Result;
use crate::model::{Compartment, ContactKernel, KernelShape};
use crate::particle::cell::CellIndex;
use crate::particle::state::PopulationState;

/// Infection pressure `lambda_i` of every individual, using a cell index over
/// either all individuals or the infected ones.
///
/// Terms are added in ascending infected index, exactly as the naive double
/// loop does; pairs beyond the support contribute an exact zero there, so the
/// two computations agree bit for bit.
pub fn infection_pressures_all(state: &PopulationState, kernel: &ContactKernel, index: &CellIndex) -> Result<Vec<f64>> {
    pressures(state, kernel, index, false)
}

/// Like [`infection_pressures_all`] but only susceptible entries are computed;
/// other entries are zero.
pub fn susceptible_pressures(state: &PopulationState, kernel: &ContactKernel, index: &CellIndex) -> Result<Vec<f64>> {
    pressures(state, kernel, index, true)
}

fn pressures(state: &PopulationState, kernel: &ContactKernel, index: &CellIndex, only_s: bool) -> Result<Vec<f64>> {
    index.check_fresh(state)?;
    let n = state.len();
    let nf = n as f64;
    if kernel.is_zero() || !state.labels.contains(&Compartment::I) {
        return Ok(vec![0.0; n]);
    }
    if let Some(lambda) = uniform_pressure(state, kernel) {
        return Ok((0..n)
            .map(|i| if only_s && state.labels[i] != Compartment::S { 0.0 } else { lambda })
            .collect());
    }
    let filter = index.restricted_to() != Some(Compartment::I);
    let chunk = 256;
    let mut out = vec![0.0; n];
    out.par_chunks_mut(chunk).enumerate().for_each(|(c, slot)| {
        let mut cand = Vec::new();
        for (k, o) in slot.iter_mut().enumerate() {
            let i = c * chunk + k;
            if only_s && state.labels[i] != Compartment::S {
                continue;
            }
            let xi = state.position(i);
            index.neighbor_candidates(xi, &mut cand);
            let mut acc = 0.0;
            for &j in &cand {
                let j = j as usize;
                if filter && state.labels[j] != Compartment::I {
                    continue;
                }
                acc += kernel.eval(xi, state.position(j));
            }
            *o = acc / nf;
        }
    });
    Ok(out)
}

/// When every pairwise distance lies inside the flat top of the profile the
/// pressure is the same for all individuals: `(1/N) sum_j beta(X^j)`.
fn uniform_pressure(state: &PopulationState, kernel: &ContactKernel) -> Option<f64> {
    let KernelShape::FlatTop { inner, .. } = kernel.shape else {
        return None;
    };
    let d = state.dim;
    let mut diag2 = 0.0;
    for ax in 0..d {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for x in state.positions.chunks(d) {
            lo = lo.min(x[ax]);
            hi = hi.max(x[ax]);
        }
        diag2 += (hi - lo) * (hi - lo);
    }
    if diag2.sqrt() * (1.0 + 1e-9) >= inner {
        return None;
    }
    let mut acc = 0.0;
    for j in 0..state.len() {
        if state.labels[j] == Compartment::I {
            acc += kernel.beta.eval(state.position(j));
        }
    }
    Some(acc / state.len() as f64)
}
