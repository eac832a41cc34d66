use serde::Serialize;

use crate::model::CoefficientField;
use crate::pde::fp::FokkerPlanck;
use crate::pde::grid::Grid;

/// Mass growth of the backward semigroup started from point-like data.
#[derive(Debug, Clone, Serialize)]
pub struct SemigroupMass {
    pub times: Vec<f64>,
    /// Largest total mass over the probes at each time.
    pub max_mass: Vec<f64>,
    /// `max_k (L 1)_k^+`, the discrete `sup (-div m + 1/2 sum d_l d_u a_lu)^+`
    /// giving the envelope `e^{C t}`.
    pub envelope_rate: f64,
    /// Least-squares slope of `log max_mass` against time.
    pub fitted_rate: f64,
}

impl SemigroupMass {
    pub fn final_mass(&self) -> f64 {
        *self.max_mass.last().unwrap_or(&1.0)
    }
}

/// Propagates unit point masses at probe nodes through the discrete backward
/// semigroup up to time `t` and records the largest total mass.
pub fn semigroup_mass_check(coeff: &CoefficientField, t: f64, grid: &Grid) -> SemigroupMass {
    let op = FokkerPlanck::new(coeff, grid);
    let d = grid.dim();
    let steps = if t > 0.0 { (t / (0.5 * op.max_step().min(t))).ceil().max(1.0) as usize } else { 0 };
    let dt = if steps > 0 { t / steps as f64 } else { 0.0 };
    let shape = grid.shape();
    let probe_axis = |n: usize| -> Vec<usize> { (1..=5).map(|q| (q * n) / 6).collect() };
    let mut probes = Vec::new();
    if d == 1 {
        probes.extend(probe_axis(shape[0]).into_iter().map(|i| grid.flat_index([i, 0])));
    } else {
        for i in probe_axis(shape[0]).into_iter().step_by(2) {
            for j in probe_axis(shape[1]).into_iter().step_by(2) {
                probes.push(grid.flat_index([i, j]));
            }
        }
    }
    let vol = grid.cell_volume();
    let mut fields: Vec<Vec<f64>> = probes
        .iter()
        .map(|&k| {
            let mut u = vec![0.0; grid.len()];
            u[k] = 1.0 / vol;
            u
        })
        .collect();
    let mut times = vec![0.0];
    let mut max_mass = vec![1.0];
    for s in 1..=steps {
        let mut best = f64::NEG_INFINITY;
        for u in fields.iter_mut() {
            *u = op.backward_step(u, dt);
            best = best.max(grid.integrate(u));
        }
        times.push(s as f64 * dt);
        max_mass.push(best);
    }
    // The total mass of the backward data grows at rate `sum_k u_k (L 1)_k`.
    let envelope_rate = op.apply(&vec![1.0; grid.len()]).into_iter().fold(0.0, f64::max);
    let logs: Vec<f64> = max_mass.iter().map(|m| m.ln()).collect();
    let fitted_rate = crate::stats::linear_fit(&times, &logs).map(|f| f.slope).unwrap_or(0.0);
    SemigroupMass { times, max_mass, envelope_rate, fitted_rate }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DiffusionField, DriftField};

    #[test]
    fn constant_coefficients_conserve_mass() {
        let grid = Grid::new(vec![-4.0], vec![4.0], 0.05).unwrap();
        let coeff = CoefficientField::constant(vec![0.3], 0.4);
        let r = semigroup_mass_check(&coeff, 1.0, &grid);
        for m in &r.max_mass {
            assert!((m - 1.0).abs() < 1e-9, "{m}");
        }
        assert_eq!(r.envelope_rate, 0.0);
        let r0 = semigroup_mass_check(&coeff, 0.0, &grid);
        assert_eq!(r0.max_mass, vec![1.0]);
    }

    #[test]
    fn affine_clamped_drift_stays_under_envelope() {
        let grid = Grid::new(vec![-4.0], vec![4.0], 0.05).unwrap();
        let coeff = CoefficientField::new(
            DriftField::AffineClamped { offset: vec![0.0], matrix: vec![-0.8], bound: 1.0 },
            DiffusionField::isotropic(1, 0.5),
        );
        let r = semigroup_mass_check(&coeff, 1.0, &grid);
        assert!(r.envelope_rate > 0.0);
        for (t, m) in r.times.iter().zip(&r.max_mass) {
            assert!(m.ln() <= r.envelope_rate * t + 1e-6, "t = {t}: {m}");
        }
        assert!(r.fitted_rate <= r.envelope_rate);
    }
}
