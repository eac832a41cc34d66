use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::io::csv_err;
use crate::measure::dictionary::TestDictionary;
use crate::model::{Compartment, TestFunction};
use crate::particle::PopulationState;
use crate::pde::{DensityField, Grid};

/// `(1/N) sum_{i in A} phi(X^i)`.
pub fn pair<F: Fn(&[f64]) -> f64>(state: &PopulationState, a: Compartment, phi: F) -> f64 {
    if state.is_empty() {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..state.len() {
        if state.labels[i] == a {
            acc += phi(state.position(i));
        }
    }
    acc / state.len() as f64
}

/// `(mu^A, phi_p)` for every compartment and member, `[compartment][member]`.
pub fn pair_dictionary(state: &PopulationState, dict: &TestDictionary) -> [Vec<f64>; 3] {
    let p = dict.len();
    let mut out = [vec![0.0; p], vec![0.0; p], vec![0.0; p]];
    let mut v = vec![0.0; p];
    for i in 0..state.len() {
        dict.eval_all(state.position(i), &mut v);
        let row = &mut out[state.labels[i].index()];
        for (o, x) in row.iter_mut().zip(&v) {
            *o += x;
        }
    }
    let n = state.len().max(1) as f64;
    for row in &mut out {
        for o in row.iter_mut() {
            *o /= n;
        }
    }
    out
}

/// `(f^A, phi_p)` by the grid midpoint rule, `[compartment][member]`.
pub fn field_dictionary(field: &DensityField, grid: &Grid, dict: &TestDictionary) -> [Vec<f64>; 3] {
    let p = dict.len();
    let d = grid.dim();
    let mut out = [vec![0.0; p], vec![0.0; p], vec![0.0; p]];
    let mut x = [0.0; 2];
    let mut v = vec![0.0; p];
    for k in 0..grid.len() {
        let w = [field.s[k], field.i[k], field.r[k]];
        if w.iter().all(|a| *a == 0.0) {
            continue;
        }
        grid.node(k, &mut x[..d]);
        dict.eval_all(&x[..d], &mut v);
        for c in 0..3 {
            for (o, val) in out[c].iter_mut().zip(&v) {
                *o += w[c] * val;
            }
        }
    }
    let vol = grid.cell_volume();
    for row in &mut out {
        for o in row.iter_mut() {
            *o *= vol;
        }
    }
    out
}

fn check_time(state: &PopulationState, field: &DensityField) -> Result<()> {
    if (state.time - field.time).abs() > 1e-9 * state.time.abs().max(1.0) {
        return Err(Error::TimeMismatch { state: state.time, field: field.time });
    }
    Ok(())
}

/// `sqrt(N) ((mu^A, phi) - (f^A, phi))` with `N` the population size.
pub fn fluctuation(state: &PopulationState, field: &DensityField, grid: &Grid, a: Compartment, phi: &dyn TestFunction) -> Result<f64> {
    check_time(state, field)?;
    let emp = pair(state, a, |x| phi.value(x));
    let mean = grid.pair(field.get(a), |x| phi.value(x));
    Ok((state.len() as f64).sqrt() * (emp - mean))
}

/// Fluctuation coordinates for all members of the three compartments, `[compartment][member]`.
pub fn fluctuation_coords(state: &PopulationState, field: &DensityField, grid: &Grid, dict: &TestDictionary) -> Result<[Vec<f64>; 3]> {
    check_time(state, field)?;
    let emp = pair_dictionary(state, dict);
    let mean = field_dictionary(field, grid, dict);
    let scale = (state.len() as f64).sqrt();
    let mut out = emp;
    for c in 0..3 {
        for (o, m) in out[c].iter_mut().zip(&mean[c]) {
            *o = scale * (*o - m);
        }
    }
    Ok(out)
}

/// Pairings `(nu, phi_p)` of one signed measure with a dictionary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignedMeasureCoords {
    pub compartment: Compartment,
    pub time: f64,
    pub n: usize,
    pub values: Vec<f64>,
}

/// `sqrt(sum_p c_p^2)`, a lower bound for the dual norm when the dictionary is orthonormal.
pub fn dual_norm(coords: &SignedMeasureCoords) -> f64 {
    coords.values.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// Rows `replicate, t, compartment, member_id, value`.
pub fn write_coords_csv<W: Write>(w: W, rows: &[(usize, SignedMeasureCoords)]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["replicate", "t", "compartment", "member_id", "value"]).map_err(csv_err)?;
    for (rep, c) in rows {
        for (p, v) in c.values.iter().enumerate() {
            out.write_record([rep.to_string(), c.time.to_string(), c.compartment.to_string(), p.to_string(), v.to_string()])
                .map_err(csv_err)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Gridded kernel density estimate of one compartment.
#[derive(Debug, Clone)]
pub struct KdeResult {
    /// Cell averages of the smoothed density, scaled so the total is the compartment fraction.
    pub values: Vec<f64>,
    pub bandwidth: f64,
    /// Fraction of the smoothed compartment mass falling inside the grid box.
    pub coverage: f64,
    /// Set when less than 99.9 % of the mass is covered.
    pub coverage_warning: bool,
}

/// Silverman's rule of thumb; per-axis spreads are averaged in more than one dimension.
pub fn silverman_bandwidth(state: &PopulationState, a: Compartment) -> f64 {
    let members = state.members(a);
    let n = members.len();
    if n < 2 {
        return 1.0;
    }
    let d = state.dim;
    let mut spread = 0.0;
    for ax in 0..d {
        let mut v: Vec<f64> = members.iter().map(|&i| state.position(i)[ax]).collect();
        let sd = crate::stats::variance(&v).sqrt();
        v.sort_by(|x, y| x.partial_cmp(y).expect("finite positions"));
        let q = |p: f64| v[((n - 1) as f64 * p).round() as usize];
        let iqr = (q(0.75) - q(0.25)) / 1.34;
        spread += if iqr > 0.0 { sd.min(iqr) } else { sd };
    }
    spread /= d as f64;
    let nf = n as f64;
    if d == 1 {
        0.9 * spread * nf.powf(-0.2)
    } else {
        spread * (4.0 / (d as f64 + 2.0)).powf(1.0 / (d as f64 + 4.0)) * nf.powf(-1.0 / (d as f64 + 4.0))
    }
}

/// Gaussian kernel density estimate of `mu^A` integrated over each grid cell,
/// so the cell values sum (times `h^d`) to the compartment fraction times the covered mass.
pub fn kde(state: &PopulationState, a: Compartment, bandwidth: f64, grid: &Grid) -> Result<KdeResult> {
    if !(bandwidth > 0.0) {
        return Err(Error::InvalidParameter("bandwidth must be positive".into()));
    }
    if state.dim != grid.dim() {
        return Err(Error::DimensionMismatch { expected: grid.dim(), got: state.dim });
    }
    let d = grid.dim();
    let h = grid.h();
    let shape = grid.shape().to_vec();
    let lo = grid.lo().to_vec();
    let members = state.members(a);
    let cdf = |z: f64| 0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2));
    let reach = 8.0 * bandwidth;
    // Per-axis cell weights of one particle: (first cell, weights).
    let axis_weights = |ax: usize, x: f64| -> (usize, Vec<f64>) {
        let first = (((x - reach - lo[ax]) / h).floor().max(0.0) as usize).min(shape[ax]);
        let last = (((x + reach - lo[ax]) / h).ceil().max(0.0) as usize).min(shape[ax]);
        let w = (first..last)
            .map(|c| {
                let a = lo[ax] + c as f64 * h;
                cdf((a + h - x) / bandwidth) - cdf((a - x) / bandwidth)
            })
            .collect();
        (first, w)
    };
    let chunks: Vec<Vec<f64>> = members
        .par_chunks(512)
        .map(|chunk| {
            let mut acc = vec![0.0; grid.len()];
            for &i in chunk {
                let x = state.position(i);
                let (f0, w0) = axis_weights(0, x[0]);
                if d == 1 {
                    for (c, w) in w0.iter().enumerate() {
                        acc[f0 + c] += w;
                    }
                } else {
                    let (f1, w1) = axis_weights(1, x[1]);
                    for (c0, a) in w0.iter().enumerate() {
                        for (c1, b) in w1.iter().enumerate() {
                            acc[grid.flat_index([f0 + c0, f1 + c1])] += a * b;
                        }
                    }
                }
            }
            acc
        })
        .collect();
    let mut values = vec![0.0; grid.len()];
    for c in &chunks {
        for (v, x) in values.iter_mut().zip(c) {
            *v += x;
        }
    }
    let n = state.len().max(1) as f64;
    let vol = grid.cell_volume();
    for v in values.iter_mut() {
        *v /= n * vol;
    }
    let fraction = members.len() as f64 / n;
    let coverage = if members.is_empty() { 1.0 } else { grid.integrate(&values) / fraction };
    Ok(KdeResult { values, bandwidth, coverage, coverage_warning: coverage < 0.999 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Compartment::{I, R, S};

    fn state(pos: Vec<f64>, labels: Vec<Compartment>) -> PopulationState {
        PopulationState::new(0.0, 1, pos, labels).unwrap()
    }

    #[test]
    fn pair_examples() {
        let st = state(vec![0.0, 1.0], vec![S, S]);
        assert_eq!(pair(&st, S, |x| x[0]), 0.5);
        assert_eq!(pair(&st, I, |_| 1.0), 0.0);
        let mixed = state(vec![0.0, 1.0, 2.0, 3.0], vec![S, I, I, R]);
        assert_eq!(pair(&mixed, I, |_| 1.0), 0.5);
        let total: f64 = Compartment::ALL.iter().map(|c| pair(&mixed, *c, |_| 1.0)).sum();
        assert_eq!(total, 1.0);
    }

    #[test]
    fn dual_norm_is_euclidean() {
        let c = SignedMeasureCoords { compartment: S, time: 0.0, n: 1, values: vec![3.0, 4.0] };
        assert_eq!(dual_norm(&c), 5.0);
        let z = SignedMeasureCoords { values: vec![0.0; 4], ..c };
        assert_eq!(dual_norm(&z), 0.0);
    }

    #[test]
    fn single_particle_kde_has_mass_one_over_n() {
        let st = state(vec![0.1, 5.0, 6.0], vec![I, S, S]);
        let grid = Grid::new(vec![-3.0], vec![3.0], 0.05).unwrap();
        let r = kde(&st, I, 0.2, &grid).unwrap();
        assert!((grid.integrate(&r.values) - 1.0 / 3.0).abs() < 1e-12);
        assert!(!r.coverage_warning);
        let rs = kde(&st, S, 0.2, &grid).unwrap();
        assert!(rs.coverage_warning);
    }

    #[test]
    fn wider_bandwidth_flattens() {
        let st = state(vec![-0.5, 0.0, 0.2, 0.9], vec![S; 4]);
        let grid = Grid::new(vec![-10.0], vec![10.0], 0.1).unwrap();
        let ratio = |bw: f64| {
            let v = kde(&st, S, bw, &grid).unwrap().values;
            let inner = &v[90..110];
            inner.iter().cloned().fold(0.0, f64::max) / inner.iter().cloned().fold(f64::INFINITY, f64::min)
        };
        let mut last = f64::INFINITY;
        for bw in [0.3, 0.6, 1.2, 2.4, 4.8] {
            let r = ratio(bw);
            assert!(r < last, "{bw}: {r}");
            last = r;
        }
    }

    #[test]
    fn time_mismatch_is_rejected() {
        let st = state(vec![0.0], vec![S]);
        let grid = Grid::new(vec![-1.0], vec![1.0], 0.5).unwrap();
        let field = DensityField { time: 0.5, s: vec![0.0; 4], i: vec![0.0; 4], r: vec![0.0; 4], leakage: 0.0 };
        let phi = crate::model::Polynomial::constant(1, 1.0);
        assert!(matches!(fluctuation(&st, &field, &grid, S, &phi), Err(Error::TimeMismatch { .. })));
    }
}
