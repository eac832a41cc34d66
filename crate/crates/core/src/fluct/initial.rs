use nalgebra::DMatrix;

use crate::measure::{TestDictionary, QUAD_ORDER};
use crate::model::{DensityFamily, ModelSpec};
use crate::quadrature::{tensor_from_axes, GaussLegendre};

/// Quadrature nodes and weights on the dictionary support box, with panel
/// boundaries at the infected region and at jumps of the density.
fn support_rule(spec: &ModelSpec, dict: &TestDictionary) -> (Vec<f64>, Vec<f64>) {
    let (lo, hi) = dict.support();
    let gl = GaussLegendre::new(QUAD_ORDER);
    let axes: Vec<Vec<(f64, f64)>> = (0..dict.dim())
        .map(|ax| {
            let mut breaks = spec.initial.region.breakpoints(ax);
            if let DensityFamily::Uniform { lo, hi } = &spec.initial.density {
                breaks.push(lo[ax]);
                breaks.push(hi[ax]);
            }
            gl.composite_with_breaks(lo[ax], hi[ax], 2 * dict.panels(), &breaks)
        })
        .collect();
    tensor_from_axes(&axes)
}

/// Exact initial pairings `(f0^S, phi_p)` and `(f0^I, phi_p)`.
pub fn initial_means(spec: &ModelSpec, dict: &TestDictionary) -> [Vec<f64>; 2] {
    let p = dict.len();
    let d = dict.dim();
    let (points, weights) = support_rule(spec, dict);
    let mut out = [vec![0.0; p], vec![0.0; p]];
    let mut v = vec![0.0; p];
    for (x, w) in points.chunks(d).zip(&weights) {
        let s = spec.initial.susceptible_density(x);
        let i = spec.initial.infected_density(x);
        if s == 0.0 && i == 0.0 {
            continue;
        }
        dict.eval_all(x, &mut v);
        for q in 0..p {
            out[0][q] += w * s * v[q];
            out[1][q] += w * i * v[q];
        }
    }
    out
}

/// Covariance of the initial fluctuation coordinates, ordered
/// `(U_0, phi_1..P), (V_0, phi_1..P), (W_0, phi_1..P)`.
///
/// Each individual contributes `(1_S phi(X), 1_I psi(X))` independently, so
/// `Cov = E[1_S phi phi'] - E_S E_S'` on the S block, the analogue with `p 1_A g`
/// on the I block, and `-E_S[phi] E_I[psi]` across. The R block vanishes.
pub fn initial_fluct_cov(spec: &ModelSpec, dict: &TestDictionary) -> DMatrix<f64> {
    let p = dict.len();
    let d = dict.dim();
    let (points, weights) = support_rule(spec, dict);
    let mut second_s = DMatrix::<f64>::zeros(p, p);
    let mut second_i = DMatrix::<f64>::zeros(p, p);
    let mut v = vec![0.0; p];
    for (x, w) in points.chunks(d).zip(&weights) {
        let s = spec.initial.susceptible_density(x);
        let i = spec.initial.infected_density(x);
        if s == 0.0 && i == 0.0 {
            continue;
        }
        dict.eval_all(x, &mut v);
        for a in 0..p {
            for b in 0..=a {
                let prod = w * v[a] * v[b];
                second_s[(a, b)] += prod * s;
                second_i[(a, b)] += prod * i;
            }
        }
    }
    let [es, ei] = initial_means(spec, dict);
    let mut cov = DMatrix::zeros(3 * p, 3 * p);
    for a in 0..p {
        for b in 0..=a {
            let ss = second_s[(a, b)] - es[a] * es[b];
            let ii = second_i[(a, b)] - ei[a] * ei[b];
            cov[(a, b)] = ss;
            cov[(b, a)] = ss;
            cov[(p + a, p + b)] = ii;
            cov[(p + b, p + a)] = ii;
        }
        for b in 0..p {
            let si = -es[a] * ei[b];
            cov[(a, p + b)] = si;
            cov[(p + b, a)] = si;
        }
    }
    cov
}
