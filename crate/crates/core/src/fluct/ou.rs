use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fluct::bracket::{bracket_quadrature, BracketSeries, BracketVariant, GridDictionary};
use crate::measure::TestDictionary;
use crate::model::{generator_from_derivatives, Compartment, ModelSpec, MAX_DIM};
use crate::pde::{DensityField, Grid};
use crate::rng::{stream, Phase};

/// Relative finite-difference step for derivatives of `Q_A phi`.
const FD_STEP: f64 = 1e-3;

/// Largest admitted negative eigenvalue of a noise rate matrix, relative to its scale.
pub const PSD_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OuBuildOptions {
    /// Keep every `time_stride`-th field of the series as a drift node.
    #[serde(default = "default_stride")]
    pub time_stride: usize,
    /// Relative projection residual above which a member is flagged.
    #[serde(default = "default_residual")]
    pub residual_threshold: f64,
    /// Panels per axis for the weighted inner products; 0 uses the dictionary's own.
    #[serde(default)]
    pub panels: usize,
}

fn default_stride() -> usize {
    1
}

fn default_residual() -> f64 {
    0.5
}

impl Default for OuBuildOptions {
    fn default() -> Self {
        OuBuildOptions { time_stride: 1, residual_threshold: default_residual(), panels: 0 }
    }
}

/// Relative distance of `Q_A phi_p` to the dictionary span.
#[derive(Debug, Clone, Serialize)]
pub struct ProjectionResidual {
    pub compartment: Compartment,
    pub member: usize,
    pub relative: f64,
    pub flagged: bool,
}

/// Linear SDE `dC = D(t) C dt + dM` for the `3P` fluctuation coordinates.
#[derive(Debug, Clone)]
pub struct OuGalerkinSystem {
    pub members: usize,
    pub times: Vec<f64>,
    /// `D(t)` at each time node; rows are the coordinate being driven.
    pub drift: Vec<DMatrix<f64>>,
    /// `<Q_A phi_p, phi_q>` per compartment.
    pub generator: [DMatrix<f64>; 3],
    pub residuals: Vec<ProjectionResidual>,
    /// Smallest eigenvalue of the noise rate at each node, per variant.
    pub min_noise_eigenvalue: [Vec<f64>; 2],
    pub brackets: BracketSeries,
    /// Index into `brackets.times` of each node.
    node_index: Vec<usize>,
}

impl OuGalerkinSystem {
    pub fn noise(&self, variant: BracketVariant, k: usize) -> DMatrix<f64> {
        let s = self.brackets.noise_rate(variant, self.node_index[k]);
        0.5 * (&s + s.transpose())
    }

    pub fn flagged(&self) -> impl Iterator<Item = &ProjectionResidual> {
        self.residuals.iter().filter(|r| r.flagged)
    }
}

/// Values, gradients and Hessians of all members at `x`.
struct MemberDerivs {
    v: Vec<f64>,
    g: Vec<f64>,
    h: Vec<f64>,
}

impl MemberDerivs {
    fn new(dict: &TestDictionary, x: &[f64]) -> Self {
        let p = dict.len();
        let d = dict.dim();
        let mut m = MemberDerivs { v: vec![0.0; p], g: vec![0.0; p * d], h: vec![0.0; p * d * d] };
        dict.derivatives_all(x, &mut m.v, &mut m.g, &mut m.h);
        m
    }
}

/// `Q phi_p` for all members at `x`.
fn generator_values(dict: &TestDictionary, spec: &ModelSpec, c: Compartment, x: &[f64]) -> Vec<f64> {
    let d = dict.dim();
    let m = MemberDerivs::new(dict, x);
    (0..dict.len())
        .map(|p| generator_from_derivatives(spec.coeff(c), x, &m.g[p * d..(p + 1) * d], &m.h[p * d * d..(p + 1) * d * d]))
        .collect()
}

/// Derivative features of `Q_A phi_p` for all members at `x` (`P × F`), by central differences.
fn generator_features(dict: &TestDictionary, spec: &ModelSpec, c: Compartment, x: &[f64]) -> Vec<Vec<f64>> {
    let d = dict.dim();
    let p = dict.len();
    let eps = FD_STEP * dict.family().half_width;
    let at = |shift: &[(usize, f64)]| {
        let mut y = x.to_vec();
        for &(ax, s) in shift {
            y[ax] += s * eps;
        }
        generator_values(dict, spec, c, &y)
    };
    let centre = at(&[]);
    let mut grad = vec![vec![0.0; d]; p];
    let mut hess = vec![vec![0.0; d * d]; p];
    let mut plus = Vec::with_capacity(d);
    let mut minus = Vec::with_capacity(d);
    for l in 0..d {
        plus.push(at(&[(l, 1.0)]));
        minus.push(at(&[(l, -1.0)]));
    }
    for l in 0..d {
        for q in 0..p {
            grad[q][l] = (plus[l][q] - minus[l][q]) / (2.0 * eps);
            hess[q][l * d + l] = (plus[l][q] - 2.0 * centre[q] + minus[l][q]) / (eps * eps);
        }
        if dict.order() >= 2 {
            for u in l + 1..d {
                let pp = at(&[(l, 1.0), (u, 1.0)]);
                let pm = at(&[(l, 1.0), (u, -1.0)]);
                let mp = at(&[(l, -1.0), (u, 1.0)]);
                let mm = at(&[(l, -1.0), (u, -1.0)]);
                for q in 0..p {
                    let v = (pp[q] - pm[q] - mp[q] + mm[q]) / (4.0 * eps * eps);
                    hess[q][l * d + u] = v;
                    hess[q][u * d + l] = v;
                }
            }
        }
    }
    (0..p)
        .map(|q| {
            let mut f = Vec::with_capacity(dict.n_features());
            dict.push_features(centre[q], &grad[q], &hess[q], &mut f);
            f
        })
        .collect()
}

fn member_features(dict: &TestDictionary, m: &MemberDerivs) -> Vec<Vec<f64>> {
    let d = dict.dim();
    (0..dict.len())
        .map(|q| {
            let mut f = Vec::with_capacity(dict.n_features());
            dict.push_features(m.v[q], &m.g[q * d..(q + 1) * d], &m.h[q * d * d..(q + 1) * d * d], &mut f);
            f
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Pressure `c(x) = int K(x, y) f^I(y) dy` with its gradient and Hessian in `x`.
fn pressure_derivs(spec: &ModelSpec, grid: &Grid, fi: &[f64], beta: &[f64], x: &[f64]) -> (f64, [f64; 2], [f64; 4]) {
    let d = grid.dim();
    let vol = grid.cell_volume();
    let mut c = 0.0;
    let mut cg = [0.0; 2];
    let mut ch = [0.0; 4];
    let mut y = [0.0; 2];
    let mut g = [0.0; MAX_DIM];
    let mut h = [0.0; MAX_DIM * MAX_DIM];
    for k in neighbourhood(grid, x, spec.kernel.support_radius()) {
        let w = fi[k] * beta[k] * vol;
        if w == 0.0 {
            continue;
        }
        grid.node(k, &mut y[..d]);
        let f = spec.kernel.profile_derivatives(x, &y[..d], &mut g[..d], &mut h[..d * d]);
        c += w * f;
        for l in 0..d {
            cg[l] += w * g[l];
        }
        for lu in 0..d * d {
            ch[lu] += w * h[lu];
        }
    }
    (c, cg, ch)
}

/// Grid nodes within distance `r` of `x` along every axis.
fn neighbourhood(grid: &Grid, x: &[f64], r: f64) -> Vec<usize> {
    let d = grid.dim();
    let h = grid.h();
    let range = |ax: usize| {
        let lo = ((x[ax] - r - grid.lo()[ax]) / h - 0.5).floor().max(0.0) as usize;
        let hi = (((x[ax] + r - grid.lo()[ax]) / h + 0.5).ceil().max(0.0) as usize).min(grid.shape()[ax]);
        lo.min(hi)..hi
    };
    let mut out = Vec::new();
    if d == 1 {
        out.extend(range(0));
    } else {
        for i in range(0) {
            for j in range(1) {
                out.push(grid.flat_index([i, j]));
            }
        }
    }
    out
}

/// `<G^I phi_p, phi_q>` and `<G^S phi_p, phi_q>` at one time, where
/// `G^I phi = phi c` and `G^S phi(y) = int phi(x) K(x, y) f^S(x) dx`.
fn interaction_matrices(
    spec: &ModelSpec,
    field: &DensityField,
    grid: &Grid,
    gd: &GridDictionary,
    dict: &TestDictionary,
    rule: &(Vec<f64>, Vec<f64>),
    members_at_nodes: &[Vec<Vec<f64>>],
    derivs_at_nodes: &[MemberDerivs],
    beta: &[f64],
) -> (DMatrix<f64>, DMatrix<f64>) {
    let p = dict.len();
    let d = dict.dim();
    let mut gi = DMatrix::zeros(p, p);
    let mut gs = DMatrix::zeros(p, p);
    if spec.kernel.is_zero() {
        return (gi, gs);
    }
    let vol = grid.cell_volume();
    let radius = spec.kernel.support_radius();
    // f^S phi_p h^d at grid nodes in the dictionary support.
    let mut xs = [0.0; 2];
    let (points, weights) = rule;
    let mut kg = [0.0; MAX_DIM];
    let mut kh = [0.0; MAX_DIM * MAX_DIM];
    let mut bg = [0.0; MAX_DIM];
    let mut bh = [0.0; MAX_DIM * MAX_DIM];
    let gd_pos: std::collections::HashMap<usize, usize> = gd.nodes.iter().enumerate().map(|(j, &k)| (k, j)).collect();
    for (n, (x, w)) in points.chunks(d).zip(weights).enumerate() {
        let phi_q = &members_at_nodes[n];
        let m = &derivs_at_nodes[n];
        // G^I: product rule on phi_p c.
        if m.v.iter().any(|v| *v != 0.0) || m.g.iter().any(|v| *v != 0.0) {
            let (c, cg, ch) = pressure_derivs(spec, grid, &field.i, beta, x);
            for a in 0..p {
                let ga = &m.g[a * d..(a + 1) * d];
                let ha = &m.h[a * d * d..(a + 1) * d * d];
                let mut grad = [0.0; 2];
                let mut hess = [0.0; 4];
                for l in 0..d {
                    grad[l] = ga[l] * c + m.v[a] * cg[l];
                    for u in 0..d {
                        hess[l * d + u] = ha[l * d + u] * c + ga[l] * cg[u] + cg[l] * ga[u] + m.v[a] * ch[l * d + u];
                    }
                }
                let mut f = Vec::with_capacity(dict.n_features());
                dict.push_features(m.v[a] * c, &grad[..d], &hess[..d * d], &mut f);
                for q in 0..p {
                    gi[(a, q)] += w * dot(&f, &phi_q[q]);
                }
            }
        }
        // G^S: y-derivatives of beta(y) F(|x - y|) integrated against phi_p f^S.
        let by = spec.kernel.beta.derivatives(x, &mut bg[..d], &mut bh[..d * d]);
        let mut acc = vec![[0.0; 1 + 2 + 4]; p];
        for k in neighbourhood(grid, x, radius) {
            let Some(&j) = gd_pos.get(&k) else { continue };
            let fs = field.s[k] * vol;
            if fs == 0.0 {
                continue;
            }
            grid.node(k, &mut xs[..d]);
            let f = spec.kernel.profile_derivatives(&xs[..d], x, &mut kg[..d], &mut kh[..d * d]);
            if f == 0.0 && kg[..d].iter().all(|v| *v == 0.0) {
                continue;
            }
            // Gradient in y of F(|x - y|) is minus the x-gradient; the Hessian is shared.
            let mut kv = [0.0; 7];
            kv[0] = by * f;
            for l in 0..d {
                kv[1 + l] = bg[l] * f - by * kg[l];
                for u in 0..d {
                    kv[3 + l * d + u] = bh[l * d + u] * f - bg[l] * kg[u] - kg[l] * bg[u] + by * kh[l * d + u];
                }
            }
            for a in 0..p {
                let s = fs * gd.value(j, a);
                if s == 0.0 {
                    continue;
                }
                for (t, v) in acc[a].iter_mut().zip(&kv) {
                    *t += s * v;
                }
            }
        }
        for a in 0..p {
            let mut f = Vec::with_capacity(dict.n_features());
            dict.push_features(acc[a][0], &acc[a][1..1 + d], &acc[a][3..3 + d * d], &mut f);
            for q in 0..p {
                gs[(a, q)] += w * dot(&f, &phi_q[q]);
            }
        }
    }
    (gi, gs)
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    SymmetricEigen::new(0.5 * (m + m.transpose())).eigenvalues.min()
}

/// Projects the limit fluctuation equations onto the dictionary span along
/// the mean-field series, with noise rates from the representation brackets
/// (and the alternative variant for comparison).
pub fn ou_galerkin_build(
    spec: &ModelSpec,
    series: &[DensityField],
    grid: &Grid,
    dict: &TestDictionary,
    opts: &OuBuildOptions,
) -> Result<OuGalerkinSystem> {
    if series.is_empty() {
        return Err(invalid("the density series is empty"));
    }
    if dict.identity_error() > 1e-6 {
        return Err(invalid("the dictionary is not orthonormal"));
    }
    let p = dict.len();
    let d = dict.dim();
    let panels = if opts.panels == 0 { dict.panels() } else { opts.panels };
    let rule = dict.weighted_rule(panels);
    let (points, weights) = &rule;
    let derivs: Vec<MemberDerivs> = points.chunks(d).map(|x| MemberDerivs::new(dict, x)).collect();
    let feats: Vec<Vec<Vec<f64>>> = derivs.iter().map(|m| member_features(dict, m)).collect();

    // Generator projections and residual norms.
    let mut generator: [DMatrix<f64>; 3] = [DMatrix::zeros(p, p), DMatrix::zeros(p, p), DMatrix::zeros(p, p)];
    let mut norms = [vec![0.0; p], vec![0.0; p], vec![0.0; p]];
    for c in Compartment::ALL {
        for (n, (x, w)) in points.chunks(d).zip(weights).enumerate() {
            if derivs[n].v.iter().all(|v| *v == 0.0) && derivs[n].g.iter().all(|v| *v == 0.0) {
                continue;
            }
            let q = generator_features(dict, spec, c, x);
            for a in 0..p {
                norms[c.index()][a] += w * dot(&q[a], &q[a]);
                for b in 0..p {
                    generator[c.index()][(a, b)] += w * dot(&q[a], &feats[n][b]);
                }
            }
        }
    }
    let mut residuals = Vec::new();
    for c in Compartment::ALL {
        for a in 0..p {
            let total = norms[c.index()][a];
            let captured: f64 = (0..p).map(|b| generator[c.index()][(a, b)].powi(2)).sum();
            let relative = if total > 0.0 { ((total - captured).max(0.0) / total).sqrt() } else { 0.0 };
            residuals.push(ProjectionResidual { compartment: c, member: a, relative, flagged: relative > opts.residual_threshold });
        }
    }

    let brackets = bracket_quadrature(spec, series, grid, dict);
    let stride = opts.time_stride.max(1);
    let mut node_index: Vec<usize> = (0..series.len()).step_by(stride).collect();
    if *node_index.last().expect("nonempty") != series.len() - 1 {
        node_index.push(series.len() - 1);
    }
    let gd = GridDictionary::new(dict, grid);
    let mut x = [0.0; 2];
    let beta: Vec<f64> = (0..grid.len())
        .map(|k| {
            grid.node(k, &mut x[..d]);
            spec.kernel.beta.eval(&x[..d])
        })
        .collect();
    let eye = DMatrix::<f64>::identity(p, p);
    let mut drift = Vec::with_capacity(node_index.len());
    let mut min_noise_eigenvalue = [Vec::new(), Vec::new()];
    for &k in &node_index {
        let (gi, gs) = interaction_matrices(spec, &series[k], grid, &gd, dict, &rule, &feats, &derivs, &beta);
        let mut m = DMatrix::zeros(3 * p, 3 * p);
        m.view_mut((0, 0), (p, p)).copy_from(&(&generator[0] - &gi));
        m.view_mut((0, p), (p, p)).copy_from(&(-&gs));
        m.view_mut((p, 0), (p, p)).copy_from(&gi);
        m.view_mut((p, p), (p, p)).copy_from(&(&generator[1] + &gs - &eye * spec.alpha));
        m.view_mut((2 * p, p), (p, p)).copy_from(&(&eye * spec.alpha));
        m.view_mut((2 * p, 2 * p), (p, p)).copy_from(&generator[2]);
        if m.iter().any(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite drift matrix at t = {}", series[k].time)));
        }
        drift.push(m);
        for v in BracketVariant::ALL {
            let s = brackets.noise_rate(v, k);
            let e = min_eigenvalue(&s);
            let scale = s.amax().max(1.0);
            if v == BracketVariant::Representation && e < -PSD_TOLERANCE * scale {
                return Err(Error::NotPositiveSemidefinite { time: series[k].time, min_eigenvalue: e });
            }
            min_noise_eigenvalue[match v {
                BracketVariant::Representation => 0,
                BracketVariant::Theorem => 1,
            }]
            .push(e);
        }
    }
    Ok(OuGalerkinSystem {
        members: p,
        times: node_index.iter().map(|&k| series[k].time).collect(),
        drift,
        generator,
        residuals,
        min_noise_eigenvalue,
        brackets,
        node_index,
    })
}

/// `(e^{D dt}, int_0^dt e^{D s} S e^{D^T s} ds)` by the block-exponential construction.
fn transition(drift: &DMatrix<f64>, noise: &DMatrix<f64>, dt: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = drift.nrows();
    let mut big = DMatrix::zeros(2 * n, 2 * n);
    big.view_mut((0, 0), (n, n)).copy_from(&(-drift * dt));
    big.view_mut((0, n), (n, n)).copy_from(&(noise * dt));
    big.view_mut((n, n), (n, n)).copy_from(&(drift.transpose() * dt));
    let e = big.exp();
    let f22 = e.view((n, n), (n, n)).into_owned();
    let f12 = e.view((0, n), (n, n)).into_owned();
    let phi = f22.transpose();
    let q = &phi * f12;
    (phi, 0.5 * (&q + q.transpose()))
}

/// Covariance of the coordinates at every node, from `cov0` at the first node,
/// with drift and noise averaged over each interval.
pub fn ou_covariance(sys: &OuGalerkinSystem, variant: BracketVariant, cov0: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
    let mut out = vec![cov0.clone()];
    for k in 1..sys.times.len() {
        let dt = sys.times[k] - sys.times[k - 1];
        let dm = (&sys.drift[k - 1] + &sys.drift[k]) * 0.5;
        let sm = (sys.noise(variant, k - 1) + sys.noise(variant, k)) * 0.5;
        let (phi, q) = transition(&dm, &sm, dt);
        let next = &phi * &out[k - 1] * phi.transpose() + q;
        out.push(0.5 * (&next + next.transpose()));
    }
    out
}

/// Integrator for sample paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum OuScheme {
    /// Exact Gaussian transition over each node interval with averaged coefficients.
    Exponential,
    /// Euler–Maruyama with the given number of substeps per node interval.
    EulerMaruyama { substeps: usize },
}

/// Symmetric square root of a PSD matrix, clipping eigenvalues above `-tol`.
pub fn psd_sqrt(m: &DMatrix<f64>, time: f64) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(0.5 * (m + m.transpose()));
    let scale = m.amax().max(1.0);
    let min = eig.eigenvalues.min();
    if min < -PSD_TOLERANCE * scale && min < -1e-8 * scale {
        return Err(Error::NotPositiveSemidefinite { time, min_eigenvalue: min });
    }
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose())
}

fn normal_vector<R: Rng>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Sample paths `[replicate][node]` of the coordinates, started from `N(0, cov0)`.
pub fn ou_galerkin_simulate(
    sys: &OuGalerkinSystem,
    variant: BracketVariant,
    cov0: &DMatrix<f64>,
    scheme: OuScheme,
    replicates: usize,
    seed: u64,
) -> Result<Vec<Vec<DVector<f64>>>> {
    let n = 3 * sys.members;
    let root0 = psd_sqrt(cov0, sys.times[0])?;
    enum Step {
        Exact(DMatrix<f64>, DMatrix<f64>),
        Euler(Vec<(DMatrix<f64>, DMatrix<f64>, f64)>),
    }
    let mut steps = Vec::with_capacity(sys.times.len().saturating_sub(1));
    for k in 1..sys.times.len() {
        let dt = sys.times[k] - sys.times[k - 1];
        match scheme {
            OuScheme::Exponential => {
                let dm = (&sys.drift[k - 1] + &sys.drift[k]) * 0.5;
                let sm = (sys.noise(variant, k - 1) + sys.noise(variant, k)) * 0.5;
                let (phi, q) = transition(&dm, &sm, dt);
                steps.push(Step::Exact(phi, psd_sqrt(&q, sys.times[k])?));
            }
            OuScheme::EulerMaruyama { substeps } => {
                let m = substeps.max(1);
                let h = dt / m as f64;
                let mut sub = Vec::with_capacity(m);
                for j in 0..m {
                    let w = (j as f64 + 0.5) / m as f64;
                    let dm = &sys.drift[k - 1] * (1.0 - w) + &sys.drift[k] * w;
                    let sm = sys.noise(variant, k - 1) * (1.0 - w) + sys.noise(variant, k) * w;
                    sub.push((dm, psd_sqrt(&sm, sys.times[k - 1] + w * dt)?, h));
                }
                steps.push(Step::Euler(sub));
            }
        }
    }
    let paths = (0..replicates as u64)
        .map(|r| {
            let mut rng = stream(seed, Phase::Auxiliary, r, 0);
            let mut c = &root0 * normal_vector(&mut rng, n);
            let mut path = Vec::with_capacity(sys.times.len());
            path.push(c.clone());
            for s in &steps {
                match s {
                    Step::Exact(phi, root) => {
                        c = phi * &c + root * normal_vector(&mut rng, n);
                    }
                    Step::Euler(sub) => {
                        for (dm, root, h) in sub {
                            let drift = dm * &c * *h;
                            c += drift + root * normal_vector(&mut rng, n) * h.sqrt();
                        }
                    }
                }
                path.push(c.clone());
            }
            path
        })
        .collect();
    Ok(paths)
}
