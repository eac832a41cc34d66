use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::measure::TestDictionary;
use crate::model::{Compartment, ModelSpec};
use crate::pde::{DensityField, Grid, KernelConvolution};

/// Which quadratic-variation formulas to use.
///
/// `Representation` follows the white-noise construction of the limit
/// martingales (recovery noise enters the I and R brackets, negative I–R
/// cross term). `Theorem` is the alternative list without the recovery term in
/// the I bracket, `alpha (f^R, phi^2) + (f^I, |theta_I grad phi|^2)` for R, and
/// a positive I–R cross term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BracketVariant {
    Representation,
    Theorem,
}

impl BracketVariant {
    pub const ALL: [BracketVariant; 2] = [BracketVariant::Representation, BracketVariant::Theorem];

    fn slot(self) -> usize {
        match self {
            BracketVariant::Representation => 0,
            BracketVariant::Theorem => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BracketVariant::Representation => "representation",
            BracketVariant::Theorem => "theorem",
        }
    }
}

/// Dictionary members and gradients at the grid nodes inside their support.
#[derive(Debug, Clone)]
pub struct GridDictionary {
    pub nodes: Vec<usize>,
    /// `nodes × P`.
    pub values: Vec<f64>,
    /// `nodes × P × d`.
    pub grads: Vec<f64>,
    pub members: usize,
}

impl GridDictionary {
    pub fn new(dict: &TestDictionary, grid: &Grid) -> Self {
        let d = grid.dim();
        let p = dict.len();
        let (lo, hi) = dict.support();
        let mut x = [0.0; 2];
        let mut nodes = Vec::new();
        let mut values = Vec::new();
        let mut grads = Vec::new();
        let mut v = vec![0.0; p];
        let mut g = vec![0.0; p * d];
        let mut h = vec![0.0; p * d * d];
        for k in 0..grid.len() {
            grid.node(k, &mut x[..d]);
            if (0..d).any(|ax| x[ax] <= lo[ax] || x[ax] >= hi[ax]) {
                continue;
            }
            dict.derivatives_all(&x[..d], &mut v, &mut g, &mut h);
            nodes.push(k);
            values.extend_from_slice(&v);
            grads.extend_from_slice(&g);
        }
        GridDictionary { nodes, values, grads, members: p }
    }

    pub fn value(&self, j: usize, p: usize) -> f64 {
        self.values[j * self.members + p]
    }
}

/// Quadratic variations of the limit martingales projected on a dictionary,
/// as `3P × 3P` matrices ordered `(M^1, phi_1..P), (M^2, ...), (M^3, ...)`.
#[derive(Debug, Clone)]
pub struct BracketSeries {
    pub times: Vec<f64>,
    pub members: usize,
    /// Integrands at each time, per variant.
    rates: [Vec<DMatrix<f64>>; 2],
    /// Cumulative trapezoidal integrals, per variant.
    cumulative: [Vec<DMatrix<f64>>; 2],
}

impl BracketSeries {
    pub fn rate(&self, variant: BracketVariant, k: usize) -> &DMatrix<f64> {
        &self.rates[variant.slot()][k]
    }

    pub fn cumulative(&self, variant: BracketVariant, k: usize) -> &DMatrix<f64> {
        &self.cumulative[variant.slot()][k]
    }

    /// Bracket at time `t` by linear interpolation between nodes.
    pub fn at(&self, variant: BracketVariant, t: f64) -> DMatrix<f64> {
        let c = &self.cumulative[variant.slot()];
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            return c[0].clone();
        }
        if k >= self.times.len() {
            return c[c.len() - 1].clone();
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let w = (t - t0) / (t1 - t0);
        &c[k - 1] * (1.0 - w) + &c[k] * w
    }

    /// Time derivative of the bracket at node `k` by centred differences
    /// (one-sided at the ends).
    pub fn noise_rate(&self, variant: BracketVariant, k: usize) -> DMatrix<f64> {
        let c = &self.cumulative[variant.slot()];
        let n = self.times.len();
        if n < 2 {
            return self.rates[variant.slot()][0].clone();
        }
        let (a, b) = if k == 0 {
            (0, 1)
        } else if k + 1 >= n {
            (n - 2, n - 1)
        } else {
            (k - 1, k + 1)
        };
        (&c[b] - &c[a]) / (self.times[b] - self.times[a])
    }

    /// Block `(row compartment, column compartment)` of a `3P × 3P` matrix.
    pub fn block(m: &DMatrix<f64>, a: Compartment, b: Compartment, p: usize) -> DMatrix<f64> {
        m.view((a.index() * p, b.index() * p), (p, p)).into_owned()
    }
}

/// Bracket integrands at one time for both variants.
fn rate_matrices(
    spec: &ModelSpec,
    field: &DensityField,
    grid: &Grid,
    gd: &GridDictionary,
    conv: &KernelConvolution,
    cov: &[Vec<f64>; 3],
) -> [DMatrix<f64>; 2] {
    let p = gd.members;
    let d = grid.dim();
    let vol = grid.cell_volume();
    let alpha = spec.alpha;
    let c = conv.apply(&field.i);
    let mut infection = DMatrix::zeros(p, p);
    let mut recovery_i = DMatrix::zeros(p, p);
    let mut recovery_r = DMatrix::zeros(p, p);
    let mut motion = [DMatrix::zeros(p, p), DMatrix::zeros(p, p), DMatrix::zeros(p, p)];
    let dens = [&field.s, &field.i, &field.r];
    let mut ag = vec![0.0; p * d];
    for (j, &k) in gd.nodes.iter().enumerate() {
        let v = &gd.values[j * p..(j + 1) * p];
        let g = &gd.grads[j * p * d..(j + 1) * p * d];
        let w_inf = vol * field.s[k] * c[k];
        let w_rec_i = vol * alpha * field.i[k];
        let w_rec_r = vol * alpha * field.r[k];
        for a in 0..p {
            for b in 0..=a {
                let vv = v[a] * v[b];
                infection[(a, b)] += w_inf * vv;
                recovery_i[(a, b)] += w_rec_i * vv;
                recovery_r[(a, b)] += w_rec_r * vv;
            }
        }
        for comp in 0..3 {
            let f = dens[comp][k];
            if f == 0.0 {
                continue;
            }
            let a_mat = &cov[comp][k * d * d..(k + 1) * d * d];
            for q in 0..p {
                for l in 0..d {
                    ag[q * d + l] = (0..d).map(|u| a_mat[l * d + u] * g[q * d + u]).sum();
                }
            }
            for a in 0..p {
                for b in 0..=a {
                    let dot: f64 = (0..d).map(|l| g[a * d + l] * ag[b * d + l]).sum();
                    motion[comp][(a, b)] += vol * f * dot;
                }
            }
        }
    }
    for m in [&mut infection, &mut recovery_i, &mut recovery_r]
        .into_iter()
        .chain(motion.iter_mut())
    {
        m.fill_upper_triangle_with_lower_triangle();
    }
    let assemble = |ss: &DMatrix<f64>, ii: &DMatrix<f64>, rr: &DMatrix<f64>, si: &DMatrix<f64>, ir: &DMatrix<f64>| {
        let mut m = DMatrix::zeros(3 * p, 3 * p);
        m.view_mut((0, 0), (p, p)).copy_from(ss);
        m.view_mut((p, p), (p, p)).copy_from(ii);
        m.view_mut((2 * p, 2 * p), (p, p)).copy_from(rr);
        m.view_mut((0, p), (p, p)).copy_from(si);
        m.view_mut((p, 0), (p, p)).copy_from(&si.transpose());
        m.view_mut((p, 2 * p), (p, p)).copy_from(ir);
        m.view_mut((2 * p, p), (p, p)).copy_from(&ir.transpose());
        m
    };
    let ss = &infection + &motion[0];
    let representation = assemble(
        &ss,
        &(&infection + &motion[1] + &recovery_i),
        &(&motion[2] + &recovery_i),
        &(-&infection),
        &(-&recovery_i),
    );
    let theorem = assemble(
        &ss,
        &(&infection + &motion[1]),
        &(&recovery_r + &motion[1]),
        &(-&infection),
        &recovery_i,
    );
    [representation, theorem]
}

/// Bracket integrands of both variants at every field of `series`, and their
/// cumulative trapezoidal integrals from the first time.
pub fn bracket_quadrature(spec: &ModelSpec, series: &[DensityField], grid: &Grid, dict: &TestDictionary) -> BracketSeries {
    let gd = GridDictionary::new(dict, grid);
    let conv = KernelConvolution::new(&spec.kernel, grid);
    let d = grid.dim();
    let mut x = [0.0; 2];
    let cov: [Vec<f64>; 3] = Compartment::ALL.map(|c| {
        let mut out = vec![0.0; grid.len() * d * d];
        for k in 0..grid.len() {
            grid.node(k, &mut x[..d]);
            spec.coeff(c).covariance(&x[..d], &mut out[k * d * d..(k + 1) * d * d]);
        }
        out
    });
    let mut rates: [Vec<DMatrix<f64>>; 2] = [Vec::new(), Vec::new()];
    for f in series {
        let [a, b] = rate_matrices(spec, f, grid, &gd, &conv, &cov);
        rates[0].push(a);
        rates[1].push(b);
    }
    let times: Vec<f64> = series.iter().map(|f| f.time).collect();
    let p = dict.len();
    let cumulative = [0, 1].map(|v| {
        let mut acc = vec![DMatrix::zeros(3 * p, 3 * p)];
        for k in 1..times.len() {
            let dt = times[k] - times[k - 1];
            let next = &acc[k - 1] + (&rates[v][k - 1] + &rates[v][k]) * (0.5 * dt);
            acc.push(next);
        }
        acc
    });
    BracketSeries { times, members: p, rates, cumulative }
}
