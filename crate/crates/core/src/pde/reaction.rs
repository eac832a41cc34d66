use rayon::prelude::*;

use crate::model::{ContactKernel, KernelShape};
use crate::pde::field::DensityField;
use crate::pde::grid::Grid;

/// Banded quadrature of `x -> int K(x, y) f(y) dy` on a grid, using the
/// translation invariance of the profile: `K(x_k, y_j) = beta(y_j) F(|k - j| h)`.
#[derive(Debug, Clone)]
pub struct KernelConvolution {
    grid: Grid,
    beta: Vec<f64>,
    /// `(offset along axis 0, offset along axis 1, F(|offset| h))`.
    offsets: Vec<(isize, isize, f64)>,
    /// Profile equals 1 across the whole box.
    flat: bool,
    zero: bool,
}

impl KernelConvolution {
    pub fn new(kernel: &ContactKernel, grid: &Grid) -> Self {
        let d = grid.dim();
        let h = grid.h();
        let mut x = [0.0; 2];
        let beta = (0..grid.len())
            .map(|k| {
                grid.node(k, &mut x[..d]);
                kernel.beta.eval(&x[..d])
            })
            .collect();
        let diagonal = grid.shape().iter().map(|n| (*n as f64 * h).powi(2)).sum::<f64>().sqrt();
        let flat = matches!(kernel.shape, KernelShape::FlatTop { inner, .. } if diagonal * (1.0 + 1e-9) < inner);
        let mut offsets = Vec::new();
        if !flat {
            let reach = |ax: usize| ((kernel.support_radius() / h).floor() as isize).min(grid.shape()[ax] as isize - 1);
            let b0 = reach(0);
            let b1 = if d == 2 { reach(1) } else { 0 };
            for i in -b0..=b0 {
                for j in -b1..=b1 {
                    let r = h * ((i * i + j * j) as f64).sqrt();
                    if r < kernel.support_radius() {
                        let v = kernel.shape.value(r);
                        if v != 0.0 {
                            offsets.push((i, j, v));
                        }
                    }
                }
            }
        }
        KernelConvolution { grid: grid.clone(), beta, offsets, flat, zero: kernel.is_zero() }
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let n = self.grid.len();
        if self.zero {
            return vec![0.0; n];
        }
        let vol = self.grid.cell_volume();
        let weighted: Vec<f64> = self.beta.iter().zip(f).map(|(b, v)| b * v).collect();
        if self.flat {
            return vec![weighted.iter().sum::<f64>() * vol; n];
        }
        let shape = self.grid.shape();
        let (n0, n1) = (shape[0] as isize, if self.grid.dim() == 2 { shape[1] as isize } else { 1 });
        (0..n)
            .into_par_iter()
            .map(|k| {
                let idx = self.grid.multi_index(k);
                let (i0, i1) = (idx[0] as isize, idx[1] as isize);
                let mut acc = 0.0;
                for &(a, b, w) in &self.offsets {
                    let (p, q) = (i0 + a, i1 + b);
                    if p >= 0 && p < n0 && q >= 0 && q < n1 {
                        acc += w * weighted[(p * n1 + q) as usize];
                    }
                }
                acc * vol
            })
            .collect()
    }
}

/// `x -> int K(x, y) f^I(y) dy` on the grid nodes.
pub fn convolve_kernel(fi: &[f64], kernel: &ContactKernel, grid: &Grid) -> Vec<f64> {
    KernelConvolution::new(kernel, grid).apply(fi)
}

/// Exact-exponential reaction over `dt` with the infection pressure `c` held fixed:
/// S loses `f^S (1 - e^{-c dt})` to I, then I loses `f^I (1 - e^{-alpha dt})` to R.
pub fn react(field: &mut DensityField, c: &[f64], alpha: f64, dt: f64) {
    let decay = (-alpha * dt).exp();
    for k in 0..field.s.len() {
        let s = field.s[k];
        let s_new = s * (-c[k] * dt).exp();
        let i_mid = field.i[k] + (s - s_new);
        let i_new = i_mid * decay;
        field.s[k] = s_new;
        field.i[k] = i_new;
        field.r[k] += i_mid - i_new;
    }
}

/// One reaction step with the pressure computed from the current infected density.
pub fn reaction_step(field: &DensityField, kernel: &ContactKernel, alpha: f64, dt: f64, grid: &Grid) -> DensityField {
    let c = convolve_kernel(&field.i, kernel, grid);
    let mut out = field.clone();
    react(&mut out, &c, alpha, dt);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BetaField;

    fn grid1() -> Grid {
        Grid::new(vec![-2.0], vec![2.0], 0.01).unwrap()
    }

    fn field(grid: &Grid) -> DensityField {
        let mut x = [0.0];
        let bump: Vec<f64> = (0..grid.len())
            .map(|k| {
                grid.node(k, &mut x);
                (-4.0 * x[0] * x[0]).exp()
            })
            .collect();
        DensityField {
            time: 0.0,
            s: bump.clone(),
            i: bump.iter().map(|v| 0.3 * v).collect(),
            r: bump.iter().map(|v| 0.1 * v).collect(),
            leakage: 0.0,
        }
    }

    #[test]
    fn zero_infected_gives_zero_pressure() {
        let g = grid1();
        let k = ContactKernel::new(BetaField::Constant { value: 2.0 }, KernelShape::PolyBump { radius: 0.5, power: 4 });
        assert!(convolve_kernel(&vec![0.0; g.len()], &k, &g).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn flat_kernel_factorizes() {
        let g = grid1();
        let k = ContactKernel::new(
            BetaField::Constant { value: 1.5 },
            KernelShape::FlatTop { inner: 10.0, radius: 12.0, order: 3 },
        );
        let f = field(&g);
        let q = g.integrate(&f.i);
        for v in convolve_kernel(&f.i, &k, &g) {
            assert!((v - 1.5 * q).abs() < 1e-12);
        }
        // The banded path on a kernel that is flat only over part of its reach agrees.
        let k2 = ContactKernel::new(
            BetaField::Constant { value: 1.5 },
            KernelShape::FlatTop { inner: 3.9, radius: 4.5, order: 3 },
        );
        let c2 = convolve_kernel(&f.i, &k2, &g);
        assert!((c2[200] - 1.5 * q).abs() < 1e-12);
    }

    #[test]
    fn narrow_source_reproduces_kernel_profile() {
        let g = grid1();
        let k = ContactKernel::new(BetaField::Constant { value: 1.0 }, KernelShape::PolyBump { radius: 0.5, power: 4 });
        let mut x = [0.0];
        let width = 0.01;
        let src: Vec<f64> = (0..g.len())
            .map(|j| {
                g.node(j, &mut x);
                (-0.5 * ((x[0] - 0.005) / width).powi(2)).exp() / (width * (2.0 * std::f64::consts::PI).sqrt())
            })
            .collect();
        let mass = g.integrate(&src);
        let c = convolve_kernel(&src, &k, &g);
        for node in [150, 200, 230, 260] {
            g.node(node, &mut x);
            let expect = k.eval(&x, &[0.005]) * mass;
            assert!((c[node] - expect).abs() < 5e-3, "{node}: {} vs {expect}", c[node]);
        }
    }

    #[test]
    fn reaction_without_kernel_halves_infected() {
        let g = grid1();
        let f = field(&g);
        let out = reaction_step(&f, &ContactKernel::zero(), 2f64.ln(), 1.0, &g);
        for k in 0..g.len() {
            assert_eq!(out.s[k], f.s[k]);
            assert!((out.i[k] - 0.5 * f.i[k]).abs() < 1e-15);
            assert!((out.r[k] - (f.r[k] + 0.5 * f.i[k])).abs() < 1e-15);
        }
        let same = reaction_step(&f, &ContactKernel::zero(), 0.0, 1.0, &g);
        assert_eq!(same, f);
    }

    #[test]
    fn reaction_preserves_nodewise_total() {
        let g = grid1();
        let f = field(&g);
        let k = ContactKernel::new(BetaField::Constant { value: 5.0 }, KernelShape::PolyBump { radius: 0.3, power: 4 });
        let out = reaction_step(&f, &k, 0.7, 0.05, &g);
        for n in 0..g.len() {
            let before = f.s[n] + f.i[n] + f.r[n];
            let after = out.s[n] + out.i[n] + out.r[n];
            assert!((before - after).abs() <= 1e-14 * before.max(1e-300), "{n}");
        }
    }
}
