use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{Compartment, ModelSpec};
use crate::quadrature::GaussLegendre;

/// Uniform cell-centred grid on a box in one or two dimensions.
///
/// Node `k` (row-major, last axis fastest) sits at the centre of its cell,
/// `x = lo + (k + 1/2) h` per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    lo: Vec<f64>,
    h: f64,
    shape: Vec<usize>,
}

impl Grid {
    /// Grid on `[lo, hi]` with spacing `h`; every side must be a whole number of cells.
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, h: f64) -> Result<Self> {
        let d = lo.len();
        if !(1..=2).contains(&d) || hi.len() != d {
            return Err(invalid(format!("grid dimension must be 1 or 2, got {d}")));
        }
        if !(h > 0.0) {
            return Err(invalid("grid spacing must be positive"));
        }
        let mut shape = Vec::with_capacity(d);
        for (a, b) in lo.iter().zip(&hi) {
            let cells = (b - a) / h;
            let n = cells.round();
            if !(n >= 1.0) || (cells - n).abs() > 1e-6 * n.max(1.0) {
                return Err(invalid(format!("side [{a}, {b}] is not a whole number of cells of width {h}")));
            }
            shape.push(n as usize);
        }
        Ok(Grid { lo, h, shape })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.shape).map(|(a, n)| a + *n as f64 * self.h).collect()
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cell volume `h^d`.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim() as i32)
    }

    /// Per-axis cell indices of node `k`.
    pub fn multi_index(&self, k: usize) -> [usize; 2] {
        match self.dim() {
            1 => [k, 0],
            _ => [k / self.shape[1], k % self.shape[1]],
        }
    }

    pub fn flat_index(&self, idx: [usize; 2]) -> usize {
        match self.dim() {
            1 => idx[0],
            _ => idx[0] * self.shape[1] + idx[1],
        }
    }

    /// Coordinates of node `k`.
    pub fn node(&self, k: usize, out: &mut [f64]) {
        let idx = self.multi_index(k);
        for ax in 0..self.dim() {
            out[ax] = self.lo[ax] + (idx[ax] as f64 + 0.5) * self.h;
        }
    }

    /// All node coordinates, node-major.
    pub fn coords(&self) -> Vec<f64> {
        let d = self.dim();
        let mut out = vec![0.0; self.len() * d];
        for k in 0..self.len() {
            self.node(k, &mut out[k * d..(k + 1) * d]);
        }
        out
    }

    /// `sum_k f_k h^d`.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        f.iter().sum::<f64>() * self.cell_volume()
    }

    /// `sum_k phi(x_k) f_k h^d`.
    pub fn pair<F: FnMut(&[f64]) -> f64>(&self, f: &[f64], mut phi: F) -> f64 {
        let mut x = [0.0; 2];
        let d = self.dim();
        let mut acc = 0.0;
        for (k, v) in f.iter().enumerate() {
            if *v != 0.0 {
                self.node(k, &mut x[..d]);
                acc += phi(&x[..d]) * v;
            }
        }
        acc * self.cell_volume()
    }

    /// Cell averages of `f` by a Gauss rule on each cell, split at the given
    /// per-axis breakpoints so indicator discontinuities are integrated exactly.
    pub fn cell_averages<F: FnMut(&[f64]) -> f64>(&self, breaks: &[Vec<f64>], mut f: F) -> Vec<f64> {
        let d = self.dim();
        let gl = GaussLegendre::new(4);
        let axis_rules: Vec<Vec<Vec<(f64, f64)>>> = (0..d)
            .map(|ax| {
                (0..self.shape[ax])
                    .map(|i| {
                        let a = self.lo[ax] + i as f64 * self.h;
                        gl.composite_with_breaks(a, a + self.h, 1, &breaks[ax])
                    })
                    .collect()
            })
            .collect();
        let vol = self.cell_volume();
        let mut out = vec![0.0; self.len()];
        let mut x = [0.0; 2];
        for (k, o) in out.iter_mut().enumerate() {
            let idx = self.multi_index(k);
            let mut acc = 0.0;
            if d == 1 {
                for &(px, w) in &axis_rules[0][idx[0]] {
                    x[0] = px;
                    acc += w * f(&x[..1]);
                }
            } else {
                for &(px, wx) in &axis_rules[0][idx[0]] {
                    for &(py, wy) in &axis_rules[1][idx[1]] {
                        x[0] = px;
                        x[1] = py;
                        acc += wx * wy * f(&x[..2]);
                    }
                }
            }
            *o = acc / vol;
        }
        out
    }

    /// Checks that the box contains the effective support of the initial
    /// density enlarged by `3 max(R, sqrt(2 t_end sup|theta|^2 d))`.
    pub fn check_covers(&self, spec: &ModelSpec, t_end: f64) -> Result<()> {
        if spec.dim != self.dim() {
            return Err(Error::DimensionMismatch { expected: spec.dim, got: self.dim() });
        }
        let Some((glo, ghi)) = spec.initial.density.effective_box() else {
            return Ok(());
        };
        let theta2 = Compartment::ALL
            .iter()
            .map(|c| spec.coeff(*c).diffusion.sup_norm().powi(2))
            .fold(0.0, f64::max);
        let spread = (2.0 * t_end * theta2 * self.dim() as f64).sqrt();
        let margin = 3.0 * spec.kernel.support_radius().max(spread);
        let hi = self.hi();
        for ax in 0..self.dim() {
            if glo[ax] - margin < self.lo[ax] - 1e-12 || ghi[ax] + margin > hi[ax] + 1e-12 {
                return Err(Error::GridTooSmall(format!(
                    "axis {ax}: box [{}, {}] does not contain [{}, {}] (initial support with margin {margin})",
                    self.lo[ax],
                    hi[ax],
                    glo[ax] - margin,
                    ghi[ax] + margin
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_fractional_cells() {
        assert!(Grid::new(vec![0.0], vec![1.0], 0.3).is_err());
        let g = Grid::new(vec![0.0, -1.0], vec![1.0, 1.0], 0.25).unwrap();
        assert_eq!(g.shape(), &[4, 8]);
        assert_eq!(g.len(), 32);
    }

    #[test]
    fn nodes_are_cell_centres() {
        let g = Grid::new(vec![0.0, -1.0], vec![1.0, 1.0], 0.25).unwrap();
        let mut x = [0.0; 2];
        g.node(9, &mut x);
        assert_eq!(g.multi_index(9), [1, 1]);
        assert_eq!(x, [0.375, -0.625]);
        assert_eq!(g.flat_index([1, 1]), 9);
    }

    #[test]
    fn cell_averages_split_at_breaks() {
        let g = Grid::new(vec![-1.0], vec![1.0], 0.3 + 0.2).unwrap();
        let avg = g.cell_averages(&[vec![-0.2]], |x| if x[0] < -0.2 { 1.0 } else { 0.0 });
        assert!((g.integrate(&avg) - 0.8).abs() < 1e-14);
    }
}
