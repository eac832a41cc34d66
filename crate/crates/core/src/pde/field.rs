use std::io::Write;

use serde::Serialize;

use crate::error::Result;
use crate::io::{csv_err, write_frame, Frame};
use crate::model::{Compartment, DensityFamily, ModelSpec};
use crate::pde::grid::Grid;

/// The three compartment densities on a grid at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    pub time: f64,
    pub s: Vec<f64>,
    pub i: Vec<f64>,
    pub r: Vec<f64>,
    /// Cumulative mass lost through the boundary, including truncation of the initial data.
    pub leakage: f64,
}

impl DensityField {
    pub fn get(&self, c: Compartment) -> &[f64] {
        match c {
            Compartment::S => &self.s,
            Compartment::I => &self.i,
            Compartment::R => &self.r,
        }
    }

    /// `f0^S = ((1-p) 1_A + 1_{A^c}) g`, `f0^I = p 1_A g`, `f0^R = 0`, as cell averages.
    pub fn initial(spec: &ModelSpec, grid: &Grid) -> Self {
        let law = &spec.initial;
        let breaks: Vec<Vec<f64>> = (0..grid.dim())
            .map(|ax| {
                let mut b = law.region.breakpoints(ax);
                if let DensityFamily::Uniform { lo, hi } = &law.density {
                    b.push(lo[ax]);
                    b.push(hi[ax]);
                }
                b
            })
            .collect();
        let s = grid.cell_averages(&breaks, |x| law.susceptible_density(x));
        let i = grid.cell_averages(&breaks, |x| law.infected_density(x));
        let mass = grid.integrate(&s) + grid.integrate(&i);
        DensityField { time: 0.0, r: vec![0.0; s.len()], s, i, leakage: (law.total_mass() - mass).max(0.0) }
    }

    /// `(||f^S||_1, ||f^I||_1, ||f^R||_1)`.
    pub fn masses(&self, grid: &Grid) -> [f64; 3] {
        [grid.integrate(&self.s), grid.integrate(&self.i), grid.integrate(&self.r)]
    }

    /// Total mass plus leakage, 1 for an exact scheme.
    pub fn accounted_mass(&self, grid: &Grid) -> f64 {
        self.masses(grid).iter().sum::<f64>() + self.leakage
    }

    pub fn min_value(&self) -> f64 {
        self.s.iter().chain(&self.i).chain(&self.r).cloned().fold(f64::INFINITY, f64::min)
    }

    /// Sum of the three L¹ distances to `other`.
    pub fn l1_distance(&self, other: &DensityField, grid: &Grid) -> f64 {
        let v = grid.cell_volume();
        let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>();
        v * (diff(&self.s, &other.s) + diff(&self.i, &other.i) + diff(&self.r, &other.r))
    }
}

/// Largest distance over aligned pairs of two series.
pub fn sup_l1_distance(a: &[DensityField], b: &[DensityField], grid: &Grid) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.l1_distance(y, grid)).fold(0.0, f64::max)
}

/// Verdict of the a priori L¹ bounds at one time.
#[derive(Debug, Clone, Serialize)]
pub struct L1BoundCheck {
    pub time: f64,
    pub mass: [f64; 3],
    pub bound: [f64; 3],
    pub passed: bool,
}

/// `||f^S|| <= 1`, `||f^I|| <= e^{t |K|}`, `||f^R|| <= alpha t e^{t |K|}`, each with relative slack `slack`.
pub fn l1_bounds_check(series: &[DensityField], grid: &Grid, kernel_sup: f64, alpha: f64, slack: f64) -> Vec<L1BoundCheck> {
    series
        .iter()
        .map(|f| {
            let mass = f.masses(grid);
            let growth = (f.time * kernel_sup).exp();
            let bound = [1.0, growth, alpha * f.time * growth];
            let passed = mass.iter().zip(&bound).all(|(m, b)| *m <= b * (1.0 + slack) + 1e-15);
            L1BoundCheck { time: f.time, mass, bound, passed }
        })
        .collect()
}

/// Rows `t, node, x[, y], fS, fI, fR`.
pub fn write_series_csv<W: Write>(w: W, series: &[DensityField], grid: &Grid) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let d = grid.dim();
    let mut header = vec!["t".to_string(), "node".to_string()];
    header.extend(["x", "y"].iter().take(d).map(|s| s.to_string()));
    header.extend(["fS", "fI", "fR"].iter().map(|s| s.to_string()));
    out.write_record(&header).map_err(csv_err)?;
    let coords = grid.coords();
    for f in series {
        for k in 0..grid.len() {
            let mut row = vec![f.time.to_string(), k.to_string()];
            row.extend(coords[k * d..(k + 1) * d].iter().map(|v| v.to_string()));
            row.extend([f.s[k], f.i[k], f.r[k]].iter().map(|v| v.to_string()));
            out.write_record(&row).map_err(csv_err)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// One frame per time with node coordinates and the values `(fS, fI, fR)`.
pub fn write_series_frames<W: Write>(w: &mut W, series: &[DensityField], grid: &Grid) -> Result<()> {
    let coords = grid.coords();
    for f in series {
        let values = (0..grid.len()).flat_map(|k| [f.s[k], f.i[k], f.r[k]]).collect();
        write_frame(w, &Frame { time: f.time, dim: grid.dim(), n_values: 3, coords: coords.clone(), values })?;
    }
    Ok(())
}
