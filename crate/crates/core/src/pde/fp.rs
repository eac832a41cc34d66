use crate::error::{Error, Result};
use crate::model::CoefficientField;
use crate::pde::grid::Grid;

/// Coefficients of one compartment sampled on a grid, for the explicit
/// finite-volume discretization of `df/dt = -div(m f) + 1/2 sum d_l d_u (a_lu f)`,
/// `a = theta theta^T`, with zero ghost cells outside the box.
#[derive(Debug, Clone)]
pub struct FokkerPlanck {
    grid: Grid,
    /// Drift component `l` at the faces normal to axis `l`, `(n_l + 1) * n_other` each.
    face_drift: Vec<Vec<f64>>,
    /// `a` at cell centres, `n * d * d`.
    cell_cov: Vec<f64>,
    max_abs_drift: Vec<f64>,
    max_diag: Vec<f64>,
    max_row_sum: f64,
}

impl FokkerPlanck {
    pub fn new(coeff: &CoefficientField, grid: &Grid) -> Self {
        let d = grid.dim();
        let n = grid.len();
        let h = grid.h();
        let shape = grid.shape();
        let mut x = [0.0; 2];
        let mut m = [0.0; 2];
        let mut cell_drift = vec![0.0; n * d];
        let mut cell_cov = vec![0.0; n * d * d];
        let mut max_abs_drift = vec![0.0f64; d];
        let mut max_diag = vec![0.0f64; d];
        let mut max_row_sum = 0.0f64;
        for k in 0..n {
            grid.node(k, &mut x[..d]);
            coeff.drift(&x[..d], &mut cell_drift[k * d..(k + 1) * d]);
            coeff.covariance(&x[..d], &mut cell_cov[k * d * d..(k + 1) * d * d]);
            for l in 0..d {
                max_diag[l] = max_diag[l].max(cell_cov[k * d * d + l * d + l]);
                max_abs_drift[l] = max_abs_drift[l].max(cell_drift[k * d + l].abs());
                let row: f64 = (0..d).map(|u| cell_cov[k * d * d + l * d + u].abs()).sum();
                max_row_sum = max_row_sum.max(row);
            }
        }
        let mut face_drift = Vec::with_capacity(d);
        for l in 0..d {
            let other = if d == 2 { shape[1 - l] } else { 1 };
            let mut faces = vec![0.0; (shape[l] + 1) * other];
            for j in 0..other {
                for i in 0..=shape[l] {
                    x[l] = grid.lo()[l] + i as f64 * h;
                    if d == 2 {
                        x[1 - l] = grid.lo()[1 - l] + (j as f64 + 0.5) * h;
                    }
                    coeff.drift(&x[..d], &mut m[..d]);
                    faces[j * (shape[l] + 1) + i] = m[l];
                    max_abs_drift[l] = max_abs_drift[l].max(m[l].abs());
                }
            }
            face_drift.push(faces);
        }
        FokkerPlanck {
            grid: grid.clone(),
            face_drift,
            cell_cov,
            max_abs_drift,
            max_diag,
            max_row_sum,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Largest admissible step: `h^2 / (d max|a|)`, `h / max|m|`, and the
    /// monotonicity bound `sum_l (max|m_l| / h + max a_ll / h^2) dt <= 1`.
    pub fn max_step(&self) -> f64 {
        let h = self.grid.h();
        let d = self.grid.dim() as f64;
        let diffusive = if self.max_row_sum > 0.0 { h * h / (d * self.max_row_sum) } else { f64::INFINITY };
        let max_m = self.max_abs_drift.iter().cloned().fold(0.0, f64::max);
        let advective = if max_m > 0.0 { h / max_m } else { f64::INFINITY };
        let rate: f64 = self
            .max_abs_drift
            .iter()
            .zip(&self.max_diag)
            .map(|(m, a)| m / h + a / (h * h))
            .sum();
        let monotone = if rate > 0.0 { 1.0 / rate } else { f64::INFINITY };
        diffusive.min(advective).min(monotone)
    }

    pub fn check_step(&self, dt: f64) -> Result<()> {
        let max = self.max_step();
        if !(dt > 0.0) || dt > max * (1.0 + 1e-12) {
            return Err(Error::StepTooLarge(format!(
                "Fokker-Planck step dt = {dt} violates the CFL bound {max} at h = {}",
                self.grid.h()
            )));
        }
        Ok(())
    }

    fn index(&self, i: isize, j: isize) -> Option<usize> {
        let shape = self.grid.shape();
        if i < 0 || i >= shape[0] as isize {
            return None;
        }
        if self.grid.dim() == 1 {
            return Some(i as usize);
        }
        if j < 0 || j >= shape[1] as isize {
            return None;
        }
        Some(i as usize * shape[1] + j as usize)
    }

    /// Visits every face with its lower and upper cells (absent outside the box)
    /// and the linear stencil `flux = sum coef * f[node]` of the outward flux
    /// from lower to upper.
    fn for_each_face<F: FnMut(Option<usize>, Option<usize>, &[(usize, f64)])>(&self, mut visit: F) {
        let d = self.grid.dim();
        let h = self.grid.h();
        let shape = self.grid.shape();
        let mut terms: Vec<(usize, f64)> = Vec::with_capacity(8);
        for l in 0..d {
            let other = if d == 2 { shape[1 - l] } else { 1 };
            let nl = shape[l] as isize;
            for j in 0..other as isize {
                // Cell `i` along axis `l`, shifted by `dj` along the other axis.
                let pos = |i: isize, dj: isize| if l == 0 { self.index(i, j + dj) } else { self.index(j + dj, i) };
                for i in 0..=nl {
                    terms.clear();
                    let lower = pos(i - 1, 0);
                    let upper = pos(i, 0);
                    let m = self.face_drift[l][j as usize * (shape[l] + 1) + i as usize];
                    match (m > 0.0, lower, upper) {
                        (true, Some(k), _) | (false, _, Some(k)) => terms.push((k, m)),
                        _ => {}
                    }
                    let ll = l * d + l;
                    if let Some(k) = upper {
                        terms.push((k, -0.5 * self.cell_cov[k * d * d + ll] / h));
                    }
                    if let Some(k) = lower {
                        terms.push((k, 0.5 * self.cell_cov[k * d * d + ll] / h));
                    }
                    if d == 2 {
                        let lu = l * d + (1 - l);
                        let w = 0.5 / (4.0 * h);
                        for (cell, sign) in [(pos(i - 1, 1), -1.0), (pos(i, 1), -1.0), (pos(i - 1, -1), 1.0), (pos(i, -1), 1.0)] {
                            if let Some(k) = cell {
                                let a = self.cell_cov[k * d * d + lu];
                                if a != 0.0 {
                                    terms.push((k, sign * w * a));
                                }
                            }
                        }
                    }
                    visit(lower, upper, &terms);
                }
            }
        }
    }

    /// `L f` for the discrete forward operator `L`.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let h = self.grid.h();
        let mut out = vec![0.0; f.len()];
        self.for_each_face(|lower, upper, terms| {
            let flux: f64 = terms.iter().map(|(k, c)| c * f[*k]).sum();
            if flux == 0.0 {
                return;
            }
            if let Some(k) = lower {
                out[k] -= flux / h;
            }
            if let Some(k) = upper {
                out[k] += flux / h;
            }
        });
        out
    }

    /// `L^T u`, the discrete backward operator `m . grad u + 1/2 a : Hess u`
    /// with zero values outside the box.
    pub fn apply_transpose(&self, u: &[f64]) -> Vec<f64> {
        let h = self.grid.h();
        let mut out = vec![0.0; u.len()];
        self.for_each_face(|lower, upper, terms| {
            let jump = upper.map_or(0.0, |k| u[k]) - lower.map_or(0.0, |k| u[k]);
            if jump == 0.0 {
                return;
            }
            for (k, c) in terms {
                out[*k] += c * jump / h;
            }
        });
        out
    }

    /// One explicit step; returns the new field and the mass that left the box.
    pub fn step(&self, f: &[f64], dt: f64) -> Result<(Vec<f64>, f64)> {
        self.check_step(dt)?;
        let lf = self.apply(f);
        let out: Vec<f64> = f.iter().zip(&lf).map(|(a, b)| a + dt * b).collect();
        let vol = self.grid.cell_volume();
        let leak = (f.iter().sum::<f64>() - out.iter().sum::<f64>()) * vol;
        Ok((out, leak))
    }

    /// One explicit step of the backward equation, the transpose of [`FokkerPlanck::step`].
    pub fn backward_step(&self, u: &[f64], dt: f64) -> Vec<f64> {
        let lu = self.apply_transpose(u);
        u.iter().zip(&lu).map(|(a, b)| a + dt * b).collect()
    }
}

/// One explicit conservative step of the forward equation for `coeff`;
/// returns the new node array and the mass lost through the boundary.
pub fn fokker_planck_step(field: &[f64], coeff: &CoefficientField, dt: f64, grid: &Grid) -> Result<(Vec<f64>, f64)> {
    FokkerPlanck::new(coeff, grid).step(field, dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DiffusionField, DiffusionScale, DriftField};

    fn gaussian(grid: &Grid, mean: f64, std: f64) -> Vec<f64> {
        let mut x = [0.0];
        (0..grid.len())
            .map(|k| {
                grid.node(k, &mut x);
                let z = (x[0] - mean) / std;
                (-0.5 * z * z).exp() / (std * (2.0 * std::f64::consts::PI).sqrt())
            })
            .collect()
    }

    fn moments(grid: &Grid, f: &[f64]) -> (f64, f64, f64) {
        let mass = grid.integrate(f);
        let mean = grid.pair(f, |x| x[0]) / mass;
        let var = grid.pair(f, |x| (x[0] - mean).powi(2)) / mass;
        (mass, mean, var)
    }

    #[test]
    fn zero_operator_is_identity() {
        let grid = Grid::new(vec![-3.0], vec![3.0], 0.05).unwrap();
        let f = gaussian(&grid, 0.0, 0.5);
        let (g, leak) = fokker_planck_step(&f, &CoefficientField::constant(vec![0.0], 0.0), 0.01, &grid).unwrap();
        assert_eq!(f, g);
        assert_eq!(leak, 0.0);
    }

    #[test]
    fn heat_variance_grows_linearly() {
        let grid = Grid::new(vec![-10.0], vec![10.0], 0.05).unwrap();
        let coeff = CoefficientField::constant(vec![0.0], 2f64.sqrt());
        let fp = FokkerPlanck::new(&coeff, &grid);
        let dt = 0.001;
        let mut f = gaussian(&grid, 0.0, 0.5);
        let (_, _, v0) = moments(&grid, &f);
        for _ in 0..100 {
            f = fp.step(&f, dt).unwrap().0;
        }
        let (mass, _, v1) = moments(&grid, &f);
        assert!((mass - 1.0).abs() < 1e-10);
        let growth = (v1 - v0) / 100.0;
        assert!((growth / (2.0 * dt) - 1.0).abs() < 0.01, "{growth}");
    }

    #[test]
    fn transport_shifts_centre_of_mass() {
        let grid = Grid::new(vec![-5.0], vec![5.0], 0.02).unwrap();
        let coeff = CoefficientField::constant(vec![0.7], 0.0);
        let fp = FokkerPlanck::new(&coeff, &grid);
        let dt = 0.01;
        let mut f = gaussian(&grid, 0.0, 0.5);
        let (_, m0, _) = moments(&grid, &f);
        for _ in 0..50 {
            f = fp.step(&f, dt).unwrap().0;
        }
        let (_, m1, _) = moments(&grid, &f);
        assert!((m1 - m0 - 0.7 * 0.5).abs() < 4.0 * grid.h() * grid.h(), "{}", m1 - m0);
    }

    #[test]
    fn cfl_violation_is_reported() {
        let grid = Grid::new(vec![-1.0], vec![1.0], 0.1).unwrap();
        let coeff = CoefficientField::constant(vec![0.0], 1.0);
        let f = vec![1.0; grid.len()];
        assert!(matches!(fokker_planck_step(&f, &coeff, 0.1, &grid), Err(Error::StepTooLarge(_))));
    }

    #[test]
    fn boundary_loss_matches_mass_change_in_2d() {
        let grid = Grid::new(vec![-1.0, -1.0], vec![1.0, 1.0], 0.1).unwrap();
        let coeff = CoefficientField::new(
            DriftField::Constant { value: vec![0.3, -0.2] },
            DiffusionField { matrix: vec![0.4, 0.1, 0.0, 0.3], scale: DiffusionScale::Constant },
        );
        let fp = FokkerPlanck::new(&coeff, &grid);
        let f: Vec<f64> = (0..grid.len()).map(|k| 1.0 + (k % 7) as f64 * 0.1).collect();
        let before = grid.integrate(&f);
        let (g, leak) = fp.step(&f, 0.5 * fp.max_step()).unwrap();
        assert!((before - grid.integrate(&g) - leak).abs() < 1e-13);
        assert!(leak > 0.0);
    }
}
