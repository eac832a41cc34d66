use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::model::fields::expect_len;
use crate::quadrature::GaussLegendre;

type DensityFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// User-registered density without an exact sampler.
#[derive(Clone)]
pub struct CustomDensity {
    pub name: String,
    pub eval: Arc<DensityFn>,
    pub sup: f64,
    /// Axis-aligned box containing the support (or nearly all mass).
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl fmt::Debug for CustomDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomDensity").field("name", &self.name).finish_non_exhaustive()
    }
}

/// Density `g` of the initial positions.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensityFamily {
    /// Isotropic normal.
    Gaussian { mean: Vec<f64>, std: f64 },
    /// Uniform on the box `[lo, hi]`.
    Uniform { lo: Vec<f64>, hi: Vec<f64> },
    /// Isotropic multivariate Student t; moments of order `>= dof` are infinite.
    StudentT { center: Vec<f64>, scale: f64, dof: f64 },
    #[serde(skip)]
    Custom(CustomDensity),
}

impl DensityFamily {
    pub fn dim(&self) -> usize {
        match self {
            DensityFamily::Gaussian { mean, .. } => mean.len(),
            DensityFamily::Uniform { lo, .. } => lo.len(),
            DensityFamily::StudentT { center, .. } => center.len(),
            DensityFamily::Custom(c) => c.lo.len(),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            DensityFamily::Gaussian { .. } => "gaussian",
            DensityFamily::Uniform { .. } => "uniform",
            DensityFamily::StudentT { .. } => "student_t",
            DensityFamily::Custom(c) => &c.name,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            DensityFamily::Gaussian { mean, std } => {
                let d = mean.len() as f64;
                let r2: f64 = x.iter().zip(mean).map(|(a, b)| (a - b) * (a - b)).sum();
                (-r2 / (2.0 * std * std)).exp() / ((2.0 * PI).sqrt() * std).powf(d)
            }
            DensityFamily::Uniform { lo, hi } => {
                let inside = x.iter().zip(lo.iter().zip(hi)).all(|(v, (a, b))| *v >= *a && *v <= *b);
                if inside {
                    1.0 / box_volume(lo, hi)
                } else {
                    0.0
                }
            }
            DensityFamily::StudentT { center, scale, dof } => {
                let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / (scale * scale);
                let d = center.len() as f64;
                student_log_norm(d, *scale, *dof).exp() * (1.0 + r2 / dof).powf(-(dof + d) / 2.0)
            }
            DensityFamily::Custom(c) => (c.eval)(x),
        }
    }

    pub fn sup(&self) -> f64 {
        match self {
            DensityFamily::Gaussian { mean, std } => 1.0 / ((2.0 * PI).sqrt() * std).powf(mean.len() as f64),
            DensityFamily::Uniform { lo, hi } => 1.0 / box_volume(lo, hi),
            DensityFamily::StudentT { center, scale, dof } => student_log_norm(center.len() as f64, *scale, *dof).exp(),
            DensityFamily::Custom(c) => c.sup,
        }
    }

    /// Draws one position into `out`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) -> Result<()> {
        match self {
            DensityFamily::Gaussian { mean, std } => {
                for (o, m) in out.iter_mut().zip(mean) {
                    let z: f64 = StandardNormal.sample(rng);
                    *o = m + std * z;
                }
            }
            DensityFamily::Uniform { lo, hi } => {
                for (o, (a, b)) in out.iter_mut().zip(lo.iter().zip(hi)) {
                    let u: f64 = rng.random();
                    *o = a + (b - a) * u;
                }
            }
            DensityFamily::StudentT { center, scale, dof } => {
                let chi = ChiSquared::new(*dof).map_err(|e| invalid(format!("student t: {e}")))?;
                let w: f64 = chi.sample(rng);
                let f = scale / (w / dof).sqrt();
                for (o, c) in out.iter_mut().zip(center) {
                    let z: f64 = StandardNormal.sample(rng);
                    *o = c + f * z;
                }
            }
            DensityFamily::Custom(c) => return Err(Error::UnsupportedSampler(c.name.clone())),
        }
        Ok(())
    }

    /// Box holding all but a negligible fraction (`< 1e-12`) of the mass,
    /// `None` for heavy tails.
    pub fn effective_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        match self {
            DensityFamily::Gaussian { mean, std } => {
                let w = 7.5 * std;
                Some((mean.iter().map(|m| m - w).collect(), mean.iter().map(|m| m + w).collect()))
            }
            DensityFamily::Uniform { lo, hi } => Some((lo.clone(), hi.clone())),
            DensityFamily::StudentT { .. } => None,
            DensityFamily::Custom(c) => Some((c.lo.clone(), c.hi.clone())),
        }
    }

    /// Radial profile `r -> g(center + r e)` for isotropic families.
    fn radial(&self) -> Option<Box<dyn Fn(f64) -> f64 + '_>> {
        match self {
            DensityFamily::Gaussian { std, .. } => {
                let norm = self.sup();
                Some(Box::new(move |r| norm * (-r * r / (2.0 * std * std)).exp()))
            }
            DensityFamily::StudentT { center, scale, dof } => {
                let d = center.len() as f64;
                let norm = student_log_norm(d, *scale, *dof).exp();
                Some(Box::new(move |r| {
                    let z = r / scale;
                    norm * (1.0 + z * z / dof).powf(-(dof + d) / 2.0)
                }))
            }
            _ => None,
        }
    }

    fn check(&self, dim: usize) -> Result<()> {
        match self {
            DensityFamily::Gaussian { mean, std } => {
                expect_len(mean.len(), dim, "gaussian mean")?;
                if !(*std > 0.0) {
                    return Err(invalid(format!("gaussian std must be positive, got {std}")));
                }
            }
            DensityFamily::Uniform { lo, hi } => {
                expect_len(lo.len(), dim, "uniform lo")?;
                expect_len(hi.len(), dim, "uniform hi")?;
                if lo.iter().zip(hi).any(|(a, b)| !(b > a)) {
                    return Err(invalid("uniform box needs lo < hi on every axis"));
                }
            }
            DensityFamily::StudentT { center, scale, dof } => {
                expect_len(center.len(), dim, "student t center")?;
                if !(*scale > 0.0) || !(*dof > 0.0) {
                    return Err(invalid("student t needs positive scale and degrees of freedom"));
                }
            }
            DensityFamily::Custom(c) => {
                expect_len(c.lo.len(), dim, "custom density box")?;
                expect_len(c.hi.len(), dim, "custom density box")?;
            }
        }
        Ok(())
    }
}

fn box_volume(lo: &[f64], hi: &[f64]) -> f64 {
    lo.iter().zip(hi).map(|(a, b)| b - a).product()
}

fn student_log_norm(d: f64, scale: f64, dof: f64) -> f64 {
    ln_gamma((dof + d) / 2.0) - ln_gamma(dof / 2.0) - 0.5 * d * (dof * PI).ln() - d * scale.ln()
}

/// Surface area of the unit sphere in `R^d`.
fn sphere_area(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => 2.0 * PI.powf(d as f64 / 2.0) / statrs::function::gamma::gamma(d as f64 / 2.0),
    }
}

/// Region where initially infected individuals may be found.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum Region {
    All,
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl Region {
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Region::All => true,
            Region::Box { lo, hi } => x.iter().zip(lo.iter().zip(hi)).all(|(v, (a, b))| *v >= *a && *v <= *b),
            Region::Ball { center, radius } => {
                x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() <= radius * radius
            }
        }
    }

    /// Breakpoints of the indicator along axis `axis` (used to split quadrature panels).
    pub fn breakpoints(&self, axis: usize) -> Vec<f64> {
        match self {
            Region::All => vec![],
            Region::Box { lo, hi } => vec![lo[axis], hi[axis]],
            Region::Ball { center, radius } => vec![center[axis] - radius, center[axis] + radius],
        }
    }

    fn check(&self, dim: usize) -> Result<()> {
        match self {
            Region::All => Ok(()),
            Region::Box { lo, hi } => {
                expect_len(lo.len(), dim, "region lo")?;
                expect_len(hi.len(), dim, "region hi")
            }
            Region::Ball { center, radius } => {
                expect_len(center.len(), dim, "region center")?;
                if !(*radius > 0.0) {
                    return Err(invalid("region radius must be positive"));
                }
                Ok(())
            }
        }
    }
}

/// Initial law: positions i.i.d. from `g`; an individual in `A` is infected with probability `p`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialLaw {
    pub density: DensityFamily,
    pub region: Region,
    pub p_infect: f64,
    /// Weight exponent of the moment condition, must exceed `d/2`.
    pub sigma: f64,
}

/// Outcome of a radial moment computation over expanding balls.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimate {
    /// Partial integrals over balls of doubling radius.
    pub partial: Vec<f64>,
    pub converged: bool,
}

impl InitialLaw {
    /// Indicator of `A` times the infection probability.
    pub fn infected_fraction_at(&self, x: &[f64]) -> f64 {
        if self.region.contains(x) {
            self.p_infect
        } else {
            0.0
        }
    }

    /// `f0^S(x) = ((1-p) 1_A + 1_{A^c}) g(x)`.
    pub fn susceptible_density(&self, x: &[f64]) -> f64 {
        (1.0 - self.infected_fraction_at(x)) * self.density.eval(x)
    }

    /// `f0^I(x) = p 1_A g(x)`.
    pub fn infected_density(&self, x: &[f64]) -> f64 {
        self.infected_fraction_at(x) * self.density.eval(x)
    }

    /// `int |x - c|^{2 sigma} g` over balls of radius `r0 2^k` around the density center.
    /// Only isotropic families are supported; compact families return a single exact bound.
    pub fn moment(&self, power: f64) -> MomentEstimate {
        let Some(profile) = self.density.radial() else {
            // Compact support: the moment is bounded by the largest corner distance.
            let (lo, hi) = self.density.effective_box().expect("non-isotropic families have a box");
            let reach: f64 = lo.iter().zip(&hi).map(|(a, b)| a.abs().max(b.abs()).powi(2)).sum::<f64>().sqrt();
            return MomentEstimate { partial: vec![reach.powf(power)], converged: true };
        };
        let d = self.density.dim();
        let area = sphere_area(d);
        let gl = GaussLegendre::new(24);
        let scale = match &self.density {
            DensityFamily::Gaussian { std, .. } => *std,
            DensityFamily::StudentT { scale, .. } => *scale,
            _ => 1.0,
        };
        let mut partial = Vec::new();
        let mut acc = 0.0;
        let mut a = 0.0;
        let mut b = scale;
        for _ in 0..24 {
            // Split each shell into panels for accuracy.
            let panels = 8;
            for k in 0..panels {
                let pa = a + (b - a) * k as f64 / panels as f64;
                let pb = a + (b - a) * (k + 1) as f64 / panels as f64;
                acc += gl.integrate(pa, pb, |r| area * r.powi(d as i32 - 1) * r.powf(power) * profile(r));
            }
            partial.push(acc);
            a = b;
            b *= 2.0;
        }
        let n = partial.len();
        let last = partial[n - 1];
        let prev = partial[n - 2];
        let converged = last.is_finite() && (last - prev).abs() <= 1e-6 * last.abs().max(1e-300);
        MomentEstimate { partial, converged }
    }

    /// Total mass of `g`, by quadrature.
    pub fn total_mass(&self) -> f64 {
        if let Some(profile) = self.density.radial() {
            let d = self.density.dim();
            let area = sphere_area(d);
            let gl = GaussLegendre::new(24);
            let scale = match &self.density {
                DensityFamily::Gaussian { std, .. } => *std,
                DensityFamily::StudentT { scale, .. } => *scale,
                _ => 1.0,
            };
            let mut acc = 0.0;
            let mut a = 0.0;
            let mut b = scale;
            for _ in 0..40 {
                acc += gl.integrate(a, b, |r| area * r.powi(d as i32 - 1) * profile(r));
                a = b;
                b *= 1.5;
            }
            return acc;
        }
        let (lo, hi) = self.density.effective_box().expect("box");
        crate::quadrature::integrate_box(&lo, &hi, 16, 8, |x| self.density.eval(x))
    }

    pub(crate) fn check(&self, dim: usize) -> Result<()> {
        self.density.check(dim)?;
        self.region.check(dim)?;
        if !(0.0..=1.0).contains(&self.p_infect) {
            return Err(invalid(format!("infection probability must lie in [0, 1], got {}", self.p_infect)));
        }
        if !self.sigma.is_finite() || self.sigma <= 0.0 {
            return Err(invalid(format!("moment exponent sigma must be positive, got {}", self.sigma)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn law(density: DensityFamily) -> InitialLaw {
        InitialLaw { density, region: Region::All, p_infect: 0.1, sigma: 1.0 }
    }

    #[test]
    fn gaussian_mass_is_one() {
        let l = law(DensityFamily::Gaussian { mean: vec![0.3, -0.2], std: 0.7 });
        assert_relative_eq!(l.total_mass(), 1.0, max_relative = 1e-9);
    }

    #[test]
    fn student_mass_is_one() {
        let l = law(DensityFamily::StudentT { center: vec![0.0], scale: 1.0, dof: 3.0 });
        assert_relative_eq!(l.total_mass(), 1.0, max_relative = 1e-4);
    }

    #[test]
    fn gaussian_second_moment() {
        let l = law(DensityFamily::Gaussian { mean: vec![0.0], std: 2.0 });
        let m = l.moment(2.0);
        assert!(m.converged);
        assert_relative_eq!(*m.partial.last().unwrap(), 4.0, max_relative = 1e-9);
    }

    #[test]
    fn student_moment_diverges_beyond_dof() {
        let l = law(DensityFamily::StudentT { center: vec![0.0], scale: 1.0, dof: 1.5 });
        let m = l.moment(2.0);
        assert!(!m.converged);
        let l = law(DensityFamily::StudentT { center: vec![0.0], scale: 1.0, dof: 5.0 });
        let m = l.moment(2.0);
        assert!(m.converged);
        // Variance of a t distribution: dof / (dof - 2).
        assert_relative_eq!(*m.partial.last().unwrap(), 5.0 / 3.0, max_relative = 1e-5);
    }
}
