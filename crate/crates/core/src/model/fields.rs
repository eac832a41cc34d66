use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Result};

/// Smoothness order reported for analytic (C-infinity) families.
pub const SMOOTH: u32 = u32::MAX;

/// An isotropic Gaussian bump `amplitude * exp(-|x - center|^2 / (2 width^2))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalarBump {
    pub center: Vec<f64>,
    pub width: f64,
    pub amplitude: f64,
}

/// Vector-valued Gaussian bump used by drift fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorBump {
    pub center: Vec<f64>,
    pub width: f64,
    pub amplitude: Vec<f64>,
}

pub(crate) fn gaussian_profile(center: &[f64], width: f64, x: &[f64]) -> f64 {
    let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
    (-r2 / (2.0 * width * width)).exp()
}

pub(crate) fn check_bump(center: &[f64], width: f64, dim: usize, what: &str) -> Result<()> {
    if center.len() != dim {
        return Err(invalid(format!("{what}: bump center has {} coordinates, expected {dim}", center.len())));
    }
    if !(width > 0.0) || !width.is_finite() {
        return Err(invalid(format!("{what}: bump width must be positive, got {width}")));
    }
    Ok(())
}

type DriftFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;
type ScaleFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// User-registered drift evaluator.
#[derive(Clone)]
pub struct CustomDrift {
    pub eval: Arc<DriftFn>,
    /// Upper bound on `sup |m(x)|` supplied by the caller.
    pub sup_norm: f64,
    pub smoothness: u32,
}

impl fmt::Debug for CustomDrift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomDrift")
            .field("sup_norm", &self.sup_norm)
            .field("smoothness", &self.smoothness)
            .finish_non_exhaustive()
    }
}

/// User-registered scalar multiplier for a diffusion matrix.
#[derive(Clone)]
pub struct CustomScale {
    pub eval: Arc<ScaleFn>,
    pub sup_norm: f64,
    pub smoothness: u32,
}

impl fmt::Debug for CustomScale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomScale")
            .field("sup_norm", &self.sup_norm)
            .field("smoothness", &self.smoothness)
            .finish_non_exhaustive()
    }
}

/// Drift `m(x)` of one compartment.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftField {
    Constant {
        value: Vec<f64>,
    },
    /// `bound * tanh((offset + matrix x) / bound)` componentwise; `matrix` is row-major d×d.
    AffineClamped {
        offset: Vec<f64>,
        matrix: Vec<f64>,
        bound: f64,
    },
    /// Sum of vector-valued Gaussian bumps.
    GaussianBumps {
        bumps: Vec<VectorBump>,
    },
    #[serde(skip)]
    Custom(CustomDrift),
}

impl DriftField {
    pub fn zero(dim: usize) -> Self {
        DriftField::Constant { value: vec![0.0; dim] }
    }

    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        let d = x.len();
        match self {
            DriftField::Constant { value } => out[..d].copy_from_slice(&value[..d]),
            DriftField::AffineClamped { offset, matrix, bound } => {
                for l in 0..d {
                    let mut z = offset[l];
                    for u in 0..d {
                        z += matrix[l * d + u] * x[u];
                    }
                    out[l] = bound * (z / bound).tanh();
                }
            }
            DriftField::GaussianBumps { bumps } => {
                out[..d].fill(0.0);
                for b in bumps {
                    let w = gaussian_profile(&b.center, b.width, x);
                    for l in 0..d {
                        out[l] += b.amplitude[l] * w;
                    }
                }
            }
            DriftField::Custom(c) => (c.eval)(x, out),
        }
    }

    /// Upper bound on `sup_x |m(x)|` (Euclidean norm).
    pub fn sup_norm(&self) -> f64 {
        match self {
            DriftField::Constant { value } => norm(value),
            DriftField::AffineClamped { bound, matrix, .. } => {
                let d = (matrix.len() as f64).sqrt() as usize;
                bound.abs() * (d as f64).sqrt()
            }
            DriftField::GaussianBumps { bumps } => bumps.iter().map(|b| norm(&b.amplitude)).sum(),
            DriftField::Custom(c) => c.sup_norm,
        }
    }

    /// Bound on `sup_x |m(x)|_inf` (largest component), used by CFL checks.
    pub fn sup_component(&self) -> f64 {
        match self {
            DriftField::Constant { value } => value.iter().fold(0.0f64, |a, v| a.max(v.abs())),
            DriftField::AffineClamped { bound, .. } => bound.abs(),
            DriftField::GaussianBumps { bumps } => {
                let d = bumps.first().map_or(0, |b| b.amplitude.len());
                (0..d)
                    .map(|l| bumps.iter().map(|b| b.amplitude[l].abs()).sum::<f64>())
                    .fold(0.0, f64::max)
            }
            DriftField::Custom(c) => c.sup_norm,
        }
    }

    pub fn smoothness(&self) -> u32 {
        match self {
            DriftField::Custom(c) => c.smoothness,
            _ => SMOOTH,
        }
    }

    pub fn family_tag(&self) -> &'static str {
        match self {
            DriftField::Constant { .. } => "constant",
            DriftField::AffineClamped { .. } => "affine-clamped",
            DriftField::GaussianBumps { .. } => "gaussian-bump-sum",
            DriftField::Custom(_) => "custom",
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, DriftField::Constant { .. })
    }

    pub(crate) fn check(&self, dim: usize) -> Result<()> {
        match self {
            DriftField::Constant { value } => expect_len(value.len(), dim, "constant drift"),
            DriftField::AffineClamped { offset, matrix, bound } => {
                expect_len(offset.len(), dim, "affine-clamped drift offset")?;
                expect_len(matrix.len(), dim * dim, "affine-clamped drift matrix")?;
                if !(*bound > 0.0) || !bound.is_finite() {
                    return Err(invalid(format!("affine-clamped drift bound must be positive, got {bound}")));
                }
                Ok(())
            }
            DriftField::GaussianBumps { bumps } => {
                for b in bumps {
                    check_bump(&b.center, b.width, dim, "drift")?;
                    expect_len(b.amplitude.len(), dim, "drift bump amplitude")?;
                }
                Ok(())
            }
            DriftField::Custom(_) => Ok(()),
        }
    }
}

/// Scalar multiplier `s(x)` of a diffusion matrix, `theta(x) = s(x) * matrix`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DiffusionScale {
    Constant,
    /// `base + amplitude * tanh(slope . x + offset)`.
    AffineClamped {
        base: f64,
        amplitude: f64,
        slope: Vec<f64>,
        offset: f64,
    },
    /// `base + sum of Gaussian bumps`.
    GaussianBumps {
        base: f64,
        bumps: Vec<ScalarBump>,
    },
    #[serde(skip)]
    Custom(CustomScale),
}

impl DiffusionScale {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            DiffusionScale::Constant => 1.0,
            DiffusionScale::AffineClamped { base, amplitude, slope, offset } => {
                let z: f64 = offset + slope.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                base + amplitude * z.tanh()
            }
            DiffusionScale::GaussianBumps { base, bumps } => {
                base + bumps
                    .iter()
                    .map(|b| b.amplitude * gaussian_profile(&b.center, b.width, x))
                    .sum::<f64>()
            }
            DiffusionScale::Custom(c) => (c.eval)(x),
        }
    }

    pub fn sup_abs(&self) -> f64 {
        match self {
            DiffusionScale::Constant => 1.0,
            DiffusionScale::AffineClamped { base, amplitude, .. } => base.abs() + amplitude.abs(),
            DiffusionScale::GaussianBumps { base, bumps } => {
                base.abs() + bumps.iter().map(|b| b.amplitude.abs()).sum::<f64>()
            }
            DiffusionScale::Custom(c) => c.sup_norm,
        }
    }

    /// A lower bound on `inf_x |s(x)|` when one is available in closed form.
    pub fn inf_abs_lower_bound(&self) -> Option<f64> {
        match self {
            DiffusionScale::Constant => Some(1.0),
            DiffusionScale::AffineClamped { base, amplitude, .. } => Some((base.abs() - amplitude.abs()).max(0.0)),
            DiffusionScale::GaussianBumps { base, bumps } => {
                let neg: f64 = bumps.iter().filter(|b| b.amplitude < 0.0).map(|b| -b.amplitude).sum();
                let pos: f64 = bumps.iter().filter(|b| b.amplitude > 0.0).map(|b| b.amplitude).sum();
                if *base >= 0.0 {
                    Some((base - neg).max(0.0))
                } else {
                    Some((-base - pos).max(0.0))
                }
            }
            DiffusionScale::Custom(_) => None,
        }
    }

    pub fn smoothness(&self) -> u32 {
        match self {
            DiffusionScale::Custom(c) => c.smoothness,
            _ => SMOOTH,
        }
    }

    fn family_tag(&self) -> &'static str {
        match self {
            DiffusionScale::Constant => "constant",
            DiffusionScale::AffineClamped { .. } => "affine-clamped",
            DiffusionScale::GaussianBumps { .. } => "gaussian-bump-sum",
            DiffusionScale::Custom(_) => "custom",
        }
    }

    fn check(&self, dim: usize) -> Result<()> {
        match self {
            DiffusionScale::AffineClamped { slope, .. } => expect_len(slope.len(), dim, "diffusion slope"),
            DiffusionScale::GaussianBumps { bumps, .. } => {
                bumps.iter().try_for_each(|b| check_bump(&b.center, b.width, dim, "diffusion"))
            }
            _ => Ok(()),
        }
    }
}

/// Diffusion matrix field `theta(x) = s(x) * matrix` (matrix row-major d×d).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffusionField {
    pub matrix: Vec<f64>,
    #[serde(default = "constant_scale")]
    pub scale: DiffusionScale,
}

fn constant_scale() -> DiffusionScale {
    DiffusionScale::Constant
}

impl DiffusionField {
    pub fn isotropic(dim: usize, sigma: f64) -> Self {
        let mut matrix = vec![0.0; dim * dim];
        for l in 0..dim {
            matrix[l * dim + l] = sigma;
        }
        DiffusionField { matrix, scale: DiffusionScale::Constant }
    }

    pub fn dim(&self) -> usize {
        (self.matrix.len() as f64).sqrt().round() as usize
    }

    pub fn theta(&self, x: &[f64], out: &mut [f64]) {
        let s = self.scale.eval(x);
        for (o, m) in out.iter_mut().zip(&self.matrix) {
            *o = s * m;
        }
    }

    /// `a(x) = theta theta^T (x)`, row-major.
    pub fn covariance(&self, x: &[f64], out: &mut [f64]) {
        let d = x.len();
        let s = self.scale.eval(x);
        let s2 = s * s;
        for l in 0..d {
            for u in 0..d {
                let mut acc = 0.0;
                for k in 0..d {
                    acc += self.matrix[l * d + k] * self.matrix[u * d + k];
                }
                out[l * d + u] = s2 * acc;
            }
        }
    }

    /// Upper bound on the largest entry of `theta theta^T`.
    pub fn sup_covariance_entry(&self) -> f64 {
        let d = self.dim();
        let s = self.scale.sup_abs();
        let mut best = 0.0f64;
        for l in 0..d {
            for u in 0..d {
                let acc: f64 = (0..d).map(|k| self.matrix[l * d + k] * self.matrix[u * d + k]).sum();
                best = best.max(acc.abs());
            }
        }
        s * s * best
    }

    /// Upper bound on the operator norm `sup_x |theta(x)|` (Frobenius).
    pub fn sup_norm(&self) -> f64 {
        self.scale.sup_abs() * norm(&self.matrix)
    }

    pub fn smoothness(&self) -> u32 {
        self.scale.smoothness()
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.scale, DiffusionScale::Constant)
    }

    pub(crate) fn check(&self, dim: usize) -> Result<()> {
        expect_len(self.matrix.len(), dim * dim, "diffusion matrix")?;
        self.scale.check(dim)
    }
}

/// Motion coefficients of one compartment.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientField {
    pub drift: DriftField,
    pub diffusion: DiffusionField,
}

impl CoefficientField {
    pub fn new(drift: DriftField, diffusion: DiffusionField) -> Self {
        CoefficientField { drift, diffusion }
    }

    /// Constant drift and isotropic constant diffusion `theta = sigma * I`.
    pub fn constant(drift: Vec<f64>, sigma: f64) -> Self {
        let d = drift.len();
        CoefficientField {
            drift: DriftField::Constant { value: drift },
            diffusion: DiffusionField::isotropic(d, sigma),
        }
    }

    pub fn drift(&self, x: &[f64], out: &mut [f64]) {
        self.drift.eval(x, out)
    }

    pub fn theta(&self, x: &[f64], out: &mut [f64]) {
        self.diffusion.theta(x, out)
    }

    pub fn covariance(&self, x: &[f64], out: &mut [f64]) {
        self.diffusion.covariance(x, out)
    }

    pub fn smoothness_order(&self) -> u32 {
        self.drift.smoothness().min(self.diffusion.smoothness())
    }

    /// Family of the drift and of the diffusion multiplier, e.g. `constant/affine-clamped`.
    pub fn family_tag(&self) -> String {
        format!("{}/{}", self.drift.family_tag(), self.diffusion.scale.family_tag())
    }

    pub fn is_constant(&self) -> bool {
        self.drift.is_constant() && self.diffusion.is_constant()
    }

    pub(crate) fn check(&self, dim: usize) -> Result<()> {
        self.drift.check(dim)?;
        self.diffusion.check(dim)
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

pub(crate) fn expect_len(got: usize, expected: usize, what: &str) -> Result<()> {
    if got != expected {
        return Err(invalid(format!("{what}: expected {expected} entries, got {got}")));
    }
    Ok(())
}
