use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::fields::{check_bump, gaussian_profile, ScalarBump, SMOOTH};

/// Infectivity multiplier `beta(y)` of an infected individual located at `y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum BetaField {
    Constant { value: f64 },
    /// `base + sum of Gaussian bumps`.
    GaussianBumps { base: f64, bumps: Vec<ScalarBump> },
    /// `c0 + c2 |y|^2`; unbounded unless `c2 == 0`.
    Quadratic { c0: f64, c2: f64 },
}

impl BetaField {
    pub fn eval(&self, y: &[f64]) -> f64 {
        match self {
            BetaField::Constant { value } => *value,
            BetaField::GaussianBumps { base, bumps } => {
                base + bumps
                    .iter()
                    .map(|b| b.amplitude * gaussian_profile(&b.center, b.width, y))
                    .sum::<f64>()
            }
            BetaField::Quadratic { c0, c2 } => c0 + c2 * y.iter().map(|v| v * v).sum::<f64>(),
        }
    }

    /// Value, gradient and row-major Hessian at `y`.
    pub fn derivatives(&self, y: &[f64], grad: &mut [f64], hess: &mut [f64]) -> f64 {
        let d = y.len();
        grad[..d].fill(0.0);
        hess[..d * d].fill(0.0);
        match self {
            BetaField::Constant { value } => *value,
            BetaField::GaussianBumps { base, bumps } => {
                let mut v = *base;
                for b in bumps {
                    let w2 = b.width * b.width;
                    let e = b.amplitude * gaussian_profile(&b.center, b.width, y);
                    v += e;
                    for l in 0..d {
                        let zl = (y[l] - b.center[l]) / w2;
                        grad[l] -= e * zl;
                        for u in 0..d {
                            let zu = (y[u] - b.center[u]) / w2;
                            let delta = if l == u { 1.0 / w2 } else { 0.0 };
                            hess[l * d + u] += e * (zl * zu - delta);
                        }
                    }
                }
                v
            }
            BetaField::Quadratic { c2, .. } => {
                for l in 0..d {
                    grad[l] = 2.0 * c2 * y[l];
                    hess[l * d + l] = 2.0 * c2;
                }
                self.eval(y)
            }
        }
    }

    /// `sup_y beta(y)`, infinite for growing families.
    pub fn sup(&self) -> f64 {
        match self {
            BetaField::Constant { value } => *value,
            BetaField::GaussianBumps { base, bumps } => {
                base + bumps.iter().filter(|b| b.amplitude > 0.0).map(|b| b.amplitude).sum::<f64>()
            }
            BetaField::Quadratic { c0, c2 } => {
                if *c2 > 0.0 {
                    f64::INFINITY
                } else {
                    *c0
                }
            }
        }
    }

    /// Lower bound on `inf_y beta(y)`.
    pub fn inf_lower_bound(&self) -> f64 {
        match self {
            BetaField::Constant { value } => *value,
            BetaField::GaussianBumps { base, bumps } => {
                base + bumps.iter().filter(|b| b.amplitude < 0.0).map(|b| b.amplitude).sum::<f64>()
            }
            BetaField::Quadratic { c0, c2 } => {
                if *c2 >= 0.0 {
                    *c0
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            BetaField::Constant { .. } => true,
            BetaField::GaussianBumps { bumps, .. } => bumps.is_empty(),
            BetaField::Quadratic { c2, .. } => *c2 == 0.0,
        }
    }

    fn check(&self, dim: usize) -> Result<()> {
        if let BetaField::GaussianBumps { bumps, .. } = self {
            for b in bumps {
                check_bump(&b.center, b.width, dim, "beta")?;
            }
        }
        Ok(())
    }
}

/// Radial profile `F(r)` of the contact kernel; `F(0) = 1`, compact support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelShape {
    /// `(1 - r^2/R^2)^power` for `r < R`.
    PolyBump { radius: f64, power: u32 },
    /// Equal to 1 for `r <= inner`, decays to 0 at `radius` through a smoothstep
    /// polynomial with `order` vanishing derivatives at both ends.
    FlatTop { inner: f64, radius: f64, order: u32 },
}

impl KernelShape {
    pub fn radius(&self) -> f64 {
        match self {
            KernelShape::PolyBump { radius, .. } | KernelShape::FlatTop { radius, .. } => *radius,
        }
    }

    pub fn value(&self, r: f64) -> f64 {
        match *self {
            KernelShape::PolyBump { radius, power } => {
                if r >= radius {
                    0.0
                } else {
                    let q = 1.0 - (r / radius) * (r / radius);
                    q.powi(power as i32)
                }
            }
            KernelShape::FlatTop { inner, radius, order } => {
                if r <= inner {
                    1.0
                } else if r >= radius {
                    0.0
                } else {
                    1.0 - smoothstep(order, (r - inner) / (radius - inner))
                }
            }
        }
    }

    /// `(F(r), F'(r), F''(r))`.
    pub fn radial_derivatives(&self, r: f64) -> (f64, f64, f64) {
        match *self {
            KernelShape::PolyBump { radius, power } => {
                if r >= radius {
                    return (0.0, 0.0, 0.0);
                }
                let k = power as f64;
                let r2 = radius * radius;
                let q = 1.0 - r * r / r2;
                let f = q.powi(power as i32);
                let f1 = if power >= 1 { -k * q.powi(power as i32 - 1) * 2.0 * r / r2 } else { 0.0 };
                let f2 = if power >= 1 {
                    let a = if power >= 2 { k * (k - 1.0) * q.powi(power as i32 - 2) * (2.0 * r / r2).powi(2) } else { 0.0 };
                    a - k * q.powi(power as i32 - 1) * 2.0 / r2
                } else {
                    0.0
                };
                (f, f1, f2)
            }
            KernelShape::FlatTop { inner, radius, order } => {
                if r <= inner || r >= radius {
                    return (self.value(r), 0.0, 0.0);
                }
                let w = radius - inner;
                let t = (r - inner) / w;
                let (s, s1, s2) = smoothstep_derivatives(order, t);
                (1.0 - s, -s1 / w, -s2 / (w * w))
            }
        }
    }

    /// Number of continuous derivatives of `x -> F(|x|)`.
    pub fn smoothness(&self) -> u32 {
        match *self {
            KernelShape::PolyBump { power, .. } => power.saturating_sub(1),
            KernelShape::FlatTop { inner, order, .. } => {
                if inner > 0.0 {
                    order
                } else {
                    0
                }
            }
        }
    }

    fn check(&self) -> Result<()> {
        match *self {
            KernelShape::PolyBump { radius, power } => {
                if !(radius > 0.0) || !radius.is_finite() {
                    return Err(invalid(format!("kernel radius must be positive, got {radius}")));
                }
                if power == 0 {
                    return Err(invalid("poly-bump kernel power must be at least 1"));
                }
            }
            KernelShape::FlatTop { inner, radius, .. } => {
                if !(inner >= 0.0 && radius > inner) || !radius.is_finite() {
                    return Err(invalid(format!(
                        "flat-top kernel needs 0 <= inner < radius, got inner {inner}, radius {radius}"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Smoothstep polynomial of degree `2n+1` with `S(0)=0`, `S(1)=1` and
/// `n` vanishing derivatives at both ends.
pub fn smoothstep(n: u32, t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    let mut acc = 0.0;
    for k in 0..=n {
        acc += binomial(n + k, k) * binomial(2 * n + 1, n - k) * (-t).powi(k as i32);
    }
    acc * t.powi(n as i32 + 1)
}

fn smoothstep_derivatives(n: u32, t: f64) -> (f64, f64, f64) {
    // S'(t) = c t^n (1-t)^n with c = (2n+1) binom(2n, n).
    let c = (2 * n + 1) as f64 * binomial(2 * n, n);
    let nf = n as f64;
    let s1 = c * (t * (1.0 - t)).powi(n as i32);
    let s2 = if n == 0 {
        0.0
    } else {
        c * nf * (t * (1.0 - t)).powi(n as i32 - 1) * (1.0 - 2.0 * t)
    };
    (smoothstep(n, t), s1, s2)
}

/// Contact kernel `K(x, y) = beta(y) F(|x - y|)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactKernel {
    pub beta: BetaField,
    pub shape: KernelShape,
}

impl ContactKernel {
    pub fn new(beta: BetaField, shape: KernelShape) -> Self {
        ContactKernel { beta, shape }
    }

    /// Kernel that never transmits.
    pub fn zero() -> Self {
        ContactKernel {
            beta: BetaField::Constant { value: 0.0 },
            shape: KernelShape::PolyBump { radius: 1.0, power: 4 },
        }
    }

    pub fn support_radius(&self) -> f64 {
        self.shape.radius()
    }

    /// `sup K = sup beta` since the profile peaks at 1.
    pub fn sup_norm(&self) -> f64 {
        self.beta.sup().max(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.beta.is_constant() && self.beta.sup() == 0.0
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        let r = distance(x, y);
        if r >= self.support_radius() {
            return 0.0;
        }
        self.beta.eval(y) * self.shape.value(r)
    }

    /// `F(|x-y|)` together with its gradient and Hessian in `x`.
    /// The gradient in `y` is the negative; the Hessian in `y` is the same.
    pub fn profile_derivatives(&self, x: &[f64], y: &[f64], grad: &mut [f64], hess: &mut [f64]) -> f64 {
        let d = x.len();
        grad[..d].fill(0.0);
        hess[..d * d].fill(0.0);
        let r = distance(x, y);
        if r >= self.support_radius() {
            return 0.0;
        }
        let (f, f1, f2) = self.shape.radial_derivatives(r);
        if r < 1e-300 {
            // F'(r)/r has a finite limit equal to F''(0) for smooth radial profiles.
            for l in 0..d {
                hess[l * d + l] = f2;
            }
            return f;
        }
        let inv = 1.0 / r;
        for l in 0..d {
            let el = (x[l] - y[l]) * inv;
            grad[l] = f1 * el;
            for u in 0..d {
                let eu = (x[u] - y[u]) * inv;
                let delta = if l == u { 1.0 } else { 0.0 };
                hess[l * d + u] = f2 * el * eu + f1 * inv * (delta - el * eu);
            }
        }
        f
    }

    pub fn smoothness_order(&self) -> u32 {
        // Every beta family is analytic.
        SMOOTH.min(self.shape.smoothness())
    }

    pub(crate) fn check(&self, dim: usize) -> Result<()> {
        self.shape.check()?;
        self.beta.check(dim)?;
        if self.beta.inf_lower_bound() < 0.0 {
            return Err(invalid("beta must be nonnegative"));
        }
        Ok(())
    }
}

#[inline]
pub fn distance(x: &[f64], y: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (a, b) in x.iter().zip(y) {
        acc += (a - b) * (a - b);
    }
    acc.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn bump_kernel(beta: BetaField) -> ContactKernel {
        ContactKernel::new(beta, KernelShape::PolyBump { radius: 1.0, power: 4 })
    }

    #[test]
    fn peak_value_is_beta() {
        let k = bump_kernel(BetaField::Constant { value: 2.0 });
        assert_eq!(k.eval(&[0.0], &[0.0]), 2.0);
    }

    #[test]
    fn vanishes_outside_support() {
        let k = bump_kernel(BetaField::Constant { value: 2.0 });
        assert_eq!(k.eval(&[0.0], &[2.0]), 0.0);
    }

    #[test]
    fn quadratic_beta_times_half_profile() {
        // Choose r so that (1 - r^2)^4 = 0.5.
        let r = (1.0 - 0.5f64.powf(0.25)).sqrt();
        let k = bump_kernel(BetaField::Quadratic { c0: 1.0, c2: 1.0 });
        let y = [1.0];
        let x = [1.0 - r];
        let expected = (1.0 + 1.0) * 0.5;
        assert_relative_eq!(k.eval(&x, &y), expected, max_relative = 1e-12);
    }

    #[test]
    fn smoothstep_endpoints_and_derivative() {
        for n in 0..7 {
            assert_relative_eq!(smoothstep(n, 0.0), 0.0);
            assert_relative_eq!(smoothstep(n, 1.0), 1.0, max_relative = 1e-12);
            let h = 1e-6;
            for &t in &[0.2, 0.5, 0.7] {
                let fd = (smoothstep(n, t + h) - smoothstep(n, t - h)) / (2.0 * h);
                let (_, s1, _) = smoothstep_derivatives(n, t);
                assert_relative_eq!(fd, s1, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn profile_hessian_matches_finite_differences() {
        let shapes = [
            KernelShape::PolyBump { radius: 1.3, power: 5 },
            KernelShape::FlatTop { inner: 0.2, radius: 0.9, order: 4 },
        ];
        for shape in shapes {
            let k = ContactKernel::new(BetaField::Constant { value: 1.0 }, shape);
            let y = [0.1, -0.2];
            let x = [0.35, 0.15];
            let mut g = [0.0; 2];
            let mut h = [0.0; 4];
            k.profile_derivatives(&x, &y, &mut g, &mut h);
            let eps = 1e-5;
            for l in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[l] += eps;
                xm[l] -= eps;
                let fd = (k.shape.value(distance(&xp, &y)) - k.shape.value(distance(&xm, &y))) / (2.0 * eps);
                assert_relative_eq!(fd, g[l], epsilon = 1e-7);
                let mut gp = [0.0; 2];
                let mut gm = [0.0; 2];
                let mut tmp = [0.0; 4];
                k.profile_derivatives(&xp, &y, &mut gp, &mut tmp);
                k.profile_derivatives(&xm, &y, &mut gm, &mut tmp);
                for u in 0..2 {
                    assert_relative_eq!((gp[u] - gm[u]) / (2.0 * eps), h[u * 2 + l], epsilon = 1e-6);
                }
            }
        }
    }

    #[test]
    fn beta_bump_derivatives_match_finite_differences() {
        let beta = BetaField::GaussianBumps {
            base: 0.5,
            bumps: vec![ScalarBump { center: vec![0.3, -0.1], width: 0.7, amplitude: 1.5 }],
        };
        let y = [0.1, 0.4];
        let mut g = [0.0; 2];
        let mut h = [0.0; 4];
        beta.derivatives(&y, &mut g, &mut h);
        let eps = 1e-5;
        for l in 0..2 {
            let mut yp = y;
            let mut ym = y;
            yp[l] += eps;
            ym[l] -= eps;
            assert_relative_eq!((beta.eval(&yp) - beta.eval(&ym)) / (2.0 * eps), g[l], epsilon = 1e-8);
            let mut gp = [0.0; 2];
            let mut gm = [0.0; 2];
            let mut tmp = [0.0; 4];
            beta.derivatives(&yp, &mut gp, &mut tmp);
            beta.derivatives(&ym, &mut gm, &mut tmp);
            for u in 0..2 {
                assert_relative_eq!((gp[u] - gm[u]) / (2.0 * eps), h[u * 2 + l], epsilon = 1e-6);
            }
        }
    }
}
