//! Model definition: motion coefficients, contact kernel, recovery rate and initial law.

mod compartment;
pub mod fields;
mod generator;
pub mod initial;
pub mod kernel;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use std::fmt;

pub use compartment::Compartment;
pub use fields::{CoefficientField, DiffusionField, DiffusionScale, DriftField, ScalarBump, VectorBump};
pub use generator::{carre_du_champ, generator_apply, generator_from_derivatives, Polynomial, TestFunction};
pub use initial::{DensityFamily, InitialLaw, Region};
pub use kernel::{BetaField, ContactKernel, KernelShape};

use crate::error::{Error, Result};
use crate::particle::PopulationState;

/// Largest spatial dimension accepted by validation.
pub const MAX_DIM: usize = 3;

/// Motion coefficients per compartment.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompartmentCoefficients {
    #[serde(rename = "S")]
    pub s: CoefficientField,
    #[serde(rename = "I")]
    pub i: CoefficientField,
    #[serde(rename = "R")]
    pub r: CoefficientField,
}

impl CompartmentCoefficients {
    pub fn uniform(c: CoefficientField) -> Self {
        CompartmentCoefficients { s: c.clone(), i: c.clone(), r: c }
    }

    pub fn get(&self, c: Compartment) -> &CoefficientField {
        match c {
            Compartment::S => &self.s,
            Compartment::I => &self.i,
            Compartment::R => &self.r,
        }
    }
}

fn default_gamma() -> f64 {
    1.0
}

/// Complete model definition.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub dim: usize,
    pub coefficients: CompartmentCoefficients,
    pub kernel: ContactKernel,
    /// Recovery rate.
    pub alpha: f64,
    pub initial: InitialLaw,
    /// Normalization exponent of the infection rate; only 1 is supported.
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

impl ModelSpec {
    /// Builds a spec after structural checks (dimensions, parameter ranges, gamma).
    pub fn new(
        dim: usize,
        coefficients: CompartmentCoefficients,
        kernel: ContactKernel,
        alpha: f64,
        initial: InitialLaw,
    ) -> Result<Self> {
        let spec = ModelSpec { dim, coefficients, kernel, alpha, initial, gamma: 1.0 };
        spec.check()?;
        Ok(spec)
    }

    pub fn coeff(&self, c: Compartment) -> &CoefficientField {
        self.coefficients.get(c)
    }

    /// Structural consistency; `validate_model` adds the analytic assumption checks.
    pub fn check(&self) -> Result<()> {
        if self.gamma != 1.0 {
            return Err(Error::InvalidParameter(format!(
                "gamma = {} is not supported: only the normalization gamma = 1 is implemented, \
                 the range 0 < gamma < 1 is left for future work",
                self.gamma
            )));
        }
        if self.dim == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        for c in Compartment::ALL {
            self.coeff(c)
                .check(self.dim)
                .map_err(|e| Error::InvalidParameter(format!("compartment {c}: {e}")))?;
        }
        self.kernel.check(self.dim)?;
        self.initial.check(self.dim)?;
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidParameter(format!("recovery rate must be nonnegative, got {}", self.alpha)));
        }
        Ok(())
    }

    /// Smoothness index `ceil(d/2)`.
    pub fn smoothness_index(&self) -> u32 {
        self.dim.div_ceil(2) as u32
    }
}

/// One assumption with its verdict and witnessing quantity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionCheck {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub detail: String,
}

/// Result of `validate_model`.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<AssumptionCheck>,
}

impl ValidationReport {
    fn push(&mut self, name: &str, passed: bool, value: f64, detail: String) {
        self.checks.push(AssumptionCheck { name: name.to_string(), passed, value, detail });
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &AssumptionCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn find(&self, name: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Converts the first failure into an error.
    pub fn into_result(self) -> Result<()> {
        match self.failures().next() {
            None => Ok(()),
            Some(f) => Err(Error::Assumption(format!("{}: {}", f.name, f.detail))),
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{:<4} {:<32} {:>14.6e}  {}", if c.passed { "ok" } else { "FAIL" }, c.name, c.value, c.detail)?;
        }
        Ok(())
    }
}

fn smooth_label(order: u32) -> String {
    if order == fields::SMOOTH {
        "infinitely smooth".to_string()
    } else {
        format!("order {order}")
    }
}

/// Probe points covering the bulk of the initial density.
fn probe_grid(spec: &ModelSpec) -> Vec<Vec<f64>> {
    let d = spec.dim.min(MAX_DIM);
    let (lo, hi) = spec
        .initial
        .density
        .effective_box()
        .unwrap_or_else(|| (vec![-10.0; d], vec![10.0; d]));
    let per_axis = match d {
        1 => 201usize,
        2 => 41,
        _ => 15,
    };
    let mut out = Vec::new();
    let total = per_axis.pow(d as u32);
    for k in 0..total {
        let mut rem = k;
        let mut x = vec![0.0; d];
        for ax in 0..d {
            let i = rem % per_axis;
            rem /= per_axis;
            let a = lo[ax].max(-50.0) - 1.0;
            let b = hi[ax].min(50.0) + 1.0;
            x[ax] = a + (b - a) * i as f64 / (per_axis - 1) as f64;
        }
        out.push(x);
    }
    out
}

/// Checks the boundedness, ellipticity, smoothness and moment assumptions.
/// Failures are reported, not raised.
pub fn validate_model(spec: &ModelSpec) -> ValidationReport {
    let mut report = ValidationReport::default();
    let d = spec.dim;
    report.push(
        "gamma",
        spec.gamma == 1.0,
        spec.gamma,
        if spec.gamma == 1.0 {
            "normalization exponent fixed to 1".into()
        } else {
            "only gamma = 1 is supported; 0 < gamma < 1 is left for future work".into()
        },
    );
    report.push(
        "dimension",
        (1..=MAX_DIM).contains(&d),
        d as f64,
        format!("d = {d}, supported range 1..={MAX_DIM}"),
    );
    if let Err(e) = spec.check() {
        report.push("parameters", false, f64::NAN, e.to_string());
        return report;
    }
    if d > MAX_DIM {
        return report;
    }
    let big_d = spec.smoothness_index();
    let probes = probe_grid(spec);

    for c in Compartment::ALL {
        let coeff = spec.coeff(c);
        let drift_sup = coeff.drift.sup_norm();
        let theta_sup = coeff.diffusion.sup_norm();
        report.push(
            &format!("bounded coefficients {c}"),
            drift_sup.is_finite() && theta_sup.is_finite(),
            drift_sup.max(theta_sup),
            format!("sup|m| <= {drift_sup:.4e}, sup|theta| <= {theta_sup:.4e}"),
        );

        let mut min_eig = f64::INFINITY;
        let mut a = vec![0.0; d * d];
        for x in &probes {
            coeff.covariance(x, &mut a);
            let m = DMatrix::from_row_slice(d, d, &a);
            let e = SymmetricEigen::new(m).eigenvalues.min();
            min_eig = min_eig.min(e);
        }
        let scale = coeff.diffusion.sup_covariance_entry().max(1e-300);
        report.push(
            &format!("ellipticity {c}"),
            min_eig > 1e-12 * scale.max(1.0),
            min_eig,
            format!("minimum eigenvalue of theta theta^T on {} probe points", probes.len()),
        );

        let order = coeff.smoothness_order();
        report.push(
            &format!("coefficient smoothness {c}"),
            order >= 3 + big_d,
            order.min(1_000_000) as f64,
            format!("{} ({}), need {}", smooth_label(order), coeff.family_tag(), 3 + big_d),
        );
    }

    let k_sup = spec.kernel.sup_norm();
    report.push(
        "kernel bounded",
        k_sup.is_finite(),
        k_sup,
        format!("sup K = {k_sup:.6e}"),
    );
    let radius = spec.kernel.support_radius();
    report.push(
        "kernel compact support",
        radius.is_finite() && radius > 0.0,
        radius,
        format!("support radius {radius}"),
    );
    let k_order = spec.kernel.smoothness_order();
    report.push(
        "kernel smoothness",
        k_order >= 2 + big_d,
        k_order.min(1_000_000) as f64,
        format!("{}, need {}", smooth_label(k_order), 2 + big_d),
    );
    report.push(
        "recovery rate",
        spec.alpha >= 0.0 && spec.alpha.is_finite(),
        spec.alpha,
        "alpha >= 0".into(),
    );

    let mass = spec.initial.total_mass();
    report.push(
        "density normalized",
        (mass - 1.0).abs() <= 1e-6,
        mass,
        "integral of g by quadrature".into(),
    );
    let g_sup = spec.initial.density.sup();
    report.push("density bounded", g_sup.is_finite(), g_sup, "sup g".into());

    let sigma = spec.initial.sigma;
    report.push(
        "moment exponent",
        sigma > d as f64 / 2.0,
        sigma,
        format!("sigma must exceed d/2 = {}", d as f64 / 2.0),
    );
    let moment = spec.initial.moment(2.0 * sigma);
    let last = moment.partial.last().copied().unwrap_or(f64::NAN);
    report.push(
        "moment condition",
        moment.converged,
        last,
        if moment.converged {
            format!("E|X0 - c|^(2 sigma) = {last:.6e}")
        } else {
            format!("integral of |x|^(2 sigma) g keeps growing on expanding balls (last partial {last:.4e})")
        },
    );
    report
}

/// `lambda_i = (1/N) sum_{j infected} K(X^i, X^j)`, summed in ascending `j`.
pub fn infection_pressure(state: &PopulationState, kernel: &ContactKernel, i: usize) -> Result<f64> {
    let n = state.len();
    if i >= n {
        return Err(Error::IndexOutOfRange { index: i, len: n });
    }
    let xi = state.position(i);
    let mut acc = 0.0;
    for j in 0..n {
        if state.labels[j] == Compartment::I {
            acc += kernel.eval(xi, state.position(j));
        }
    }
    Ok(acc / n as f64)
}
