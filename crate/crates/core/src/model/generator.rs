use crate::model::fields::CoefficientField;
use crate::model::MAX_DIM;

/// Smooth test function with exact first and second derivatives.
pub trait TestFunction: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], grad: &mut [f64]);
    /// Row-major `d×d` Hessian.
    fn hessian(&self, x: &[f64], hess: &mut [f64]);

    /// Value, gradient and Hessian in one pass; override when shared work is expensive.
    fn derivatives(&self, x: &[f64], grad: &mut [f64], hess: &mut [f64]) -> f64 {
        self.gradient(x, grad);
        self.hessian(x, hess);
        self.value(x)
    }
}

impl<T: TestFunction + ?Sized> TestFunction for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }
    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        (**self).gradient(x, grad)
    }
    fn hessian(&self, x: &[f64], hess: &mut [f64]) {
        (**self).hessian(x, hess)
    }
    fn derivatives(&self, x: &[f64], grad: &mut [f64], hess: &mut [f64]) -> f64 {
        (**self).derivatives(x, grad, hess)
    }
}

/// `Q phi(x) = m(x) . grad phi(x) + 1/2 tr[theta theta^T(x) Hess phi(x)]`.
pub fn generator_apply(coeff: &CoefficientField, phi: &dyn TestFunction, x: &[f64]) -> f64 {
    let d = x.len();
    let mut grad = [0.0; MAX_DIM];
    let mut hess = [0.0; MAX_DIM * MAX_DIM];
    phi.derivatives(x, &mut grad[..d], &mut hess[..d * d]);
    generator_from_derivatives(coeff, x, &grad[..d], &hess[..d * d])
}

/// Generator value given precomputed derivatives of the test function.
pub fn generator_from_derivatives(coeff: &CoefficientField, x: &[f64], grad: &[f64], hess: &[f64]) -> f64 {
    let d = x.len();
    let mut m = [0.0; MAX_DIM];
    let mut a = [0.0; MAX_DIM * MAX_DIM];
    coeff.drift(x, &mut m[..d]);
    coeff.covariance(x, &mut a[..d * d]);
    let mut acc = 0.0;
    for l in 0..d {
        acc += m[l] * grad[l];
    }
    let mut tr = 0.0;
    for l in 0..d {
        for u in 0..d {
            tr += a[l * d + u] * hess[u * d + l];
        }
    }
    acc + 0.5 * tr
}

/// `|theta^T(x) grad phi(x)|^2`, the diffusive quadratic-variation density.
pub fn carre_du_champ(coeff: &CoefficientField, x: &[f64], grad: &[f64]) -> f64 {
    let d = x.len();
    let mut th = [0.0; MAX_DIM * MAX_DIM];
    coeff.theta(x, &mut th[..d * d]);
    let mut acc = 0.0;
    for k in 0..d {
        let mut c = 0.0;
        for l in 0..d {
            c += th[l * d + k] * grad[l];
        }
        acc += c * c;
    }
    acc
}

/// Polynomial `sum_k c_k x^{e_k}` in `d` variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    pub dim: usize,
    pub terms: Vec<(f64, Vec<u32>)>,
}

impl Polynomial {
    pub fn new(dim: usize, terms: Vec<(f64, Vec<u32>)>) -> Self {
        assert!(terms.iter().all(|(_, e)| e.len() == dim), "exponent length must equal dimension");
        Polynomial { dim, terms }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Polynomial::new(dim, vec![(c, vec![0; dim])])
    }

    /// Monomial value with exponent vector `e` after differentiating
    /// `k_l` times in coordinate `l`.
    fn monomial_derivative(x: &[f64], e: &[u32], k: &[u32]) -> f64 {
        let mut acc = 1.0;
        for l in 0..x.len() {
            if k[l] > e[l] {
                return 0.0;
            }
            let mut factor = 1.0;
            for j in 0..k[l] {
                factor *= (e[l] - j) as f64;
            }
            acc *= factor * x[l].powi((e[l] - k[l]) as i32);
        }
        acc
    }

    fn derivative(&self, x: &[f64], k: &[u32]) -> f64 {
        self.terms.iter().map(|(c, e)| c * Self::monomial_derivative(x, e, k)).sum()
    }
}

impl TestFunction for Polynomial {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.derivative(x, &vec![0; self.dim])
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        for l in 0..self.dim {
            let mut k = vec![0; self.dim];
            k[l] = 1;
            grad[l] = self.derivative(x, &k);
        }
    }

    fn hessian(&self, x: &[f64], hess: &mut [f64]) {
        let d = self.dim;
        for l in 0..d {
            for u in 0..d {
                let mut k = vec![0; d];
                k[l] += 1;
                k[u] += 1;
                hess[l * d + u] = self.derivative(x, &k);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fields::{DiffusionField, DriftField};
    use approx::assert_relative_eq;

    #[test]
    fn one_dimensional_square() {
        let coeff = CoefficientField::constant(vec![0.5], 1.0);
        let phi = Polynomial::new(1, vec![(1.0, vec![2])]);
        for &x in &[-1.3, 0.0, 2.5] {
            assert_relative_eq!(generator_apply(&coeff, &phi, &[x]), x + 1.0, max_relative = 1e-14);
        }
    }

    #[test]
    fn constant_function_is_annihilated() {
        let coeff = CoefficientField::new(
            DriftField::AffineClamped { offset: vec![0.1, 0.2], matrix: vec![1.0, 0.5, -0.3, 0.2], bound: 2.0 },
            DiffusionField::isotropic(2, 0.7),
        );
        let phi = Polynomial::constant(2, 3.0);
        assert_eq!(generator_apply(&coeff, &phi, &[0.4, -1.0]), 0.0);
    }

    #[test]
    fn bilinear_in_two_dimensions() {
        let coeff = CoefficientField::constant(vec![1.0, 0.0], 1.0);
        let phi = Polynomial::new(2, vec![(1.0, vec![1, 1])]);
        assert_relative_eq!(generator_apply(&coeff, &phi, &[1.0, 2.0]), 2.0);
    }
}
