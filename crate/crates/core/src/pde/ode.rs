use serde::Serialize;

use crate::error::{invalid, Result};
use crate::pde::solve::step_count;

/// Solution of the spatially homogeneous SIR system.
#[derive(Debug, Clone, Serialize)]
pub struct SirSeries {
    pub times: Vec<f64>,
    pub s: Vec<f64>,
    pub i: Vec<f64>,
    pub r: Vec<f64>,
}

impl SirSeries {
    /// Linear interpolation of `(S, I, R)` at `t`.
    pub fn at(&self, t: f64) -> [f64; 3] {
        let k = self.times.partition_point(|&x| x <= t).clamp(1, self.times.len().max(2) - 1);
        if self.times.len() == 1 {
            return [self.s[0], self.i[0], self.r[0]];
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let w = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        let lerp = |v: &[f64]| v[k - 1] + w * (v[k] - v[k - 1]);
        [lerp(&self.s), lerp(&self.i), lerp(&self.r)]
    }
}

/// Classical RK4 on `S' = -beta S I`, `I' = beta S I - alpha I`, `R' = alpha I`.
pub fn sir_ode_reduce(beta: f64, alpha: f64, s0: f64, i0: f64, t_end: f64, dt: f64) -> Result<SirSeries> {
    if s0 < 0.0 || i0 < 0.0 || s0 + i0 > 1.0 + 1e-12 {
        return Err(invalid(format!("need S0, I0 >= 0 and S0 + I0 <= 1, got {s0}, {i0}")));
    }
    let n = step_count(dt, t_end)?;
    let rhs = |y: [f64; 3]| {
        let inf = beta * y[0] * y[1];
        let rec = alpha * y[1];
        [-inf, inf - rec, rec]
    };
    let mut out = SirSeries {
        times: Vec::with_capacity(n + 1),
        s: Vec::with_capacity(n + 1),
        i: Vec::with_capacity(n + 1),
        r: Vec::with_capacity(n + 1),
    };
    let mut y = [s0, i0, 0.0];
    let push = |out: &mut SirSeries, t: f64, y: [f64; 3]| {
        out.times.push(t);
        out.s.push(y[0]);
        out.i.push(y[1]);
        out.r.push(y[2]);
    };
    push(&mut out, 0.0, y);
    let add = |a: [f64; 3], b: [f64; 3], h: f64| [a[0] + h * b[0], a[1] + h * b[1], a[2] + h * b[2]];
    for k in 1..=n {
        let k1 = rhs(y);
        let k2 = rhs(add(y, k1, dt / 2.0));
        let k3 = rhs(add(y, k2, dt / 2.0));
        let k4 = rhs(add(y, k3, dt));
        for c in 0..3 {
            y[c] += dt / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        }
        push(&mut out, k as f64 * dt, y);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_transmission_is_pure_decay() {
        let sol = sir_ode_reduce(0.0, 0.4, 0.7, 0.3, 5.0, 0.01).unwrap();
        for (k, t) in sol.times.iter().enumerate() {
            assert_eq!(sol.s[k], 0.7);
            assert!((sol.i[k] - 0.3 * (-0.4 * t).exp()).abs() < 1e-10);
        }
    }

    #[test]
    fn no_recovery_matches_logistic() {
        // With alpha = 0, I solves the logistic equation with total c = S0 + I0.
        let (beta, s0, i0) = (1.3, 0.9, 0.05);
        let c = s0 + i0;
        let sol = sir_ode_reduce(beta, 0.0, s0, i0, 6.0, 0.001).unwrap();
        for (k, t) in sol.times.iter().enumerate() {
            let e = (beta * c * t).exp();
            let i = c * i0 * e / (s0 + i0 * e);
            assert!((sol.i[k] - i).abs() < 1e-8, "{t}");
            assert!((sol.s[k] - (c - i)).abs() < 1e-8);
        }
    }

    #[test]
    fn total_is_conserved() {
        let sol = sir_ode_reduce(2.0, 0.5, 0.8, 0.2, 10.0, 0.01).unwrap();
        for k in 0..sol.times.len() {
            assert!((sol.s[k] + sol.i[k] + sol.r[k] - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn interpolation_hits_nodes() {
        let sol = sir_ode_reduce(2.0, 0.5, 0.8, 0.2, 1.0, 0.1).unwrap();
        let v = sol.at(0.3);
        assert!((v[1] - sol.i[3]).abs() < 1e-15);
        assert!(sir_ode_reduce(1.0, 1.0, 0.9, 0.2, 1.0, 0.1).is_err());
    }
}
