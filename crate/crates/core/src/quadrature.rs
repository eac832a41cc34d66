//! Gauss–Legendre rules and composite tensor-product quadrature.

use std::f64::consts::PI;

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes by Newton iteration on the Legendre recurrence.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "quadrature order must be positive");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }

    /// Nodes and weights of the composite rule on `[a, b]` with `panels` equal panels.
    pub fn composite(&self, a: f64, b: f64, panels: usize) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(panels * self.nodes.len());
        let width = (b - a) / panels as f64;
        for k in 0..panels {
            let pa = a + width * k as f64;
            let half = 0.5 * width;
            let mid = pa + half;
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                out.push((mid + half * x, w * half));
            }
        }
        out
    }

    /// Composite rule whose panel boundaries include every breakpoint inside `(a, b)`.
    pub fn composite_with_breaks(&self, a: f64, b: f64, panels: usize, breaks: &[f64]) -> Vec<(f64, f64)> {
        let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&c| c > a && c < b).collect();
        cuts.push(a);
        cuts.push(b);
        cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
        cuts.dedup();
        let total = b - a;
        let mut out = Vec::new();
        for win in cuts.windows(2) {
            let share = ((win[1] - win[0]) / total * panels as f64).ceil().max(1.0) as usize;
            out.extend(self.composite(win[0], win[1], share));
        }
        out
    }
}

/// `(P_n(x), P_n'(x))`.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 1..n {
        let p2 = ((2 * k + 1) as f64 * x * p1 - k as f64 * p0) / (k + 1) as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Tensor-product composite rule over a box in `R^d` (d ≤ 3).
pub fn tensor_rule(lo: &[f64], hi: &[f64], panels: usize, order: usize) -> (Vec<f64>, Vec<f64>) {
    let gl = GaussLegendre::new(order);
    let axes: Vec<Vec<(f64, f64)>> = lo.iter().zip(hi).map(|(a, b)| gl.composite(*a, *b, panels)).collect();
    tensor_from_axes(&axes)
}

/// Flattens per-axis rules into points (row-major, `d` coordinates each) and weights.
pub fn tensor_from_axes(axes: &[Vec<(f64, f64)>]) -> (Vec<f64>, Vec<f64>) {
    let d = axes.len();
    let total: usize = axes.iter().map(|a| a.len()).product();
    let mut points = Vec::with_capacity(total * d);
    let mut weights = Vec::with_capacity(total);
    let mut idx = vec![0usize; d];
    for _ in 0..total {
        let mut w = 1.0;
        for (ax, &i) in idx.iter().enumerate() {
            points.push(axes[ax][i].0);
            w *= axes[ax][i].1;
        }
        weights.push(w);
        for ax in (0..d).rev() {
            idx[ax] += 1;
            if idx[ax] < axes[ax].len() {
                break;
            }
            idx[ax] = 0;
        }
    }
    (points, weights)
}

pub fn integrate_box<F: FnMut(&[f64]) -> f64>(lo: &[f64], hi: &[f64], panels: usize, order: usize, mut f: F) -> f64 {
    let d = lo.len();
    let (points, weights) = tensor_rule(lo, hi, panels, order);
    points.chunks(d).zip(&weights).map(|(x, w)| w * f(x)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exact_for_polynomials() {
        for n in 1..20 {
            let gl = GaussLegendre::new(n);
            let deg = 2 * n - 1;
            let got = gl.integrate(0.0, 2.0, |x| x.powi(deg as i32));
            let exact = 2f64.powi(deg as i32 + 1) / (deg as f64 + 1.0);
            assert_relative_eq!(got, exact, max_relative = 1e-12);
        }
    }

    #[test]
    fn weights_sum_to_two() {
        let gl = GaussLegendre::new(33);
        assert_relative_eq!(gl.weights.iter().sum::<f64>(), 2.0, max_relative = 1e-13);
    }

    #[test]
    fn tensor_box_integral() {
        let v = integrate_box(&[0.0, -1.0], &[1.0, 2.0], 3, 4, |x| x[0] * x[1] * x[1]);
        assert_relative_eq!(v, 0.5 * 3.0, max_relative = 1e-12);
    }

    #[test]
    fn breaks_are_respected() {
        let gl = GaussLegendre::new(4);
        let rule = gl.composite_with_breaks(-1.0, 1.0, 4, &[0.3]);
        let v: f64 = rule.iter().map(|(x, w)| if *x < 0.3 { w * 1.0 } else { 0.0 }).sum();
        assert_relative_eq!(v, 1.3, max_relative = 1e-13);
    }
}
