//! Composite Gauss–Legendre quadrature.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Nodes per panel.
pub const ORDER: usize = 64;

/// Longest panel a composite rule will use.
pub const MAX_PANEL: f64 = PI / 8.0;

#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Computes the rule on `[-1, 1]` by Newton iteration on `P_order`.
    pub fn new(order: usize) -> Self {
        assert!(order >= 1);
        let mut nodes = vec![0.0; order];
        let mut weights = vec![0.0; order];
        let n = order as f64;
        for i in 0..order.div_ceil(2) {
            let mut z = (PI * (i as f64 + 0.75) / (n + 0.5)).cos();
            for _ in 0..100 {
                let dz = legendre_ratio(order, z);
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            let (p, p_prev) = legendre_pair(order, z);
            let dp = n * (z * p - p_prev) / (z * z - 1.0);
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            nodes[i] = -z;
            nodes[order - 1 - i] = z;
            weights[i] = w;
            weights[order - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Calls `visit(x, w)` for every node mapped onto `[a, b]`.
    pub fn visit(&self, a: f64, b: f64, mut visit: impl FnMut(f64, f64)) {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            visit(mid + half * x, half * w);
        }
    }

    /// Composite rule on `[a, b]` with panels no longer than `max_panel`.
    pub fn visit_panels(&self, a: f64, b: f64, max_panel: f64, mut visit: impl FnMut(f64, f64)) {
        let len = b - a;
        let panels = ((len / max_panel).ceil() as usize).max(1);
        let h = len / panels as f64;
        for k in 0..panels {
            let lo = a + h * k as f64;
            let hi = if k + 1 == panels { b } else { lo + h };
            self.visit(lo, hi, &mut visit);
        }
    }

    pub fn integrate(&self, a: f64, b: f64, max_panel: f64, f: impl Fn(f64) -> f64) -> f64 {
        let mut acc = 0.0;
        self.visit_panels(a, b, max_panel, |x, w| acc += w * f(x));
        acc
    }
}

// Newton step P_n(z) / P_n'(z).
fn legendre_ratio(order: usize, z: f64) -> f64 {
    let (p, p_prev) = legendre_pair(order, z);
    let dp = order as f64 * (z * p - p_prev) / (z * z - 1.0);
    p / dp
}

// (P_n(z), P_{n-1}(z)) by the three-term recurrence.
fn legendre_pair(order: usize, z: f64) -> (f64, f64) {
    let mut p = 1.0;
    let mut p_prev = 0.0;
    for j in 1..=order {
        let jf = j as f64;
        let next = ((2.0 * jf - 1.0) * z * p - (jf - 1.0) * p_prev) / jf;
        p_prev = p;
        p = next;
    }
    (p, p_prev)
}

/// The shared order-64 rule.
pub fn rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(ORDER))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two() {
        let r = rule();
        let s: f64 = r.weights().iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        assert!(r.nodes().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn exact_for_high_degree_polynomials() {
        let r = GaussLegendre::new(8);
        // degree 15 is the limit for 8 nodes
        let got = r.integrate(0.0, 1.0, 10.0, |x| x.powi(15));
        assert!((got - 1.0 / 16.0).abs() < 1e-15);
        let got = rule().integrate(-1.0, 2.0, MAX_PANEL, |x| x.powi(7) - 3.0 * x * x);
        let exact = (2f64.powi(8) - 1.0) / 8.0 - (8.0 + 1.0);
        assert!((got - exact).abs() < 1e-12);
    }

    #[test]
    fn integrates_smooth_periodic() {
        let got = rule().integrate(0.0, 2.0 * PI, MAX_PANEL, |x| x.cos().powi(2));
        assert!((got - PI).abs() < 1e-13);
    }
}
