//! Fixed quadrature rules expressed as expectations under a reference law.
//!
//! Each [`Rule`] approximates `E[h(U)] ≈ Σ w_k h(u_k)` for `U` standard
//! normal, standard exponential or standard logistic.

use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::DMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn expect(&self, mut h: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&u, &w)| w * h(u))
            .sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }
}

/// Gauss–Hermite rule for `E[h(U)]`, `U ~ N(0, 1)`.
///
/// Nodes come from Newton iteration on the orthonormal Hermite recurrence,
/// which keeps the far-tail weights accurate in relative terms.
pub fn gauss_hermite(n: usize) -> Rule {
    assert!(n >= 1, "rule needs at least one node");
    const PIM4: f64 = 0.751_125_544_464_942_5;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-0.16667),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = PIM4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z1.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    let scale = 1.0 / PI.sqrt();
    let mut rule = Rule {
        nodes: x.iter().map(|v| v * std::f64::consts::SQRT_2).collect(),
        weights: w.iter().map(|v| v * scale).collect(),
    };
    // ascending order
    rule.nodes.reverse();
    rule.weights.reverse();
    rule
}

/// Shared 64-node Gauss–Hermite rule.
pub fn hermite64() -> &'static Rule {
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(|| gauss_hermite(64))
}

/// Shared 64-node Gauss–Laguerre rule.
pub fn laguerre64() -> &'static Rule {
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(|| gauss_laguerre(64))
}

/// Shared logistic rule (step 1/32, 161 nodes each side).
pub fn logistic_default() -> &'static Rule {
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(|| logistic_rule(1.0 / 32.0, 160))
}

/// Gauss–Laguerre rule for `E[h(T)]`, `T ~ Exp(1)`.
///
/// Nodes start from the eigenvalues of the Jacobi matrix and are refined by
/// Newton iteration on the three-term recurrence.
pub fn gauss_laguerre(n: usize) -> Rule {
    assert!(n >= 1, "rule needs at least one node");
    let jacobi = DMatrix::<f64>::from_fn(n, n, |i, j| {
        if i == j {
            (2 * i + 1) as f64
        } else if i.abs_diff(j) == 1 {
            i.max(j) as f64
        } else {
            0.0
        }
    });
    let mut guesses: Vec<f64> = jacobi.symmetric_eigenvalues().iter().copied().collect();
    guesses.sort_by(f64::total_cmp);
    let nf = n as f64;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for (i, &g) in guesses.iter().enumerate() {
        let mut z = g;
        let (mut pp, mut p2) = (0.0, 0.0);
        for _ in 0..100 {
            let mut p1 = 1.0;
            p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf + 1.0 - z) * p2 - jf * p3) / (jf + 1.0);
            }
            pp = (nf * p1 - nf * p2) / z;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z1.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        w[i] = -1.0 / (pp * nf * p2);
    }
    Rule {
        nodes: x,
        weights: w,
    }
}

/// Double-exponential rule for `E[h(U)]`, `U` standard logistic, via the
/// substitution `u = π sinh(t)` on a uniform grid of step `step`.
pub fn logistic_rule(step: f64, half_width: usize) -> Rule {
    let mut nodes = Vec::with_capacity(2 * half_width + 1);
    let mut weights = Vec::with_capacity(2 * half_width + 1);
    for k in -(half_width as i64)..=(half_width as i64) {
        let t = k as f64 * step;
        let u = PI * t.sinh();
        // logistic density at u times du/dt
        let e = (-u.abs()).exp();
        let dens = e / ((1.0 + e) * (1.0 + e));
        let w = dens * PI * t.cosh() * step;
        if w > 0.0 && w.is_finite() {
            nodes.push(u);
            weights.push(w);
        }
    }
    Rule { nodes, weights }
}

/// Iterates over the tensor product of a one-dimensional rule in `dim`
/// dimensions, calling `f(point, weight)`.
pub fn tensor_for_each(rule: &Rule, dim: usize, mut f: impl FnMut(&[f64], f64)) {
    let m = rule.len();
    let mut idx = vec![0usize; dim];
    let mut point = vec![0.0; dim];
    loop {
        let mut w = 1.0;
        for (d, &k) in idx.iter().enumerate() {
            point[d] = rule.nodes[k];
            w *= rule.weights[k];
        }
        f(&point, w);
        let mut d = 0;
        loop {
            if d == dim {
                return;
            }
            idx[d] += 1;
            if idx[d] < m {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}
