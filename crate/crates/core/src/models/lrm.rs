use super::{
    dot, standard_exponential, weighted_least_squares, CondMass, Design, MassTerms, ModelTag,
    RegressionModel, LN_2PI,
};
use crate::error::{Error, Result};
use crate::quadrature::{gauss_hermite, laguerre64, Rule};
use crate::survival_data::WeightedSample;

/// Standard-deviation window kept from the Gauss–Hermite rule. The power
/// integrals of this family are singular at `xᵀθ = 0`, so the covariate
/// expectation is taken over the central `±6` sd band (renormalized).
const WINDOW_SD: f64 = 6.0;
/// Nodes inside this band must have `xᵀθ > 0` or evaluation fails.
const HARD_SD: f64 = 3.0;
/// Below `REG_FRACTION · E[xᵀθ]` the power `s^{-α}` is continued by its
/// second-order Taylor polynomial so far-tail nodes stay finite.
const REG_FRACTION: f64 = 0.05;

/// `Y | X ~ Exp` with mean `x̃ᵀθ`, `X ~ N_p(γ, I_p)`.
#[derive(Debug, Clone)]
pub struct LinearExpModel {
    design: Design,
    rule: Rule,
}

impl LinearExpModel {
    pub fn new(design: Design) -> Self {
        Self::with_nodes(design, 64)
    }

    /// Uses an `n`-node Gauss–Hermite rule for the covariate expectation.
    pub fn with_nodes(design: Design, n: usize) -> Self {
        let full = gauss_hermite(n);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for (t, w) in full.iter() {
            if t.abs() <= WINDOW_SD {
                nodes.push(t);
                weights.push(w);
            }
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Self {
            design,
            rule: Rule { nodes, weights },
        }
    }

    fn mean(&self, x: &[f64], theta: &[f64]) -> Result<f64> {
        let mu = self.design.linear_predictor(x, theta);
        if mu > 0.0 && mu.is_finite() {
            Ok(mu)
        } else {
            Err(Error::Domain(format!(
                "linear mean x'theta = {mu} is not positive at x = {x:?}, theta = {theta:?}"
            )))
        }
    }

    /// Gauss–Hermite projection of `x̃ᵀθ` under `X ~ N(γ, I/(1+α))`:
    /// returns `(m_s, sd_s, s_c)` after checking the domain.
    fn projection(&self, theta: &[f64], gamma: &[f64], alpha: f64) -> Result<(f64, f64, f64)> {
        let (b0, b1) = self.design.split(theta);
        let m = b0 + dot(gamma, b1);
        let sd = dot(b1, b1).sqrt() / (1.0 + alpha).sqrt();
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::Domain(format!(
                "mean response at the covariate centre is {m}, not positive (theta = {theta:?}, gamma = {gamma:?})"
            )));
        }
        for (k, &t) in self.rule.nodes.iter().enumerate() {
            let s = m + sd * t;
            if t.abs() <= HARD_SD && s <= 0.0 {
                return Err(Error::Domain(format!(
                    "quadrature node {k} (t = {t:.4}) gives x'theta = {s:.4e} <= 0 \
                     (theta = {theta:?}, gamma = {gamma:?}, alpha = {alpha})"
                )));
            }
        }
        Ok((m, sd, REG_FRACTION * m))
    }

    /// `ψ⁽⁰⁾ = E[(x̃ᵀθ)^{-α}]` with `X ~ N_p(γ, I_p/(1+α))`.
    pub fn psi0(&self, theta: &[f64], gamma: &[f64], alpha: f64) -> Result<f64> {
        let (m, sd, sc) = self.projection(theta, gamma, alpha)?;
        Ok(self.rule.expect(|t| power(m + sd * t, alpha, sc).0))
    }

    /// `ψ̄⁽⁰⁾ = E[X (x̃ᵀθ)^{-α}]` with `X ~ N_p(γ, I_p/(1+α))`.
    pub fn psi0_bar(&self, theta: &[f64], gamma: &[f64], alpha: f64) -> Result<Vec<f64>> {
        let (m, sd, sc) = self.projection(theta, gamma, alpha)?;
        let (_, b1) = self.design.split(theta);
        let norm = dot(b1, b1).sqrt();
        let mut out = vec![0.0; gamma.len()];
        for (t, w) in self.rule.iter() {
            let g = power(m + sd * t, alpha, sc).0;
            // X = γ + (t/√(1+α)) b1/|b1| along the projection, other directions average out
            for (j, o) in out.iter_mut().enumerate() {
                let dir = if norm > 0.0 { b1[j] / norm } else { 0.0 };
                *o += w * g * (gamma[j] + t * dir / (1.0 + alpha).sqrt());
            }
        }
        Ok(out)
    }
}

/// `s^{-α}` and its first derivative, continued by a quadratic below `sc`.
fn power(s: f64, alpha: f64, sc: f64) -> (f64, f64) {
    if s >= sc {
        let g = s.powf(-alpha);
        (g, -alpha * g / s)
    } else {
        let g0 = sc.powf(-alpha);
        let g1 = -alpha * g0 / sc;
        let g2 = alpha * (alpha + 1.0) * g0 / (sc * sc);
        let d = s - sc;
        (g0 + g1 * d + 0.5 * g2 * d * d, g1 + g2 * d)
    }
}

impl RegressionModel for LinearExpModel {
    fn tag(&self) -> ModelTag {
        ModelTag::LrmExp
    }

    fn design(&self) -> Design {
        self.design
    }

    fn theta_dim(&self) -> usize {
        self.design.coef_dim()
    }

    fn theta_names(&self) -> Vec<String> {
        self.design.coef_names()
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.theta_dim() || theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "theta must hold {} finite values, got {theta:?}",
                self.theta_dim()
            )));
        }
        Ok(())
    }

    fn cond_log_density_and_score(
        &self,
        y: f64,
        x: &[f64],
        theta: &[f64],
    ) -> Result<(f64, Vec<f64>)> {
        let mu = self.mean(x, theta)?;
        let c = (y - mu) / (mu * mu);
        let score = self.design.regressor(x).into_iter().map(|r| c * r).collect();
        Ok((-mu.ln() - y / mu, score))
    }

    fn mass_and_zeta(&self, theta: &[f64], gamma: &[f64], alpha: f64) -> Result<MassTerms> {
        let q = self.theta_dim();
        let p = self.design.p;
        if alpha == 0.0 {
            return Ok(MassTerms {
                mass: 1.0,
                zeta_theta: vec![0.0; q],
                zeta_gamma: vec![0.0; p],
            });
        }
        let (m, sd, sc) = self.projection(theta, gamma, alpha)?;
        let (_, b1) = self.design.split(theta);
        let norm = dot(b1, b1).sqrt();
        let a1 = 1.0 + alpha;
        let pref = (-0.5 * p as f64 * alpha * LN_2PI - 0.5 * p as f64 * a1.ln()).exp() / a1;

        let (mut e0, mut e1, mut e1t) = (0.0, 0.0, 0.0);
        for (t, w) in self.rule.iter() {
            let (g, dg) = power(m + sd * t, alpha, sc);
            e0 += w * g;
            e1 += w * dg;
            e1t += w * dg * t;
        }
        let mass = pref * e0;
        // gradient of the quadrature formula, then ζ = ∇M/(1+α)
        let k = pref / a1;
        let mut zeta_theta = Vec::with_capacity(q);
        if self.design.intercept {
            zeta_theta.push(k * e1);
        }
        for j in 0..p {
            let dir = if norm > 0.0 { b1[j] / (norm * a1.sqrt()) } else { 0.0 };
            zeta_theta.push(k * (gamma[j] * e1 + dir * e1t));
        }
        let zeta_gamma = b1.iter().map(|b| k * b * e1).collect();
        Ok(MassTerms {
            mass,
            zeta_theta,
            zeta_gamma,
        })
    }

    fn cond_mass_and_zeta(&self, x: &[f64], theta: &[f64], alpha: f64) -> Result<CondMass> {
        let mu = self.mean(x, theta)?;
        let a1 = 1.0 + alpha;
        let mass = mu.powf(-alpha) / a1;
        let c = -alpha * mu.powf(-1.0 - alpha) / (a1 * a1);
        Ok(CondMass {
            mass,
            zeta: self.design.regressor(x).into_iter().map(|r| c * r).collect(),
        })
    }

    fn cond_rule(&self, x: &[f64], theta: &[f64]) -> Result<Vec<(f64, f64)>> {
        let mu = self.mean(x, theta)?;
        Ok(laguerre64().iter().map(|(t, w)| (mu * t, w)).collect())
    }

    fn sample_response(&self, x: &[f64], theta: &[f64], rng: &mut dyn rand::RngCore) -> f64 {
        self.design.linear_predictor(x, theta) * standard_exponential(rng)
    }

    fn cond_mean(&self, x: &[f64], theta: &[f64]) -> Result<f64> {
        self.mean(x, theta)
    }

    fn initial_theta(&self, ws: &WeightedSample) -> Result<Vec<f64>> {
        let feasible = |th: &[f64]| {
            (0..ws.n()).all(|i| self.design.linear_predictor(ws.sorted.x(i), th) > 0.0)
        };
        if let Some(th) = weighted_least_squares(&self.design, ws, |z| z) {
            if feasible(&th) {
                return Ok(th);
            }
        }
        // moment fallback: mean response along the mean covariate direction
        let total: f64 = ws.weights.w.iter().sum();
        let mut xbar = vec![0.0; self.design.p];
        let mut zbar = 0.0;
        for i in 0..ws.n() {
            let w = ws.weights.w[i] / total;
            zbar += w * ws.sorted.z[i];
            for (a, b) in xbar.iter_mut().zip(ws.sorted.x(i)) {
                *a += w * b;
            }
        }
        let th = if self.design.intercept {
            let mut th = vec![0.0; self.theta_dim()];
            th[0] = zbar;
            th
        } else {
            let nx = dot(&xbar, &xbar);
            xbar.iter().map(|v| zbar * v / nx).collect()
        };
        if feasible(&th) {
            Ok(th)
        } else {
            Err(Error::Domain(
                "no starting value keeps x'theta positive on the sample".into(),
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> LinearExpModel {
        LinearExpModel::new(Design::new(1, false))
    }

    #[test]
    fn psi0_tends_to_one_at_small_alpha() {
        let v = model().psi0(&[1.0], &[5.0], 1e-9).unwrap();
        assert!((v - 1.0).abs() < 1e-7);
    }

    #[test]
    fn alpha_zero_has_zero_zeta() {
        let t = model().mass_and_zeta(&[1.0], &[5.0], 0.0).unwrap();
        assert!(t.zeta_theta.iter().chain(&t.zeta_gamma).all(|&v| v == 0.0));
    }

    #[test]
    fn nonpositive_core_node_is_reported() {
        let err = model().mass_and_zeta(&[1.0], &[1.0], 0.5).unwrap_err();
        assert!(matches!(err, Error::Domain(ref m) if m.contains("quadrature node")));
    }

    #[test]
    fn psi0_bar_matches_gamma_times_psi0_at_zero_slope_spread() {
        // with θ having intercept and zero slope the integrand is constant in x
        let m = LinearExpModel::new(Design::new(1, true));
        let v = m.psi0(&[2.0, 0.0], &[3.0], 0.5).unwrap();
        let vb = m.psi0_bar(&[2.0, 0.0], &[3.0], 0.5).unwrap();
        assert!((v - 2f64.powf(-0.5)).abs() < 1e-12);
        assert!((vb[0] - 3.0 * v).abs() < 1e-12);
    }

    #[test]
    fn score_matches_finite_difference() {
        let m = LinearExpModel::new(Design::new(2, true));
        let th = [0.5, 1.0, 0.3];
        let x = [2.0, 1.5];
        let (_, s) = m.cond_log_density_and_score(3.0, &x, &th).unwrap();
        for j in 0..3 {
            let h = 1e-6;
            let mut a = th;
            let mut b = th;
            a[j] += h;
            b[j] -= h;
            let fd = (m.cond_log_density(3.0, &x, &a).unwrap()
                - m.cond_log_density(3.0, &x, &b).unwrap())
                / (2.0 * h);
            assert!((fd - s[j]).abs() < 1e-7);
        }
    }
}
