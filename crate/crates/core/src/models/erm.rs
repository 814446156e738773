use super::{
    dot, standard_exponential, weighted_least_squares, CondMass, Design, MassTerms, ModelTag,
    RegressionModel, LN_2PI,
};
use crate::error::{Error, Result};
use crate::quadrature::laguerre64;
use crate::survival_data::WeightedSample;

/// Exponential regression: `Y | X ~ Exp` with mean `exp(x̃ᵀθ)`, `X ~ N_p(γ, I_p)`.
#[derive(Debug, Clone)]
pub struct ExpRegModel {
    design: Design,
}

impl ExpRegModel {
    pub fn new(design: Design) -> Self {
        Self { design }
    }
}

/// `log ∫ N(x; 0, I)^{1+α} dx = -(pα/2) log 2π - (p/2) log(1+α)`.
pub(crate) fn log_cov_power_mass(p: usize, alpha: f64) -> f64 {
    let p = p as f64;
    -0.5 * p * alpha * LN_2PI - 0.5 * p * (1.0 + alpha).ln()
}

/// `log E[exp(-α x̃ᵀβ)]` for `X ~ N(γ, I/(1+α))` together with its gradient
/// in `β` and `γ`.
pub(crate) fn linear_exponent(
    design: &Design,
    coef: &[f64],
    gamma: &[f64],
    alpha: f64,
) -> (f64, Vec<f64>, Vec<f64>) {
    let (b0, b1) = design.split(coef);
    let a1 = 1.0 + alpha;
    let value = -alpha * (b0 + dot(gamma, b1)) + alpha * alpha * dot(b1, b1) / (2.0 * a1);
    let mut d_coef = Vec::with_capacity(design.coef_dim());
    if design.intercept {
        d_coef.push(-alpha);
    }
    d_coef.extend(
        gamma
            .iter()
            .zip(b1)
            .map(|(g, b)| -alpha * g + alpha * alpha * b / a1),
    );
    let d_gamma = b1.iter().map(|b| -alpha * b).collect();
    (value, d_coef, d_gamma)
}

impl RegressionModel for ExpRegModel {
    fn tag(&self) -> ModelTag {
        ModelTag::Erm
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
        let eta = self.design.linear_predictor(x, theta);
        let r = y * (-eta).exp();
        if !r.is_finite() {
            return Err(Error::Overflow(format!(
                "y*exp(-x'theta) overflows at y = {y}, x'theta = {eta}"
            )));
        }
        let c = r - 1.0;
        let score = self.design.regressor(x).into_iter().map(|v| c * v).collect();
        Ok((-eta - r, score))
    }

    fn mass_and_zeta(&self, theta: &[f64], gamma: &[f64], alpha: f64) -> Result<MassTerms> {
        if alpha == 0.0 {
            return Ok(MassTerms {
                mass: 1.0,
                zeta_theta: vec![0.0; self.theta_dim()],
                zeta_gamma: vec![0.0; self.design.p],
            });
        }
        let a1 = 1.0 + alpha;
        let (e, d_coef, d_gamma) = linear_exponent(&self.design, theta, gamma, alpha);
        let log_mass = log_cov_power_mass(self.design.p, alpha) - a1.ln() + e;
        let mass = log_mass.exp();
        if !mass.is_finite() || mass == 0.0 {
            return Err(Error::Overflow(format!(
                "power integral out of range: log M = {log_mass} (theta = {theta:?}, gamma = {gamma:?}, alpha = {alpha})"
            )));
        }
        let k = mass / a1;
        Ok(MassTerms {
            mass,
            zeta_theta: d_coef.iter().map(|d| k * d).collect(),
            zeta_gamma: d_gamma.iter().map(|d| k * d).collect(),
        })
    }

    fn cond_mass_and_zeta(&self, x: &[f64], theta: &[f64], alpha: f64) -> Result<CondMass> {
        let eta = self.design.linear_predictor(x, theta);
        let a1 = 1.0 + alpha;
        let mass = (-alpha * eta).exp() / a1;
        if !mass.is_finite() {
            return Err(Error::Overflow(format!(
                "conditional power integral overflows at x'theta = {eta}"
            )));
        }
        let c = -alpha * mass / a1;
        Ok(CondMass {
            mass,
            zeta: self.design.regressor(x).into_iter().map(|v| c * v).collect(),
        })
    }

    fn cond_rule(&self, x: &[f64], theta: &[f64]) -> Result<Vec<(f64, f64)>> {
        let mu = self.design.linear_predictor(x, theta).exp();
        Ok(laguerre64().iter().map(|(t, w)| (mu * t, w)).collect())
    }

    fn sample_response(&self, x: &[f64], theta: &[f64], rng: &mut dyn rand::RngCore) -> f64 {
        self.design.linear_predictor(x, theta).exp() * standard_exponential(rng)
    }

    fn cond_mean(&self, x: &[f64], theta: &[f64]) -> Result<f64> {
        Ok(self.design.linear_predictor(x, theta).exp())
    }

    fn initial_theta(&self, ws: &WeightedSample) -> Result<Vec<f64>> {
        weighted_least_squares(&self.design, ws, f64::ln).ok_or_else(|| {
            Error::DegenerateData("weighted least squares on log time is singular".into())
        })
    }
}
