use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{digamma, ln_gamma};

use super::erm::{linear_exponent, log_cov_power_mass};
use super::{
    standard_exponential, weighted_least_squares, CondMass, Design, MassTerms, ModelTag,
    RegressionModel, LN_2PI,
};
use crate::error::{Error, Result};
use crate::quadrature::{hermite64, laguerre64, logistic_default};
use crate::survival_data::WeightedSample;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Standardized error law of `log Y = x̃ᵀβ + σU`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorFamily {
    /// Location-zero minimum extreme value, `f₀(u) = exp(u - e^u)` (Weibull times).
    ExtremeValue,
    /// Standard normal (log-normal times).
    Normal,
    /// Standard logistic (log-logistic times).
    Logistic,
}

impl ErrorFamily {
    /// `log f₀(u)` and `g(u) = (log f₀)'(u)`.
    fn log_density_and_slope(self, u: f64) -> (f64, f64) {
        match self {
            ErrorFamily::ExtremeValue => {
                let e = u.exp();
                (u - e, 1.0 - e)
            }
            ErrorFamily::Normal => (-0.5 * u * u - 0.5 * LN_2PI, -u),
            ErrorFamily::Logistic => {
                // -|u| - 2 log(1 + e^{-|u|}) is symmetric and overflow free
                let a = u.abs();
                (-a - 2.0 * (-a).exp().ln_1p(), -(0.5 * u).tanh())
            }
        }
    }

    /// `log K(σ)` and `d log K / dσ` with `K(σ) = ∫ e^{-ασu} f₀(u)^{1+α} du`.
    fn log_k(self, sigma: f64, alpha: f64) -> Result<(f64, f64)> {
        let a1 = 1.0 + alpha;
        match self {
            ErrorFamily::ExtremeValue => {
                let a = a1 - alpha * sigma;
                if a <= 0.0 {
                    return Err(Error::Overflow(format!(
                        "extreme-value power integral diverges: 1 + alpha - alpha*sigma = {a} <= 0 \
                         (alpha = {alpha}, sigma = {sigma})"
                    )));
                }
                Ok((
                    ln_gamma(a) - a * a1.ln(),
                    -alpha * (digamma(a) - a1.ln()),
                ))
            }
            ErrorFamily::Normal => Ok((
                -0.5 * alpha * LN_2PI - 0.5 * a1.ln() + alpha * alpha * sigma * sigma / (2.0 * a1),
                alpha * alpha * sigma / a1,
            )),
            ErrorFamily::Logistic => {
                let a = a1 - alpha * sigma;
                let b = a1 + alpha * sigma;
                if a <= 0.0 {
                    return Err(Error::Overflow(format!(
                        "logistic power integral diverges: 1 + alpha - alpha*sigma = {a} <= 0 \
                         (alpha = {alpha}, sigma = {sigma})"
                    )));
                }
                Ok((
                    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b),
                    alpha * (digamma(b) - digamma(a)),
                ))
            }
        }
    }

    fn sample(self, rng: &mut dyn rand::RngCore) -> f64 {
        match self {
            ErrorFamily::ExtremeValue => standard_exponential(rng).ln(),
            ErrorFamily::Normal => rng.sample(StandardNormal),
            ErrorFamily::Logistic => {
                let v: f64 = rng.random();
                let v = v.max(f64::MIN_POSITIVE);
                (v / (1.0 - v)).ln()
            }
        }
    }

    /// Standard deviation of `U`.
    fn sd(self) -> f64 {
        match self {
            ErrorFamily::ExtremeValue => PI / 6f64.sqrt(),
            ErrorFamily::Normal => 1.0,
            ErrorFamily::Logistic => PI / 3f64.sqrt(),
        }
    }

    /// Rule for `E[h(U)]`.
    fn rule(self) -> Vec<(f64, f64)> {
        match self {
            ErrorFamily::ExtremeValue => laguerre64().iter().map(|(t, w)| (t.ln(), w)).collect(),
            ErrorFamily::Normal => hermite64().iter().collect(),
            ErrorFamily::Logistic => logistic_default().iter().collect(),
        }
    }
}

/// Accelerated failure time model, `θ = (β, σ)` with density
/// `f(y | x) = (1/(yσ)) f₀((log y - x̃ᵀβ)/σ)` and `X ~ N_p(γ, I_p)`.
///
/// With [`AftModel::on_log_time`] the density is taken with respect to
/// `v = log y`, i.e. `(1/σ) f₀((v - x̃ᵀβ)/σ)`. Responses are still passed in
/// time units. The divergence then compares log-time densities, which does
/// not reward short times through the `1/y` Jacobian.
#[derive(Debug, Clone)]
pub struct AftModel {
    design: Design,
    family: ErrorFamily,
    log_time: bool,
}

impl AftModel {
    pub fn new(design: Design, family: ErrorFamily) -> Self {
        Self {
            design,
            family,
            log_time: false,
        }
    }

    pub fn on_log_time(design: Design, family: ErrorFamily) -> Self {
        Self {
            design,
            family,
            log_time: true,
        }
    }

    pub fn is_log_time(&self) -> bool {
        self.log_time
    }

    /// `log K` and its σ-derivative; on the log-time scale the tilt vanishes.
    fn log_k(&self, sigma: f64, alpha: f64) -> Result<(f64, f64)> {
        if self.log_time {
            let (lk, _) = self.family.log_k(0.0, alpha)?;
            Ok((lk, 0.0))
        } else {
            self.family.log_k(sigma, alpha)
        }
    }

    pub fn family(&self) -> ErrorFamily {
        self.family
    }

    fn split<'a>(&self, theta: &'a [f64]) -> Result<(&'a [f64], f64)> {
        let q = self.design.coef_dim();
        let sigma = theta[q];
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Domain(format!("scale sigma = {sigma} must be positive")));
        }
        Ok((&theta[..q], sigma))
    }
}

impl RegressionModel for AftModel {
    fn tag(&self) -> ModelTag {
        match (self.family, self.log_time) {
            (ErrorFamily::ExtremeValue, false) => ModelTag::AftWeibull,
            (ErrorFamily::Normal, false) => ModelTag::AftLognormal,
            (ErrorFamily::Logistic, false) => ModelTag::AftLoglogistic,
            (ErrorFamily::ExtremeValue, true) => ModelTag::AftEvLogTime,
            (ErrorFamily::Normal, true) => ModelTag::AftNormalLogTime,
            (ErrorFamily::Logistic, true) => ModelTag::AftLogisticLogTime,
        }
    }

    fn design(&self) -> Design {
        self.design
    }

    fn theta_dim(&self) -> usize {
        self.design.coef_dim() + 1
    }

    fn theta_names(&self) -> Vec<String> {
        let mut names = self.design.coef_names();
        names.push("sigma".into());
        names
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.theta_dim() || theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "theta must hold {} finite values, got {theta:?}",
                self.theta_dim()
            )));
        }
        self.split(theta).map(|_| ())
    }

    fn cond_log_density_and_score(
        &self,
        y: f64,
        x: &[f64],
        theta: &[f64],
    ) -> Result<(f64, Vec<f64>)> {
        let (beta, sigma) = self.split(theta)?;
        let ly = y.ln();
        let u = (ly - self.design.linear_predictor(x, beta)) / sigma;
        let (lf0, g) = self.family.log_density_and_slope(u);
        if !lf0.is_finite() || !g.is_finite() {
            return Err(Error::Overflow(format!(
                "error density out of range at standardized residual u = {u}"
            )));
        }
        let mut score: Vec<f64> = self
            .design
            .regressor(x)
            .into_iter()
            .map(|r| -g * r / sigma)
            .collect();
        score.push(-(1.0 + g * u) / sigma);
        let jacobian = if self.log_time { 0.0 } else { ly };
        Ok((-jacobian - sigma.ln() + lf0, score))
    }

    fn mass_and_zeta(&self, theta: &[f64], gamma: &[f64], alpha: f64) -> Result<MassTerms> {
        let (beta, sigma) = self.split(theta)?;
        if alpha == 0.0 {
            return Ok(MassTerms {
                mass: 1.0,
                zeta_theta: vec![0.0; self.theta_dim()],
                zeta_gamma: vec![0.0; self.design.p],
            });
        }
        let (lk, dlk) = self.log_k(sigma, alpha)?;
        let (e, d_coef, d_gamma) = if self.log_time {
            let q = self.design.coef_dim();
            (0.0, vec![0.0; q], vec![0.0; self.design.p])
        } else {
            linear_exponent(&self.design, beta, gamma, alpha)
        };
        let log_mass = log_cov_power_mass(self.design.p, alpha) - alpha * sigma.ln() + lk + e;
        let mass = log_mass.exp();
        if !mass.is_finite() || mass == 0.0 {
            return Err(Error::Overflow(format!(
                "power integral out of range: log M = {log_mass} (theta = {theta:?}, gamma = {gamma:?}, alpha = {alpha})"
            )));
        }
        let k = mass / (1.0 + alpha);
        let mut zeta_theta: Vec<f64> = d_coef.iter().map(|d| k * d).collect();
        zeta_theta.push(k * (-alpha / sigma + dlk));
        Ok(MassTerms {
            mass,
            zeta_theta,
            zeta_gamma: d_gamma.iter().map(|d| k * d).collect(),
        })
    }

    fn cond_mass_and_zeta(&self, x: &[f64], theta: &[f64], alpha: f64) -> Result<CondMass> {
        let (beta, sigma) = self.split(theta)?;
        let a1 = 1.0 + alpha;
        let (lk, dlk) = self.log_k(sigma, alpha)?;
        // the time-scale density carries e^{-αη} from the Jacobian
        let tilt = if self.log_time { 0.0 } else { alpha };
        let eta = self.design.linear_predictor(x, beta);
        let mass = (-alpha * sigma.ln() - tilt * eta + lk).exp();
        if !mass.is_finite() {
            return Err(Error::Overflow(format!(
                "conditional power integral overflows at x'beta = {eta}, sigma = {sigma}"
            )));
        }
        let k = mass / a1;
        let mut zeta: Vec<f64> = self
            .design
            .regressor(x)
            .into_iter()
            .map(|r| -tilt * k * r)
            .collect();
        zeta.push(k * (-alpha / sigma + dlk));
        Ok(CondMass { mass, zeta })
    }

    fn cond_rule(&self, x: &[f64], theta: &[f64]) -> Result<Vec<(f64, f64)>> {
        let (beta, sigma) = self.split(theta)?;
        let eta = self.design.linear_predictor(x, beta);
        Ok(self
            .family
            .rule()
            .into_iter()
            .map(|(u, w)| ((eta + sigma * u).exp(), w))
            .collect())
    }

    fn sample_response(&self, x: &[f64], theta: &[f64], rng: &mut dyn rand::RngCore) -> f64 {
        let q = self.design.coef_dim();
        let eta = self.design.linear_predictor(x, &theta[..q]);
        (eta + theta[q] * self.family.sample(rng)).exp()
    }

    fn cond_mean(&self, x: &[f64], theta: &[f64]) -> Result<f64> {
        let (beta, sigma) = self.split(theta)?;
        let eta = self.design.linear_predictor(x, beta);
        let factor = match self.family {
            ErrorFamily::ExtremeValue => ln_gamma(1.0 + sigma).exp(),
            ErrorFamily::Normal => (0.5 * sigma * sigma).exp(),
            ErrorFamily::Logistic if sigma < 1.0 => PI * sigma / (PI * sigma).sin(),
            ErrorFamily::Logistic => {
                return Err(Error::Domain(format!(
                    "log-logistic mean is infinite for sigma = {sigma} >= 1"
                )))
            }
        };
        Ok(eta.exp() * factor)
    }

    fn log_scale_components(&self) -> Vec<usize> {
        vec![self.design.coef_dim()]
    }

    fn initial_theta(&self, ws: &WeightedSample) -> Result<Vec<f64>> {
        let mut beta = weighted_least_squares(&self.design, ws, f64::ln).ok_or_else(|| {
            Error::DegenerateData("weighted least squares on log time is singular".into())
        })?;
        let (mut ss, mut tw) = (0.0, 0.0);
        for i in 0..ws.n() {
            let w = ws.weights.w[i];
            let r = ws.sorted.z[i].ln() - self.design.linear_predictor(ws.sorted.x(i), &beta);
            ss += w * r * r;
            tw += w;
        }
        let mut sigma = ((ss / tw).sqrt() / self.family.sd()).max(1e-3);
        if !sigma.is_finite() {
            sigma = 1.0;
        }
        if self.family == ErrorFamily::ExtremeValue && self.design.intercept {
            beta[0] += EULER_GAMMA * sigma;
        }
        beta.push(sigma);
        Ok(beta)
    }
}
