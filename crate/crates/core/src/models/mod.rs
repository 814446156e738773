//! Parametric families for censored regression with a normal covariate marginal.
//!
//! A model pairs a conditional density `f_θ(y | x)` with the covariate law
//! `X ~ N_p(γ, I_p)` and exposes the quantities the divergence needs:
//! log densities, scores, the joint power integral
//! `M(θ, γ) = ∬ f_θ(y|x)^{1+α} f_γ(x)^{1+α} dx dy` with
//! `ζ = (∬ u_θ f^{1+α} f_γ^{1+α}, ∬ u_γ f^{1+α} f_γ^{1+α})`, and the
//! conditional analogues used by the semi-parametric variant.
//!
//! Differentiating under the integral gives `∇M = (1 + α) ζ`, which every
//! implementation uses to produce `ζ` from closed-form or quadrature
//! gradients of `M`.

mod aft;
mod erm;
mod lrm;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use aft::{AftModel, ErrorFamily};
pub use erm::ExpRegModel;
pub use lrm::LinearExpModel;

use crate::error::{Error, Result};
use crate::survival_data::WeightedSample;

pub(crate) const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Shape of the regressor: `p` stochastic covariates and an optional
/// constant column that enters the linear predictor but not the covariate
/// law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Design {
    pub p: usize,
    pub intercept: bool,
}

impl Design {
    pub fn new(p: usize, intercept: bool) -> Self {
        Self { p, intercept }
    }

    /// Number of regression coefficients.
    pub fn coef_dim(&self) -> usize {
        self.p + usize::from(self.intercept)
    }

    pub fn linear_predictor(&self, x: &[f64], coef: &[f64]) -> f64 {
        if self.intercept {
            coef[0] + dot(x, &coef[1..])
        } else {
            dot(x, coef)
        }
    }

    /// Regressor row `(1, x)` or `x`.
    pub fn regressor(&self, x: &[f64]) -> Vec<f64> {
        let mut r = Vec::with_capacity(self.coef_dim());
        if self.intercept {
            r.push(1.0);
        }
        r.extend_from_slice(x);
        r
    }

    /// Splits coefficients into `(intercept, slopes)`.
    pub fn split<'a>(&self, coef: &'a [f64]) -> (f64, &'a [f64]) {
        if self.intercept {
            (coef[0], &coef[1..self.coef_dim()])
        } else {
            (0.0, &coef[..self.p])
        }
    }

    pub fn coef_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        if self.intercept {
            names.push("b0".to_string());
        }
        names.extend((1..=self.p).map(|j| format!("b{j}")));
        names
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

/// `M`, `ζ_θ` and `ζ_γ` at one parameter value.
#[derive(Debug, Clone, PartialEq)]
pub struct MassTerms {
    pub mass: f64,
    pub zeta_theta: Vec<f64>,
    pub zeta_gamma: Vec<f64>,
}

/// `∫ f_θ(y|x)^{1+α} dy` and `ζ̃_θ(x) = ∫ u_θ(y,x) f_θ(y|x)^{1+α} dy`.
#[derive(Debug, Clone, PartialEq)]
pub struct CondMass {
    pub mass: f64,
    pub zeta: Vec<f64>,
}

/// Selection string used by the CLI and configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelTag {
    #[serde(rename = "lrm-exp")]
    LrmExp,
    #[serde(rename = "erm")]
    Erm,
    #[serde(rename = "aft-weibull")]
    AftWeibull,
    #[serde(rename = "aft-lognormal")]
    AftLognormal,
    #[serde(rename = "aft-loglogistic")]
    AftLoglogistic,
    /// Extreme-value errors with the density taken on the log-time scale.
    #[serde(rename = "aft-ev-logtime")]
    AftEvLogTime,
    #[serde(rename = "aft-normal-logtime")]
    AftNormalLogTime,
    #[serde(rename = "aft-logistic-logtime")]
    AftLogisticLogTime,
}

impl ModelTag {
    pub const ALL: [ModelTag; 8] = [
        ModelTag::LrmExp,
        ModelTag::Erm,
        ModelTag::AftWeibull,
        ModelTag::AftLognormal,
        ModelTag::AftLoglogistic,
        ModelTag::AftEvLogTime,
        ModelTag::AftNormalLogTime,
        ModelTag::AftLogisticLogTime,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelTag::LrmExp => "lrm-exp",
            ModelTag::Erm => "erm",
            ModelTag::AftWeibull => "aft-weibull",
            ModelTag::AftLognormal => "aft-lognormal",
            ModelTag::AftLoglogistic => "aft-loglogistic",
            ModelTag::AftEvLogTime => "aft-ev-logtime",
            ModelTag::AftNormalLogTime => "aft-normal-logtime",
            ModelTag::AftLogisticLogTime => "aft-logistic-logtime",
        }
    }

    pub fn known() -> String {
        Self::ALL.map(|t| t.as_str()).join(", ")
    }

    pub fn build(&self, design: Design) -> Box<dyn RegressionModel> {
        match self {
            ModelTag::LrmExp => Box::new(LinearExpModel::new(design)),
            ModelTag::Erm => Box::new(ExpRegModel::new(design)),
            ModelTag::AftWeibull => Box::new(AftModel::new(design, ErrorFamily::ExtremeValue)),
            ModelTag::AftLognormal => Box::new(AftModel::new(design, ErrorFamily::Normal)),
            ModelTag::AftLoglogistic => Box::new(AftModel::new(design, ErrorFamily::Logistic)),
            ModelTag::AftEvLogTime => {
                Box::new(AftModel::on_log_time(design, ErrorFamily::ExtremeValue))
            }
            ModelTag::AftNormalLogTime => Box::new(AftModel::on_log_time(design, ErrorFamily::Normal)),
            ModelTag::AftLogisticLogTime => {
                Box::new(AftModel::on_log_time(design, ErrorFamily::Logistic))
            }
        }
    }
}

impl fmt::Display for ModelTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::UnknownModel {
                tag: s.to_string(),
                known: Self::known(),
            })
    }
}

/// A conditional response family plus the `N_p(γ, I_p)` covariate marginal.
pub trait RegressionModel: Send + Sync + fmt::Debug {
    fn tag(&self) -> ModelTag;

    fn design(&self) -> Design;

    fn theta_dim(&self) -> usize;

    fn gamma_dim(&self) -> usize {
        self.design().p
    }

    fn theta_names(&self) -> Vec<String>;

    /// Rejects parameter values outside the model (e.g. `σ <= 0`).
    fn check_theta(&self, theta: &[f64]) -> Result<()>;

    /// `log f_θ(y | x)` and the score `∂/∂θ log f_θ(y | x)`.
    fn cond_log_density_and_score(&self, y: f64, x: &[f64], theta: &[f64])
        -> Result<(f64, Vec<f64>)>;

    fn cond_log_density(&self, y: f64, x: &[f64], theta: &[f64]) -> Result<f64> {
        self.cond_log_density_and_score(y, x, theta).map(|(l, _)| l)
    }

    fn cond_score(&self, y: f64, x: &[f64], theta: &[f64]) -> Result<Vec<f64>> {
        self.cond_log_density_and_score(y, x, theta).map(|(_, s)| s)
    }

    fn cov_log_density(&self, x: &[f64], gamma: &[f64]) -> f64 {
        let sq: f64 = x.iter().zip(gamma).map(|(a, b)| (a - b) * (a - b)).sum();
        -0.5 * (x.len() as f64) * LN_2PI - 0.5 * sq
    }

    fn cov_score(&self, x: &[f64], gamma: &[f64]) -> Vec<f64> {
        x.iter().zip(gamma).map(|(a, b)| a - b).collect()
    }

    /// Joint power integral and `ζ` terms. At `α = 0` the `ζ` vectors are zero.
    fn mass_and_zeta(&self, theta: &[f64], gamma: &[f64], alpha: f64) -> Result<MassTerms>;

    /// Conditional power integral at a fixed covariate.
    fn cond_mass_and_zeta(&self, x: &[f64], theta: &[f64], alpha: f64) -> Result<CondMass>;

    /// Nodes `y_k` and weights for `E[h(Y) | X = x]` under the model.
    fn cond_rule(&self, x: &[f64], theta: &[f64]) -> Result<Vec<(f64, f64)>>;

    /// Draws `Y | X = x`.
    fn sample_response(&self, x: &[f64], theta: &[f64], rng: &mut dyn rand::RngCore) -> f64;

    /// Conditional mean of `Y` given `x`.
    fn cond_mean(&self, x: &[f64], theta: &[f64]) -> Result<f64>;

    /// Components of `θ` that the optimizer handles on the log scale.
    fn log_scale_components(&self) -> Vec<usize> {
        Vec::new()
    }

    /// Starting value for `θ` from the weighted sample (least squares on the
    /// natural or log time scale).
    fn initial_theta(&self, ws: &WeightedSample) -> Result<Vec<f64>>;
}

/// Weighted least squares of `target` on the regressor rows, weights `W_in`.
pub(crate) fn weighted_least_squares(
    design: &Design,
    ws: &WeightedSample,
    target: impl Fn(f64) -> f64,
) -> Option<Vec<f64>> {
    let k = design.coef_dim();
    let mut xtx = DMatrix::<f64>::zeros(k, k);
    let mut xty = DVector::<f64>::zeros(k);
    for i in 0..ws.n() {
        let w = ws.weights.w[i];
        if w == 0.0 {
            continue;
        }
        let r = DVector::from_vec(design.regressor(ws.sorted.x(i)));
        xtx += w * &r * r.transpose();
        xty += w * target(ws.sorted.z[i]) * &r;
    }
    let sol = xtx.lu().solve(&xty)?;
    sol.iter().all(|v| v.is_finite()).then(|| sol.as_slice().to_vec())
}

pub(crate) fn standard_exponential(rng: &mut dyn rand::RngCore) -> f64 {
    let u: f64 = rng.random();
    -(1.0 - u).ln()
}
