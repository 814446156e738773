//! Density power divergence objective and ψ-functions.
//!
//! With parameter vector `φ = (θ, γ)` (joint variant) or `φ = θ`
//! (conditional variant), the weighted objective is
//!
//! ```text
//! H(φ) = Σ W_i V(Z_i, X_i; φ),
//! V = M(φ) - (1 + 1/α) [f_θ(Z|X) f_γ(X)]^α          (α > 0)
//! V = -log f_θ(Z|X) f_γ(X)                           (α = 0)
//! ```
//!
//! and the conditional variant drops `f_γ` and replaces `M` by the
//! per-record `∫ f_θ(y|X_i)^{1+α} dy`. The ψ-function is
//! `ψ = ζ - u · [f_θ f_γ]^α`, and `∇H = (1 + α) Σ W_i ψ_i`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Design, RegressionModel};
use crate::survival_data::WeightedSample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Divergence between joint densities of `(Y, X)`.
    Joint,
    /// Divergence between conditional densities of `Y | X`.
    Conditional,
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "joint" => Ok(Variant::Joint),
            "conditional" => Ok(Variant::Conditional),
            other => Err(Error::InvalidInput(format!(
                "unknown variant `{other}` (expected joint or conditional)"
            ))),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Joint => "joint",
            Variant::Conditional => "conditional",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpdConfig {
    pub alpha: f64,
    pub variant: Variant,
}

impl DpdConfig {
    pub fn new(alpha: f64, variant: Variant) -> Result<Self> {
        let cfg = Self { alpha, variant };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn joint(alpha: f64) -> Self {
        Self {
            alpha,
            variant: Variant::Joint,
        }
    }

    pub fn conditional(alpha: f64) -> Self {
        Self {
            alpha,
            variant: Variant::Conditional,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha.is_finite() && self.alpha >= 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "alpha must be finite and >= 0, got {}",
                self.alpha
            )))
        }
    }

    /// Length of `φ` for a model under this variant.
    pub fn param_dim(&self, model: &dyn RegressionModel) -> usize {
        match self.variant {
            Variant::Joint => model.theta_dim() + model.gamma_dim(),
            Variant::Conditional => model.theta_dim(),
        }
    }
}

/// ψ split into its `θ` and `γ` blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiValue {
    pub psi1: Vec<f64>,
    pub psi2: Option<Vec<f64>>,
}

impl PsiValue {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.psi1.clone();
        if let Some(p2) = &self.psi2 {
            v.extend_from_slice(p2);
        }
        v
    }
}

/// Splits `φ` into `(θ, γ)`; `γ` is empty in the conditional variant.
pub fn split_params<'a>(
    model: &dyn RegressionModel,
    cfg: &DpdConfig,
    phi: &'a [f64],
) -> Result<(&'a [f64], &'a [f64])> {
    let q = model.theta_dim();
    let dim = cfg.param_dim(model);
    if phi.len() != dim {
        return Err(Error::InvalidInput(format!(
            "parameter vector has length {}, expected {dim}",
            phi.len()
        )));
    }
    Ok((&phi[..q], &phi[q..]))
}

fn join(theta: &[f64], gamma: Option<&[f64]>) -> Vec<f64> {
    let mut v = theta.to_vec();
    if let Some(g) = gamma {
        v.extend_from_slice(g);
    }
    v
}

/// An estimating function `ψ(y, x; φ)` with `E ψ = 0` at the truth.
pub trait EstimatingFunction: Send + Sync {
    fn dim(&self) -> usize;

    /// ψ at each `(y, x)` for one parameter value; per-parameter work such
    /// as power integrals is shared across the batch.
    fn psi_many(&self, phi: &[f64], points: &[(f64, &[f64])]) -> Result<Vec<Vec<f64>>>;

    fn psi_at(&self, phi: &[f64], y: f64, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.psi_many(phi, &[(y, x)])?.remove(0))
    }
}

impl<T: EstimatingFunction + ?Sized> EstimatingFunction for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn psi_many(&self, phi: &[f64], points: &[(f64, &[f64])]) -> Result<Vec<Vec<f64>>> {
        (**self).psi_many(phi, points)
    }
}

impl<T: EstimatingFunction + ?Sized> EstimatingFunction for Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn psi_many(&self, phi: &[f64], points: &[(f64, &[f64])]) -> Result<Vec<Vec<f64>>> {
        (**self).psi_many(phi, points)
    }
}

type WeightedPoints<'a> = (Vec<(f64, &'a [f64])>, Vec<f64>, Vec<usize>);

/// Uncensored records of a weighted sample as `(z, x)` pairs with weights.
pub(crate) fn weighted_points(ws: &WeightedSample) -> WeightedPoints<'_> {
    let mut pts = Vec::new();
    let mut w = Vec::new();
    let mut idx = Vec::new();
    for i in 0..ws.n() {
        let wi = ws.weights.w[i];
        if wi > 0.0 {
            pts.push((ws.sorted.z[i], ws.sorted.x(i)));
            w.push(wi);
            idx.push(i);
        }
    }
    (pts, w, idx)
}

/// `λ_n(φ) = Σ W_i ψ(Z_i, X_i; φ)`, summed in sorted order.
pub fn weighted_psi_sum(
    psi: &dyn EstimatingFunction,
    ws: &WeightedSample,
    phi: &[f64],
) -> Result<Vec<f64>> {
    let (pts, w, _) = weighted_points(ws);
    let vals = psi.psi_many(phi, &pts)?;
    let mut acc = vec![0.0; psi.dim()];
    for (v, wi) in vals.iter().zip(&w) {
        for (a, b) in acc.iter_mut().zip(v) {
            *a += wi * b;
        }
    }
    Ok(acc)
}

/// ψ of the divergence for a model and configuration.
#[derive(Debug, Clone, Copy)]
pub struct DpdPsi<'a> {
    pub model: &'a dyn RegressionModel,
    pub cfg: DpdConfig,
}

impl<'a> DpdPsi<'a> {
    pub fn new(model: &'a dyn RegressionModel, cfg: DpdConfig) -> Self {
        Self { model, cfg }
    }
}

/// `log f_θ(y|x) [+ log f_γ(x)]` and the stacked score.
fn log_density_and_score(
    model: &dyn RegressionModel,
    cfg: &DpdConfig,
    theta: &[f64],
    gamma: &[f64],
    y: f64,
    x: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let (mut l, mut u) = model.cond_log_density_and_score(y, x, theta)?;
    if cfg.variant == Variant::Joint {
        l += model.cov_log_density(x, gamma);
        u.extend(model.cov_score(x, gamma));
    }
    Ok((l, u))
}

/// `exp(α ℓ)` with an overflow report naming the record.
fn density_power(alpha: f64, l: f64, record: usize) -> Result<f64> {
    let v = (alpha * l).exp();
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Overflow(format!(
            "density power overflows at record {record} (log density {l}, alpha {alpha})"
        )))
    }
}

impl EstimatingFunction for DpdPsi<'_> {
    fn dim(&self) -> usize {
        self.cfg.param_dim(self.model)
    }

    fn psi_many(&self, phi: &[f64], points: &[(f64, &[f64])]) -> Result<Vec<Vec<f64>>> {
        let (theta, gamma) = split_params(self.model, &self.cfg, phi)?;
        self.model.check_theta(theta)?;
        let alpha = self.cfg.alpha;
        let joint_zeta = match self.cfg.variant {
            Variant::Joint if alpha > 0.0 => {
                let t = self.model.mass_and_zeta(theta, gamma, alpha)?;
                Some(join(&t.zeta_theta, Some(&t.zeta_gamma)))
            }
            _ => None,
        };
        let mut out = Vec::with_capacity(points.len());
        for (k, &(y, x)) in points.iter().enumerate() {
            let (l, u) = log_density_and_score(self.model, &self.cfg, theta, gamma, y, x)?;
            let pw = if alpha > 0.0 { density_power(alpha, l, k)? } else { 1.0 };
            let mut v: Vec<f64> = u.iter().map(|ui| -ui * pw).collect();
            if alpha > 0.0 {
                let zeta = match &joint_zeta {
                    Some(z) => z.clone(),
                    None => self.model.cond_mass_and_zeta(x, theta, alpha)?.zeta,
                };
                v.iter_mut().zip(&zeta).for_each(|(a, z)| *a += z);
            }
            out.push(v);
        }
        Ok(out)
    }
}

/// ψ at a single point, split into blocks.
pub fn psi(
    model: &dyn RegressionModel,
    cfg: &DpdConfig,
    theta: &[f64],
    gamma: Option<&[f64]>,
    y: f64,
    x: &[f64],
) -> Result<PsiValue> {
    let phi = match cfg.variant {
        Variant::Joint => join(
            theta,
            Some(gamma.ok_or_else(|| {
                Error::InvalidInput("joint variant needs the covariate parameter".into())
            })?),
        ),
        Variant::Conditional => theta.to_vec(),
    };
    let v = DpdPsi::new(model, *cfg).psi_at(&phi, y, x)?;
    let q = model.theta_dim();
    Ok(PsiValue {
        psi1: v[..q].to_vec(),
        psi2: (cfg.variant == Variant::Joint).then(|| v[q..].to_vec()),
    })
}

/// The weighted objective bound to a sample.
#[derive(Debug, Clone, Copy)]
pub struct Objective<'a> {
    pub model: &'a dyn RegressionModel,
    pub cfg: DpdConfig,
    pub ws: &'a WeightedSample,
}

impl<'a> Objective<'a> {
    pub fn new(model: &'a dyn RegressionModel, cfg: DpdConfig, ws: &'a WeightedSample) -> Self {
        Self { model, cfg, ws }
    }

    pub fn dim(&self) -> usize {
        self.cfg.param_dim(self.model)
    }

    pub fn value(&self, phi: &[f64]) -> Result<f64> {
        self.evaluate(phi, false).map(|(v, _)| v)
    }

    pub fn gradient(&self, phi: &[f64]) -> Result<Vec<f64>> {
        self.evaluate(phi, true).map(|(_, g)| g)
    }

    pub fn value_and_gradient(&self, phi: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.evaluate(phi, true)
    }

    fn evaluate(&self, phi: &[f64], want_grad: bool) -> Result<(f64, Vec<f64>)> {
        let (theta, gamma) = split_params(self.model, &self.cfg, phi)?;
        self.model.check_theta(theta)?;
        let alpha = self.cfg.alpha;
        let a1 = 1.0 + alpha;
        let dim = self.dim();
        let mut value = 0.0;
        let mut grad = vec![0.0; if want_grad { dim } else { 0 }];

        let joint = if self.cfg.variant == Variant::Joint && alpha > 0.0 {
            let t = self.model.mass_and_zeta(theta, gamma, alpha)?;
            Some((t.mass, join(&t.zeta_theta, Some(&t.zeta_gamma))))
        } else {
            None
        };

        for i in 0..self.ws.n() {
            let w = self.ws.weights.w[i];
            if w == 0.0 {
                continue;
            }
            let (y, x) = (self.ws.sorted.z[i], self.ws.sorted.x(i));
            let record = self.ws.sorted.order[i];
            let (l, u) = if want_grad {
                log_density_and_score(self.model, &self.cfg, theta, gamma, y, x)?
            } else {
                let mut l = self.model.cond_log_density(y, x, theta)?;
                if self.cfg.variant == Variant::Joint {
                    l += self.model.cov_log_density(x, gamma);
                }
                (l, Vec::new())
            };
            if alpha == 0.0 {
                if !l.is_finite() {
                    return Err(Error::Overflow(format!(
                        "log density is {l} at record {record}"
                    )));
                }
                value -= w * l;
                for (g, ui) in grad.iter_mut().zip(&u) {
                    *g -= w * ui;
                }
                continue;
            }
            let pw = density_power(alpha, l, record)?;
            let (mass, zeta) = match &joint {
                Some((m, z)) => (*m, z.clone()),
                None => {
                    let c = self.model.cond_mass_and_zeta(x, theta, alpha)?;
                    (c.mass, c.zeta)
                }
            };
            value += w * (mass - a1 / alpha * pw);
            for ((g, ui), z) in grad.iter_mut().zip(&u).zip(&zeta) {
                *g += w * a1 * (z - ui * pw);
            }
        }
        if !value.is_finite() {
            return Err(Error::Overflow(format!("objective is {value} at {phi:?}")));
        }
        Ok((value, grad))
    }
}

/// `H_{n,α}(θ, γ)`; `gamma` is ignored in the conditional variant.
pub fn objective(
    model: &dyn RegressionModel,
    ws: &WeightedSample,
    cfg: &DpdConfig,
    theta: &[f64],
    gamma: Option<&[f64]>,
) -> Result<f64> {
    let phi = params_for(cfg, theta, gamma)?;
    Objective::new(model, *cfg, ws).value(&phi)
}

/// Exact gradient of [`objective`] in `φ`; equals `(1 + α) Σ W_i ψ_i`.
pub fn objective_gradient(
    model: &dyn RegressionModel,
    ws: &WeightedSample,
    cfg: &DpdConfig,
    theta: &[f64],
    gamma: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let phi = params_for(cfg, theta, gamma)?;
    Objective::new(model, *cfg, ws).gradient(&phi)
}

pub(crate) fn params_for(cfg: &DpdConfig, theta: &[f64], gamma: Option<&[f64]>) -> Result<Vec<f64>> {
    match cfg.variant {
        Variant::Joint => Ok(join(
            theta,
            Some(gamma.ok_or_else(|| {
                Error::InvalidInput("joint variant needs the covariate parameter".into())
            })?),
        )),
        Variant::Conditional => Ok(theta.to_vec()),
    }
}

/// Scalar location function `ψ₀` for M-estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "k")]
pub enum Psi0 {
    Identity,
    Huber(f64),
}

impl Psi0 {
    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            Psi0::Identity => r,
            Psi0::Huber(k) => r.clamp(-k, k),
        }
    }
}

/// Covariate weight `ω(x)` for the scale-equation M-estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovariateWeight {
    One,
    /// `1 / (1 + |x|)` with the Euclidean norm over the stochastic covariates.
    InverseNorm,
}

impl CovariateWeight {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            CovariateWeight::One => 1.0,
            CovariateWeight::InverseNorm => 1.0 / (1.0 + x.iter().map(|v| v * v).sum::<f64>().sqrt()),
        }
    }
}

/// `ψ(y, x; θ) = ψ₀(y - x̃ᵀθ) x̃` for the linear mean model.
#[derive(Debug, Clone, Copy)]
pub struct ZhouPsi {
    pub design: Design,
    pub psi0: Psi0,
}

pub fn zhou_psi(design: Design, psi0: Psi0) -> ZhouPsi {
    ZhouPsi { design, psi0 }
}

impl EstimatingFunction for ZhouPsi {
    fn dim(&self) -> usize {
        self.design.coef_dim()
    }

    fn psi_many(&self, phi: &[f64], points: &[(f64, &[f64])]) -> Result<Vec<Vec<f64>>> {
        Ok(points
            .iter()
            .map(|&(y, x)| {
                let r = self.psi0.eval(y - self.design.linear_predictor(x, phi));
                self.design.regressor(x).into_iter().map(|v| r * v).collect()
            })
            .collect())
    }
}

/// Location-scale M-estimator on log time: with `s = ω(x)(log y - x̃ᵀβ)/σ`,
/// `ψ = [ψ₀(s) ω(x) x̃; s ψ₀(s) - 1]`.
#[derive(Debug, Clone, Copy)]
pub struct WangPsi {
    pub design: Design,
    pub psi0: Psi0,
    pub omega: CovariateWeight,
}

pub fn wang_psi(design: Design, psi0: Psi0, omega: CovariateWeight) -> WangPsi {
    WangPsi {
        design,
        psi0,
        omega,
    }
}

impl EstimatingFunction for WangPsi {
    fn dim(&self) -> usize {
        self.design.coef_dim() + 1
    }

    fn psi_many(&self, phi: &[f64], points: &[(f64, &[f64])]) -> Result<Vec<Vec<f64>>> {
        let q = self.design.coef_dim();
        let sigma = phi[q];
        if !(sigma > 0.0) {
            return Err(Error::Domain(format!("scale sigma = {sigma} must be positive")));
        }
        Ok(points
            .iter()
            .map(|&(y, x)| {
                let om = self.omega.eval(x);
                let s = om * (y.ln() - self.design.linear_predictor(x, &phi[..q])) / sigma;
                let p0 = self.psi0.eval(s);
                let mut v: Vec<f64> = self
                    .design
                    .regressor(x)
                    .into_iter()
                    .map(|r| p0 * om * r)
                    .collect();
                v.push(s * p0 - 1.0);
                v
            })
            .collect())
    }
}

/// Wraps a closure `ψ(φ, y, x)` as an estimating function.
pub struct FnPsi<F> {
    dim: usize,
    f: F,
}

impl<F> FnPsi<F>
where
    F: Fn(&[f64], f64, &[f64]) -> Vec<f64> + Send + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> EstimatingFunction for FnPsi<F>
where
    F: Fn(&[f64], f64, &[f64]) -> Vec<f64> + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn psi_many(&self, phi: &[f64], points: &[(f64, &[f64])]) -> Result<Vec<Vec<f64>>> {
        Ok(points.iter().map(|&(y, x)| (self.f)(phi, y, x)).collect())
    }
}

/// `c · ψ` for a positive constant, used by invariance checks.
pub struct ScaledPsi<P> {
    pub inner: P,
    pub scale: f64,
}

impl<P: EstimatingFunction> EstimatingFunction for ScaledPsi<P> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn psi_many(&self, phi: &[f64], points: &[(f64, &[f64])]) -> Result<Vec<Vec<f64>>> {
        let mut v = self.inner.psi_many(phi, points)?;
        v.iter_mut()
            .flat_map(|r| r.iter_mut())
            .for_each(|a| *a *= self.scale);
        Ok(v)
    }
}
