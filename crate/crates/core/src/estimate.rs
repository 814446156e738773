//! Minimum divergence fits, general M-estimation and the one-step estimator.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dpd::{weighted_psi_sum, DpdConfig, EstimatingFunction, Objective, Variant};
use crate::error::{Error, Result};
use crate::models::RegressionModel;
use crate::optim::{bfgs, jacobian_fd, solve, BfgsOptions, Eval};
use crate::survival_data::{CensoredSample, WeightedSample};

/// Relative step for finite-difference Jacobians of estimating equations.
pub const JACOBIAN_STEP: f64 = 1e-4;
const NEWTON_POLISH_STEPS: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub theta_hat: Vec<f64>,
    pub gamma_hat: Option<Vec<f64>>,
    pub alpha: Option<f64>,
    pub objective_value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub starts_used: usize,
    pub covariance: Option<Vec<Vec<f64>>>,
    /// Distinct roots found across starts (M-estimation only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub roots: Vec<Vec<f64>>,
}

impl FitResult {
    /// `(θ̂, γ̂)` stacked.
    pub fn params(&self) -> Vec<f64> {
        let mut v = self.theta_hat.clone();
        if let Some(g) = &self.gamma_hat {
            v.extend_from_slice(g);
        }
        v
    }

    /// Moves the trailing components of `theta_hat` into `gamma_hat`.
    pub fn split_gamma(mut self, q: usize) -> Self {
        if self.gamma_hat.is_none() && q < self.theta_hat.len() {
            self.gamma_hat = Some(self.theta_hat.split_off(q));
        }
        self
    }

    /// Standard errors from the covariance diagonal, if present.
    pub fn standard_errors(&self) -> Option<Vec<f64>> {
        self.covariance
            .as_ref()
            .map(|c| (0..c.len()).map(|i| c[i][i].max(0.0).sqrt()).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    /// Total number of starts (the initial value plus perturbed copies).
    pub restarts: usize,
    /// Scale of the restart perturbation relative to `1 + |φ_j|`.
    pub dispersion: f64,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 500,
            restarts: 5,
            dispersion: 0.1,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.restarts == 0 || !(self.dispersion >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "solver needs tol > 0, restarts >= 1 and dispersion >= 0, got {self:?}"
            )));
        }
        Ok(())
    }

    fn starts(&self, init: &[f64]) -> Vec<Vec<f64>> {
        let mut out = vec![init.to_vec()];
        for k in 1..self.restarts {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            rng.set_stream(k as u64);
            out.push(
                init.iter()
                    .map(|&v| {
                        let e: f64 = StandardNormal.sample(&mut rng);
                        v + self.dispersion * (1.0 + v.abs()) * e
                    })
                    .collect(),
            );
        }
        out
    }
}

/// `Σ W_i X_i / Σ W_i`, the α = 0 covariate mean under the normal marginal.
pub fn weighted_covariate_mean(ws: &WeightedSample) -> Vec<f64> {
    let p = ws.sorted.p();
    let mut m = vec![0.0; p];
    for i in 0..ws.n() {
        let w = ws.weights.w[i];
        for (a, b) in m.iter_mut().zip(ws.sorted.x(i)) {
            *a += w * b;
        }
    }
    m.iter_mut().for_each(|a| *a /= ws.weights.total);
    m
}

fn check_sample(ws: &WeightedSample) -> Result<()> {
    if !ws.sorted.delta.iter().any(|&d| d) || !(ws.weights.total > 0.0) {
        return Err(Error::DegenerateData(
            "every observation is censored; the weighted sample carries no mass".into(),
        ));
    }
    Ok(())
}

/// Least-squares style starting value for `φ`.
pub fn default_init(
    model: &dyn RegressionModel,
    ws: &WeightedSample,
    variant: Variant,
) -> Result<Vec<f64>> {
    let mut phi = model.initial_theta(ws)?;
    if variant == Variant::Joint {
        phi.extend(weighted_covariate_mean(ws));
    }
    Ok(phi)
}

/// Minimum divergence fit from a raw sample (Kaplan–Meier/Stute weights).
pub fn fit_mdpde(
    model: &dyn RegressionModel,
    sample: &CensoredSample,
    cfg: &DpdConfig,
    solver: &SolverConfig,
    init: Option<&[f64]>,
) -> Result<FitResult> {
    fit_mdpde_weighted(model, &WeightedSample::new(sample), cfg, solver, init)
}

/// Minimum divergence fit on a weighted sample. Without `init`, α > 0 fits
/// start from the α = 0 fit, which itself starts from least squares.
pub fn fit_mdpde_weighted(
    model: &dyn RegressionModel,
    ws: &WeightedSample,
    cfg: &DpdConfig,
    solver: &SolverConfig,
    init: Option<&[f64]>,
) -> Result<FitResult> {
    cfg.validate()?;
    solver.validate()?;
    check_sample(ws)?;
    if ws.sorted.p() != model.design().p {
        return Err(Error::InvalidInput(format!(
            "sample has {} covariates but the model expects {}",
            ws.sorted.p(),
            model.design().p
        )));
    }
    let start = match init {
        Some(v) => {
            if v.len() != cfg.param_dim(model) {
                return Err(Error::InvalidInput(format!(
                    "initial value has length {}, expected {}",
                    v.len(),
                    cfg.param_dim(model)
                )));
            }
            v.to_vec()
        }
        None => {
            let ls = default_init(model, ws, cfg.variant)?;
            if cfg.alpha > 0.0 {
                let mle_cfg = DpdConfig {
                    alpha: 0.0,
                    ..*cfg
                };
                match minimize(model, ws, &mle_cfg, solver, &ls) {
                    Ok(f) => f.params(),
                    Err(_) => ls,
                }
            } else {
                ls
            }
        }
    };
    minimize(model, ws, cfg, solver, &start)
}

struct Transform {
    log_idx: Vec<usize>,
}

impl Transform {
    fn to_inner(&self, phi: &[f64]) -> Result<Vec<f64>> {
        let mut xi = phi.to_vec();
        for &j in &self.log_idx {
            if !(phi[j] > 0.0) {
                return Err(Error::Domain(format!(
                    "component {j} must be positive, got {}",
                    phi[j]
                )));
            }
            xi[j] = phi[j].ln();
        }
        Ok(xi)
    }

    fn to_natural(&self, xi: &[f64]) -> Vec<f64> {
        let mut phi = xi.to_vec();
        for &j in &self.log_idx {
            phi[j] = xi[j].exp();
        }
        phi
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

struct RunResult {
    phi: Vec<f64>,
    f: f64,
    grad_norm: f64,
    iterations: usize,
    converged: bool,
}

fn minimize(
    model: &dyn RegressionModel,
    ws: &WeightedSample,
    cfg: &DpdConfig,
    solver: &SolverConfig,
    init: &[f64],
) -> Result<FitResult> {
    let obj = Objective::new(model, *cfg, ws);
    let tr = Transform {
        log_idx: model.log_scale_components(),
    };
    let opts = BfgsOptions {
        tol: solver.tol,
        max_iter: solver.max_iter,
    };
    let eval = |xi: &[f64]| -> Result<Eval> {
        let phi = tr.to_natural(xi);
        let (f, g) = obj.value_and_gradient(&phi)?;
        let conv_norm = norm(&g);
        let mut gi = g;
        for &j in &tr.log_idx {
            gi[j] *= phi[j];
        }
        Ok(Eval {
            f,
            grad: gi,
            conv_norm,
        })
    };

    let starts = solver.starts(init);
    let mut runs: Vec<RunResult> = Vec::new();
    let mut last_err = None;
    for s in &starts {
        let run = tr.to_inner(s).and_then(|xi| bfgs(eval, &xi, opts));
        match run {
            Ok(out) => {
                let mut r = RunResult {
                    phi: tr.to_natural(&out.x),
                    f: out.eval.f,
                    grad_norm: out.eval.conv_norm,
                    iterations: out.iterations,
                    converged: out.converged,
                };
                polish(&obj, &mut r, solver.tol);
                runs.push(r);
            }
            Err(e) => last_err = Some(e),
        }
    }
    let best = runs
        .iter()
        .filter(|r| r.converged)
        .min_by(|a, b| a.f.total_cmp(&b.f));
    let Some(best) = best else {
        if let Some(r) = runs.iter().min_by(|a, b| a.grad_norm.total_cmp(&b.grad_norm)) {
            return Err(Error::NonConvergence {
                best: r.phi.clone(),
                grad_norm: r.grad_norm,
            });
        }
        return Err(last_err.unwrap_or_else(|| Error::NonConvergence {
            best: init.to_vec(),
            grad_norm: f64::NAN,
        }));
    };
    let q = model.theta_dim();
    Ok(FitResult {
        theta_hat: best.phi[..q].to_vec(),
        gamma_hat: (cfg.variant == Variant::Joint).then(|| best.phi[q..].to_vec()),
        alpha: Some(cfg.alpha),
        objective_value: best.f,
        grad_norm: best.grad_norm,
        iterations: best.iterations,
        converged: true,
        starts_used: starts.len(),
        covariance: None,
        roots: Vec::new(),
    })
}

/// Newton steps on the gradient using a finite-difference Hessian; only
/// accepted while the gradient norm shrinks and the objective does not rise
/// beyond rounding.
fn polish(obj: &Objective<'_>, r: &mut RunResult, tol: f64) {
    if r.grad_norm <= tol * 1e-2 {
        return;
    }
    for _ in 0..NEWTON_POLISH_STEPS {
        let Ok(g) = obj.gradient(&r.phi) else { return };
        let Ok(hess) = jacobian_fd(|p| obj.gradient(p), &r.phi, JACOBIAN_STEP) else {
            return;
        };
        let Ok(step) = solve(&hess, &DVector::from_vec(g), "Hessian") else {
            return;
        };
        let trial: Vec<f64> = r.phi.iter().zip(step.iter()).map(|(a, b)| a - b).collect();
        let Ok((f, g)) = obj.value_and_gradient(&trial) else { return };
        let gn = norm(&g);
        let slack = 1e-10 * (1.0 + r.f.abs());
        if !(gn < r.grad_norm) || f > r.f + slack {
            return;
        }
        r.phi = trial;
        r.f = f;
        r.grad_norm = gn;
        r.iterations += 1;
        if gn <= tol {
            r.converged = true;
        }
        if gn <= tol * 1e-2 {
            return;
        }
    }
}

/// Finite-difference Jacobian of `λ_n(φ) = Σ W_i ψ_i(φ)`.
pub fn lambda_jacobian(
    psi: &dyn EstimatingFunction,
    ws: &WeightedSample,
    phi: &[f64],
) -> Result<nalgebra::DMatrix<f64>> {
    jacobian_fd(|p| weighted_psi_sum(psi, ws, p), phi, JACOBIAN_STEP)
}

/// Root of `Σ W_i ψ_i(φ) = 0` by damped Newton from `init` and perturbed
/// copies. Among distinct roots the one closest to `init` is returned.
pub fn solve_mest(
    psi: &dyn EstimatingFunction,
    ws: &WeightedSample,
    solver: &SolverConfig,
    init: &[f64],
) -> Result<FitResult> {
    solver.validate()?;
    check_sample(ws)?;
    if init.len() != psi.dim() {
        return Err(Error::InvalidInput(format!(
            "initial value has length {}, expected {}",
            init.len(),
            psi.dim()
        )));
    }
    let starts = solver.starts(init);
    let mut roots: Vec<(Vec<f64>, f64, usize)> = Vec::new();
    let mut singular_only = true;
    let mut last_err = None;
    for s in &starts {
        match newton_root(psi, ws, s, solver) {
            Ok((phi, res, it)) => {
                let dup = roots.iter().any(|(r, _, _)| {
                    r.iter()
                        .zip(&phi)
                        .all(|(a, b)| (a - b).abs() <= 1e-6 * (1.0 + a.abs()))
                });
                if !dup {
                    roots.push((phi, res, it));
                }
            }
            Err(e) => {
                if !matches!(e, Error::Singular(_)) {
                    singular_only = false;
                }
                last_err = Some(e);
            }
        }
    }
    let dist = |r: &[f64]| {
        r.iter()
            .zip(init)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
    };
    let Some(best) = roots
        .iter()
        .min_by(|a, b| dist(&a.0).total_cmp(&dist(&b.0)))
        .cloned()
    else {
        return Err(match last_err {
            Some(e @ Error::Singular(_)) if singular_only => e,
            Some(Error::Divergence(m)) => Error::Divergence(m),
            Some(e) => Error::Divergence(format!("no start reached a root: {e}")),
            None => Error::Divergence("no start reached a root".into()),
        });
    };
    Ok(FitResult {
        theta_hat: best.0.clone(),
        gamma_hat: None,
        alpha: None,
        objective_value: best.1,
        grad_norm: best.1,
        iterations: best.2,
        converged: true,
        starts_used: starts.len(),
        covariance: None,
        roots: roots.into_iter().map(|r| r.0).collect(),
    })
}

fn newton_root(
    psi: &dyn EstimatingFunction,
    ws: &WeightedSample,
    start: &[f64],
    solver: &SolverConfig,
) -> Result<(Vec<f64>, f64, usize)> {
    let mut phi = start.to_vec();
    let mut lam = weighted_psi_sum(psi, ws, &phi)?;
    let mut res = norm(&lam);
    for it in 0..solver.max_iter {
        if res <= solver.tol {
            return Ok((phi, res, it));
        }
        let jac = lambda_jacobian(psi, ws, &phi)?;
        let step = solve(&jac, &DVector::from_vec(lam.clone()), "estimating-equation Jacobian")?;
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-10 {
            let trial: Vec<f64> = phi.iter().zip(step.iter()).map(|(a, b)| a - t * b).collect();
            if let Ok(l) = weighted_psi_sum(psi, ws, &trial) {
                let r = norm(&l);
                if r.is_finite() && r <= (1.0 - 1e-4 * t) * res {
                    phi = trial;
                    lam = l;
                    res = r;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(Error::Divergence(format!(
                "Newton step cannot reduce |lambda_n| = {res:.3e} at {phi:?}"
            )));
        }
        if phi.iter().any(|v| !v.is_finite() || v.abs() > 1e12) {
            return Err(Error::Divergence(format!("iterate escaped to {phi:?}")));
        }
    }
    if res <= solver.tol {
        Ok((phi, res, solver.max_iter))
    } else {
        Err(Error::Divergence(format!(
            "no root within {} iterations (|lambda_n| = {res:.3e})",
            solver.max_iter
        )))
    }
}

/// One Newton step `start - Λ(start)^{-1} λ_n(start)`.
pub fn one_step(
    psi: &dyn EstimatingFunction,
    ws: &WeightedSample,
    start: &[f64],
) -> Result<FitResult> {
    let lam = weighted_psi_sum(psi, ws, start)?;
    let jac = lambda_jacobian(psi, ws, start)?;
    let step = solve(&jac, &DVector::from_vec(lam), "estimating-equation Jacobian")?;
    let phi: Vec<f64> = start.iter().zip(step.iter()).map(|(a, b)| a - b).collect();
    let res = weighted_psi_sum(psi, ws, &phi).map(|l| norm(&l)).unwrap_or(f64::INFINITY);
    Ok(FitResult {
        theta_hat: phi,
        gamma_hat: None,
        alpha: None,
        objective_value: res,
        grad_norm: res,
        iterations: 1,
        converged: true,
        starts_used: 1,
        covariance: None,
        roots: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dpd::FnPsi;
    use crate::models::{Design, ModelTag};

    fn toy_sample() -> WeightedSample {
        let s = CensoredSample::new(
            vec![0.5, 1.0, 1.5],
            vec![true; 3],
            vec![vec![1.0], vec![1.0], vec![1.0]],
        )
        .unwrap();
        WeightedSample::new(&s)
    }

    #[test]
    fn one_step_toy_newton() {
        let ws = toy_sample();
        let psi = FnPsi::new(1, |th: &[f64], y, _x: &[f64]| vec![th[0] * th[0] - y]);
        let r = one_step(&psi, &ws, &[2.0]).unwrap();
        assert!((r.theta_hat[0] - 1.25).abs() < 1e-9);
    }

    #[test]
    fn flipped_sign_diverges() {
        let ws = toy_sample();
        let psi = FnPsi::new(1, |th: &[f64], y, _x: &[f64]| vec![th[0] * th[0] + y]);
        let err = solve_mest(&psi, &ws, &SolverConfig::default(), &[2.0]).unwrap_err();
        assert!(matches!(err, Error::Divergence(_)), "{err}");
    }

    #[test]
    fn exponential_mean_mle_is_sample_mean() {
        let z = vec![0.4, 2.2, 1.1, 0.7, 3.0];
        let s = CensoredSample::new(z.clone(), vec![true; 5], vec![vec![1.0]; 5]).unwrap();
        let m = ModelTag::LrmExp.build(Design::new(1, false));
        let fit = fit_mdpde(
            &*m,
            &s,
            &DpdConfig::joint(0.0),
            &SolverConfig::default(),
            None,
        )
        .unwrap();
        let mean = z.iter().sum::<f64>() / 5.0;
        assert!((fit.theta_hat[0] - mean).abs() < 1e-8);
        assert!((fit.gamma_hat.unwrap()[0] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn restarts_are_reproducible() {
        let s = SolverConfig {
            seed: 11,
            ..Default::default()
        };
        assert_eq!(s.starts(&[1.0, 2.0]), s.starts(&[1.0, 2.0]));
        assert_ne!(s.starts(&[1.0, 2.0])[1], s.starts(&[1.0, 2.0])[2]);
    }
}
