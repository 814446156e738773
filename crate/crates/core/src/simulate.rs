//! Censored-regression data generation and the Monte Carlo study harness.
//!
//! Each replication draws `X ~ N(γ₀, I)`, `Y | X` from the model at `θ₀`,
//! and `C | X ~ Exp` with mean `τ(x) = μ(x)(1 - c)/c`, where `μ(x)` is the
//! clean conditional mean and `c` the target censoring proportion, so that
//! `P(Y > C | X) = c` for clean exponential responses. The alternative
//! [`CensoringScheme::Independent`] uses one `τ` for all records. A contaminated record
//! replaces its covariate by `N(x_mean, I)` and/or its response by an
//! exponential draw with mean `factor · μ(x)`, and is censored the same way.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dpd::DpdConfig;
use crate::error::{Error, Result};
use crate::estimate::{fit_mdpde_weighted, FitResult, SolverConfig};
use crate::models::{standard_exponential, Design, ModelTag, RegressionModel};
use crate::robustness::model_nodes;
use crate::survival_data::{CensoredSample, WeightedSample};

/// `τ = θx (1 - target)/target`, the exponential censoring mean giving
/// `P(Y > C) = target` when `Y ~ Exp(θx)`.
pub fn calibrate_tau(theta_x: f64, target: f64) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidInput(format!(
            "censoring target must lie in (0, 1), got {target}"
        )));
    }
    if !(theta_x > 0.0) {
        return Err(Error::Domain(format!("mean response {theta_x} must be positive")));
    }
    Ok(theta_x * (1.0 - target) / target)
}

/// How censoring times are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CensoringScheme {
    /// `C | X ~ Exp` with mean `τ(x)` from [`calibrate_tau`], so every record
    /// is censored with the target probability. Censoring then depends on `X`.
    #[default]
    PerRecord,
    /// `C ~ Exp` with one mean `τ` for all records, independent of `(Y, X)`,
    /// calibrated by [`marginal_tau`] so the overall censoring rate is the target.
    Independent,
}

/// Mean `τ` of an exponential censoring time independent of `(Y, X)` with
/// `P(C < Y) = target` under the clean model at `(θ, γ)`.
pub fn marginal_tau(
    model: &dyn RegressionModel,
    theta: &[f64],
    gamma: &[f64],
    target: f64,
) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidInput(format!(
            "censoring target must lie in (0, 1), got {target}"
        )));
    }
    let nodes = model_nodes(model, theta, gamma)?;
    // P(C < Y) = E[1 - exp(-Y/τ)], decreasing in τ
    let rate = |log_tau: f64| {
        let tau = log_tau.exp();
        nodes.iter().map(|(y, _, w)| w * -(-y / tau).exp_m1()).sum::<f64>()
    };
    let scale = nodes.iter().map(|(y, _, w)| w * y).sum::<f64>().ln();
    let (mut lo, mut hi) = (scale - 1.0, scale + 1.0);
    for _ in 0..200 {
        if rate(lo) > target {
            break;
        }
        lo -= 2.0;
    }
    for _ in 0..200 {
        if rate(hi) < target {
            break;
        }
        hi += 2.0;
    }
    if !(rate(lo) > target && rate(hi) < target) {
        return Err(Error::Domain(format!(
            "cannot bracket a censoring scale for target {target}"
        )));
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if rate(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

/// Which parts of a contaminated record are replaced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    /// Covariate from the outlying law and response from the outlying law.
    Both,
    /// Clean covariate, outlying response.
    Response,
    /// Outlying covariate, response from the clean law given that covariate.
    Covariate,
    /// Each contaminated record picks response or covariate with probability 1/2.
    Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimDesign {
    pub n: usize,
    pub replications: usize,
    pub model: ModelTag,
    pub intercept: bool,
    pub theta0: Vec<f64>,
    pub gamma0: Vec<f64>,
    /// Target censoring proportion; 0 disables censoring.
    pub censoring: f64,
    pub censoring_scheme: CensoringScheme,
    pub contamination: f64,
    pub channel: Channel,
    /// Outlying responses are exponential with mean `factor · μ(x)`.
    pub response_factor: f64,
    /// Mean of each outlying covariate coordinate (unit variance).
    pub covariate_mean: f64,
    pub alphas: Vec<f64>,
    pub seed: u64,
    pub solver: SolverConfig,
}

impl Default for SimDesign {
    fn default() -> Self {
        Self {
            n: 100,
            replications: 1000,
            model: ModelTag::LrmExp,
            intercept: false,
            theta0: vec![1.0],
            gamma0: vec![5.0],
            censoring: 0.1,
            censoring_scheme: CensoringScheme::PerRecord,
            contamination: 0.0,
            channel: Channel::Both,
            response_factor: 5.0,
            covariate_mean: 10.0,
            alphas: vec![0.0, 0.01, 0.1, 0.3, 0.5, 0.7, 1.0],
            seed: 0,
            solver: SolverConfig {
                restarts: 1,
                ..SolverConfig::default()
            },
        }
    }
}

impl SimDesign {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.n < 10 {
            return bad(format!("n must be at least 10, got {}", self.n));
        }
        if self.replications == 0 {
            return bad("replications must be positive".into());
        }
        if !(0.0..1.0).contains(&self.censoring) {
            return bad(format!("censoring must lie in [0, 1), got {}", self.censoring));
        }
        if !(0.0..=1.0).contains(&self.contamination) {
            return bad(format!("contamination must lie in [0, 1], got {}", self.contamination));
        }
        if self.gamma0.is_empty() {
            return bad("gamma0 must hold at least one coordinate".into());
        }
        let model = self.build_model();
        if self.theta0.len() != model.theta_dim() {
            return bad(format!(
                "theta0 has {} entries, model {} expects {}",
                self.theta0.len(),
                self.model,
                model.theta_dim()
            ));
        }
        model.check_theta(&self.theta0)?;
        if self.alphas.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return bad(format!("alphas must be finite and >= 0, got {:?}", self.alphas));
        }
        self.solver.validate()
    }

    pub fn build_model(&self) -> Box<dyn RegressionModel> {
        self.model
            .build(Design::new(self.gamma0.len(), self.intercept))
    }

    /// True `(θ₀, γ₀)` stacked.
    pub fn truth(&self) -> Vec<f64> {
        let mut v = self.theta0.clone();
        v.extend_from_slice(&self.gamma0);
        v
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const MAX_RESAMPLES: usize = 100;

/// One replication's sample; identical for identical `(design, rep)`.
pub fn generate(design: &SimDesign, rep: u64) -> Result<CensoredSample> {
    design.validate()?;
    let model = design.build_model();
    generate_with(design, &*model, rep).map(|(s, _)| s)
}

/// Sample plus the flag of contaminated records.
pub fn generate_with(
    design: &SimDesign,
    model: &dyn RegressionModel,
    rep: u64,
) -> Result<(CensoredSample, Vec<bool>)> {
    let mut rng = rng_for(design.seed, rep);
    let p = design.gamma0.len();
    let th = &design.theta0;
    let mut z = Vec::with_capacity(design.n);
    let mut delta = Vec::with_capacity(design.n);
    let mut xs = Vec::with_capacity(design.n * p);
    let mut flags = Vec::with_capacity(design.n);
    let shared_tau = match design.censoring_scheme {
        CensoringScheme::Independent if design.censoring > 0.0 => {
            Some(marginal_tau(model, th, &design.gamma0, design.censoring)?)
        }
        _ => None,
    };
    for _ in 0..design.n {
        let contaminated = design.contamination > 0.0 && rng.random::<f64>() < design.contamination;
        let (bad_x, bad_y) = match (contaminated, design.channel) {
            (false, _) => (false, false),
            (true, Channel::Both) => (true, true),
            (true, Channel::Response) => (false, true),
            (true, Channel::Covariate) => (true, false),
            (true, Channel::Split) => {
                let r = rng.random::<bool>();
                (!r, r)
            }
        };
        let centre: Vec<f64> = if bad_x {
            vec![design.covariate_mean; p]
        } else {
            design.gamma0.clone()
        };
        // draw a covariate with a positive clean mean response
        let mut attempts = 0;
        let (x, mu) = loop {
            let x: Vec<f64> = centre
                .iter()
                .map(|c| {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    c + e
                })
                .collect();
            match model.cond_mean(&x, th) {
                Ok(mu) if mu > 0.0 && mu.is_finite() => break (x, mu),
                _ => {
                    attempts += 1;
                    if attempts >= MAX_RESAMPLES {
                        return Err(Error::Domain(format!(
                            "could not draw a covariate with positive mean response after {MAX_RESAMPLES} attempts"
                        )));
                    }
                }
            }
        };
        let y = if bad_y {
            design.response_factor * mu * standard_exponential(&mut rng)
        } else {
            model.sample_response(&x, th, &mut rng)
        };
        let c = if let Some(tau) = shared_tau {
            tau * standard_exponential(&mut rng)
        } else if design.censoring > 0.0 {
            calibrate_tau(mu, design.censoring)? * standard_exponential(&mut rng)
        } else {
            f64::INFINITY
        };
        let y = y.max(f64::MIN_POSITIVE);
        z.push(y.min(c));
        delta.push(y <= c);
        xs.extend_from_slice(&x);
        flags.push(contaminated);
    }
    Ok((CensoredSample::from_flat(z, delta, xs, p)?, flags))
}

/// Aggregates for one tuning parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSummary {
    pub alpha: f64,
    pub fits: usize,
    pub failures: usize,
    pub bias: Vec<f64>,
    pub mse: Vec<f64>,
    pub total_abs_bias: f64,
    pub total_mse: f64,
    /// `100 · MSE(α = 0) / MSE(α)` when the grid contains 0.
    pub efficiency: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub design: SimDesign,
    pub rows: Vec<AlphaSummary>,
    pub replications: usize,
    pub failed_replications: usize,
    pub mean_censored_fraction: f64,
    pub mean_contaminated_fraction: f64,
}

struct RepOutcome {
    fits: Vec<Option<Vec<f64>>>,
    censored: f64,
    contaminated: f64,
}

fn run_replication(design: &SimDesign, model: &dyn RegressionModel, rep: u64) -> RepOutcome {
    let Ok((sample, flags)) = generate_with(design, model, rep) else {
        return RepOutcome {
            fits: vec![None; design.alphas.len()],
            censored: f64::NAN,
            contaminated: f64::NAN,
        };
    };
    let ws = WeightedSample::new(&sample);
    let mut solver = design.solver;
    solver.seed = design.seed ^ rep.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let mle: Option<FitResult> =
        fit_mdpde_weighted(model, &ws, &DpdConfig::joint(0.0), &solver, None).ok();
    let fits = design
        .alphas
        .iter()
        .map(|&a| {
            if a == 0.0 {
                return mle.as_ref().map(|f| f.params());
            }
            let init = mle.as_ref().map(|f| f.params());
            fit_mdpde_weighted(model, &ws, &DpdConfig::joint(a), &solver, init.as_deref())
                .ok()
                .map(|f| f.params())
        })
        .collect();
    RepOutcome {
        fits,
        censored: sample.censored_fraction(),
        contaminated: flags.iter().filter(|&&f| f).count() as f64 / flags.len() as f64,
    }
}

/// Fits every α on every replication and summarizes bias and MSE against
/// the true parameters. Fails when more than 2% of replications lose a fit.
pub fn run_study(design: &SimDesign) -> Result<MonteCarloReport> {
    design.validate()?;
    let model = design.build_model();
    let model_ref: &dyn RegressionModel = &*model;
    let outcomes: Vec<RepOutcome> = (0..design.replications as u64)
        .into_par_iter()
        .map(|rep| run_replication(design, model_ref, rep))
        .collect();
    summarize(design, &outcomes)
}

fn summarize(design: &SimDesign, outcomes: &[RepOutcome]) -> Result<MonteCarloReport> {
    let truth = design.truth();
    let failed = outcomes
        .iter()
        .filter(|o| o.fits.iter().any(|f| f.is_none()))
        .count();
    if failed as f64 > 0.02 * outcomes.len() as f64 {
        return Err(Error::StudyFailure {
            failed,
            total: outcomes.len(),
        });
    }
    let mut rows: Vec<AlphaSummary> = design
        .alphas
        .iter()
        .enumerate()
        .map(|(k, &alpha)| {
            let ests: Vec<&Vec<f64>> = outcomes.iter().filter_map(|o| o.fits[k].as_ref()).collect();
            let m = ests.len() as f64;
            let d = truth.len();
            let mut bias = vec![0.0; d];
            let mut mse = vec![0.0; d];
            for e in &ests {
                for j in 0..d {
                    let err = e[j] - truth[j];
                    bias[j] += err / m;
                    mse[j] += err * err / m;
                }
            }
            AlphaSummary {
                alpha,
                fits: ests.len(),
                failures: outcomes.len() - ests.len(),
                total_abs_bias: bias.iter().map(|b| b.abs()).sum(),
                total_mse: mse.iter().sum(),
                bias,
                mse,
                efficiency: None,
            }
        })
        .collect();
    if let Some(base) = rows.iter().find(|r| r.alpha == 0.0).map(|r| r.total_mse) {
        for r in &mut rows {
            r.efficiency = Some(100.0 * base / r.total_mse);
        }
    }
    let ok: Vec<&RepOutcome> = outcomes.iter().filter(|o| o.censored.is_finite()).collect();
    let mean = |f: &dyn Fn(&RepOutcome) -> f64| ok.iter().map(|o| f(o)).sum::<f64>() / ok.len().max(1) as f64;
    Ok(MonteCarloReport {
        design: design.clone(),
        replications: outcomes.len(),
        failed_replications: failed,
        mean_censored_fraction: mean(&|o| o.censored),
        mean_contaminated_fraction: mean(&|o| o.contaminated),
        rows,
    })
}

impl MonteCarloReport {
    /// Aligned text table: one row per α.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "model {} | n = {} | reps = {} | censoring {:.0}% (realized {:.1}%) | contamination {:.0}%",
            self.design.model,
            self.design.n,
            self.replications,
            100.0 * self.design.censoring,
            100.0 * self.mean_censored_fraction,
            100.0 * self.design.contamination
        );
        let _ = writeln!(s, "{:>8} {:>16} {:>12} {:>12} {:>8}", "alpha", "total |bias|", "total MSE", "efficiency", "fails");
        for r in &self.rows {
            let eff = r.efficiency.map_or("-".to_string(), |e| format!("{e:.0}%"));
            let _ = writeln!(
                s,
                "{:>8} {:>16.4} {:>12.4} {:>12} {:>8}",
                r.alpha, r.total_abs_bias, r.total_mse, eff, r.failures
            );
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("alpha,censoring,contamination,total_abs_bias,total_mse,efficiency,fits,failures\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                r.alpha,
                self.design.censoring,
                self.design.contamination,
                r.total_abs_bias,
                r.total_mse,
                r.efficiency.map_or(String::new(), |e| e.to_string()),
                r.fits,
                r.failures
            );
        }
        s
    }
}
