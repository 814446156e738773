use std::fmt::Write as _;

use cdpd::asymptotics::sandwich;
use cdpd::dpd::{DpdConfig, Variant};
use cdpd::estimate::{fit_mdpde_weighted, FitResult};
use cdpd::models::ModelTag;
use cdpd::survival_data::{load_csv, WeightedSample};
use serde::{Deserialize, Serialize};

use super::to_json;
use crate::cli::FitArgs;
use crate::config::FitConfig;
use crate::error::CliResult;
use crate::manifest::{now, Artifacts};

/// Everything `fit` reports; also the input format of `influence --fit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub model: ModelTag,
    pub variant: Variant,
    pub alpha: f64,
    pub p: usize,
    pub intercept: bool,
    pub n: usize,
    pub events: usize,
    pub censored_fraction: f64,
    pub parameter_names: Vec<String>,
    pub fit: FitResult,
    pub standard_errors: Option<Vec<f64>>,
}

impl FitReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "model {} ({}, alpha = {}) | n = {} | events = {} | censored {:.1}%",
            self.model,
            self.variant,
            self.alpha,
            self.n,
            self.events,
            100.0 * self.censored_fraction
        );
        let _ = writeln!(
            s,
            "converged: {} | iterations {} | gradient norm {:.2e} | objective {:.6}",
            self.fit.converged, self.fit.iterations, self.fit.grad_norm, self.fit.objective_value
        );
        let _ = writeln!(s, "{:<14} {:>14} {:>14}", "parameter", "estimate", "std. error");
        let se = self.standard_errors.clone().unwrap_or_default();
        for (j, (name, v)) in self.parameter_names.iter().zip(self.fit.params()).enumerate() {
            let e = se.get(j).map_or("-".to_string(), |e| format!("{e:.6}"));
            let _ = writeln!(s, "{name:<14} {v:>14.6} {e:>14}");
        }
        s
    }
}

pub fn run(args: &FitArgs) -> CliResult<()> {
    let started = now();
    let cfg = FitConfig::resolve(args)?;
    let input = cfg.input.clone().expect("resolved config has an input");
    let mut sample = load_csv(&input, &cfg.data.schema())?;
    if !cfg.exclude_ids.is_empty() {
        sample = sample.exclude_ids(&cfg.exclude_ids)?;
    }
    let design = cfg.data.design();
    let model = cfg.model().build(design);
    let dpd = DpdConfig::new(cfg.alpha, cfg.variant)?;
    let ws = WeightedSample::new(&sample);
    let mut fit = fit_mdpde_weighted(&*model, &ws, &dpd, &cfg.solver, None)?;
    let cov = sandwich(&*model, &ws, &fit, &dpd)?;
    fit.covariance = Some(cov.cov_rows());

    let mut names = model.theta_names();
    if cfg.variant == Variant::Joint {
        names.extend(cfg.data.covariate_cols.iter().map(|c| format!("mu_{c}")));
    }
    let report = FitReport {
        model: cfg.model(),
        variant: cfg.variant,
        alpha: cfg.alpha,
        p: design.p,
        intercept: design.intercept,
        n: sample.n(),
        events: sample.events(),
        censored_fraction: sample.censored_fraction(),
        parameter_names: names,
        standard_errors: Some(cov.std_errors.clone()),
        fit,
    };

    let json = to_json(&report);
    let text = report.to_text();
    let mut out = Artifacts::new(args.common.out.as_deref())?;
    out.write("fit.json", &json)?;
    out.write("fit.txt", &text)?;
    out.finish("fit", &cfg, &[input.as_path()], Some(cfg.solver.seed), started)?;
    print!("{}", if args.common.json { json } else { text });

    if !report.fit.converged {
        return Err(cdpd::Error::NonConvergence {
            best: report.fit.params(),
            grad_norm: report.fit.grad_norm,
        }
        .into());
    }
    Ok(())
}
