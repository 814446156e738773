use std::fmt::Write as _;
use std::path::Path;

use cdpd::dpd::{DpdConfig, Variant};
use cdpd::models::ModelTag;
use cdpd::survival_data::load_csv;
use cdpd::sweep::{sweep, SweepRow};
use serde::Serialize;

use super::to_json;
use crate::cli::SweepArgs;
use crate::config::SweepConfig;
use crate::error::CliResult;
use crate::manifest::{now, Artifacts};

#[derive(Debug, Serialize)]
pub struct SweepReport {
    pub model: ModelTag,
    pub variant: Variant,
    pub n_full: usize,
    pub n_cleaned: usize,
    pub parameter_names: Vec<String>,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "model {} ({}) | full n = {} | cleaned n = {}",
            self.model, self.variant, self.n_full, self.n_cleaned
        );
        let table = |s: &mut String, title: &str, pick: &dyn Fn(&SweepRow) -> Vec<f64>| {
            let _ = writeln!(s, "\n{title}");
            let _ = write!(s, "{:>6}", "alpha");
            for n in &self.parameter_names {
                let _ = write!(s, " {n:>12}");
            }
            let _ = writeln!(s);
            for r in &self.rows {
                let _ = write!(s, "{:>6}", r.alpha);
                for v in pick(r) {
                    let _ = write!(s, " {v:>12.4}");
                }
                let _ = writeln!(s);
            }
        };
        table(&mut s, "estimates, full data", &|r| r.full.params());
        table(&mut s, "estimates, cleaned data", &|r| r.cleaned.params());
        table(&mut s, "relative variation", &|r| r.relative_variation.clone());
        s
    }

    fn to_csv(&self) -> String {
        let mut s = String::from("alpha,parameter,full,cleaned,relative_variation\n");
        for r in &self.rows {
            let (f, c) = (r.full.params(), r.cleaned.params());
            for (j, name) in self.parameter_names.iter().enumerate() {
                let _ = writeln!(s, "{},{},{},{},{}", r.alpha, name, f[j], c[j], r.relative_variation[j]);
            }
        }
        s
    }
}

pub fn run(args: &SweepArgs) -> CliResult<()> {
    let started = now();
    let cfg = SweepConfig::resolve(args)?;
    let full_path = cfg.full.clone().expect("resolved config has full data");
    let schema = cfg.data.schema();
    let full = load_csv(&full_path, &schema)?;
    let cleaned = match &cfg.cleaned {
        Some(p) => load_csv(p, &schema)?,
        None => full.exclude_ids(&cfg.exclude_ids)?,
    };
    let model = cfg.model().build(cfg.data.design());
    let base = DpdConfig::new(0.0, cfg.variant)?;
    let rows = sweep(&*model, &full, &cleaned, &cfg.alphas, base, &cfg.solver)?;

    let mut names = model.theta_names();
    if cfg.variant == Variant::Joint {
        names.extend(cfg.data.covariate_cols.iter().map(|c| format!("mu_{c}")));
    }
    let report = SweepReport {
        model: cfg.model(),
        variant: cfg.variant,
        n_full: full.n(),
        n_cleaned: cleaned.n(),
        parameter_names: names,
        rows,
    };
    let json = to_json(&report);
    let text = report.to_text();
    let mut out = Artifacts::new(args.common.out.as_deref())?;
    out.write("sweep.json", &json)?;
    out.write("sweep.csv", &report.to_csv())?;
    out.write("sweep.txt", &text)?;
    let mut inputs: Vec<&Path> = vec![full_path.as_path()];
    if let Some(p) = &cfg.cleaned {
        inputs.push(p.as_path());
    }
    out.finish("sweep", &cfg, &inputs, Some(cfg.solver.seed), started)?;
    print!("{}", if args.common.json { json } else { text });
    Ok(())
}
