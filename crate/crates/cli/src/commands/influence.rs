use std::fmt::Write as _;

use cdpd::dpd::DpdConfig;
use cdpd::models::Design;
use cdpd::robustness::{boundedness_report, InfluenceCurve};
use serde::Serialize;

use super::to_json;
use crate::cli::InfluenceArgs;
use crate::config::InfluenceConfig;
use crate::error::CliResult;
use crate::manifest::{now, Artifacts};

#[derive(Debug, Serialize)]
struct InfluenceReport<'a> {
    config: &'a InfluenceConfig,
    curve: &'a InfluenceCurve,
}

fn ratio(r: f64) -> String {
    if r.is_finite() && r < 1e4 {
        format!("{r:.3}")
    } else {
        format!("{r:.3e}")
    }
}

fn verdict(bounded: bool) -> &'static str {
    if bounded {
        "bounded"
    } else {
        "unbounded"
    }
}

pub fn run(args: &InfluenceArgs) -> CliResult<()> {
    let started = now();
    let cfg = InfluenceConfig::resolve(args)?;
    let model = cfg.model.build(Design::new(cfg.p, cfg.intercept));
    let dpd = DpdConfig::new(cfg.alpha, cfg.variant)?;
    let curve = boundedness_report(&*model, &dpd, &cfg.theta, &cfg.gamma, &cfg.grid)?;

    let mut csv = Vec::new();
    curve.write_csv(&mut csv)?;
    let csv = String::from_utf8(csv).expect("csv is utf-8");
    let json = to_json(&InfluenceReport { config: &cfg, curve: &curve });
    let mut text = String::new();
    let _ = writeln!(
        text,
        "model {} ({}, alpha = {}) | sup norm {:.4e}",
        cfg.model, cfg.variant, cfg.alpha, curve.sup_norm
    );
    let _ = writeln!(
        text,
        "response:  {} (last shell ratio {})",
        verdict(curve.bounded_in_y),
        ratio(curve.y_ratio)
    );
    let _ = writeln!(
        text,
        "covariate: {} (last shell ratio {})",
        verdict(curve.bounded_in_x),
        ratio(curve.x_ratio)
    );

    let mut out = Artifacts::new(args.common.out.as_deref())?;
    out.write("influence.csv", &csv)?;
    out.write("influence.json", &json)?;
    let inputs: Vec<&std::path::Path> = args.fit.iter().map(|p| p.as_path()).collect();
    out.finish("influence", &cfg, &inputs, None, started)?;
    print!("{}", if args.common.json { json } else { text });
    Ok(())
}
