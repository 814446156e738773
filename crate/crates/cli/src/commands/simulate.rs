use std::fmt::Write as _;

use cdpd::simulate::{run_study, MonteCarloReport};

use super::to_json;
use crate::cli::SimulateArgs;
use crate::config::SimulateConfig;
use crate::error::CliResult;
use crate::manifest::{now, Artifacts};

fn pct(v: f64) -> String {
    format!("{:.0}%", 100.0 * v)
}

/// Clean-data bias, MSE and efficiency, one block per censoring level.
fn clean_table(cfg: &SimulateConfig, reports: &[MonteCarloReport]) -> String {
    let mut s = String::from("Clean data: total |bias|, total MSE and efficiency\n");
    for r in reports.iter().filter(|r| r.design.contamination == 0.0) {
        let _ = writeln!(s, "\n{}", r.to_table());
    }
    if !cfg.contamination_levels.contains(&0.0) {
        s.push_str("(no clean runs requested)\n");
    }
    s
}

/// One metric over censoring x contamination, one row per α.
fn grid_table(
    cfg: &SimulateConfig,
    reports: &[MonteCarloReport],
    title: &str,
    metric: fn(&cdpd::simulate::AlphaSummary) -> f64,
) -> String {
    let mut s = format!("{title} (columns: censoring/contamination)\n{:>6}", "alpha");
    for &c in &cfg.censoring_levels {
        for &e in &cfg.contamination_levels {
            let _ = write!(s, " {:>12}", format!("{}/{}", pct(c), pct(e)));
        }
    }
    let _ = writeln!(s);
    for (k, &alpha) in cfg.design.alphas.iter().enumerate() {
        let _ = write!(s, "{alpha:>6}");
        for r in reports {
            let _ = write!(s, " {:>12.4}", metric(&r.rows[k]));
        }
        let _ = writeln!(s);
    }
    s
}

pub fn run(args: &SimulateArgs) -> CliResult<()> {
    let started = now();
    let cfg = SimulateConfig::resolve(args)?;
    let mut reports = Vec::new();
    for &c in &cfg.censoring_levels {
        for &e in &cfg.contamination_levels {
            eprintln!("simulate: censoring {} contamination {}", pct(c), pct(e));
            reports.push(run_study(&cfg.at(c, e))?);
        }
    }

    let tables = [
        clean_table(&cfg, &reports),
        grid_table(&cfg, &reports, "Total |bias|", |r| r.total_abs_bias),
        grid_table(&cfg, &reports, "Total MSE", |r| r.total_mse),
    ]
    .join("\n");
    let mut csv = String::new();
    for (i, r) in reports.iter().enumerate() {
        let body = r.to_csv();
        csv.push_str(if i == 0 { &body } else { body.split_once('\n').map_or("", |x| x.1) });
    }
    let json = to_json(&reports);

    let mut out = Artifacts::new(args.common.out.as_deref())?;
    out.write("tables.txt", &tables)?;
    out.write("simulate.csv", &csv)?;
    out.write("reports.json", &json)?;
    out.finish("simulate", &cfg, &[], Some(cfg.design.seed), started)?;
    print!("{}", if args.common.json { json } else { tables });
    Ok(())
}
