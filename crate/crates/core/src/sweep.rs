//! α-sweeps and the relative variation of estimates between a full and a
//! cleaned dataset, `|φ̂_full - φ̂_clean| / |φ̂_full|` per component.

use serde::{Deserialize, Serialize};

use crate::dpd::DpdConfig;
use crate::error::Result;
use crate::estimate::{fit_mdpde_weighted, FitResult, SolverConfig};
use crate::models::RegressionModel;
use crate::survival_data::{CensoredSample, WeightedSample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub full: FitResult,
    pub cleaned: FitResult,
    pub relative_variation: Vec<f64>,
}

pub fn relative_variation(full: &[f64], cleaned: &[f64]) -> Vec<f64> {
    full.iter()
        .zip(cleaned)
        .map(|(f, c)| if f == c { 0.0 } else { (f - c).abs() / f.abs() })
        .collect()
}

/// Fits both samples over the α grid. Each α > 0 fit starts from the
/// α = 0 fit of the same sample.
pub fn sweep(
    model: &dyn RegressionModel,
    full: &CensoredSample,
    cleaned: &CensoredSample,
    alphas: &[f64],
    base: DpdConfig,
    solver: &SolverConfig,
) -> Result<Vec<SweepRow>> {
    let wf = WeightedSample::new(full);
    let wc = WeightedSample::new(cleaned);
    let mle = |ws: &WeightedSample| {
        fit_mdpde_weighted(model, ws, &DpdConfig { alpha: 0.0, ..base }, solver, None)
    };
    let (mf, mc) = (mle(&wf)?, mle(&wc)?);
    alphas
        .iter()
        .map(|&alpha| {
            let cfg = DpdConfig { alpha, ..base };
            let fit = |ws: &WeightedSample, m: &FitResult| -> Result<FitResult> {
                if alpha == 0.0 {
                    Ok(m.clone())
                } else {
                    fit_mdpde_weighted(model, ws, &cfg, solver, Some(&m.params()))
                }
            };
            let full = fit(&wf, &mf)?;
            let cleaned = fit(&wc, &mc)?;
            let relative_variation = relative_variation(&full.params(), &cleaned.params());
            Ok(SweepRow {
                alpha,
                full,
                cleaned,
                relative_variation,
            })
        })
        .collect()
}
