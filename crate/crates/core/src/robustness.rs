//! Influence functions of M-estimators and boundedness diagnostics.
//!
//! For an estimating function with `E_G ψ(φ₀) = 0`, contaminating `G` at
//! `(y₀, x₀)` moves the root by `IF = -Λ_G⁻¹ ψ(y₀, x₀; φ₀)` to first order,
//! where `Λ_G = ∂/∂φ E_G ψ(φ)`.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dpd::{DpdConfig, DpdPsi, EstimatingFunction, Variant};
use crate::error::{Error, Result};
use crate::estimate::JACOBIAN_STEP;
use crate::models::RegressionModel;
use crate::optim::{inverse, jacobian_fd};
use crate::quadrature::{gauss_hermite, tensor_for_each};

/// Gauss–Hermite nodes per covariate dimension for model expectations.
const COV_NODES: usize = 32;

/// Quadrature nodes `(y, x, weight)` for the joint law
/// `X ~ N(γ, I)`, `Y | X ~ f_θ`.
pub fn model_nodes(
    model: &dyn RegressionModel,
    theta: &[f64],
    gamma: &[f64],
) -> Result<Vec<(f64, Vec<f64>, f64)>> {
    let rule = gauss_hermite(COV_NODES);
    let mut xs = Vec::new();
    tensor_for_each(&rule, gamma.len(), |t, w| {
        let x: Vec<f64> = t.iter().zip(gamma).map(|(a, g)| g + a).collect();
        xs.push((x, w));
    });
    let mut out = Vec::new();
    for (x, wx) in xs {
        for (y, wy) in model.cond_rule(&x, theta)? {
            out.push((y, x.clone(), wx * wy));
        }
    }
    Ok(out)
}

/// `E_G ψ(φ)` with `G` the model law at `(θ₀, γ₀)`.
pub fn model_expectation(
    psi: &dyn EstimatingFunction,
    nodes: &[(f64, Vec<f64>, f64)],
    phi: &[f64],
) -> Result<Vec<f64>> {
    let pts: Vec<(f64, &[f64])> = nodes.iter().map(|(y, x, _)| (*y, x.as_slice())).collect();
    let vals = psi.psi_many(phi, &pts)?;
    let mut acc = vec![0.0; psi.dim()];
    for (v, (_, _, w)) in vals.iter().zip(nodes) {
        for (a, b) in acc.iter_mut().zip(v) {
            *a += w * b;
        }
    }
    Ok(acc)
}

/// `Λ_G` at `φ₀` by differentiating the model expectation.
pub fn model_lambda(
    psi: &dyn EstimatingFunction,
    nodes: &[(f64, Vec<f64>, f64)],
    phi: &[f64],
) -> Result<DMatrix<f64>> {
    jacobian_fd(|p| model_expectation(psi, nodes, p), phi, JACOBIAN_STEP)
}

/// Influence function with a precomputed `Λ`.
pub fn influence_with_lambda(
    psi: &dyn EstimatingFunction,
    lambda: &DMatrix<f64>,
    phi: &[f64],
    y0: f64,
    x0: &[f64],
) -> Result<Vec<f64>> {
    let inv = inverse(lambda, "influence Jacobian")?;
    let v = DVector::from_vec(psi.psi_at(phi, y0, x0)?);
    Ok((-(inv * v)).as_slice().to_vec())
}

/// Divergence ψ with its `φ` and the model law used for `Λ_G`.
struct Setup<'a> {
    psi: DpdPsi<'a>,
    phi: Vec<f64>,
    inv: DMatrix<f64>,
}

fn setup<'a>(
    model: &'a dyn RegressionModel,
    cfg: &DpdConfig,
    theta: &[f64],
    gamma: &[f64],
) -> Result<Setup<'a>> {
    let psi = DpdPsi::new(model, *cfg);
    let mut phi = theta.to_vec();
    if cfg.variant == Variant::Joint {
        phi.extend_from_slice(gamma);
    }
    let nodes = model_nodes(model, theta, gamma)?;
    let lambda = model_lambda(&psi, &nodes, &phi)?;
    let inv = inverse(&lambda, "influence Jacobian")?;
    Ok(Setup { psi, phi, inv })
}

impl Setup<'_> {
    fn at(&self, y0: f64, x0: &[f64]) -> Result<Vec<f64>> {
        let v = DVector::from_vec(self.psi.psi_at(&self.phi, y0, x0)?);
        Ok((-(&self.inv * v)).as_slice().to_vec())
    }
}

/// `IF((y₀, x₀))` of the divergence estimator at the model `(θ, γ)`.
/// In the conditional variant `γ` only describes the covariate law.
pub fn influence(
    model: &dyn RegressionModel,
    cfg: &DpdConfig,
    theta: &[f64],
    gamma: &[f64],
    y0: f64,
    x0: &[f64],
) -> Result<Vec<f64>> {
    setup(model, cfg, theta, gamma)?.at(y0, x0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    /// Shells are `[base^(k-1), base^k]`.
    pub base: f64,
    pub y_max: f64,
    pub x_radius_max: f64,
    pub points_per_shell: usize,
    /// Response used along the covariate sweep; defaults to the model mean at `γ`.
    pub y_fixed: Option<f64>,
    /// Growth ratio below which a direction is declared bounded.
    pub ratio_threshold: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            base: 10.0,
            y_max: 1e6,
            x_radius_max: 1e3,
            points_per_shell: 8,
            y_fixed: None,
            ratio_threshold: 1.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Response,
    Covariate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluencePoint {
    pub direction: Direction,
    pub shell: usize,
    pub y0: f64,
    pub x0: Vec<f64>,
    pub value: Vec<f64>,
    pub norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceCurve {
    pub points: Vec<InfluencePoint>,
    pub sup_norm: f64,
    pub bounded_in_y: bool,
    pub bounded_in_x: bool,
    /// Sup-norm ratio of the last two shells per direction.
    pub y_ratio: f64,
    pub x_ratio: f64,
}

impl InfluenceCurve {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let p = self.points.first().map_or(0, |pt| pt.x0.len());
        let d = self.points.first().map_or(0, |pt| pt.value.len());
        let mut header = vec!["direction".to_string(), "shell".into(), "y0".into()];
        header.extend((1..=p).map(|j| format!("x0_{j}")));
        header.extend((1..=d).map(|j| format!("if_{j}")));
        header.push("norm".into());
        writeln!(w, "{}", header.join(","))?;
        for pt in &self.points {
            let dir = match pt.direction {
                Direction::Response => "response",
                Direction::Covariate => "covariate",
            };
            let mut row = vec![dir.to_string(), pt.shell.to_string(), format!("{}", pt.y0)];
            row.extend(pt.x0.iter().map(|v| format!("{v}")));
            row.extend(pt.value.iter().map(|v| format!("{v}")));
            row.push(format!("{}", pt.norm));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn shells(base: f64, max: f64, per_shell: usize) -> Vec<(usize, f64)> {
    let k_max = (max.ln() / base.ln()).ceil().max(1.0) as usize;
    let mut out = Vec::new();
    for k in 1..=k_max {
        let lo = base.powi(k as i32 - 1);
        let hi = base.powi(k as i32).min(max);
        for j in 1..=per_shell {
            let t = j as f64 / per_shell as f64;
            out.push((k, lo * (hi / lo).powf(t)));
        }
    }
    out
}

fn last_ratio(points: &[InfluencePoint], direction: Direction) -> f64 {
    let mut sup: Vec<f64> = Vec::new();
    for pt in points.iter().filter(|p| p.direction == direction) {
        if sup.len() < pt.shell {
            sup.resize(pt.shell, 0.0);
        }
        let s = &mut sup[pt.shell - 1];
        *s = s.max(pt.norm);
    }
    match sup.len() {
        0 | 1 => 1.0,
        k => sup[k - 1] / sup[k - 2],
    }
}

/// Influence norms over expanding shells in the response and covariate
/// directions, with a boundedness verdict for each.
pub fn boundedness_report(
    model: &dyn RegressionModel,
    cfg: &DpdConfig,
    theta: &[f64],
    gamma: &[f64],
    grid: &GridSpec,
) -> Result<InfluenceCurve> {
    if !(grid.base > 1.0 && grid.y_max > 1.0 && grid.x_radius_max > 1.0 && grid.points_per_shell > 0) {
        return Err(Error::InvalidInput(format!("invalid grid {grid:?}")));
    }
    let s = setup(model, cfg, theta, gamma)?;
    let y_fixed = match grid.y_fixed {
        Some(y) => y,
        None => model.cond_mean(gamma, theta)?,
    };
    let mut jobs: Vec<(Direction, usize, f64, Vec<f64>)> = Vec::new();
    for (k, y) in shells(grid.base, grid.y_max, grid.points_per_shell) {
        jobs.push((Direction::Response, k, y, gamma.to_vec()));
    }
    for (k, r) in shells(grid.base, grid.x_radius_max, grid.points_per_shell) {
        for sign in [-1.0, 1.0] {
            let x: Vec<f64> = gamma.iter().map(|g| g + sign * r).collect();
            jobs.push((Direction::Covariate, k, y_fixed, x));
        }
    }
    let points: Vec<InfluencePoint> = jobs
        .into_par_iter()
        .map(|(direction, shell, y0, x0)| {
            // a failed evaluation (overflow) counts as an infinite norm
            let (value, norm) = match s.at(y0, &x0) {
                Ok(v) => {
                    let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                    (v, if n.is_finite() { n } else { f64::INFINITY })
                }
                Err(_) => (vec![f64::INFINITY; s.phi.len()], f64::INFINITY),
            };
            InfluencePoint {
                direction,
                shell,
                y0,
                x0,
                value,
                norm,
            }
        })
        .collect();
    let y_ratio = last_ratio(&points, Direction::Response);
    let x_ratio = last_ratio(&points, Direction::Covariate);
    let sup_norm = points.iter().map(|p| p.norm).fold(0.0, f64::max);
    let bounded = |r: f64| r.is_finite() && r < grid.ratio_threshold;
    Ok(InfluenceCurve {
        bounded_in_y: bounded(y_ratio),
        bounded_in_x: bounded(x_ratio),
        y_ratio,
        x_ratio,
        sup_norm,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Design, ModelTag};

    #[test]
    fn shells_are_geometric() {
        let s = shells(10.0, 1e3, 2);
        assert_eq!(s.len(), 6);
        assert!((s[1].1 - 10.0).abs() < 1e-12);
        assert!((s[5].1 - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn zero_at_conditional_mean_for_mle() {
        let m = ModelTag::Erm.build(Design::new(1, false));
        // at α = 0 and x₀ = γ the score vanishes when y₀ equals the mean
        let th = [0.5];
        let ga = [1.0];
        let y = m.cond_mean(&ga, &th).unwrap();
        let v = influence(&*m, &DpdConfig::joint(0.0), &th, &ga, y, &ga).unwrap();
        assert!(v.iter().all(|a| a.abs() < 1e-12));
    }
}
