//! Plug-in sandwich covariance for Stute-weighted estimating equations.
//!
//! For a ψ-function evaluated at the fit, the Stute central limit theorem
//! gives `√n λ_n → N(0, Σ)` with `Σ = Cov[ψ(X,Z) γ₀(Z) δ + γ₁(Z)(1-δ) - γ₂(Z)]`.
//! The functionals `γ₀, γ₁, γ₂` are estimated by replacing every
//! distribution in their definitions with its empirical counterpart:
//!
//! - `γ₀(z) = exp(Σ_{censored v < z} 1/(n R(v)))`
//! - `γ₁(z) = A(z) / R(z)` with `A(v) = (1/n) Σ_{uncensored, Z_i > v} ψ_i γ₀(Z_i)`
//! - `γ₂(z) = Σ_{censored v < z} A(v) / (n R(v)²)`
//!
//! where `R(v) = #{Z >= v}/n` is the left-continuous at-risk fraction. All
//! evaluations cap `z` at the largest uncensored time.

use nalgebra::{DMatrix, DVector};

use crate::dpd::{DpdConfig, DpdPsi, EstimatingFunction};
use crate::error::{Error, Result};
use crate::estimate::{lambda_jacobian, FitResult};
use crate::models::RegressionModel;
use crate::optim::inverse;
use crate::survival_data::{SortedSample, WeightedSample};

/// Empirical `γ₀, γ₁, γ₂` and the censored subdistribution `Ĝ_Z⁰`.
#[derive(Debug, Clone)]
pub struct VarianceFunctionals {
    n: usize,
    dim: usize,
    cap: f64,
    all_z: Vec<f64>,
    cens_z: Vec<f64>,
    /// `prefix0[k] = Σ_{j<k} 1/(n R(c_j))`.
    prefix0: Vec<f64>,
    /// `prefix2[k] = Σ_{j<k} A(c_j)/(n R(c_j)²)`.
    prefix2: Vec<Vec<f64>>,
    unc_z: Vec<f64>,
    /// `suffix[k] = (1/n) Σ_{i>=k} ψ_i γ₀(u_i)` over uncensored times.
    suffix: Vec<Vec<f64>>,
}

fn at_risk(all_z: &[f64], z: f64) -> f64 {
    let below = all_z.partition_point(|&v| v < z);
    (all_z.len() - below) as f64 / all_z.len() as f64
}

impl VarianceFunctionals {
    fn capped(&self, z: f64) -> f64 {
        z.min(self.cap)
    }

    /// `1 - Ĝ_Z(z-)`, the single place the at-risk convention lives.
    pub fn at_risk(&self, z: f64) -> f64 {
        at_risk(&self.all_z, z)
    }

    pub fn gamma0(&self, z: f64) -> f64 {
        let k = self.cens_z.partition_point(|&v| v < self.capped(z));
        self.prefix0[k].exp()
    }

    fn a(&self, v: f64) -> &[f64] {
        let k = self.unc_z.partition_point(|&u| u <= v);
        &self.suffix[k]
    }

    pub fn gamma1(&self, z: f64) -> Vec<f64> {
        let z = self.capped(z);
        let r = self.at_risk(z);
        if r == 0.0 {
            return vec![0.0; self.dim];
        }
        self.a(z).iter().map(|v| v / r).collect()
    }

    pub fn gamma2(&self, z: f64) -> Vec<f64> {
        let k = self.cens_z.partition_point(|&v| v < self.capped(z));
        self.prefix2[k].clone()
    }

    /// `Ĝ_Z⁰(z) = #{Z_i <= z, δ_i = 0} / n`.
    pub fn g_z0(&self, z: f64) -> f64 {
        self.cens_z.partition_point(|&v| v <= z) as f64 / self.n as f64
    }

    /// Point masses of `G̃¹¹`: each uncensored time carries `1/n`.
    pub fn g11(&self) -> Vec<(f64, f64)> {
        self.unc_z.iter().map(|&u| (u, 1.0 / self.n as f64)).collect()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Builds the functionals from ψ values aligned with the sorted sample;
/// rows of censored records are ignored.
pub fn estimate_functionals(s: &SortedSample, psi: &[Vec<f64>]) -> Result<VarianceFunctionals> {
    let n = s.n();
    if psi.len() != n {
        return Err(Error::InvalidInput(format!(
            "need one psi row per record ({n}), got {}",
            psi.len()
        )));
    }
    let Some(first) = (0..n).find(|&i| s.delta[i]) else {
        return Err(Error::DegenerateData("no uncensored observation".into()));
    };
    let dim = psi[first].len();
    let cap = (0..n).rev().find(|&i| s.delta[i]).map(|i| s.z[i]).unwrap();
    let nf = n as f64;

    let cens_z: Vec<f64> = (0..n).filter(|&i| !s.delta[i]).map(|i| s.z[i]).collect();
    let mut prefix0 = Vec::with_capacity(cens_z.len() + 1);
    prefix0.push(0.0);
    for &c in &cens_z {
        let last = *prefix0.last().unwrap();
        prefix0.push(last + 1.0 / (nf * at_risk(&s.z, c)));
    }
    let g0 = |z: f64| -> f64 {
        let k = cens_z.partition_point(|&v| v < z.min(cap));
        prefix0[k].exp()
    };

    let unc: Vec<usize> = (0..n).filter(|&i| s.delta[i]).collect();
    let unc_z: Vec<f64> = unc.iter().map(|&i| s.z[i]).collect();
    let mut suffix = vec![vec![0.0; dim]; unc.len() + 1];
    for k in (0..unc.len()).rev() {
        let i = unc[k];
        if psi[i].len() != dim {
            return Err(Error::InvalidInput(format!(
                "psi row {i} has length {}, expected {dim}",
                psi[i].len()
            )));
        }
        let g = g0(s.z[i]);
        let next = suffix[k + 1].clone();
        suffix[k] = next
            .iter()
            .zip(&psi[i])
            .map(|(a, p)| a + p * g / nf)
            .collect();
    }

    let mut prefix2 = Vec::with_capacity(cens_z.len() + 1);
    prefix2.push(vec![0.0; dim]);
    for &c in &cens_z {
        let r = at_risk(&s.z, c);
        let k = unc_z.partition_point(|&u| u <= c);
        let last = prefix2.last().unwrap().clone();
        prefix2.push(
            last.iter()
                .zip(&suffix[k])
                .map(|(acc, a)| acc + a / (nf * r * r))
                .collect(),
        );
    }

    Ok(VarianceFunctionals {
        n,
        dim,
        cap,
        all_z: s.z.clone(),
        cens_z,
        prefix0,
        prefix2,
        unc_z,
        suffix,
    })
}

/// Per-record vectors `ψ_k γ₀(Z_k) δ_k + γ₁(Z_k)(1-δ_k) - γ₂(Z_k)`.
pub fn influence_terms(s: &SortedSample, psi: &[Vec<f64>], f: &VarianceFunctionals) -> Vec<Vec<f64>> {
    (0..s.n())
        .map(|k| {
            let z = s.z[k];
            let g2 = f.gamma2(z);
            let base = if s.delta[k] {
                let g0 = f.gamma0(z);
                psi[k].iter().map(|p| p * g0).collect::<Vec<_>>()
            } else {
                f.gamma1(z)
            };
            base.iter().zip(&g2).map(|(a, b)| a - b).collect()
        })
        .collect()
}

/// Empirical covariance (divisor `n`) of the influence terms.
pub fn sigma_psi(s: &SortedSample, psi: &[Vec<f64>], f: &VarianceFunctionals) -> DMatrix<f64> {
    let xi = influence_terms(s, psi, f);
    let n = xi.len() as f64;
    let d = f.dim();
    let mut mean = DVector::<f64>::zeros(d);
    for v in &xi {
        mean += DVector::from_column_slice(v);
    }
    mean /= n;
    let mut sig = DMatrix::<f64>::zeros(d, d);
    for v in &xi {
        let c = DVector::from_column_slice(v) - &mean;
        sig += &c * c.transpose();
    }
    sig /= n;
    // exact symmetry
    (&sig + sig.transpose()) * 0.5
}

#[derive(Debug, Clone)]
pub struct SandwichCovariance {
    pub lambda: DMatrix<f64>,
    pub sigma: DMatrix<f64>,
    pub cov: DMatrix<f64>,
    pub std_errors: Vec<f64>,
}

impl SandwichCovariance {
    pub fn cov_rows(&self) -> Vec<Vec<f64>> {
        (0..self.cov.nrows())
            .map(|i| self.cov.row(i).iter().copied().collect())
            .collect()
    }
}

/// ψ at every record of the weighted sample (zeros for censored rows).
pub fn psi_rows(psi: &dyn EstimatingFunction, ws: &WeightedSample, phi: &[f64]) -> Result<Vec<Vec<f64>>> {
    let s = &ws.sorted;
    let idx: Vec<usize> = (0..s.n()).filter(|&i| s.delta[i]).collect();
    let pts: Vec<(f64, &[f64])> = idx.iter().map(|&i| (s.z[i], s.x(i))).collect();
    let vals = psi.psi_many(phi, &pts)?;
    let mut rows = vec![vec![0.0; psi.dim()]; s.n()];
    for (k, &i) in idx.iter().enumerate() {
        rows[i] = vals[k].clone();
    }
    Ok(rows)
}

/// `Λ̂⁻¹ Σ̂ Λ̂⁻ᵀ / n` for any estimating function at `phi`.
pub fn sandwich_mest(
    psi: &dyn EstimatingFunction,
    ws: &WeightedSample,
    phi: &[f64],
) -> Result<SandwichCovariance> {
    let rows = psi_rows(psi, ws, phi)?;
    let f = estimate_functionals(&ws.sorted, &rows)?;
    let sigma = sigma_psi(&ws.sorted, &rows, &f);
    let lambda = lambda_jacobian(psi, ws, phi)?;
    let inv = inverse(&lambda, "estimating-equation Jacobian").map_err(|_| {
        Error::Singular(
            "estimating-equation Jacobian is singular at the fit; try a larger sample or a different alpha"
                .into(),
        )
    })?;
    let cov = &inv * &sigma * inv.transpose() / ws.n() as f64;
    let cov = (&cov + cov.transpose()) * 0.5;
    let std_errors = (0..cov.nrows()).map(|i| cov[(i, i)].max(0.0).sqrt()).collect();
    Ok(SandwichCovariance {
        lambda,
        sigma,
        cov,
        std_errors,
    })
}

/// Sandwich covariance of a divergence fit.
pub fn sandwich(
    model: &dyn RegressionModel,
    ws: &WeightedSample,
    fit: &FitResult,
    cfg: &DpdConfig,
) -> Result<SandwichCovariance> {
    sandwich_mest(&DpdPsi::new(model, *cfg), ws, &fit.params())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::survival_data::{sort_sample, CensoredSample};

    fn sorted(z: Vec<f64>, d: Vec<bool>) -> SortedSample {
        let n = z.len();
        sort_sample(&CensoredSample::new(z, d, vec![vec![0.0]; n]).unwrap())
    }

    #[test]
    fn gamma0_hand_fixture() {
        let s = sorted(vec![1.0, 2.0, 3.0], vec![true, false, true]);
        let psi = vec![vec![1.0]; 3];
        let f = estimate_functionals(&s, &psi).unwrap();
        assert_eq!(f.gamma0(2.0), 1.0);
        assert!((f.gamma0(2.0 + 1e-9) - 0.5f64.exp()).abs() < 1e-15);
        assert!((f.gamma0(2.5) - 0.5f64.exp()).abs() < 1e-15);
    }

    #[test]
    fn no_censoring_reduces_to_plain_covariance() {
        let s = sorted(vec![1.0, 2.0, 3.0, 4.0], vec![true; 4]);
        let psi = vec![vec![1.0, 0.0], vec![-1.0, 2.0], vec![0.5, 1.0], vec![-0.5, -3.0]];
        let f = estimate_functionals(&s, &psi).unwrap();
        assert!(f.gamma2(10.0).iter().all(|&v| v == 0.0));
        let sig = sigma_psi(&s, &psi, &f);
        let m = [0.0, 0.0];
        let mut expect = [[0.0; 2]; 2];
        for r in &psi {
            for a in 0..2 {
                for b in 0..2 {
                    expect[a][b] += (r[a] - m[a]) * (r[b] - m[b]) / 4.0;
                }
            }
        }
        for a in 0..2 {
            for b in 0..2 {
                assert!((sig[(a, b)] - expect[a][b]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn gamma0_is_nondecreasing_and_at_least_one() {
        let s = sorted(
            vec![0.3, 0.9, 1.1, 1.1, 2.0, 2.4, 3.3],
            vec![false, true, false, true, false, true, false],
        );
        let psi = vec![vec![1.0]; 7];
        let f = estimate_functionals(&s, &psi).unwrap();
        let mut prev = 1.0;
        for k in 0..200 {
            let g = f.gamma0(k as f64 * 0.02);
            assert!(g >= prev && g >= 1.0);
            prev = g;
        }
    }
}
