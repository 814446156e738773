//! Censored samples, concomitant ordering and Kaplan–Meier/Stute weights.
//!
//! Every downstream estimator integrates against the Stute estimator of the
//! joint law of `(X, Y)`, which places mass `W_in` at the `i`-th order
//! statistic `Z_(i,n)` together with its concomitants `δ_[i,n]` and
//! `X_[i,n]`:
//!
//! ```text
//! W_in = δ_[i,n] / (n - i + 1) * Π_{j<i} ((n - j) / (n - j + 1))^δ_[j,n]
//! ```
//!
//! Ties in the observed times are broken with uncensored records first, then
//! by original index, so the product-limit jumps agree with the usual
//! Kaplan–Meier convention.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `n` records of observed time `Z = min(Y, C)`, event indicator `δ = I(Y <= C)`
/// and a covariate row `X ∈ R^p`.
#[derive(Debug, Clone, PartialEq)]
pub struct CensoredSample {
    z: Vec<f64>,
    delta: Vec<bool>,
    /// Row-major `n × p`.
    x: Vec<f64>,
    p: usize,
    ids: Option<Vec<String>>,
}

impl CensoredSample {
    /// Builds a sample from per-record covariate rows.
    pub fn new(z: Vec<f64>, delta: Vec<bool>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::InvalidInput(
                "covariate rows have differing lengths".into(),
            ));
        }
        let x = rows.into_iter().flatten().collect();
        Self::from_flat(z, delta, x, p)
    }

    /// Builds a sample from a row-major covariate buffer of width `p`.
    pub fn from_flat(z: Vec<f64>, delta: Vec<bool>, x: Vec<f64>, p: usize) -> Result<Self> {
        let n = z.len();
        if n == 0 {
            return Err(Error::InvalidInput("sample is empty".into()));
        }
        if p == 0 {
            return Err(Error::InvalidInput("at least one covariate is required".into()));
        }
        if delta.len() != n {
            return Err(Error::InvalidInput(format!(
                "status length {} does not match time length {n}",
                delta.len()
            )));
        }
        if x.len() != n * p {
            return Err(Error::InvalidInput(format!(
                "covariate buffer has {} values, expected {n} x {p}",
                x.len()
            )));
        }
        for (i, &zi) in z.iter().enumerate() {
            if !zi.is_finite() || zi <= 0.0 {
                return Err(Error::Row {
                    row: i + 1,
                    message: format!("observed time {zi} is not a positive finite number"),
                });
            }
        }
        if let Some(pos) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::Row {
                row: pos / p + 1,
                message: "non-finite covariate value".into(),
            });
        }
        Ok(Self {
            z,
            delta,
            x,
            p,
            ids: None,
        })
    }

    /// Attaches record identifiers (used for exclusion lists).
    pub fn with_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.n() {
            return Err(Error::InvalidInput(format!(
                "{} ids for {} records",
                ids.len(),
                self.n()
            )));
        }
        self.ids = Some(ids);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.z.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn delta(&self) -> &[bool] {
        &self.delta
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    pub fn ids(&self) -> Option<&[String]> {
        self.ids.as_deref()
    }

    pub fn events(&self) -> usize {
        self.delta.iter().filter(|&&d| d).count()
    }

    pub fn censored_fraction(&self) -> f64 {
        1.0 - self.events() as f64 / self.n() as f64
    }

    /// Keeps the records at `idx`, in that order.
    pub fn select(&self, idx: &[usize]) -> Result<Self> {
        let z = idx.iter().map(|&i| self.z[i]).collect();
        let delta = idx.iter().map(|&i| self.delta[i]).collect();
        let x = idx.iter().flat_map(|&i| self.x(i).to_vec()).collect();
        let mut out = Self::from_flat(z, delta, x, self.p)?;
        if let Some(ids) = &self.ids {
            out.ids = Some(idx.iter().map(|&i| ids[i].clone()).collect());
        }
        Ok(out)
    }

    /// Drops records whose identifier is in `exclude`. Unknown identifiers
    /// are reported as an error so typos do not silently pass.
    pub fn exclude_ids(&self, exclude: &[String]) -> Result<Self> {
        let ids = self.ids.as_ref().ok_or_else(|| {
            Error::InvalidInput("sample has no id column; cannot exclude by id".into())
        })?;
        for e in exclude {
            if !ids.contains(e) {
                return Err(Error::InvalidInput(format!("id `{e}` not present in sample")));
            }
        }
        let keep: Vec<usize> = (0..self.n()).filter(|&i| !exclude.contains(&ids[i])).collect();
        self.select(&keep)
    }
}

/// What to do with rows that have an empty or `NA` cell in a selected column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MissingPolicy {
    #[default]
    Reject,
    Drop,
}

/// Column mapping for [`load_csv`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub time_col: String,
    pub status_col: String,
    pub covariate_cols: Vec<String>,
    #[serde(default)]
    pub id_col: Option<String>,
    #[serde(default)]
    pub missing: MissingPolicy,
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<CensoredSample> {
    let file = std::fs::File::open(path)?;
    read_csv(file, schema)
}

fn is_missing(cell: &str) -> bool {
    matches!(cell.trim(), "" | "NA" | "NaN" | "nan" | ".")
}

/// Parses a headed CSV into a validated sample. Row numbers in errors are
/// 1-based data rows (the header is not counted).
pub fn read_csv<R: Read>(reader: R, schema: &CsvSchema) -> Result<CensoredSample> {
    if schema.covariate_cols.is_empty() {
        return Err(Error::InvalidInput("no covariate columns selected".into()));
    }
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::InvalidInput(format!("column `{name}` not found in header")))
    };
    let time_idx = col(&schema.time_col)?;
    let status_idx = col(&schema.status_col)?;
    let cov_idx = schema
        .covariate_cols
        .iter()
        .map(|c| col(c))
        .collect::<Result<Vec<_>>>()?;
    let id_idx = schema.id_col.as_deref().map(col).transpose()?;

    let p = cov_idx.len();
    let (mut z, mut delta, mut x, mut ids) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (k, rec) in rdr.records().enumerate() {
        let row = k + 1;
        let rec = rec?;
        let cell = |i: usize| rec.get(i).unwrap_or("");
        let mut selected = vec![time_idx, status_idx];
        selected.extend(&cov_idx);
        if let Some(missing_col) = selected.iter().find(|&&i| is_missing(cell(i))) {
            match schema.missing {
                MissingPolicy::Drop => continue,
                MissingPolicy::Reject => {
                    return Err(Error::Row {
                        row,
                        message: format!("missing value in column `{}`", &headers[*missing_col]),
                    })
                }
            }
        }
        let num = |i: usize| -> Result<f64> {
            let s = cell(i).trim();
            s.parse::<f64>().map_err(|_| Error::Row {
                row,
                message: format!("malformed number `{s}` in column `{}`", &headers[i]),
            })
        };
        let t = num(time_idx)?;
        if !t.is_finite() || t <= 0.0 {
            return Err(Error::Row {
                row,
                message: format!("time {t} must be positive and finite"),
            });
        }
        let d = match cell(status_idx).trim().parse::<f64>() {
            Ok(1.0) => true,
            Ok(0.0) => false,
            _ => {
                return Err(Error::Row {
                    row,
                    message: format!(
                        "status value `{}` outside {{0,1}}",
                        cell(status_idx).trim()
                    ),
                })
            }
        };
        for &i in &cov_idx {
            x.push(num(i)?);
        }
        z.push(t);
        delta.push(d);
        if let Some(i) = id_idx {
            ids.push(cell(i).trim().to_string());
        }
    }
    if z.is_empty() {
        return Err(Error::InvalidInput("file contains no usable rows".into()));
    }
    let sample = CensoredSample::from_flat(z, delta, x, p)?;
    if id_idx.is_some() {
        sample.with_ids(ids)
    } else {
        Ok(sample)
    }
}

/// Records reordered by ascending observed time, with concomitants.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedSample {
    /// `order[i]` is the original index of the `i`-th order statistic.
    pub order: Vec<usize>,
    pub z: Vec<f64>,
    pub delta: Vec<bool>,
    x: Vec<f64>,
    p: usize,
}

impl SortedSample {
    pub fn n(&self) -> usize {
        self.z.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    /// Fraction of records with `Z >= z`, i.e. `1 - Ĝ_Z(z-)`.
    pub fn at_risk_fraction(&self, z: f64) -> f64 {
        let below = self.z.partition_point(|&v| v < z);
        (self.n() - below) as f64 / self.n() as f64
    }
}

/// Orders by time; ties go uncensored first, then by original index.
pub fn sort_sample(s: &CensoredSample) -> SortedSample {
    let mut order: Vec<usize> = (0..s.n()).collect();
    order.sort_by(|&a, &b| {
        s.z[a]
            .total_cmp(&s.z[b])
            .then_with(|| s.delta[b].cmp(&s.delta[a]))
            .then_with(|| a.cmp(&b))
    });
    SortedSample {
        z: order.iter().map(|&i| s.z[i]).collect(),
        delta: order.iter().map(|&i| s.delta[i]).collect(),
        x: order.iter().flat_map(|&i| s.x(i).iter().copied()).collect(),
        p: s.p,
        order,
    }
}

/// Stute jump weights in sorted order.
#[derive(Debug, Clone, PartialEq)]
pub struct KmWeights {
    pub w: Vec<f64>,
    pub total: f64,
}

impl KmWeights {
    /// Weights mapped back to the original record order.
    pub fn in_original_order(&self, s: &SortedSample) -> Vec<f64> {
        let mut out = vec![0.0; self.w.len()];
        for (k, &i) in s.order.iter().enumerate() {
            out[i] = self.w[k];
        }
        out
    }
}

pub fn km_weights(s: &SortedSample) -> KmWeights {
    let n = s.n();
    let mut w = Vec::with_capacity(n);
    let mut prod = 1.0;
    for (i, &d) in s.delta.iter().enumerate() {
        let remaining = (n - i) as f64;
        if d {
            w.push(prod / remaining);
            prod *= (remaining - 1.0) / remaining;
        } else {
            w.push(0.0);
        }
    }
    let total = w.iter().sum();
    KmWeights { w, total }
}

/// Sorted sample bundled with its weights; the unit every estimator consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSample {
    pub sorted: SortedSample,
    pub weights: KmWeights,
}

impl WeightedSample {
    pub fn new(s: &CensoredSample) -> Self {
        let sorted = sort_sample(s);
        let weights = km_weights(&sorted);
        Self { sorted, weights }
    }

    /// Uses caller-supplied weights (e.g. rescaled ones) with the sorted order.
    pub fn with_weights(sorted: SortedSample, w: Vec<f64>) -> Result<Self> {
        if w.len() != sorted.n() || w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidInput(
                "weights must be finite, nonnegative and one per record".into(),
            ));
        }
        let total = w.iter().sum();
        Ok(Self {
            sorted,
            weights: KmWeights { w, total },
        })
    }

    pub fn n(&self) -> usize {
        self.sorted.n()
    }
}

/// `Ĝ(x0, y0) = Σ W_in I(X_[i,n] <= x0, Z_(i,n) <= y0)` with `<=` componentwise.
pub fn stute_cdf(s: &SortedSample, w: &KmWeights, x0: &[f64], y0: f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..s.n() {
        if s.z[i] > y0 {
            break;
        }
        if s.x(i).iter().zip(x0).all(|(a, b)| a <= b) {
            acc += w.w[i];
        }
    }
    acc.clamp(0.0, 1.0)
}

/// Right-continuous step function with value `initial` before the first knot.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    pub initial: f64,
    pub knots: Vec<f64>,
    pub values: Vec<f64>,
}

impl StepFunction {
    pub fn eval(&self, t: f64) -> f64 {
        match self.knots.partition_point(|&k| k <= t) {
            0 => self.initial,
            j => self.values[j - 1],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KmCurve {
    /// Survival of the lifetime `Y` (events are `δ = 1`).
    Event,
    /// Survival of the censoring time `C` (events are `δ = 0`).
    Censoring,
}

/// Product-limit survival curve `Π [1 - e_i / (n - i + 1)]^{I(Z_(i) <= t)}`
/// in the sorted order, where `e_i` is `δ` or `1 - δ`.
pub fn marginal_km_survival(s: &SortedSample, which: KmCurve) -> StepFunction {
    let n = s.n();
    let mut knots = Vec::new();
    let mut values = Vec::new();
    let mut surv = 1.0;
    for i in 0..n {
        let event = match which {
            KmCurve::Event => s.delta[i],
            KmCurve::Censoring => !s.delta[i],
        };
        if event {
            surv *= 1.0 - 1.0 / (n - i) as f64;
        }
        let last_of_tie = i + 1 == n || s.z[i + 1] > s.z[i];
        if last_of_tie {
            knots.push(s.z[i]);
            values.push(surv);
        }
    }
    StepFunction {
        initial: 1.0,
        knots,
        values,
    }
}
