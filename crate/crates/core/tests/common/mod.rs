#![allow(clippy::needless_range_loop)]

//! Independent reference computations shared by the integration and
//! acceptance targets. Nothing here calls into the library's numerics.

#![allow(dead_code)]

/// Product-limit weights in sorted order, computed as the jumps of the
/// Kaplan–Meier survival curve. Ties put uncensored records first.
pub fn km_jumps(z: &[f64], delta: &[bool]) -> (Vec<usize>, Vec<f64>) {
    let n = z.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        z[a].partial_cmp(&z[b])
            .unwrap()
            .then(delta[b].cmp(&delta[a]))
            .then(a.cmp(&b))
    });
    let mut surv = 1.0;
    let mut w = Vec::with_capacity(n);
    for (i, &k) in order.iter().enumerate() {
        let next = if delta[k] {
            surv * (1.0 - 1.0 / (n - i) as f64)
        } else {
            surv
        };
        w.push(surv - next);
        surv = next;
    }
    (order, w)
}

/// Plain central differences with step `h (1 + |x_j|)`.
pub fn central_gradient<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|j| {
            let hj = h * (1.0 + x[j].abs());
            let mut a = x.to_vec();
            let mut b = x.to_vec();
            a[j] += hj;
            b[j] -= hj;
            (f(&a) - f(&b)) / (2.0 * hj)
        })
        .collect()
}

/// Composite Simpson weights on `[a, b]` with `m` (even) panels.
pub fn simpson_nodes(a: f64, b: f64, m: usize) -> Vec<(f64, f64)> {
    assert!(m.is_multiple_of(2));
    let h = (b - a) / m as f64;
    (0..=m)
        .map(|i| {
            let c = if i == 0 || i == m {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            (a + i as f64 * h, c * h / 3.0)
        })
        .collect()
}

/// Root of a monotone function on `[lo, hi]` by bisection.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    assert!(flo * f(hi) < 0.0, "bracket does not change sign");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Least squares by the normal equations, solved with Gaussian elimination.
pub fn ols(rows: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let d = rows[0].len();
    let mut a = vec![vec![0.0; d + 1]; d];
    for (r, &t) in rows.iter().zip(y) {
        for i in 0..d {
            for j in 0..d {
                a[i][j] += r[i] * r[j];
            }
            a[i][d] += r[i] * t;
        }
    }
    gauss_solve(a)
}

/// Solves an augmented system `[A | b]` with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let d = a.len();
    for c in 0..d {
        let piv = (c..d)
            .max_by(|&i, &j| a[i][c].abs().partial_cmp(&a[j][c].abs()).unwrap())
            .unwrap();
        a.swap(c, piv);
        for r in 0..d {
            if r != c {
                let f = a[r][c] / a[c][c];
                for k in c..=d {
                    a[r][k] -= f * a[c][k];
                }
            }
        }
    }
    (0..d).map(|i| a[i][d] / a[i][i]).collect()
}

pub fn mat_inv(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = m.len();
    let cols: Vec<Vec<f64>> = (0..d)
        .map(|k| {
            let aug = (0..d)
                .map(|i| {
                    let mut r = m[i].clone();
                    r.push(if i == k { 1.0 } else { 0.0 });
                    r
                })
                .collect();
            gauss_solve(aug)
        })
        .collect();
    (0..d).map(|i| (0..d).map(|j| cols[j][i]).collect()).collect()
}

pub fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (r, k, c) = (a.len(), b.len(), b[0].len());
    (0..r)
        .map(|i| (0..c).map(|j| (0..k).map(|t| a[i][t] * b[t][j]).sum()).collect())
        .collect()
}

pub fn transpose(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    (0..a[0].len()).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

/// Textbook complete-data sandwich `Λ⁻¹ Σ Λ⁻ᵀ / n` from per-record ψ rows
/// and their analytic Jacobians.
pub fn textbook_sandwich(psi: &[Vec<f64>], dpsi: &[Vec<Vec<f64>>]) -> Vec<Vec<f64>> {
    let n = psi.len() as f64;
    let d = psi[0].len();
    let mut lam = vec![vec![0.0; d]; d];
    for m in dpsi {
        for i in 0..d {
            for j in 0..d {
                lam[i][j] += m[i][j] / n;
            }
        }
    }
    let mean: Vec<f64> = (0..d).map(|j| psi.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let mut sig = vec![vec![0.0; d]; d];
    for r in psi {
        for i in 0..d {
            for j in 0..d {
                sig[i][j] += (r[i] - mean[i]) * (r[j] - mean[j]) / n;
            }
        }
    }
    let li = mat_inv(&lam);
    let mut cov = mat_mul(&mat_mul(&li, &sig), &transpose(&li));
    for row in &mut cov {
        for v in row {
            *v /= n;
        }
    }
    cov
}

pub fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}
