//! Independent reference implementations shared by the integration tests.
#![allow(dead_code, clippy::needless_range_loop)]

use rhuber_core::Matrix;

/// Projection onto the capped simplex by enumerating every assignment of
/// coordinates to {0, free, cap} and keeping the feasible candidate closest
/// to `v`.
pub fn projection_by_enumeration(v: &[f64], eps: f64) -> Vec<f64> {
    let n = v.len();
    let cap = 1.0 / ((1.0 - eps) * n as f64);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut pattern = vec![0u8; n];
    loop {
        let free: Vec<usize> = (0..n).filter(|&i| pattern[i] == 1).collect();
        let at_cap = pattern.iter().filter(|&&p| p == 2).count();
        let fixed_mass = at_cap as f64 * cap;
        let tau = if free.is_empty() {
            0.0
        } else {
            (free.iter().map(|&i| v[i]).sum::<f64>() + fixed_mass - 1.0) / free.len() as f64
        };
        let w: Vec<f64> = (0..n)
            .map(|i| match pattern[i] {
                0 => 0.0,
                1 => v[i] - tau,
                _ => cap,
            })
            .collect();
        let sum: f64 = w.iter().sum();
        let feasible =
            (sum - 1.0).abs() < 1e-9 && w.iter().all(|&x| x >= -1e-12 && x <= cap + 1e-12);
        if feasible {
            let dist: f64 = w.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
            if best.as_ref().is_none_or(|(d, _)| dist < *d) {
                best = Some((dist, w));
            }
        }
        let mut k = 0;
        while k < n {
            pattern[k] += 1;
            if pattern[k] < 3 {
                break;
            }
            pattern[k] = 0;
            k += 1;
        }
        if k == n {
            break;
        }
    }
    best.expect("the capped simplex is non-empty").1
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, sorted
/// descending, with the matching eigenvectors as columns.
pub fn jacobi_eigen(m: &Matrix) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = m.rows();
    let mut a: Vec<Vec<f64>> = (0..n).map(|i| m.row(i).to_vec()).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k][p], v[k][q]);
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]));
    let values = order.iter().map(|&i| a[i][i]).collect();
    let vectors = order
        .iter()
        .map(|&i| (0..n).map(|k| v[k][i]).collect())
        .collect();
    (values, vectors)
}

/// `Σ_i w_i (X_i − ν)(X_i − ν)ᵀ` entry by entry.
pub fn naive_second_moment(x: &Matrix, w: &[f64], nu: &[f64]) -> Vec<Vec<f64>> {
    let d = x.cols();
    let mut m = vec![vec![0.0; d]; d];
    for i in 0..x.rows() {
        for j in 0..d {
            for k in 0..d {
                m[j][k] += w[i] * (x[(i, j)] - nu[j]) * (x[(i, k)] - nu[k]);
            }
        }
    }
    m
}
