//! Oracle-side evaluation: error metrics, rate bundles and the
//! deterministic conditions behind the error bound.
//!
//! For a fit `β̂` and a point `β_η = β* + η(β̂ − β*)` on the segment to the
//! truth, with `δ = β_η − β*`, `c = λ_o√n` and `a_i(v) = (v_i − μ_ŵ)·δ`:
//!
//! ```text
//! lhs1 = | Σ_i    c ŵ_i h(ξ_i / c)  a_i(x) |
//! lhs2 = | Σ_{Io} c ŵ_i h(r_i(β_η)) a_i(x) |
//! lhs3 = | Σ_{Io} c ŵ_i h(R_i(β_η)) a_i(X) |
//! lhs4 =   Σ_i    c ŵ_i (h(r_i(β*)) − h(r_i(β_η))) a_i(x)
//! ```
//!
//! `r_i` uses the clean covariates `x_i`, `R_i` the observed `X_i`; both use
//! the observed responses. If `lhs1..3 ≤ c₁‖δ‖` and
//! `lhs4 ≥ c₂‖δ‖² − c₃‖δ‖ − c₄` along the path, then
//! `‖β̂ − β*‖ ≤ (3c₁ + c₃ + √(c₂c₄))/c₂`.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::OracleInstance;
use crate::error::{Error, Result};
use crate::huber::{huber_score, EstimationResult};
use crate::linalg::{distance, dot, norm2};

/// `{0.1, 0.2, …, 1.0}`.
pub fn default_eta_grid() -> Vec<f64> {
    (1..=10).map(|k| k as f64 / 10.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    /// `‖β̂ − β*‖₂`.
    pub l2_error: f64,
    /// Root mean squared `x_i·(β̂ − β*)` over the clean rows.
    pub prediction_rmse_clean: f64,
    /// `‖μ_ŵ − μ‖₂` when the fit carries a weighted mean.
    pub mu_error: Option<f64>,
}

pub fn error_metrics(result: &EstimationResult, oracle: &OracleInstance) -> Result<ErrorMetrics> {
    let d = oracle.d();
    if result.beta_hat.len() != d {
        return Err(Error::dim(
            "beta_hat length differs from the oracle dimension",
        ));
    }
    let delta: Vec<f64> = result
        .beta_hat
        .iter()
        .zip(&oracle.beta_star)
        .map(|(b, s)| b - s)
        .collect();
    let clean = &oracle.clean_idx;
    let prediction_rmse_clean = if clean.is_empty() {
        0.0
    } else {
        let ss: f64 = clean
            .iter()
            .map(|&i| {
                let p = dot(oracle.x_clean.row(i), &delta);
                p * p
            })
            .sum();
        libm::sqrt(ss / clean.len() as f64)
    };
    let mu_error = match &result.mu_w_used {
        Some(mu_w) if mu_w.len() == d => Some(distance(mu_w, &oracle.mu())),
        Some(_) => return Err(Error::dim("mu_w length differs from the oracle dimension")),
        None => None,
    };
    Ok(ErrorMetrics {
        l2_error: norm2(&delta),
        prediction_rmse_clean,
        mu_error,
    })
}

/// Reference rates for the error bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateBundle {
    /// `ε √ln(1/ε)`, zero at `ε = 0`.
    pub r_o: f64,
    /// `√(d ln d / n)`.
    pub r_d: f64,
    /// `√(d / n)`.
    pub r_d_prime: f64,
    /// `√ε`.
    pub sqrt_eps: f64,
}

pub fn rates(n: usize, d: usize, eps: f64) -> Result<RateBundle> {
    if n == 0 || d == 0 {
        return Err(Error::param("n, d", "must both be at least 1"));
    }
    if !(eps.is_finite() && (0.0..1.0).contains(&eps)) {
        return Err(Error::Epsilon(eps));
    }
    let (nf, df) = (n as f64, d as f64);
    let r_o = if eps == 0.0 {
        0.0
    } else {
        eps * libm::sqrt(libm::log(1.0 / eps))
    };
    Ok(RateBundle {
        r_o,
        r_d: libm::sqrt(df * libm::log(df) / nf),
        r_d_prime: libm::sqrt(df / nf),
        sqrt_eps: libm::sqrt(eps),
    })
}

/// Condition sums at one point `β_η` of the path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionPoint {
    pub eta: f64,
    /// `‖δ_{β_η}‖₂`.
    pub delta_norm: f64,
    pub lhs1: f64,
    pub lhs2: f64,
    pub lhs3: f64,
    pub lhs4: f64,
}

impl ConditionPoint {
    /// `max(lhs1, lhs2, lhs3) / ‖δ‖`, `None` at `δ = 0`.
    pub fn linear_ratio(&self) -> Option<f64> {
        (self.delta_norm > 0.0).then(|| self.lhs1.max(self.lhs2).max(self.lhs3) / self.delta_norm)
    }

    /// `lhs4 / ‖δ‖²`, `None` at `δ = 0`.
    pub fn curvature_ratio(&self) -> Option<f64> {
        (self.delta_norm > 0.0).then(|| self.lhs4 / (self.delta_norm * self.delta_norm))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub eta_grid: Vec<f64>,
    pub points: Vec<ConditionPoint>,
    /// Empirical `c₁..c₄`: `c₁` is the largest linear ratio over the grid,
    /// `c₂` the smallest curvature ratio, `c₃` the smallest value making the
    /// lower bound hold at every grid point given `c₂`, and `c₄ = 0`.
    pub c_candidates: [f64; 4],
    /// `(3c₁ + c₃ + √(c₂c₄))/c₂`; `None` unless `c₂ > 0`.
    pub r0_bound: Option<f64>,
}

impl ConditionReport {
    pub fn at_eta(&self, eta: f64) -> Option<&ConditionPoint> {
        self.points.iter().find(|p| p.eta == eta)
    }
}

struct Frame<'a> {
    oracle: &'a OracleInstance,
    w: &'a [f64],
    mu_w: &'a [f64],
    c: f64,
    is_outlier: Vec<bool>,
}

impl Frame<'_> {
    fn row(&self, clean: bool, i: usize) -> &[f64] {
        if clean {
            self.oracle.x_clean.row(i)
        } else {
            self.oracle.dataset.x().row(i)
        }
    }

    /// `(v_i − μ_ŵ)·u`.
    fn centered(&self, clean: bool, i: usize, u: &[f64]) -> f64 {
        self.row(clean, i)
            .iter()
            .zip(self.mu_w)
            .zip(u)
            .map(|((x, m), d)| (x - m) * d)
            .sum()
    }

    /// `r_i(v)` for `clean`, `R_i(v)` otherwise.
    fn resid(&self, clean: bool, i: usize, v: &[f64]) -> f64 {
        let n = self.w.len() as f64;
        (self.oracle.dataset.y()[i] - n * self.w[i] * self.centered(clean, i, v)) / self.c
    }
}

fn frame<'a>(
    oracle: &'a OracleInstance,
    w: &'a [f64],
    mu_w: &'a [f64],
    lambda_scaled: f64,
) -> Result<Frame<'a>> {
    let (n, d) = (oracle.n(), oracle.d());
    if w.len() != n || mu_w.len() != d {
        return Err(Error::dim(
            "weights or center do not match the oracle instance",
        ));
    }
    if !(lambda_scaled > 0.0 && lambda_scaled.is_finite()) {
        return Err(Error::param("lambda_scaled", "must be positive"));
    }
    let mut is_outlier = vec![false; n];
    for &i in &oracle.outlier_idx {
        is_outlier[i] = true;
    }
    Ok(Frame {
        oracle,
        w,
        mu_w,
        c: lambda_scaled,
        is_outlier,
    })
}

fn condition_point(f: &Frame<'_>, beta_hat: &[f64], eta: f64) -> ConditionPoint {
    let beta_star = &f.oracle.beta_star;
    let delta: Vec<f64> = beta_hat
        .iter()
        .zip(beta_star)
        .map(|(b, s)| eta * (b - s))
        .collect();
    let beta_eta: Vec<f64> = beta_star.iter().zip(&delta).map(|(s, d)| s + d).collect();
    let (mut s1, mut s2, mut s3, mut s4) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..f.w.len() {
        let wi = f.w[i];
        if wi == 0.0 {
            continue;
        }
        let scale = f.c * wi;
        let ax = f.centered(true, i, &delta);
        s1 += scale * huber_score(f.oracle.xi[i] / f.c) * ax;
        let r_eta = huber_score(f.resid(true, i, &beta_eta));
        s4 += scale * (huber_score(f.resid(true, i, beta_star)) - r_eta) * ax;
        if f.is_outlier[i] {
            s2 += scale * r_eta * ax;
            s3 += scale * huber_score(f.resid(false, i, &beta_eta)) * f.centered(false, i, &delta);
        }
    }
    ConditionPoint {
        eta,
        delta_norm: norm2(&delta),
        lhs1: libm::fabs(s1),
        lhs2: libm::fabs(s2),
        lhs3: libm::fabs(s3),
        lhs4: s4,
    }
}

/// Evaluates the four condition sums along `β_η` for each `η` in the grid
/// and fits empirical constants.
pub fn check_conditions(
    oracle: &OracleInstance,
    w: &[f64],
    mu_w: &[f64],
    beta_hat: &[f64],
    lambda_scaled: f64,
    eta_grid: &[f64],
) -> Result<ConditionReport> {
    if eta_grid.is_empty() {
        return Err(Error::param("eta_grid", "must not be empty"));
    }
    if let Some(eta) = eta_grid.iter().find(|e| !(0.0..=1.0).contains(*e)) {
        return Err(Error::param(
            "eta_grid",
            alloc::format!("{eta} outside [0, 1]"),
        ));
    }
    if beta_hat.len() != oracle.d() {
        return Err(Error::dim(
            "beta_hat length differs from the oracle dimension",
        ));
    }
    let f = frame(oracle, w, mu_w, lambda_scaled)?;
    let points: Vec<ConditionPoint> = eta_grid
        .iter()
        .map(|&eta| condition_point(&f, beta_hat, eta))
        .collect();

    let c1 = points
        .iter()
        .filter_map(ConditionPoint::linear_ratio)
        .fold(0.0, f64::max);
    let c2 = points
        .iter()
        .filter_map(ConditionPoint::curvature_ratio)
        .reduce(f64::min)
        .unwrap_or(0.0);
    let c3 = points
        .iter()
        .filter(|p| p.delta_norm > 0.0)
        .map(|p| ((c2 * p.delta_norm * p.delta_norm - p.lhs4) / p.delta_norm).max(0.0))
        .fold(0.0, f64::max);
    let c4 = 0.0;
    let r0_bound = (c2 > 0.0).then(|| (3.0 * c1 + c3 + libm::sqrt(c2 * c4)) / c2);
    Ok(ConditionReport {
        eta_grid: eta_grid.to_vec(),
        points,
        c_candidates: [c1, c2, c3, c4],
        r0_bound,
    })
}

/// Both sides of the decomposition of the monotone score sum on the
/// observed data,
///
/// ```text
/// Σ_i c ŵ_i (h(R_i(β*)) − h(R_i(β_η))) (X_i − μ_ŵ)·δ
///   = lhs4
///   + Σ_{Io} c ŵ_i (h(R_i(β*)) − h(R_i(β_η))) (X_i − μ_ŵ)·δ
///   − Σ_{Io} c ŵ_i (h(r_i(β*)) − h(r_i(β_η))) (x_i − μ_ŵ)·δ,
/// ```
///
/// returned as `(direct, reassembled)`. The identity is exact because
/// inlier rows agree in `X` and `x`.
pub fn splitting_identity(
    oracle: &OracleInstance,
    w: &[f64],
    mu_w: &[f64],
    beta_hat: &[f64],
    lambda_scaled: f64,
    eta: f64,
) -> Result<(f64, f64)> {
    if beta_hat.len() != oracle.d() {
        return Err(Error::dim(
            "beta_hat length differs from the oracle dimension",
        ));
    }
    let f = frame(oracle, w, mu_w, lambda_scaled)?;
    let beta_star = &oracle.beta_star;
    let delta: Vec<f64> = beta_hat
        .iter()
        .zip(beta_star)
        .map(|(b, s)| eta * (b - s))
        .collect();
    let beta_eta: Vec<f64> = beta_star.iter().zip(&delta).map(|(s, d)| s + d).collect();
    let term = |clean: bool, i: usize| {
        f.c * f.w[i]
            * (huber_score(f.resid(clean, i, beta_star))
                - huber_score(f.resid(clean, i, &beta_eta)))
            * f.centered(clean, i, &delta)
    };
    let n = w.len();
    let direct: f64 = (0..n).map(|i| term(false, i)).sum();
    let clean_all: f64 = (0..n).map(|i| term(true, i)).sum();
    let correction: f64 = oracle
        .outlier_idx
        .iter()
        .map(|&i| term(false, i) - term(true, i))
        .sum();
    Ok((direct, clean_all + correction))
}
