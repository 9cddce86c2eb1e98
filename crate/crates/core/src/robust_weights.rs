//! Robust sample weights by spectral filtering.
//!
//! Starting from the coordinate-wise median and uniform weights, each outer
//! step builds `M(w, ν) = Σ w_i (X_i − ν)(X_i − ν)ᵀ` and checks its top
//! eigenvalue against a certificate threshold:
//!
//! * identity covariance: `λ ≤ 1 + c·(ε log(1/ε) + √(d/n))`
//! * bounded covariance: `λ ≤ c·σ_c²`
//!
//! If the check fails, a few filter rounds downweight points with large
//! squared projection onto the top eigenvector, keeping `w` on the capped
//! simplex `Δ_{n,ε}`, and the center moves to the current weighted mean.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{check_eps, Error, Result};
use crate::linalg::{axpy, dot, Matrix};
use crate::rng::derive_seed;
use crate::simplex::{self, WeightVector};
use crate::spectral::{
    coordwise_median, direction_scores, dual_objective, top_eigenpair, weighted_second_moment,
    Eigenpair,
};
use crate::stats::{mad, MAD_TO_SIGMA};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceMode {
    /// Sub-Gaussian covariates with identity covariance.
    IdentityCov,
    /// Covariance bounded by `σ_c² I`.
    BoundedCov,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobustWeightConfig {
    pub eps: f64,
    pub mode: CovarianceMode,
    /// Constant in the certificate threshold.
    pub c_term: f64,
    /// Number of filter-and-recenter phases.
    pub max_outer: usize,
    pub filter_rounds_per_outer: usize,
    pub power_tol: f64,
    pub power_max_iter: usize,
    pub seed: u64,
    /// Covariance bound for `bounded_cov`. When absent it is estimated as
    /// the largest squared coordinate-wise normalized MAD.
    #[serde(default)]
    pub sigma_c_sq: Option<f64>,
}

/// `4·⌈log₂(d+1)⌉ + 8`.
pub fn default_max_outer(d: usize) -> usize {
    let bits = usize::BITS - d.leading_zeros();
    // ⌈log₂(d+1)⌉ equals the bit length of d for d ≥ 1
    4 * bits as usize + 8
}

impl RobustWeightConfig {
    pub fn new(eps: f64, mode: CovarianceMode, d: usize) -> Self {
        Self {
            eps,
            mode,
            c_term: match mode {
                CovarianceMode::IdentityCov => 2.0,
                CovarianceMode::BoundedCov => 9.0,
            },
            max_outer: default_max_outer(d),
            filter_rounds_per_outer: 5,
            power_tol: 1e-10,
            power_max_iter: 10_000,
            seed: 0,
            sigma_c_sq: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_eps(self.eps)?;
        if !(self.c_term > 0.0 && self.c_term.is_finite()) {
            return Err(Error::param(
                "c_term",
                format!("{} must be positive", self.c_term),
            ));
        }
        if self.max_outer == 0 {
            return Err(Error::param("max_outer", "must be at least 1"));
        }
        if !(self.power_tol > 0.0) {
            return Err(Error::param("power_tol", "must be positive"));
        }
        if let Some(s) = self.sigma_c_sq {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::param("sigma_c_sq", format!("{s} must be positive")));
            }
        }
        Ok(())
    }

    /// Certificate threshold for a dataset of this shape.
    pub fn threshold(&self, ds: &Dataset) -> f64 {
        match self.mode {
            CovarianceMode::IdentityCov => {
                let eps = self.eps;
                let eps_term = if eps > 0.0 {
                    eps * libm::log(1.0 / eps)
                } else {
                    0.0
                };
                let dim_term = libm::sqrt(ds.d() as f64 / ds.n() as f64);
                1.0 + self.c_term * (eps_term + dim_term)
            }
            CovarianceMode::BoundedCov => {
                let s = self
                    .sigma_c_sq
                    .unwrap_or_else(|| robust_covariance_bound(ds.x()));
                self.c_term * s
            }
        }
    }
}

/// `max_j (1.4826 · MAD_j)²` over covariate columns.
pub fn robust_covariance_bound(x: &Matrix) -> f64 {
    (0..x.cols())
        .map(|j| {
            let s = MAD_TO_SIGMA * mad(&x.column(j));
            s * s
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Certificate,
    Budget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustWeightResult {
    pub w: WeightVector,
    /// `μ_ŵ = Σ ŵ_i X_i`.
    pub mu_w: Vec<f64>,
    /// Center at which `lambda_max` was certified.
    pub nu_final: Vec<f64>,
    pub lambda_max: f64,
    /// Top eigenvector of `M(ŵ, ν)`.
    pub top_vector: Vec<f64>,
    pub dual_cert: f64,
    pub threshold: f64,
    pub outer_iters: usize,
    pub terminated_by: Termination,
    /// `λ_max` at every certificate check, in order.
    pub lambda_trace: Vec<f64>,
}

/// `Σ w_i X_i`.
pub fn weighted_mean(ds: &Dataset, w: &[f64]) -> Vec<f64> {
    let mut m = alloc::vec![0.0; ds.d()];
    for (row, &wi) in ds.x().row_iter().zip(w) {
        if wi != 0.0 {
            axpy(wi, row, &mut m);
        }
    }
    m
}

fn top_of(
    ds: &Dataset,
    w: &[f64],
    nu: &[f64],
    cfg: &RobustWeightConfig,
    seed: u64,
) -> Result<Eigenpair> {
    let m = weighted_second_moment(ds, w, nu)?;
    top_eigenpair(&m.matrix, cfg.power_tol, cfg.power_max_iter, seed)
}

/// One filtering round along the unit direction `v`.
///
/// With scores `s_i = ((X_i − ν)·v)²` and `s_max` their maximum over the
/// support of `w`, every weight is scaled by `1 − s_i/s_max` and the result
/// is projected back onto `Δ_{n,ε}`. The projection keeps zeroed points at
/// zero whenever the remaining support can hold unit mass under the cap,
/// and falls back to the full Euclidean projection otherwise. A projected
/// point that would raise `Σ w_i s_i` is rejected and `w` is returned.
pub fn filter_update(
    ds: &Dataset,
    w: &WeightVector,
    nu: &[f64],
    v: &[f64],
    eps: f64,
) -> Result<WeightVector> {
    if w.len() != ds.n() || nu.len() != ds.d() || v.len() != ds.d() {
        return Err(Error::dim(
            "filter_update arguments disagree with the dataset",
        ));
    }
    let wv = w.as_slice();
    let scores = direction_scores(ds, nu, v);
    let (lo, hi) = scores
        .iter()
        .zip(wv)
        .filter(|(_, &wi)| wi > 0.0)
        .fold((f64::INFINITY, 0.0_f64), |(lo, hi), (&s, _)| {
            (lo.min(s), hi.max(s))
        });
    // flat along v: nothing to discriminate
    if !(hi > 0.0) || hi - lo <= 1e-12 * hi {
        return Ok(w.clone());
    }
    let scaled: Vec<f64> = wv
        .iter()
        .zip(&scores)
        .map(|(&wi, &s)| (wi * (1.0 - s / hi)).max(0.0))
        .collect();
    let keep: Vec<bool> = scaled.iter().map(|&x| x > 0.0).collect();
    let projected = match simplex::project_masked(&scaled, eps, &keep)? {
        Some(p) => p,
        None => simplex::project(&scaled, eps)?,
    };
    let before = dot(wv, &scores);
    let after = dot(projected.as_slice(), &scores);
    if after > before {
        return Ok(w.clone());
    }
    Ok(projected)
}

struct Checkpoint {
    w: WeightVector,
    nu: Vec<f64>,
    eig: Eigenpair,
}

/// Runs the filtering loop and returns certified (or best-effort) weights.
pub fn robust_weights(ds: &Dataset, cfg: &RobustWeightConfig) -> Result<RobustWeightResult> {
    cfg.validate()?;
    let n = ds.n();
    let threshold = cfg.threshold(ds);
    let mut nu = coordwise_median(ds.x())?;
    let mut w = WeightVector::uniform(n, cfg.eps)?;
    let mut best: Option<Checkpoint> = None;
    let mut trace = Vec::new();
    let mut terminated_by = Termination::Budget;
    let mut checks = 0;

    for outer in 0..=cfg.max_outer {
        let eig = top_of(
            ds,
            w.as_slice(),
            &nu,
            cfg,
            derive_seed(cfg.seed, &[outer as u64, 0]),
        )?;
        checks += 1;
        trace.push(eig.value);
        let certified = eig.value <= threshold;
        if best.as_ref().is_none_or(|b| eig.value < b.eig.value) || certified {
            best = Some(Checkpoint {
                w: w.clone(),
                nu: nu.clone(),
                eig: eig.clone(),
            });
        }
        if certified {
            terminated_by = Termination::Certificate;
            break;
        }
        if outer == cfg.max_outer {
            break;
        }

        let mut moved = false;
        let mut direction = eig.vector;
        for round in 0..cfg.filter_rounds_per_outer {
            if round > 0 {
                let seed = derive_seed(cfg.seed, &[outer as u64, round as u64]);
                direction = top_of(ds, w.as_slice(), &nu, cfg, seed)?.vector;
            }
            let next = filter_update(ds, &w, &nu, &direction, cfg.eps)?;
            if next == w {
                break;
            }
            w = next;
            moved = true;
        }
        let next_nu = weighted_mean(ds, w.as_slice());
        if !moved && next_nu == nu {
            // fixed point: further phases would repeat this one
            break;
        }
        nu = next_nu;
    }

    let best = best.expect("at least one certificate check runs");
    let mu_w = weighted_mean(ds, best.w.as_slice());
    let dual_cert = dual_objective(ds, &best.nu, &best.eig.vector, cfg.eps)?;
    Ok(RobustWeightResult {
        mu_w,
        nu_final: best.nu,
        lambda_max: best.eig.value,
        top_vector: best.eig.vector,
        dual_cert,
        threshold,
        outer_iters: checks,
        terminated_by,
        lambda_trace: trace,
        w: best.w,
    })
}

/// Independent re-check of a weight-stage result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub lambda_max: f64,
    pub threshold: f64,
    pub pass: bool,
    pub dual_cert: f64,
}

/// Recomputes `λ_max(M(ŵ, ν))` from scratch and compares it with the
/// mode's threshold; `dual_cert` is the trimmed dual value along the
/// recomputed top eigenvector.
pub fn certificate(
    ds: &Dataset,
    result: &RobustWeightResult,
    cfg: &RobustWeightConfig,
) -> Result<CertificateReport> {
    cfg.validate()?;
    if result.w.len() != ds.n() {
        return Err(Error::dim("result weights do not match the dataset"));
    }
    let eig = top_of(
        ds,
        result.w.as_slice(),
        &result.nu_final,
        cfg,
        derive_seed(cfg.seed, &[u64::MAX]),
    )?;
    let threshold = cfg.threshold(ds);
    let dual_cert = dual_objective(ds, &result.nu_final, &eig.vector, cfg.eps)?;
    Ok(CertificateReport {
        lambda_max: eig.value,
        threshold,
        pass: eig.value <= threshold,
        dual_cert,
    })
}
