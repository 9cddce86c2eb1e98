//! The capped simplex `Δ_{n,ε} = { w : Σ w_i = 1, 0 ≤ w_i ≤ 1/((1−ε)n) }`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `Σ w_i = 1`.
pub const SUM_TOL: f64 = 1e-10;
/// Slack on the box constraints `0 ≤ w_i ≤ cap`.
pub const BOX_TOL: f64 = 1e-12;

const BISECTION_MAX_ITER: usize = 200;
const BISECTION_SUM_TOL: f64 = 1e-12;

/// Per-coordinate cap `1/((1−ε)n)`.
#[inline]
pub fn cap(n: usize, eps: f64) -> f64 {
    1.0 / ((1.0 - eps) * n as f64)
}

/// A point of `Δ_{n,ε}` together with the `ε` that defines its cap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    w: Vec<f64>,
    eps: f64,
}

impl WeightVector {
    /// `w_i = 1/n`, which lies in `Δ_{n,ε}` for every `ε ∈ [0, 1)`.
    pub fn uniform(n: usize, eps: f64) -> Result<Self> {
        check_cap_eps(eps)?;
        if n == 0 {
            return Err(Error::param("n", "must be at least 1"));
        }
        Ok(Self {
            w: vec![1.0 / n as f64; n],
            eps,
        })
    }

    /// Wraps `w` after checking membership.
    pub fn new(w: Vec<f64>, eps: f64) -> Result<Self> {
        check_cap_eps(eps)?;
        let out = Self { w, eps };
        if let Some(reason) = out.membership_violation() {
            return Err(Error::param("w", reason));
        }
        Ok(out)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.w
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn cap(&self) -> f64 {
        cap(self.w.len(), self.eps)
    }

    /// Describes the first violated constraint, if any.
    pub fn membership_violation(&self) -> Option<alloc::string::String> {
        let c = self.cap();
        let sum: f64 = self.w.iter().sum();
        if !(libm::fabs(sum - 1.0) <= SUM_TOL) {
            return Some(format!("weights sum to {sum}"));
        }
        for (i, &wi) in self.w.iter().enumerate() {
            if !(wi >= -BOX_TOL && wi <= c + BOX_TOL) {
                return Some(format!("w[{i}] = {wi} outside [0, {c}]"));
            }
        }
        None
    }

    pub fn is_member(&self) -> bool {
        self.membership_violation().is_none()
    }

    /// `#{i : w_i < 1/(2n)}`.
    pub fn low_weight_count(&self) -> usize {
        let t = 0.5 / self.w.len() as f64;
        self.w.iter().filter(|&&wi| wi < t).count()
    }
}

fn check_cap_eps(eps: f64) -> Result<()> {
    if !(eps.is_finite() && (0.0..1.0).contains(&eps)) {
        return Err(Error::param("eps", format!("{eps} must lie in [0, 1)")));
    }
    Ok(())
}

#[inline]
fn clipped_sum(v: &[f64], tau: f64, c: f64) -> f64 {
    v.iter().map(|&vi| (vi - tau).clamp(0.0, c)).sum()
}

/// Euclidean projection onto `Δ_{n,ε}`.
///
/// The minimizer has the form `w_i = clip(v_i − τ, 0, cap)`; `τ` is found
/// by bisection on `[min v − 1, max v]` and then polished in closed form
/// on the resulting active set.
pub fn project(v: &[f64], eps: f64) -> Result<WeightVector> {
    project_with_shift(v, eps).map(|(w, _)| w)
}

/// As [`project`], also returning the shift `τ`.
pub fn project_with_shift(v: &[f64], eps: f64) -> Result<(WeightVector, f64)> {
    check_cap_eps(eps)?;
    if v.is_empty() {
        return Err(Error::param("v", "cannot project an empty vector"));
    }
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite { row: i, col: 0 });
    }
    let (w, tau) = project_capped(v, cap(v.len(), eps));
    Ok((WeightVector { w, eps }, tau))
}

/// Projection onto the face of `Δ_{n,ε}` where every coordinate outside
/// `keep` is zero. Returns `None` when that face is empty, i.e. when the
/// kept coordinates cannot reach total mass 1 under the cap.
pub fn project_masked(v: &[f64], eps: f64, keep: &[bool]) -> Result<Option<WeightVector>> {
    check_cap_eps(eps)?;
    if v.len() != keep.len() {
        return Err(Error::dim("mask length differs from vector length"));
    }
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite { row: i, col: 0 });
    }
    let c = cap(v.len(), eps);
    let kept: Vec<f64> = v
        .iter()
        .zip(keep)
        .filter(|(_, &k)| k)
        .map(|(&x, _)| x)
        .collect();
    if kept.is_empty() || (kept.len() as f64) * c < 1.0 - SUM_TOL {
        return Ok(None);
    }
    let (sub, _) = project_capped(&kept, c);
    let mut sub = sub.into_iter();
    let w = keep
        .iter()
        .map(|&k| if k { sub.next().unwrap_or(0.0) } else { 0.0 })
        .collect();
    Ok(Some(WeightVector { w, eps }))
}

/// Bisection on `τ` for `Σ clip(v_i − τ, 0, c) = 1`; requires `len·c ≥ 1`.
fn project_capped(v: &[f64], c: f64) -> (Vec<f64>, f64) {
    let (lo0, hi0) = v
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    let (mut lo, mut hi) = (lo0 - c.max(1.0), hi0);
    let mut tau = 0.5 * (lo + hi);
    for _ in 0..BISECTION_MAX_ITER {
        tau = 0.5 * (lo + hi);
        let s = clipped_sum(v, tau, c);
        if libm::fabs(s - 1.0) <= BISECTION_SUM_TOL {
            break;
        }
        if s > 1.0 {
            lo = tau;
        } else {
            hi = tau;
        }
    }
    let tau = polish_shift(v, tau, c).unwrap_or(tau);
    (v.iter().map(|&vi| (vi - tau).clamp(0.0, c)).collect(), tau)
}

/// Exact `τ` for the active set implied by an approximate one, accepted
/// only if it reproduces that active set.
fn polish_shift(v: &[f64], tau: f64, c: f64) -> Option<f64> {
    let mut free_sum = 0.0;
    let mut free = 0usize;
    let mut at_cap = 0usize;
    for &vi in v {
        let t = vi - tau;
        if t >= c {
            at_cap += 1;
        } else if t > 0.0 {
            free += 1;
            free_sum += vi;
        }
    }
    if free == 0 {
        return None;
    }
    let exact = (free_sum + at_cap as f64 * c - 1.0) / free as f64;
    let consistent = v.iter().all(|&vi| {
        let before = vi - tau;
        let after = vi - exact;
        match (before >= c, before > 0.0) {
            (true, _) => after >= c - BOX_TOL,
            (false, true) => after > -BOX_TOL && after < c + BOX_TOL,
            (false, false) => after <= BOX_TOL,
        }
    });
    consistent.then_some(exact)
}

/// Largest violation of the projection's optimality conditions for a
/// candidate `w` and shift `τ`: `w_i = clip(v_i − τ, 0, cap)` and
/// `Σ w_i = 1`.
pub fn kkt_residual(v: &[f64], w: &[f64], tau: f64, eps: f64) -> f64 {
    let c = cap(v.len(), eps);
    let pointwise = v
        .iter()
        .zip(w)
        .map(|(&vi, &wi)| libm::fabs(wi - (vi - tau).clamp(0.0, c)))
        .fold(0.0, f64::max);
    pointwise.max(libm::fabs(w.iter().sum::<f64>() - 1.0))
}
