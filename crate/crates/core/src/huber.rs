//! Weighted Huber regression.
//!
//! With weights `ŵ` and weighted mean `μ_ŵ` from the weight stage, the
//! reweighted design rows are `a_i = n·ŵ_i·(X_i − μ_ŵ)` and the estimator
//! minimizes
//!
//! ```text
//! F(β) = Σ_i λ_o² H(R_i(β)),   R_i(β) = (y_i − a_i·β) / (λ_o √n)
//! ```
//!
//! where `H` is the unit Huber loss. The same `β̂` solves the joint problem
//!
//! ```text
//! min_{θ, β} Σ_i (1/2n)(y_i − a_i·β − √n θ_i)² + λ_o ‖θ‖₁
//! ```
//!
//! after minimizing out `θ` by soft thresholding; [`joint_fit`] solves that
//! form directly and serves as a cross-check of [`weighted_huber_fit`].
//!
//! Throughout, `lambda_scaled` is the residual-unit threshold `λ_o √n`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::{outlier_count, Dataset};
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, least_squares, norm2, Matrix};
use crate::robust_weights::{robust_weights, RobustWeightConfig, RobustWeightResult};
use crate::simplex::WeightVector;
use crate::stats::{median, MAD_TO_SIGMA};

/// Classical 95%-efficiency Huber constant.
pub const HUBER_EFFICIENCY_CONSTANT: f64 = 1.345;

const ARMIJO_C: f64 = 1e-4;
const ARMIJO_SHRINK: f64 = 0.5;
const LBFGS_MEMORY: usize = 8;

/// `H(t) = t²/2` for `|t| ≤ 1`, `|t| − 1/2` otherwise.
#[inline]
pub fn huber_loss(t: f64) -> f64 {
    let a = libm::fabs(t);
    if a <= 1.0 {
        0.5 * t * t
    } else {
        a - 0.5
    }
}

/// `h(t) = H'(t) = clip(t, −1, 1)`.
#[inline]
pub fn huber_score(t: f64) -> f64 {
    t.clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    /// Gradient descent with Armijo backtracking.
    BacktrackingGd,
    /// Limited-memory BFGS with the same line search.
    LbfgsLikeQuasiNewton,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HuberConfig {
    /// `λ_o √n`. `None` selects the plug-in default, see
    /// [`default_lambda_scaled`].
    #[serde(default)]
    pub lambda_scaled: Option<f64>,
    pub grad_tol: f64,
    pub max_iter: usize,
    pub solver: SolverKind,
    /// Starting point; zero when absent.
    #[serde(default)]
    pub beta0: Option<Vec<f64>>,
}

impl Default for HuberConfig {
    fn default() -> Self {
        Self {
            lambda_scaled: None,
            grad_tol: 1e-9,
            max_iter: 20_000,
            solver: SolverKind::BacktrackingGd,
            beta0: None,
        }
    }
}

impl HuberConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(l) = self.lambda_scaled {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::param(
                    "lambda_scaled",
                    format!("{l} must be positive"),
                ));
            }
        }
        if !(self.grad_tol > 0.0) {
            return Err(Error::param("grad_tol", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub beta_hat: Vec<f64>,
    pub objective: f64,
    pub grad_norm: f64,
    pub iters: usize,
    pub converged: bool,
    /// Threshold actually used (`λ_o √n`); zero for least squares.
    pub lambda_scaled: f64,
    pub weights_used: Option<WeightVector>,
    pub mu_w_used: Option<Vec<f64>>,
    /// `θ̂` of the joint program.
    pub theta_hat: Option<Vec<f64>>,
    /// Weight-stage output when the fit came from [`two_step_estimate`].
    pub robust_weights: Option<RobustWeightResult>,
}

/// `a_i = n·w_i·(X_i − μ)`.
pub fn weighted_design(ds: &Dataset, w: &[f64], mu: &[f64]) -> Result<Matrix> {
    let (n, d) = (ds.n(), ds.d());
    if w.len() != n || mu.len() != d {
        return Err(Error::dim(format!(
            "weights {} / center {} do not match a {n}x{d} dataset",
            w.len(),
            mu.len()
        )));
    }
    let mut a = Matrix::zeros(n, d);
    let nf = n as f64;
    for (i, row) in ds.x().row_iter().enumerate() {
        let s = nf * w[i];
        let out = a.row_mut(i);
        for j in 0..d {
            out[j] = s * (row[j] - mu[j]);
        }
    }
    Ok(a)
}

/// `R_i = (y_i − n·w_i·(X_i − μ_w)·β) / lambda_scaled`.
///
/// Passing the clean covariates yields the clean-data analogue `r_i`.
pub fn residual_r(
    ds: &Dataset,
    w: &[f64],
    mu_w: &[f64],
    beta: &[f64],
    lambda_scaled: f64,
) -> Result<Vec<f64>> {
    if beta.len() != ds.d() {
        return Err(Error::dim("beta length differs from d"));
    }
    let a = weighted_design(ds, w, mu_w)?;
    Ok(ds
        .y()
        .iter()
        .zip(a.row_iter())
        .map(|(&y, row)| (y - dot(row, beta)) / lambda_scaled)
        .collect())
}

/// The program `min_β F(β)` on a fixed reweighted design.
#[derive(Debug, Clone)]
pub struct HuberProblem {
    design: Matrix,
    y: Vec<f64>,
    lambda_scaled: f64,
}

impl HuberProblem {
    pub fn new(design: Matrix, y: Vec<f64>, lambda_scaled: f64) -> Result<Self> {
        if design.rows() != y.len() {
            return Err(Error::dim("design and response lengths differ"));
        }
        if !(lambda_scaled > 0.0 && lambda_scaled.is_finite()) {
            return Err(Error::param(
                "lambda_scaled",
                format!("{lambda_scaled} must be positive"),
            ));
        }
        Ok(Self {
            design,
            y,
            lambda_scaled,
        })
    }

    pub fn from_weights(ds: &Dataset, w: &[f64], mu: &[f64], lambda_scaled: f64) -> Result<Self> {
        Self::new(weighted_design(ds, w, mu)?, ds.y().to_vec(), lambda_scaled)
    }

    pub fn design(&self) -> &Matrix {
        &self.design
    }

    pub fn lambda_scaled(&self) -> f64 {
        self.lambda_scaled
    }

    fn n(&self) -> usize {
        self.y.len()
    }

    /// `λ_o = lambda_scaled / √n`.
    pub fn lambda_o(&self) -> f64 {
        self.lambda_scaled / libm::sqrt(self.n() as f64)
    }

    /// Raw residuals `y_i − a_i·β`.
    pub fn raw_residuals(&self, beta: &[f64]) -> Vec<f64> {
        self.y
            .iter()
            .zip(self.design.row_iter())
            .map(|(&y, row)| y - dot(row, beta))
            .collect()
    }

    pub fn objective(&self, beta: &[f64]) -> f64 {
        let lo = self.lambda_o();
        let c = self.lambda_scaled;
        let sum: f64 = self
            .raw_residuals(beta)
            .into_iter()
            .map(|e| huber_loss(e / c))
            .sum();
        lo * lo * sum
    }

    /// `∇F(β) = −(λ_o/√n) Σ_i h(R_i(β))·a_i`.
    pub fn gradient(&self, beta: &[f64]) -> Vec<f64> {
        self.value_and_gradient(beta).1
    }

    pub fn value_and_gradient(&self, beta: &[f64]) -> (f64, Vec<f64>) {
        let c = self.lambda_scaled;
        let lo = self.lambda_o();
        let mut g = vec![0.0; beta.len()];
        let mut f = 0.0;
        for (&y, row) in self.y.iter().zip(self.design.row_iter()) {
            let t = (y - dot(row, beta)) / c;
            f += huber_loss(t);
            let h = huber_score(t);
            if h != 0.0 {
                axpy(h, row, &mut g);
            }
        }
        let scale = -lo / libm::sqrt(self.n() as f64);
        g.iter_mut().for_each(|v| *v *= scale);
        (lo * lo * f, g)
    }

    fn converged(&self, f: f64, gnorm: f64, tol: f64) -> bool {
        gnorm <= tol * (1.0 + libm::fabs(f))
    }

    /// Minimizes `F` from `beta0` with the configured solver.
    pub fn solve(&self, beta0: Vec<f64>, cfg: &HuberConfig) -> Fit {
        match cfg.solver {
            SolverKind::BacktrackingGd => self.gradient_descent(beta0, cfg),
            SolverKind::LbfgsLikeQuasiNewton => self.lbfgs(beta0, cfg),
        }
    }

    /// Backtracking search along `dir` from `beta` under the Armijo
    /// condition. Once the required decrease drops below the resolution of
    /// `F`, the search switches to [`Self::derivative_search`].
    fn line_search(
        &self,
        beta: &[f64],
        f: f64,
        g: &[f64],
        dir: &[f64],
        mut step: f64,
    ) -> Option<(Vec<f64>, f64, Vec<f64>, f64)> {
        let slope = dot(g, dir);
        if !(slope < 0.0) {
            return None;
        }
        let roundoff = 4.0 * f64::EPSILON * (1.0 + libm::fabs(f));
        for _ in 0..200 {
            if -ARMIJO_C * step * slope <= roundoff {
                return self.derivative_search(beta, dir, step);
            }
            let mut trial = beta.to_vec();
            axpy(step, dir, &mut trial);
            let (ft, gt) = self.value_and_gradient(&trial);
            if ft <= f + ARMIJO_C * step * slope {
                return Some((trial, ft, gt, step));
            }
            step *= ARMIJO_SHRINK;
        }
        None
    }

    /// Locates the minimizer of `t ↦ F(beta + t·dir)` by bracketing and
    /// bisecting the sign change of its derivative `∇F·dir`, which stays
    /// accurate where differences of `F` are lost to rounding.
    fn derivative_search(
        &self,
        beta: &[f64],
        dir: &[f64],
        step: f64,
    ) -> Option<(Vec<f64>, f64, Vec<f64>, f64)> {
        let at = |t: f64| {
            let mut b = beta.to_vec();
            axpy(t, dir, &mut b);
            let (f, g) = self.value_and_gradient(&b);
            (dot(&g, dir), b, f, g)
        };
        let mut lo = 0.0;
        let mut hi = step.max(f64::MIN_POSITIVE);
        let mut best = None;
        for _ in 0..200 {
            let probe = at(hi);
            if probe.0 >= 0.0 {
                break;
            }
            lo = hi;
            best = Some(probe);
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let probe = at(mid);
            if probe.0 < 0.0 {
                lo = mid;
                best = Some(probe);
            } else {
                hi = mid;
            }
        }
        best.map(|(_, b, f, g)| (b, f, g, lo))
    }

    fn gradient_descent(&self, mut beta: Vec<f64>, cfg: &HuberConfig) -> Fit {
        let (mut f, mut g) = self.value_and_gradient(&beta);
        let mut step = 1.0;
        let mut iters = 0;
        while iters < cfg.max_iter {
            if self.converged(f, norm2(&g), cfg.grad_tol) {
                break;
            }
            let dir: Vec<f64> = g.iter().map(|v| -v).collect();
            match self.line_search(&beta, f, &g, &dir, step) {
                Some((b, fb, gb, used)) => {
                    beta = b;
                    f = fb;
                    g = gb;
                    step = used * 2.0;
                }
                None => break,
            }
            iters += 1;
        }
        self.finish(beta, iters, cfg)
    }

    fn lbfgs(&self, mut beta: Vec<f64>, cfg: &HuberConfig) -> Fit {
        let (mut f, mut g) = self.value_and_gradient(&beta);
        let mut s_hist: Vec<Vec<f64>> = Vec::new();
        let mut y_hist: Vec<Vec<f64>> = Vec::new();
        let mut iters = 0;
        while iters < cfg.max_iter {
            if self.converged(f, norm2(&g), cfg.grad_tol) {
                break;
            }
            let mut dir = two_loop(&g, &s_hist, &y_hist);
            if !(dot(&dir, &g) < 0.0) {
                s_hist.clear();
                y_hist.clear();
                dir = g.iter().map(|v| -v).collect();
            }
            let Some((b, fb, gb, _)) = self.line_search(&beta, f, &g, &dir, 1.0) else {
                if s_hist.is_empty() {
                    break;
                }
                s_hist.clear();
                y_hist.clear();
                continue;
            };
            let s: Vec<f64> = b.iter().zip(&beta).map(|(x, y)| x - y).collect();
            let yk: Vec<f64> = gb.iter().zip(&g).map(|(x, y)| x - y).collect();
            if dot(&s, &yk) > 1e-14 * norm2(&s) * norm2(&yk) {
                if s_hist.len() == LBFGS_MEMORY {
                    s_hist.remove(0);
                    y_hist.remove(0);
                }
                s_hist.push(s);
                y_hist.push(yk);
            }
            beta = b;
            f = fb;
            g = gb;
            iters += 1;
        }
        self.finish(beta, iters, cfg)
    }

    fn finish(&self, beta: Vec<f64>, iters: usize, cfg: &HuberConfig) -> Fit {
        let (f, g) = self.value_and_gradient(&beta);
        let grad_norm = norm2(&g);
        Fit {
            converged: self.converged(f, grad_norm, cfg.grad_tol),
            beta,
            objective: f,
            grad_norm,
            iters,
        }
    }
}

fn two_loop(g: &[f64], s_hist: &[Vec<f64>], y_hist: &[Vec<f64>]) -> Vec<f64> {
    let mut q: Vec<f64> = g.to_vec();
    let k = s_hist.len();
    let mut alpha = vec![0.0; k];
    for i in (0..k).rev() {
        let rho = 1.0 / dot(&y_hist[i], &s_hist[i]);
        alpha[i] = rho * dot(&s_hist[i], &q);
        axpy(-alpha[i], &y_hist[i], &mut q);
    }
    if let (Some(s), Some(y)) = (s_hist.last(), y_hist.last()) {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for i in 0..k {
        let rho = 1.0 / dot(&y_hist[i], &s_hist[i]);
        let beta = rho * dot(&y_hist[i], &q);
        axpy(alpha[i] - beta, &s_hist[i], &mut q);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

/// Raw solver output.
#[derive(Debug, Clone, PartialEq)]
pub struct Fit {
    pub beta: Vec<f64>,
    pub objective: f64,
    pub grad_norm: f64,
    pub iters: usize,
    pub converged: bool,
}

/// Plug-in threshold `1.345 · 1.4826 · median|r_i|`, where `r` are the
/// residuals of a least-squares fit on the reweighted design refitted
/// after dropping the `⌈εn⌉` largest absolute residuals. Exact data (zero
/// residual scale) falls back to `1.345 · (1 + rms(y))`, large enough to
/// keep every residual in the quadratic zone.
pub fn default_lambda_scaled(design: &Matrix, y: &[f64], eps: f64) -> Result<f64> {
    let n = y.len();
    let beta0 = least_squares(design, y)?;
    let resid: Vec<f64> = y
        .iter()
        .zip(design.row_iter())
        .map(|(&yi, row)| yi - dot(row, &beta0))
        .collect();
    let drop = outlier_count(eps, n).min(n.saturating_sub(design.cols() + 1));
    let beta1 = if drop > 0 {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| libm::fabs(resid[i]).total_cmp(&libm::fabs(resid[j])));
        let kept = &order[..n - drop];
        let rows: Vec<&[f64]> = kept.iter().map(|&i| design.row(i)).collect();
        let sub = Matrix::from_rows(&rows)?;
        let ys: Vec<f64> = kept.iter().map(|&i| y[i]).collect();
        least_squares(&sub, &ys)?
    } else {
        beta0
    };
    let abs_resid: Vec<f64> = y
        .iter()
        .zip(design.row_iter())
        .map(|(&yi, row)| libm::fabs(yi - dot(row, &beta1)))
        .collect();
    let scale = MAD_TO_SIGMA * median(&abs_resid);
    let rms = libm::sqrt(y.iter().map(|v| v * v).sum::<f64>() / n as f64);
    if scale > 1e-12 * (1.0 + rms) {
        Ok(HUBER_EFFICIENCY_CONSTANT * scale)
    } else {
        Ok(HUBER_EFFICIENCY_CONSTANT * (1.0 + rms))
    }
}

fn start_point(cfg: &HuberConfig, d: usize) -> Result<Vec<f64>> {
    match &cfg.beta0 {
        Some(b) if b.len() != d => Err(Error::dim(format!(
            "beta0 has length {}, expected {d}",
            b.len()
        ))),
        Some(b) => Ok(b.clone()),
        None => Ok(vec![0.0; d]),
    }
}

fn resolve_lambda(cfg: &HuberConfig, design: &Matrix, y: &[f64], eps: f64) -> Result<f64> {
    match cfg.lambda_scaled {
        Some(l) => Ok(l),
        None => default_lambda_scaled(design, y, eps),
    }
}

/// Weighted Huber fit for explicit weights and center.
pub fn weighted_huber_fit_with(
    ds: &Dataset,
    w: &WeightVector,
    mu_w: &[f64],
    cfg: &HuberConfig,
) -> Result<EstimationResult> {
    cfg.validate()?;
    let design = weighted_design(ds, w.as_slice(), mu_w)?;
    let lambda = resolve_lambda(cfg, &design, ds.y(), w.eps())?;
    let problem = HuberProblem::new(design, ds.y().to_vec(), lambda)?;
    let fit = problem.solve(start_point(cfg, ds.d())?, cfg);
    Ok(EstimationResult {
        beta_hat: fit.beta,
        objective: fit.objective,
        grad_norm: fit.grad_norm,
        iters: fit.iters,
        converged: fit.converged,
        lambda_scaled: lambda,
        weights_used: Some(w.clone()),
        mu_w_used: Some(mu_w.to_vec()),
        theta_hat: None,
        robust_weights: None,
    })
}

/// Minimizes `F` on the design reweighted by a weight-stage result.
pub fn weighted_huber_fit(
    ds: &Dataset,
    rw: &RobustWeightResult,
    cfg: &HuberConfig,
) -> Result<EstimationResult> {
    weighted_huber_fit_with(ds, &rw.w, &rw.mu_w, cfg)
}

/// Soft threshold `sign(e)·max(|e| − c, 0)`.
#[inline]
pub fn soft_threshold(e: f64, c: f64) -> f64 {
    libm::copysign((libm::fabs(e) - c).max(0.0), e)
}

/// Joint `(θ, β)` fit for explicit weights and center.
///
/// Alternates the closed-form `θ`-step `√n θ_i = soft(e_i, λ_o√n)` with a
/// least-squares `β`-step on `y − √n θ`, stopping on the same relative
/// gradient test as the direct solver.
pub fn joint_fit_with(
    ds: &Dataset,
    w: &WeightVector,
    mu_w: &[f64],
    cfg: &HuberConfig,
) -> Result<EstimationResult> {
    cfg.validate()?;
    let design = weighted_design(ds, w.as_slice(), mu_w)?;
    let lambda = resolve_lambda(cfg, &design, ds.y(), w.eps())?;
    let problem = HuberProblem::new(design, ds.y().to_vec(), lambda)?;
    let a = problem.design();
    let mut gram = a.gram();
    let chol = match gram.cholesky() {
        Ok(l) => l,
        Err(_) => {
            let scale = (0..gram.rows())
                .map(|i| gram[(i, i)])
                .fold(1.0_f64, f64::max);
            for i in 0..gram.rows() {
                gram[(i, i)] += 1e-10 * scale;
            }
            gram.cholesky()?
        }
    };
    let solve = |rhs: &[f64]| -> Vec<f64> {
        // forward/back substitution with the cached factor
        let n = chol.rows();
        let mut z = rhs.to_vec();
        for i in 0..n {
            let mut s = z[i];
            for k in 0..i {
                s -= chol[(i, k)] * z[k];
            }
            z[i] = s / chol[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in (i + 1)..n {
                s -= chol[(k, i)] * z[k];
            }
            z[i] = s / chol[(i, i)];
        }
        z
    };

    let mut beta = start_point(cfg, ds.d())?;
    let mut iters = 0;
    let mut shifted = vec![0.0; ds.n()];
    loop {
        let (f, g) = problem.value_and_gradient(&beta);
        if problem.converged(f, norm2(&g), cfg.grad_tol) || iters >= cfg.max_iter {
            break;
        }
        let resid = problem.raw_residuals(&beta);
        for ((s, &y), &e) in shifted.iter_mut().zip(ds.y()).zip(&resid) {
            *s = y - soft_threshold(e, lambda);
        }
        let next = solve(&a.tr_matvec(&shifted));
        iters += 1;
        let moved = next.iter().zip(&beta).any(|(x, y)| x != y);
        beta = next;
        if !moved {
            break;
        }
    }

    let sqrt_n = libm::sqrt(ds.n() as f64);
    let theta: Vec<f64> = problem
        .raw_residuals(&beta)
        .into_iter()
        .map(|e| soft_threshold(e, lambda) / sqrt_n)
        .collect();
    let (f, g) = problem.value_and_gradient(&beta);
    let grad_norm = norm2(&g);
    Ok(EstimationResult {
        converged: problem.converged(f, grad_norm, cfg.grad_tol),
        beta_hat: beta,
        objective: f,
        grad_norm,
        iters,
        lambda_scaled: lambda,
        weights_used: Some(w.clone()),
        mu_w_used: Some(mu_w.to_vec()),
        theta_hat: Some(theta),
        robust_weights: None,
    })
}

/// Joint `(θ, β)` fit on the design reweighted by a weight-stage result.
pub fn joint_fit(
    ds: &Dataset,
    rw: &RobustWeightResult,
    cfg: &HuberConfig,
) -> Result<EstimationResult> {
    joint_fit_with(ds, &rw.w, &rw.mu_w, cfg)
}

/// Objective of the joint program at `(θ, β)`.
pub fn joint_objective(problem: &HuberProblem, theta: &[f64], beta: &[f64]) -> f64 {
    let n = theta.len() as f64;
    let sqrt_n = libm::sqrt(n);
    let fit: f64 = problem
        .raw_residuals(beta)
        .iter()
        .zip(theta)
        .map(|(e, t)| {
            let r = e - sqrt_n * t;
            r * r
        })
        .sum();
    fit / (2.0 * n) + problem.lambda_o() * theta.iter().map(|t| libm::fabs(*t)).sum::<f64>()
}

/// Robust weights followed by a weighted Huber fit.
pub fn two_step_estimate(
    ds: &Dataset,
    rw_cfg: &RobustWeightConfig,
    huber_cfg: &HuberConfig,
) -> Result<EstimationResult> {
    let rw = robust_weights(ds, rw_cfg)?;
    let mut est = weighted_huber_fit(ds, &rw, huber_cfg)?;
    est.robust_weights = Some(rw);
    Ok(est)
}

/// Ordinary least squares `y ≈ Xβ` (no intercept, matching the model).
pub fn ols_fit(ds: &Dataset) -> Result<EstimationResult> {
    let beta = least_squares(ds.x(), ds.y())?;
    let n = ds.n() as f64;
    let resid: Vec<f64> = ds
        .y()
        .iter()
        .zip(ds.x().row_iter())
        .map(|(&y, row)| y - dot(row, &beta))
        .collect();
    let objective = resid.iter().map(|r| r * r).sum::<f64>() / (2.0 * n);
    let grad: Vec<f64> = ds
        .x()
        .tr_matvec(&resid)
        .into_iter()
        .map(|g| -g / n)
        .collect();
    Ok(EstimationResult {
        beta_hat: beta,
        objective,
        grad_norm: norm2(&grad),
        iters: 1,
        converged: true,
        lambda_scaled: 0.0,
        weights_used: None,
        mu_w_used: None,
        theta_hat: None,
        robust_weights: None,
    })
}

/// Huber regression without a weight stage: uniform weights centered at
/// the sample mean.
pub fn plain_huber_fit(ds: &Dataset, cfg: &HuberConfig) -> Result<EstimationResult> {
    let w = WeightVector::uniform(ds.n(), 0.0)?;
    weighted_huber_fit_with(ds, &w, &ds.sample_mean(), cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds_from(xs: &[&[f64]], y: &[f64]) -> Dataset {
        Dataset::new(y.to_vec(), Matrix::from_rows(xs).unwrap()).unwrap()
    }

    #[test]
    fn loss_and_score_values() {
        assert_eq!(huber_loss(0.0), 0.0);
        assert_eq!(huber_score(0.0), 0.0);
        assert_eq!(huber_loss(1.0), 0.5);
        assert_eq!(huber_loss(-3.0), 2.5);
        assert_eq!(huber_score(-3.0), -1.0);
    }

    #[test]
    fn score_matches_central_differences() {
        for t in [0.5, -0.5, 2.0, -2.0, 0.999, -0.999] {
            let h = 1e-7;
            let fd = (huber_loss(t + h) - huber_loss(t - h)) / (2.0 * h);
            assert!((fd - huber_score(t)).abs() < 1e-6, "t = {t}");
        }
    }

    #[test]
    fn residuals_at_zero_beta() {
        let ds = ds_from(&[&[1.0], &[2.0], &[3.0]], &[3.0, -6.0, 9.0]);
        let w = [1.0 / 3.0; 3];
        let r = residual_r(&ds, &w, &[2.0], &[0.0], 3.0).unwrap();
        assert_eq!(r, vec![1.0, -2.0, 3.0]);
        // uniform weights, zero center: ordinary residuals
        let r = residual_r(&ds, &w, &[0.0], &[2.0], 1.0).unwrap();
        for (ri, e) in r.iter().zip([1.0, -10.0, 3.0]) {
            assert!((ri - e).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_line_in_quadratic_zone() {
        let xs: Vec<[f64; 1]> = [-1.0, -0.5, 0.2, 0.6, 1.0].iter().map(|&x| [x]).collect();
        let y: Vec<f64> = xs.iter().map(|r| 2.0 * r[0]).collect();
        let ds = Dataset::new(y, Matrix::from_rows(&xs).unwrap()).unwrap();
        let w = WeightVector::uniform(5, 0.0).unwrap();
        let cfg = HuberConfig {
            lambda_scaled: Some(10.0),
            grad_tol: 1e-13,
            ..HuberConfig::default()
        };
        let est = weighted_huber_fit_with(&ds, &w, &[0.0], &cfg).unwrap();
        assert!((est.beta_hat[0] - 2.0).abs() < 1e-8);
        assert!(est.converged);
    }

    #[test]
    fn ols_closed_form() {
        // slope Σxy/Σx² = (1 + 4 + 9.9)/14
        let ds = ds_from(&[&[1.0], &[2.0], &[3.0]], &[1.0, 2.0, 3.3]);
        let est = ols_fit(&ds).unwrap();
        assert!((est.beta_hat[0] - 14.9 / 14.0).abs() < 1e-12);
    }

    #[test]
    fn two_points_exact_recovery() {
        let ds = ds_from(&[&[-1.5], &[1.5]], &[-3.0, 3.0]);
        let rw_cfg =
            RobustWeightConfig::new(0.0, crate::robust_weights::CovarianceMode::IdentityCov, 1);
        let cfg = HuberConfig {
            grad_tol: 1e-13,
            ..HuberConfig::default()
        };
        let est = two_step_estimate(&ds, &rw_cfg, &cfg).unwrap();
        assert!((est.beta_hat[0] - 2.0).abs() < 1e-8, "{:?}", est.beta_hat);
    }

    #[test]
    fn bad_config_rejected() {
        let ds = ds_from(&[&[1.0], &[2.0]], &[1.0, 2.0]);
        let cfg = HuberConfig {
            lambda_scaled: Some(0.0),
            ..HuberConfig::default()
        };
        assert!(plain_huber_fit(&ds, &cfg).is_err());
        let cfg = HuberConfig {
            beta0: Some(vec![0.0, 0.0]),
            ..HuberConfig::default()
        };
        assert!(plain_huber_fit(&ds, &cfg).is_err());
    }
}
