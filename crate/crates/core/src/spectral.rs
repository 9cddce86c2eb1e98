//! Linear-algebra kernels for the weight stage: coordinate-wise medians,
//! weighted centered second moments, the top eigenpair, and the trimmed
//! dual objective.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{outlier_count, Dataset};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, normalize, Matrix};
use crate::rng;
use crate::stats::lower_median;

/// Relative change below which a power-iteration run counts as stalled.
const STALL_TOL: f64 = 1e-14;

/// Coordinate-wise lower median (index `⌊(n−1)/2⌋` of each sorted column).
pub fn coordwise_median(x: &Matrix) -> Result<Vec<f64>> {
    if x.rows() == 0 {
        return Err(Error::TooFewRows { min: 1, got: 0 });
    }
    Ok((0..x.cols()).map(|j| lower_median(&x.column(j))).collect())
}

/// `M = Σ_i w_i (X_i − ν)(X_i − ν)ᵀ` and the center `ν` it was built at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondMoment {
    pub matrix: Matrix,
    pub center: Vec<f64>,
}

/// Exact weighted outer-product sum in row order; `O(n d²)`.
///
/// `w` need not lie on the simplex, which keeps the map linear in `w`.
pub fn weighted_second_moment(ds: &Dataset, w: &[f64], nu: &[f64]) -> Result<SecondMoment> {
    let d = ds.d();
    if w.len() != ds.n() || nu.len() != d {
        return Err(Error::dim(format!(
            "weights {} / center {} do not match a {}x{} dataset",
            w.len(),
            nu.len(),
            ds.n(),
            d
        )));
    }
    let mut m = Matrix::zeros(d, d);
    let mut diff = vec![0.0; d];
    for (row, &wi) in ds.x().row_iter().zip(w) {
        if wi == 0.0 {
            continue;
        }
        for j in 0..d {
            diff[j] = row[j] - nu[j];
        }
        for j in 0..d {
            let a = wi * diff[j];
            for k in j..d {
                m[(j, k)] += a * diff[k];
            }
        }
    }
    m.mirror_upper();
    Ok(SecondMoment {
        matrix: m,
        center: nu.to_vec(),
    })
}

/// Top eigenpair estimate from power iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Eigenpair {
    pub value: f64,
    pub vector: Vec<f64>,
    /// `‖Mv − λv‖₂` at the returned vector.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

struct Run {
    value: f64,
    vector: Vec<f64>,
    residual: f64,
    iterations: usize,
    converged: bool,
}

fn power_run(m: &Matrix, mut v: Vec<f64>, tol: f64, max_iter: usize) -> Run {
    normalize(&mut v);
    let mut best = Run {
        value: f64::NEG_INFINITY,
        vector: v.clone(),
        residual: f64::INFINITY,
        iterations: 0,
        converged: false,
    };
    for it in 1..=max_iter.max(1) {
        let mv = m.matvec(&v);
        let lambda = dot(&v, &mv);
        let residual = norm2(
            &mv.iter()
                .zip(&v)
                .map(|(a, b)| a - lambda * b)
                .collect::<Vec<_>>(),
        );
        if residual < best.residual {
            best = Run {
                value: lambda,
                vector: v.clone(),
                residual,
                iterations: it,
                converged: false,
            };
        }
        if residual <= tol * lambda.max(1.0) {
            best.converged = true;
            best.iterations = it;
            return best;
        }
        let mut next = mv;
        if normalize(&mut next) == 0.0 {
            // v lies in the null space; residual was zero and returned above
            break;
        }
        let change = norm2(&next.iter().zip(&v).map(|(a, b)| a - b).collect::<Vec<_>>());
        v = next;
        if change < STALL_TOL {
            break;
        }
    }
    best.iterations = max_iter;
    best
}

fn random_unit(d: usize, rng: &mut rng::Rng) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        if normalize(&mut v) > 0.0 {
            return v;
        }
    }
}

/// Power iteration for the largest eigenvalue of a symmetric PSD matrix.
///
/// Stops when `‖Mv − λv‖₂ ≤ tol·max(λ, 1)`. A run that stalls or runs out
/// of iterations is retried once from a second random start; if neither
/// converges the lower-residual iterate is returned with
/// `converged = false`.
pub fn top_eigenpair(m: &Matrix, tol: f64, max_iter: usize, seed: u64) -> Result<Eigenpair> {
    if !m.is_square() || m.rows() == 0 {
        return Err(Error::dim("top_eigenpair needs a non-empty square matrix"));
    }
    let mut rng = rng::seeded(seed);
    let d = m.rows();
    let first = power_run(m, random_unit(d, &mut rng), tol, max_iter);
    let run = if first.converged {
        first
    } else {
        let second = power_run(m, random_unit(d, &mut rng), tol, max_iter);
        if second.converged || second.residual < first.residual {
            second
        } else {
            first
        }
    };
    Ok(Eigenpair {
        value: run.value,
        vector: run.vector,
        residual: run.residual,
        iterations: run.iterations,
        converged: run.converged,
    })
}

/// Squared projections `((X_i − ν)·v)²`.
pub fn direction_scores(ds: &Dataset, nu: &[f64], v: &[f64]) -> Vec<f64> {
    ds.x()
        .row_iter()
        .map(|row| {
            let p: f64 = row
                .iter()
                .zip(nu)
                .zip(v)
                .map(|((x, c), u)| (x - c) * u)
                .sum();
            p * p
        })
        .collect()
}

/// Dual value of the rank-one feasible point `M = vvᵀ`: the average of the
/// smallest `⌊(1−ε)n⌋` scores `((X_i − ν)·v)²`. Lower-bounds
/// `λ_max(Σ w_i (X_i−ν)(X_i−ν)ᵀ)` for every `w ∈ Δ_{n,ε}`.
pub fn dual_objective(ds: &Dataset, nu: &[f64], v: &[f64], eps: f64) -> Result<f64> {
    if nu.len() != ds.d() || v.len() != ds.d() {
        return Err(Error::dim("center and direction must have length d"));
    }
    let norm = norm2(v);
    if !(libm::fabs(norm - 1.0) <= 1e-8) {
        return Err(Error::param("v", format!("norm {norm} is not 1")));
    }
    if !(eps.is_finite() && (0.0..1.0).contains(&eps)) {
        return Err(Error::param("eps", format!("{eps} must lie in [0, 1)")));
    }
    let mut scores = direction_scores(ds, nu, v);
    scores.sort_by(f64::total_cmp);
    let n = ds.n();
    let k = n.saturating_sub(outlier_count(eps, n)).max(1);
    Ok(scores[..k].iter().sum::<f64>() / k as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_examples() {
        let x = Matrix::from_rows(&[[1.0, 10.0], [2.0, 20.0], [3.0, 30.0]]).unwrap();
        assert_eq!(coordwise_median(&x).unwrap(), vec![2.0, 20.0]);
        let single = Matrix::from_rows(&[[4.0, -1.0]]).unwrap();
        assert_eq!(coordwise_median(&single).unwrap(), vec![4.0, -1.0]);
        let col = Matrix::from_rows(&[[4.0], [1.0], [3.0], [2.0]]).unwrap();
        assert_eq!(coordwise_median(&col).unwrap(), vec![2.0]);
    }

    #[test]
    fn two_symmetric_points() {
        let x = Matrix::from_rows(&[[-1.0], [1.0]]).unwrap();
        let ds = Dataset::new(vec![0.0, 0.0], x).unwrap();
        let m = weighted_second_moment(&ds, &[0.5, 0.5], &[0.0]).unwrap();
        assert_eq!(m.matrix.as_slice(), &[1.0]);
    }

    #[test]
    fn one_hot_weight() {
        let x = Matrix::from_rows(&[[1.0, 2.0], [3.0, -1.0], [0.5, 0.5]]).unwrap();
        let ds = Dataset::new(vec![0.0; 3], x).unwrap();
        let nu = [0.5, 1.0];
        let m = weighted_second_moment(&ds, &[0.0, 1.0, 0.0], &nu).unwrap();
        let diff = [2.5, -2.0];
        for j in 0..2 {
            for k in 0..2 {
                assert_eq!(m.matrix[(j, k)], diff[j] * diff[k]);
            }
        }
    }

    #[test]
    fn identity_and_diagonal() {
        let e = top_eigenpair(&Matrix::identity(3), 1e-10, 1000, 1).unwrap();
        assert!((e.value - 1.0).abs() < 1e-12);
        assert!(e.residual <= 1e-10);
        let e = top_eigenpair(&Matrix::diag(&[3.0, 1.0]), 1e-12, 10_000, 2).unwrap();
        assert!(e.converged);
        assert!((e.value - 3.0).abs() < 1e-8);
        assert!((e.vector[0].abs() - 1.0).abs() < 1e-8);
        assert!(e.vector[1].abs() < 1e-8);
    }

    #[test]
    fn zero_matrix_converges() {
        let e = top_eigenpair(&Matrix::zeros(2, 2), 1e-10, 100, 3).unwrap();
        assert!(e.converged);
        assert_eq!(e.value, 0.0);
    }

    #[test]
    fn budget_exhaustion_is_flagged() {
        // nearly degenerate top pair: far too slow for 3 iterations
        let m = Matrix::diag(&[1.0, 0.999_999, 0.5]);
        let e = top_eigenpair(&m, 1e-14, 3, 4).unwrap();
        assert!(!e.converged);
        assert!(e.value <= 1.0 + 1e-12 && e.value > 0.5);
    }

    #[test]
    fn dual_objective_examples() {
        let x = Matrix::from_rows(&[[0.0], [0.0], [0.0], [10.0]]).unwrap();
        let ds = Dataset::new(vec![0.0; 4], x).unwrap();
        assert_eq!(dual_objective(&ds, &[0.0], &[1.0], 0.25).unwrap(), 0.0);
        let x = Matrix::from_rows(&[[2.0, 1.0], [2.0, 1.0]]).unwrap();
        let ds = Dataset::new(vec![0.0; 2], x).unwrap();
        let v = [core::f64::consts::FRAC_1_SQRT_2; 2];
        assert_eq!(dual_objective(&ds, &[2.0, 1.0], &v, 0.1).unwrap(), 0.0);
        assert!(dual_objective(&ds, &[2.0, 1.0], &[1.0, 1.0], 0.1).is_err());
    }
}
