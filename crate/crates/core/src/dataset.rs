//! Data under the strong contamination model.
//!
//! A clean draw follows `y_i = x_i·β* + ξ_i`. An adversary then replaces
//! `o = ⌈εn⌉` rows; the replaced rows are bookkept as a covariate shift
//! `ϱ_i` and a response shift `√n·θ_i`, so that every row of the observed
//! data satisfies
//!
//! ```text
//! y_i = (x_i + ϱ_i)·β* + ξ_i + √n·θ_i
//! ```
//!
//! with `ϱ_i = 0, θ_i = 0` on the clean index set. [`Dataset`] is the
//! observed view the estimator sees; [`OracleInstance`] carries the ground
//! truth for diagnostics.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{check_eps, Error, Result};
use crate::linalg::{dot, norm2, Matrix};
use crate::rng::{self, Rng};

/// Observed responses and covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    y: Vec<f64>,
    x: Matrix,
}

impl Dataset {
    /// Validates shape (`n ≥ 2`, `d ≥ 1`, matching lengths) and finiteness.
    pub fn new(y: Vec<f64>, x: Matrix) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::dim(format!(
                "{} responses but {} covariate rows",
                y.len(),
                x.rows()
            )));
        }
        if y.len() < 2 {
            return Err(Error::TooFewRows {
                min: 2,
                got: y.len(),
            });
        }
        if x.cols() == 0 {
            return Err(Error::dim("dataset needs at least one covariate"));
        }
        for (i, (yi, row)) in y.iter().zip(x.row_iter()).enumerate() {
            if !yi.is_finite() {
                return Err(Error::NonFinite { row: i, col: 0 });
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { row: i, col: j + 1 });
            }
        }
        Ok(Self { y, x })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.y.len()
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.x.cols()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn sample_mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.d()];
        for r in self.x.row_iter() {
            crate::linalg::axpy(1.0, r, &mut m);
        }
        let n = self.n() as f64;
        m.iter_mut().for_each(|v| *v /= n);
        m
    }
}

/// Covariate distribution of the clean design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DesignSpec {
    GaussianIdentity,
    /// Independent ±1 coordinates.
    Rademacher,
    /// Independent `U(−√3, √3)` coordinates (unit variance).
    UniformScaled,
    /// Independent Student-t coordinates rescaled to unit variance.
    /// `df > 4` keeps the fourth moment finite.
    StudentT {
        df: f64,
    },
    GaussianCov {
        cov: Matrix,
    },
}

/// Distribution of the regression noise `ξ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseSpec {
    Gaussian { sigma: f64 },
    StudentT { df: f64, scale: f64 },
    Laplace { scale: f64 },
}

/// Clean data generator.
///
/// `sigma_sq`, `sigma_c` and `m4` record the moment bounds the design is
/// meant to satisfy (`E|ξ| ≤ σ²`, `Σ ⪯ σ_c² I`, fourth-moment ratio
/// `≤ m₄⁴`). They describe the draw and are not read by the estimators,
/// which estimate any scale they need from the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub design: DesignSpec,
    /// Covariate mean. Empty means the zero vector.
    #[serde(default)]
    pub mu: Vec<f64>,
    pub noise: NoiseSpec,
    #[serde(default = "one")]
    pub sigma_sq: f64,
    #[serde(default = "one")]
    pub sigma_c: f64,
    #[serde(default = "gaussian_m4")]
    pub m4: f64,
}

fn one() -> f64 {
    1.0
}

fn gaussian_m4() -> f64 {
    // E[z⁴] = 3 for a standard normal
    libm::pow(3.0, 0.25)
}

impl GeneratorSpec {
    pub fn new(design: DesignSpec, noise: NoiseSpec) -> Self {
        Self {
            design,
            mu: Vec::new(),
            noise,
            sigma_sq: 1.0,
            sigma_c: 1.0,
            m4: gaussian_m4(),
        }
    }

    /// `N(0, I)` covariates with `N(0, σ²)` noise.
    pub fn gaussian(sigma: f64) -> Self {
        Self::new(DesignSpec::GaussianIdentity, NoiseSpec::Gaussian { sigma })
    }

    pub fn validate(&self) -> Result<()> {
        match &self.design {
            DesignSpec::StudentT { df } if !(*df > 4.0) => {
                return Err(Error::param(
                    "design.df",
                    format!("{df} must exceed 4 for a finite fourth moment"),
                ));
            }
            DesignSpec::GaussianCov { cov } => {
                if !cov.is_square() {
                    return Err(Error::dim("design covariance must be square"));
                }
                cov.cholesky()?;
            }
            _ => {}
        }
        match self.noise {
            NoiseSpec::Gaussian { sigma } if !(sigma >= 0.0 && sigma.is_finite()) => {
                return Err(Error::param("noise.sigma", format!("{sigma} is not >= 0")));
            }
            NoiseSpec::StudentT { df, scale } => {
                if !(df > 1.0) {
                    return Err(Error::param("noise.df", format!("{df} must exceed 1")));
                }
                if !(scale >= 0.0 && scale.is_finite()) {
                    return Err(Error::param("noise.scale", format!("{scale} is not >= 0")));
                }
            }
            NoiseSpec::Laplace { scale } if !(scale >= 0.0 && scale.is_finite()) => {
                return Err(Error::param("noise.scale", format!("{scale} is not >= 0")));
            }
            _ => {}
        }
        for (name, v) in [
            ("sigma_sq", self.sigma_sq),
            ("sigma_c", self.sigma_c),
            ("m4", self.m4),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("{v} must be positive")));
            }
        }
        Ok(())
    }

    /// Covariate mean as a length-`d` vector.
    pub fn mean(&self, d: usize) -> Vec<f64> {
        if self.mu.is_empty() {
            vec![0.0; d]
        } else {
            self.mu.clone()
        }
    }

    /// Population covariance of the design.
    pub fn covariance(&self, d: usize) -> Matrix {
        match &self.design {
            DesignSpec::GaussianCov { cov } => cov.clone(),
            _ => Matrix::identity(d),
        }
    }
}

/// Replacement strategy for the `o` corrupted rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AttackSpec {
    /// No rows are touched.
    None,
    /// Every corrupted row becomes exactly `(center_x, center_y)`.
    PointCluster { center_x: Vec<f64>, center_y: f64 },
    /// Covariates pushed `scale` units along `β*/‖β*‖`, responses set to
    /// `response_flip · X_i·β* + ξ_i`. A negative flip reverses the slope
    /// the outliers advertise.
    Leverage { scale: f64, response_flip: f64 },
    /// Responses shifted by `magnitude`, covariates untouched.
    ResponseOnly { magnitude: f64 },
    /// Covariates shifted by `magnitude` along `direction` (default
    /// `β*/‖β*‖`) while responses keep their clean values.
    MeanShift {
        #[serde(default)]
        direction: Option<Vec<f64>>,
        magnitude: f64,
    },
}

impl AttackSpec {
    /// Adaptive attacks read the clean instance (`x_i`, `ξ_i`, `β*`);
    /// oblivious ones only see `(n, d)` and their own parameters.
    pub fn is_adaptive(&self) -> bool {
        !matches!(self, AttackSpec::None | AttackSpec::PointCluster { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            AttackSpec::None => "none",
            AttackSpec::PointCluster { .. } => "point_cluster",
            AttackSpec::Leverage { .. } => "leverage",
            AttackSpec::ResponseOnly { .. } => "response_only",
            AttackSpec::MeanShift { .. } => "mean_shift",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContaminationSpec {
    pub eps: f64,
    pub attack: AttackSpec,
    #[serde(default)]
    pub seed: u64,
}

impl ContaminationSpec {
    pub fn clean() -> Self {
        Self {
            eps: 0.0,
            attack: AttackSpec::None,
            seed: 0,
        }
    }
}

/// `o = ⌈εn⌉`, guarded against `ε·n` landing a rounding step above an
/// integer.
pub fn outlier_count(eps: f64, n: usize) -> usize {
    let raw = eps * n as f64;
    let rounded = libm::round(raw);
    if libm::fabs(raw - rounded) <= 1e-9 * (1.0 + raw) {
        rounded as usize
    } else {
        libm::ceil(raw) as usize
    }
}

/// Ground truth behind a [`Dataset`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleInstance {
    pub dataset: Dataset,
    pub beta_star: Vec<f64>,
    pub x_clean: Matrix,
    pub xi: Vec<f64>,
    /// Sorted corrupted indices `I_o`.
    pub outlier_idx: Vec<usize>,
    /// Sorted clean indices `I_G`.
    pub clean_idx: Vec<usize>,
    pub rho: Matrix,
    pub theta_resp: Vec<f64>,
    pub generator: GeneratorSpec,
    pub seed: u64,
    pub contamination: Option<ContaminationSpec>,
}

impl OracleInstance {
    pub fn n(&self) -> usize {
        self.dataset.n()
    }

    pub fn d(&self) -> usize {
        self.dataset.d()
    }

    /// Population covariate mean `μ`.
    pub fn mu(&self) -> Vec<f64> {
        self.generator.mean(self.d())
    }

    /// Clean response `x_i·β* + ξ_i`.
    pub fn clean_response(&self, i: usize) -> f64 {
        dot(self.x_clean.row(i), &self.beta_star) + self.xi[i]
    }

    /// The uncontaminated dataset `(x_clean, x_clean·β* + ξ)`.
    pub fn clean_dataset(&self) -> Dataset {
        let y = (0..self.n()).map(|i| self.clean_response(i)).collect();
        Dataset {
            y,
            x: self.x_clean.clone(),
        }
    }

    /// `max_i |y_i − X_i·β* − ξ_i − √n θ_i|`.
    pub fn model_identity_residual(&self) -> f64 {
        let sqrt_n = libm::sqrt(self.n() as f64);
        (0..self.n())
            .map(|i| {
                let xi_row = self.dataset.x.row(i);
                libm::fabs(
                    self.dataset.y[i]
                        - dot(xi_row, &self.beta_star)
                        - self.xi[i]
                        - sqrt_n * self.theta_resp[i],
                )
            })
            .fold(0.0, f64::max)
    }

    pub fn is_outlier(&self, i: usize) -> bool {
        self.outlier_idx.binary_search(&i).is_ok()
    }
}

fn draw_design(design: &DesignSpec, chol: Option<&Matrix>, d: usize, rng: &mut Rng) -> Vec<f64> {
    match design {
        DesignSpec::GaussianIdentity => (0..d).map(|_| StandardNormal.sample(rng)).collect(),
        DesignSpec::Rademacher => (0..d)
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect(),
        DesignSpec::UniformScaled => {
            let h = libm::sqrt(3.0);
            (0..d).map(|_| rng.random_range(-h..h)).collect()
        }
        DesignSpec::StudentT { df } => {
            let t = StudentT::new(*df).expect("df validated");
            let scale = libm::sqrt((df - 2.0) / df);
            (0..d).map(|_| scale * t.sample(rng)).collect()
        }
        DesignSpec::GaussianCov { .. } => {
            let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
            chol.expect("factor computed").matvec(&z)
        }
    }
}

fn draw_noise(noise: &NoiseSpec, rng: &mut Rng) -> f64 {
    match *noise {
        NoiseSpec::Gaussian { sigma } => {
            let z: f64 = StandardNormal.sample(rng);
            sigma * z
        }
        NoiseSpec::StudentT { df, scale } => {
            scale * StudentT::new(df).expect("df validated").sample(rng)
        }
        NoiseSpec::Laplace { scale } => {
            // inverse CDF on the open interval (−1/2, 1/2)
            let mut u: f64 = rng.random::<f64>() - 0.5;
            while libm::fabs(u) >= 0.5 {
                u = rng.random::<f64>() - 0.5;
            }
            -scale * libm::copysign(1.0, u) * libm::log(1.0 - 2.0 * libm::fabs(u))
        }
    }
}

/// Draws a clean instance `y_i = x_i·β* + ξ_i` with `I_o = ∅`.
pub fn generate(
    spec: &GeneratorSpec,
    n: usize,
    d: usize,
    beta_star: &[f64],
    seed: u64,
) -> Result<OracleInstance> {
    if n < 2 {
        return Err(Error::TooFewRows { min: 2, got: n });
    }
    if d == 0 {
        return Err(Error::dim("d must be at least 1"));
    }
    if beta_star.len() != d {
        return Err(Error::dim(format!(
            "beta_star has length {}, expected {d}",
            beta_star.len()
        )));
    }
    spec.validate()?;
    if !spec.mu.is_empty() && spec.mu.len() != d {
        return Err(Error::dim(format!(
            "mu has length {}, expected {d}",
            spec.mu.len()
        )));
    }
    let chol = match &spec.design {
        DesignSpec::GaussianCov { cov } => {
            if cov.rows() != d {
                return Err(Error::dim(format!(
                    "design covariance is {}x{}, expected {d}x{d}",
                    cov.rows(),
                    cov.cols()
                )));
            }
            Some(cov.cholesky()?)
        }
        _ => None,
    };
    let mu = spec.mean(d);
    let mut rng = rng::seeded(seed);
    let mut x = Matrix::zeros(n, d);
    let mut xi = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let z = draw_design(&spec.design, chol.as_ref(), d, &mut rng);
        let row = x.row_mut(i);
        for j in 0..d {
            row[j] = mu[j] + z[j];
        }
        let e = draw_noise(&spec.noise, &mut rng);
        y.push(dot(x.row(i), beta_star) + e);
        xi.push(e);
    }
    let dataset = Dataset::new(y, x.clone())?;
    Ok(OracleInstance {
        dataset,
        beta_star: beta_star.to_vec(),
        x_clean: x,
        xi,
        outlier_idx: Vec::new(),
        clean_idx: (0..n).collect(),
        rho: Matrix::zeros(n, d),
        theta_resp: vec![0.0; n],
        generator: spec.clone(),
        seed,
        contamination: None,
    })
}

fn beta_direction(beta: &[f64]) -> Vec<f64> {
    let norm = norm2(beta);
    if norm > 0.0 {
        beta.iter().map(|b| b / norm).collect()
    } else {
        let mut e = vec![0.0; beta.len()];
        e[0] = 1.0;
        e
    }
}

/// Replacement row for an oblivious attack; depends only on `d` and the attack parameters.
fn oblivious_row(attack: &AttackSpec, d: usize) -> Result<(Vec<f64>, f64)> {
    match attack {
        AttackSpec::PointCluster { center_x, center_y } => {
            if center_x.len() != d {
                return Err(Error::dim(format!(
                    "cluster center has length {}, expected {d}",
                    center_x.len()
                )));
            }
            Ok((center_x.clone(), *center_y))
        }
        _ => unreachable!("adaptive attack routed to the oblivious path"),
    }
}

/// Replacement row for an adaptive attack, built from the clean row `i`.
fn adaptive_row(attack: &AttackSpec, clean: &OracleInstance, i: usize) -> Result<(Vec<f64>, f64)> {
    let x = clean.x_clean.row(i);
    let beta = &clean.beta_star;
    let clean_y = clean.clean_response(i);
    match attack {
        AttackSpec::Leverage {
            scale,
            response_flip,
        } => {
            let u = beta_direction(beta);
            let row: Vec<f64> = x.iter().zip(&u).map(|(a, b)| a + scale * b).collect();
            let y = response_flip * dot(&row, beta) + clean.xi[i];
            Ok((row, y))
        }
        AttackSpec::ResponseOnly { magnitude } => Ok((x.to_vec(), clean_y + magnitude)),
        AttackSpec::MeanShift {
            direction,
            magnitude,
        } => {
            let u = match direction {
                Some(dir) => {
                    if dir.len() != x.len() {
                        return Err(Error::dim(format!(
                            "shift direction has length {}, expected {}",
                            dir.len(),
                            x.len()
                        )));
                    }
                    let norm = norm2(dir);
                    if !(norm > 0.0) {
                        return Err(Error::param("attack.direction", "must be non-zero"));
                    }
                    dir.iter().map(|v| v / norm).collect()
                }
                None => beta_direction(beta),
            };
            let row: Vec<f64> = x.iter().zip(&u).map(|(a, b)| a + magnitude * b).collect();
            Ok((row, clean_y))
        }
        _ => unreachable!("oblivious attack routed to the adaptive path"),
    }
}

/// Applies an attack. Any earlier contamination is discarded first, so the
/// result always derives from the clean draw. Clean rows stay bit-identical.
pub fn contaminate(inst: &OracleInstance, spec: &ContaminationSpec) -> Result<OracleInstance> {
    check_eps(spec.eps)?;
    let n = inst.n();
    let d = inst.d();
    let o = outlier_count(spec.eps, n);
    if 3 * o > n {
        return Err(Error::param(
            "eps",
            format!("{o} corrupted rows exceed n/3 for n = {n}"),
        ));
    }

    let clean = OracleInstance {
        dataset: inst.clean_dataset(),
        outlier_idx: Vec::new(),
        clean_idx: (0..n).collect(),
        rho: Matrix::zeros(n, d),
        theta_resp: vec![0.0; n],
        contamination: Some(spec.clone()),
        ..inst.clone()
    };
    if matches!(spec.attack, AttackSpec::None) || o == 0 {
        return Ok(clean);
    }

    let mut rng = rng::seeded(spec.seed);
    let mut outliers = rand::seq::index::sample(&mut rng, n, o).into_vec();
    outliers.sort_unstable();

    let sqrt_n = libm::sqrt(n as f64);
    let mut x = clean.dataset.x.clone();
    let mut y = clean.dataset.y.clone();
    let mut rho = Matrix::zeros(n, d);
    let mut theta = vec![0.0; n];
    for &i in &outliers {
        let (row, yi) = if spec.attack.is_adaptive() {
            adaptive_row(&spec.attack, &clean, i)?
        } else {
            oblivious_row(&spec.attack, d)?
        };
        let xc = clean.x_clean.row(i);
        for j in 0..d {
            rho[(i, j)] = row[j] - xc[j];
        }
        theta[i] = (yi - dot(&row, &clean.beta_star) - clean.xi[i]) / sqrt_n;
        x.row_mut(i).copy_from_slice(&row);
        y[i] = yi;
    }
    let clean_idx = (0..n)
        .filter(|i| outliers.binary_search(i).is_err())
        .collect();
    Ok(OracleInstance {
        dataset: Dataset::new(y, x)?,
        outlier_idx: outliers,
        clean_idx,
        rho,
        theta_resp: theta,
        ..clean
    })
}
