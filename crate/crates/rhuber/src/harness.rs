//! Monte-Carlo sweeps over `(n, d, ε, attack, estimator, seed)`.
//!
//! Every `(cell, seed)` job draws its own instance from seeds derived from
//! the master seed, so results do not depend on the number of workers.
//! Workers send finished jobs to a single appender that writes records in
//! job order and flushes after each one.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use rhuber_core::dataset::{contaminate, generate};
use rhuber_core::diagnostics::error_metrics;
use rhuber_core::huber::{ols_fit, plain_huber_fit, two_step_estimate};
use rhuber_core::rng::derive_seed;
use rhuber_core::stats::{iqr, median};
use rhuber_core::{
    AttackSpec, ContaminationSpec, CovarianceMode, EstimationResult, GeneratorSpec, HuberConfig,
    OracleInstance, RobustWeightConfig,
};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

pub const RECORD_HEADER: &str =
    "eps,n,d,attack,estimator,seed,l2_error,mu_error,lambda_max,runtime_ms,converged";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    TwoStep,
    PlainHuber,
    Ols,
    /// Plain Huber on the uncontaminated draw; a noise-only reference.
    OracleHuberOnClean,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::TwoStep => "two_step",
            EstimatorKind::PlainHuber => "plain_huber",
            EstimatorKind::Ols => "ols",
            EstimatorKind::OracleHuberOnClean => "oracle_huber_on_clean",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Size {
    pub n: usize,
    pub d: usize,
}

/// Optional overrides of the weight-stage defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobustOverrides {
    pub c_term: Option<f64>,
    pub max_outer: Option<usize>,
    pub filter_rounds_per_outer: Option<usize>,
    pub power_tol: Option<f64>,
    pub power_max_iter: Option<usize>,
    pub sigma_c_sq: Option<f64>,
}

impl RobustOverrides {
    pub fn config(
        &self,
        eps: f64,
        mode: CovarianceMode,
        d: usize,
        seed: u64,
    ) -> RobustWeightConfig {
        let mut cfg = RobustWeightConfig::new(eps, mode, d);
        cfg.seed = seed;
        if let Some(v) = self.c_term {
            cfg.c_term = v;
        }
        if let Some(v) = self.max_outer {
            cfg.max_outer = v;
        }
        if let Some(v) = self.filter_rounds_per_outer {
            cfg.filter_rounds_per_outer = v;
        }
        if let Some(v) = self.power_tol {
            cfg.power_tol = v;
        }
        if let Some(v) = self.power_max_iter {
            cfg.power_max_iter = v;
        }
        if self.sigma_c_sq.is_some() {
            cfg.sigma_c_sq = self.sigma_c_sq;
        }
        cfg
    }
}

fn default_mode() -> CovarianceMode {
    CovarianceMode::IdentityCov
}

/// A sweep. Cells are the product `sizes × contamination`; each cell runs
/// every estimator on every seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub generator: GeneratorSpec,
    pub sizes: Vec<Size>,
    /// The `seed` of each entry salts the contamination draw.
    pub contamination: Vec<ContaminationSpec>,
    pub estimators: Vec<EstimatorKind>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_mode")]
    pub mode: CovarianceMode,
    /// Defaults to `(1, …, 1)/√d`.
    #[serde(default)]
    pub beta_star: Option<Vec<f64>>,
    #[serde(default)]
    pub robust: RobustOverrides,
    #[serde(default)]
    pub huber: HuberConfig,
}

#[derive(Debug, thiserror::Error)]
pub enum SpecError {
    #[error("`{0}` must not be empty")]
    Empty(&'static str),
    #[error("seed {0} is listed twice")]
    DuplicateSeed(u64),
    #[error("contamination entries {0} and {1} share eps and attack kind")]
    DuplicateCell(usize, usize),
    #[error("beta_star has length {got}, but the sweep uses d = {d}")]
    BetaLength { got: usize, d: usize },
    #[error(transparent)]
    Model(#[from] rhuber_core::Error),
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), SpecError> {
        if self.sizes.is_empty() {
            return Err(SpecError::Empty("sizes"));
        }
        if self.contamination.is_empty() {
            return Err(SpecError::Empty("contamination"));
        }
        if self.estimators.is_empty() {
            return Err(SpecError::Empty("estimators"));
        }
        if self.seeds.is_empty() {
            return Err(SpecError::Empty("seeds"));
        }
        for (i, s) in self.seeds.iter().enumerate() {
            if self.seeds[..i].contains(s) {
                return Err(SpecError::DuplicateSeed(*s));
            }
        }
        for (i, a) in self.contamination.iter().enumerate() {
            for (j, b) in self.contamination[..i].iter().enumerate() {
                if a.eps == b.eps && a.attack.name() == b.attack.name() {
                    return Err(SpecError::DuplicateCell(j, i));
                }
            }
        }
        if let Some(beta) = &self.beta_star {
            for size in &self.sizes {
                if beta.len() != size.d {
                    return Err(SpecError::BetaLength {
                        got: beta.len(),
                        d: size.d,
                    });
                }
            }
        }
        self.generator.validate()?;
        self.huber.validate()?;
        for c in &self.contamination {
            self.robust
                .config(c.eps, self.mode, self.sizes[0].d, 0)
                .validate()?;
        }
        Ok(())
    }

    fn beta_star(&self, d: usize) -> Vec<f64> {
        self.beta_star
            .clone()
            .unwrap_or_else(|| vec![1.0 / (d as f64).sqrt(); d])
    }

    fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for (size_idx, size) in self.sizes.iter().enumerate() {
            for contamination in &self.contamination {
                cells.push(Cell {
                    index: cells.len(),
                    size_idx,
                    size: *size,
                    contamination: contamination.clone(),
                });
            }
        }
        cells
    }
}

#[derive(Debug, Clone)]
struct Cell {
    index: usize,
    size_idx: usize,
    size: Size,
    contamination: ContaminationSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub eps: f64,
    pub n: usize,
    pub d: usize,
    pub attack: String,
    pub estimator: EstimatorKind,
    pub seed: u64,
    pub l2_error: f64,
    pub mu_error: Option<f64>,
    pub lambda_max: Option<f64>,
    pub runtime_ms: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub eps: f64,
    pub n: usize,
    pub d: usize,
    pub attack: String,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub eps: f64,
    pub n: usize,
    pub d: usize,
    pub attack: String,
    pub estimator: EstimatorKind,
    pub median_error: f64,
    pub iqr: f64,
    pub n_seeds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub rows: Vec<SummaryRow>,
    pub failures: Vec<CellFailure>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub records: Vec<ExperimentRecord>,
    pub failures: Vec<CellFailure>,
}

impl SweepOutput {
    pub fn summary(&self) -> Summary {
        Summary {
            schema_version: SCHEMA_VERSION,
            rows: summarize(&self.records),
            failures: self.failures.clone(),
        }
    }
}

type JobResult = Result<Vec<ExperimentRecord>, CellFailure>;

/// Draws the `(cell, seed)` instance. The clean draw depends on the size
/// and seed only, so every contamination level of a size perturbs the same
/// clean sample.
fn job_instance(
    spec: &ExperimentSpec,
    cell: &Cell,
    seed: u64,
) -> rhuber_core::Result<OracleInstance> {
    let Size { n, d } = cell.size;
    let data_seed = derive_seed(spec.master_seed, &[cell.size_idx as u64, seed]);
    let clean = generate(&spec.generator, n, d, &spec.beta_star(d), data_seed)?;
    let contamination = ContaminationSpec {
        seed: derive_seed(
            spec.master_seed,
            &[
                cell.size_idx as u64,
                seed,
                cell.index as u64,
                cell.contamination.seed,
            ],
        ),
        ..cell.contamination.clone()
    };
    contaminate(&clean, &contamination)
}

fn run_estimator(
    spec: &ExperimentSpec,
    kind: EstimatorKind,
    inst: &OracleInstance,
    eps: f64,
    seed: u64,
) -> rhuber_core::Result<EstimationResult> {
    match kind {
        EstimatorKind::TwoStep => {
            let rw_seed = derive_seed(spec.master_seed, &[seed, u64::MAX]);
            let cfg = spec.robust.config(eps, spec.mode, inst.d(), rw_seed);
            two_step_estimate(&inst.dataset, &cfg, &spec.huber)
        }
        EstimatorKind::PlainHuber => plain_huber_fit(&inst.dataset, &spec.huber),
        EstimatorKind::Ols => ols_fit(&inst.dataset),
        EstimatorKind::OracleHuberOnClean => plain_huber_fit(&inst.clean_dataset(), &spec.huber),
    }
}

fn run_job(spec: &ExperimentSpec, cell: &Cell, seed: u64) -> JobResult {
    let eps = cell.contamination.eps;
    let attack = cell.contamination.attack.name().to_string();
    let fail = |message: String| CellFailure {
        eps,
        n: cell.size.n,
        d: cell.size.d,
        attack: attack.clone(),
        seed,
        message,
    };
    let inst = job_instance(spec, cell, seed).map_err(|e| fail(e.to_string()))?;
    let mut records = Vec::with_capacity(spec.estimators.len());
    for &kind in &spec.estimators {
        let start = Instant::now();
        let est = run_estimator(spec, kind, &inst, eps, seed)
            .map_err(|e| fail(format!("{}: {e}", kind.name())))?;
        let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
        let metrics = error_metrics(&est, &inst).map_err(|e| fail(e.to_string()))?;
        let lambda_max = est.robust_weights.as_ref().map(|rw| rw.lambda_max);
        records.push(ExperimentRecord {
            eps,
            n: cell.size.n,
            d: cell.size.d,
            attack: attack.clone(),
            estimator: kind,
            seed,
            l2_error: metrics.l2_error,
            mu_error: metrics.mu_error,
            lambda_max,
            runtime_ms,
            converged: est.converged,
        });
    }
    Ok(records)
}

/// Writes the record CSV preamble: a schema comment and the header.
pub fn write_record_header<W: Write>(out: &mut W) -> std::io::Result<()> {
    writeln!(out, "# schema_version: {SCHEMA_VERSION}")?;
    writeln!(out, "{RECORD_HEADER}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_record<W: Write>(out: &mut W, r: &ExperimentRecord) -> std::io::Result<()> {
    writeln!(
        out,
        "{},{},{},{},{},{},{},{},{},{},{}",
        r.eps,
        r.n,
        r.d,
        r.attack,
        r.estimator.name(),
        r.seed,
        r.l2_error,
        fmt_opt(r.mu_error),
        fmt_opt(r.lambda_max),
        r.runtime_ms,
        r.converged
    )
}

/// Runs every `(cell, seed)` job on `workers` threads. When `sink` is given,
/// records are appended to it in job order as soon as they are available.
pub fn run_sweep<W: Write + Send>(
    spec: &ExperimentSpec,
    workers: usize,
    mut sink: Option<&mut W>,
) -> anyhow::Result<SweepOutput> {
    spec.validate()?;
    let cells = spec.cells();
    let jobs: Vec<(usize, u64)> = cells
        .iter()
        .flat_map(|c| spec.seeds.iter().map(move |&s| (c.index, s)))
        .collect();
    if let Some(out) = sink.as_deref_mut() {
        write_record_header(out)?;
        out.flush()?;
    }

    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, JobResult)>();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    std::thread::scope(|scope| -> anyhow::Result<()> {
        for _ in 0..workers.clamp(1, jobs.len()) {
            let tx = tx.clone();
            let (next, jobs, cells) = (&next, &jobs, &cells);
            scope.spawn(move || loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(cell, seed)) = jobs.get(k) else {
                    break;
                };
                if tx.send((k, run_job(spec, &cells[cell], seed))).is_err() {
                    break;
                }
            });
        }
        drop(tx);

        let mut pending = BTreeMap::new();
        let mut expected = 0;
        for (k, result) in rx {
            pending.insert(k, result);
            while let Some(result) = pending.remove(&expected) {
                match result {
                    Ok(batch) => {
                        if let Some(out) = sink.as_deref_mut() {
                            for r in &batch {
                                write_record(out, r)?;
                            }
                            out.flush()?;
                        }
                        records.extend(batch);
                    }
                    Err(f) => failures.push(f),
                }
                expected += 1;
            }
        }
        Ok(())
    })?;
    Ok(SweepOutput { records, failures })
}

/// Median and type-7 IQR of `l2_error` per cell and estimator, ordered by
/// `(ε, n, d, estimator, attack)`.
pub fn summarize(records: &[ExperimentRecord]) -> Vec<SummaryRow> {
    type Key = (u64, usize, usize, &'static str, String);
    let mut groups: BTreeMap<Key, Vec<f64>> = BTreeMap::new();
    for r in records {
        // ε ≥ 0, so the IEEE bit pattern orders like the value
        let key = (
            r.eps.to_bits(),
            r.n,
            r.d,
            r.estimator.name(),
            r.attack.clone(),
        );
        groups.entry(key).or_default().push(r.l2_error);
    }
    let estimators = [
        EstimatorKind::TwoStep,
        EstimatorKind::PlainHuber,
        EstimatorKind::Ols,
        EstimatorKind::OracleHuberOnClean,
    ];
    groups
        .into_iter()
        .map(|((eps, n, d, est, attack), errors)| SummaryRow {
            eps: f64::from_bits(eps),
            n,
            d,
            attack,
            estimator: *estimators
                .iter()
                .find(|e| e.name() == est)
                .expect("known estimator"),
            median_error: median(&errors),
            iqr: iqr(&errors),
            n_seeds: errors.len(),
        })
        .collect()
}

/// Least-squares slope of `ln y` against `ln x`; `None` with fewer than
/// two distinct positive abscissae or any non-positive value.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return None;
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let k = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / k;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Slope of median error against ε for one estimator and size.
pub fn eps_slope(rows: &[SummaryRow], estimator: EstimatorKind, size: Size) -> Option<f64> {
    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.estimator == estimator && r.n == size.n && r.d == size.d && r.eps > 0.0)
        .map(|r| (r.eps, r.median_error))
        .collect();
    loglog_slope(&points)
}

/// Tail class of the clean design, which sets how far a leverage point may
/// sit before the spectral certificate notices it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tail {
    SubGaussian,
    Heavy,
}

/// Leverage attack scaled to the detection boundary of the filter: shift
/// `√ln(1/ε)` for sub-Gaussian designs and `√(1/ε)` for bounded-covariance
/// designs, with responses following the reversed slope.
pub fn boundary_leverage(eps: f64, tail: Tail) -> AttackSpec {
    let scale = match tail {
        Tail::SubGaussian => (1.0 / eps).ln().sqrt(),
        Tail::Heavy => (1.0 / eps).sqrt(),
    };
    AttackSpec::Leverage {
        scale,
        response_flip: -1.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_a_power_law() {
        let pts: Vec<(f64, f64)> = [0.02, 0.05, 0.1, 0.2]
            .iter()
            .map(|&e| (e, 3.0 * e * e))
            .collect();
        assert!((loglog_slope(&pts).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(loglog_slope(&[(0.1, 1.0)]), None);
        assert_eq!(loglog_slope(&[(0.1, 1.0), (0.2, 0.0)]), None);
    }

    #[test]
    fn header_matches_record_fields() {
        let mut buf = Vec::new();
        write_record_header(&mut buf).unwrap();
        let r = ExperimentRecord {
            eps: 0.1,
            n: 10,
            d: 2,
            attack: "none".into(),
            estimator: EstimatorKind::Ols,
            seed: 3,
            l2_error: 0.5,
            mu_error: None,
            lambda_max: None,
            runtime_ms: 1.0,
            converged: true,
        };
        write_record(&mut buf, &r).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# schema_version: 1");
        assert_eq!(lines[1].split(',').count(), lines[2].split(',').count());
        assert_eq!(lines[2], "0.1,10,2,none,ols,3,0.5,,,1,true");
    }
}
