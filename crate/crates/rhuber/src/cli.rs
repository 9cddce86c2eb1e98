//! The `rhuber` command line.
//!
//! Exit codes: 0 on success, 1 on input or configuration errors, 2 when a
//! numerical stage stops on its iteration budget. Every flag can also be
//! set through an `RH_*` environment variable named after it
//! (`--grad-tol` ↔ `RH_GRAD_TOL`).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rhuber_core::dataset::{contaminate, generate};
use rhuber_core::diagnostics::{check_conditions, default_eta_grid};
use rhuber_core::huber::two_step_estimate;
use rhuber_core::robust_weights::{certificate, robust_weights};
use rhuber_core::{
    AttackSpec, ContaminationSpec, CovarianceMode, Dataset, DesignSpec, EstimationResult,
    GeneratorSpec, HuberConfig, NoiseSpec, RobustWeightConfig, RobustWeightResult, SolverKind,
    Termination,
};
use serde::{Deserialize, Serialize};

use crate::harness::{run_sweep, ExperimentSpec};
use crate::io::{load_csv, load_json, save_csv, save_json, sidecar_path, OracleSidecar};

#[derive(Debug, Parser)]
#[command(
    name = "rhuber",
    version,
    about = "Robust linear regression by two-step weighted Huber fits"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a synthetic dataset and write it with its oracle sidecar.
    Generate(GenerateArgs),
    /// Fit β with robust weights followed by a weighted Huber regression.
    Estimate(EstimateArgs),
    /// Robust weights and the weighted covariate mean only.
    RobustMean(RobustMeanArgs),
    /// Run a Monte-Carlo sweep described by a TOML file.
    Sweep(SweepArgs),
    /// Evaluate the deterministic condition sums against an oracle sidecar.
    Certify(CertifyArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AttackKind {
    None,
    PointCluster,
    Leverage,
    ResponseOnly,
    MeanShift,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DesignKind {
    GaussianIdentity,
    Rademacher,
    UniformScaled,
    StudentT,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum NoiseKind {
    Gaussian,
    StudentT,
    Laplace,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    IdentityCov,
    BoundedCov,
}

impl From<ModeArg> for CovarianceMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::IdentityCov => CovarianceMode::IdentityCov,
            ModeArg::BoundedCov => CovarianceMode::BoundedCov,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SolverArg {
    Gd,
    Lbfgs,
}

impl From<SolverArg> for SolverKind {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Gd => SolverKind::BacktrackingGd,
            SolverArg::Lbfgs => SolverKind::LbfgsLikeQuasiNewton,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, env = "RH_N")]
    pub n: usize,
    #[arg(long, env = "RH_D")]
    pub d: usize,
    /// Contamination fraction in [0, 1/3).
    #[arg(long, env = "RH_EPS", default_value_t = 0.0)]
    pub eps: f64,
    #[arg(long, env = "RH_ATTACK", value_enum, default_value = "none")]
    pub attack: AttackKind,
    #[arg(
        long,
        env = "RH_DESIGN",
        value_enum,
        default_value = "gaussian-identity"
    )]
    pub design: DesignKind,
    /// Degrees of freedom of a Student-t design or noise.
    #[arg(long, env = "RH_DF", default_value_t = 5.0)]
    pub df: f64,
    #[arg(long, env = "RH_NOISE", value_enum, default_value = "gaussian")]
    pub noise: NoiseKind,
    /// Noise standard deviation (Gaussian) or scale (Student-t, Laplace).
    #[arg(long, env = "RH_NOISE_SIGMA", default_value_t = 1.0)]
    pub noise_sigma: f64,
    /// Attack size: leverage shift, response shift, mean shift, or the
    /// distance of the point cluster from the origin.
    #[arg(long, env = "RH_MAGNITUDE", default_value_t = 10.0)]
    pub magnitude: f64,
    /// Slope multiplier of leverage outliers.
    #[arg(long, env = "RH_RESPONSE_FLIP", default_value_t = -1.0, allow_negative_numbers = true)]
    pub response_flip: f64,
    #[arg(long, env = "RH_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Dataset CSV; the sidecar goes next to it as `<stem>.oracle.json`.
    #[arg(long, env = "RH_OUT")]
    pub out: PathBuf,
}

/// Weight-stage and solver settings shared by `estimate` and
/// `robust-mean`, as read from `--config`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    #[serde(default)]
    pub robust: crate::harness::RobustOverrides,
    #[serde(default)]
    pub mode: Option<CovarianceMode>,
    #[serde(default)]
    pub huber: HuberConfig,
}

#[derive(Debug, Args)]
pub struct WeightArgs {
    /// Input CSV with header `y,x1,...,xd`.
    #[arg(long, env = "RH_INPUT")]
    pub input: PathBuf,
    /// Assumed contamination fraction in [0, 1/3).
    #[arg(long, env = "RH_EPS")]
    pub eps: f64,
    /// Default: identity-cov, or the config file's `mode`.
    #[arg(long, env = "RH_MODE", value_enum)]
    pub mode: Option<ModeArg>,
    /// Certificate constant. Default 2 (identity-cov) or 9 (bounded-cov).
    #[arg(long, env = "RH_C_TERM")]
    pub c_term: Option<f64>,
    /// Outer filtering rounds. Default `4⌈log₂(d+1)⌉ + 8`.
    #[arg(long, env = "RH_MAX_OUTER")]
    pub max_outer: Option<usize>,
    /// TOML file with `mode`, `[robust]` and `[huber]` tables; flags win.
    #[arg(long, env = "RH_CONFIG")]
    pub config: Option<PathBuf>,
    #[arg(long, env = "RH_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Output JSON path; stdout when absent.
    #[arg(long, env = "RH_OUT")]
    pub out: Option<PathBuf>,
}

impl WeightArgs {
    fn file_config(&self) -> anyhow::Result<FitConfig> {
        match &self.config {
            None => Ok(FitConfig::default()),
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
            }
        }
    }

    fn robust_config(&self, file: &FitConfig, d: usize) -> anyhow::Result<RobustWeightConfig> {
        let mode = self
            .mode
            .map(CovarianceMode::from)
            .or(file.mode)
            .unwrap_or(CovarianceMode::IdentityCov);
        let mut overrides = file.robust.clone();
        if self.c_term.is_some() {
            overrides.c_term = self.c_term;
        }
        if self.max_outer.is_some() {
            overrides.max_outer = self.max_outer;
        }
        let cfg = overrides.config(self.eps, mode, d, self.seed);
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub weights: WeightArgs,
    /// Huber threshold `λ_o √n`. Default: a MAD scale of a trimmed
    /// least-squares fit times 1.345.
    #[arg(long, env = "RH_LAMBDA")]
    pub lambda: Option<f64>,
    /// Default gd.
    #[arg(long, env = "RH_SOLVER", value_enum)]
    pub solver: Option<SolverArg>,
    /// Stop when `‖∇F‖ ≤ grad_tol·(1 + |F|)`. Default 1e-9.
    #[arg(long, env = "RH_GRAD_TOL")]
    pub grad_tol: Option<f64>,
    /// Default 20000.
    #[arg(long, env = "RH_MAX_ITER")]
    pub max_iter: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RobustMeanArgs {
    #[command(flatten)]
    pub weights: WeightArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// TOML experiment description.
    #[arg(long, env = "RH_CONFIG")]
    pub config: PathBuf,
    /// Worker threads. Default: available parallelism.
    #[arg(long, env = "RH_WORKERS")]
    pub workers: Option<usize>,
    /// Record CSV, appended as jobs finish.
    #[arg(long, env = "RH_RECORDS")]
    pub records: PathBuf,
    /// Summary JSON; stdout when absent.
    #[arg(long, env = "RH_SUMMARY")]
    pub summary: Option<PathBuf>,
    /// Overrides `master_seed` from the config.
    #[arg(long, env = "RH_MASTER_SEED")]
    pub master_seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    #[arg(long, env = "RH_INPUT")]
    pub input: PathBuf,
    /// Oracle sidecar. Default: `<stem>.oracle.json` next to the input.
    #[arg(long, env = "RH_ORACLE")]
    pub oracle: Option<PathBuf>,
    /// Output of `estimate` to diagnose. Without it the two-step estimator
    /// runs with default settings at the sidecar's ε.
    #[arg(long, env = "RH_ESTIMATE", conflicts_with = "at_beta_star")]
    pub estimate: Option<PathBuf>,
    /// Evaluate at β̂ = β* (every sum vanishes).
    #[arg(long, env = "RH_AT_BETA_STAR")]
    pub at_beta_star: bool,
    /// Comma-separated η values in [0, 1]. Default 0.1, 0.2, ..., 1.0.
    #[arg(long, env = "RH_ETA_GRID", value_delimiter = ',')]
    pub eta_grid: Option<Vec<f64>>,
    #[arg(long, env = "RH_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, env = "RH_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateJson {
    pub lambda_max: f64,
    pub threshold: f64,
    pub pass: bool,
    pub dual_cert: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsJson {
    pub w: Vec<f64>,
    pub mu_w: Vec<f64>,
    pub outer_iters: usize,
    pub terminated_by: Termination,
}

/// What `estimate` writes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateJson {
    pub beta_hat: Vec<f64>,
    pub objective: f64,
    pub grad_norm: f64,
    pub iters: usize,
    pub converged: bool,
    pub lambda_scaled: f64,
    pub certificate: CertificateJson,
    pub weights: WeightsJson,
}

/// What `robust-mean` writes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustMeanJson {
    pub w: Vec<f64>,
    pub mu_w: Vec<f64>,
    pub lambda_max: f64,
    pub dual_cert: f64,
    pub outer_iters: usize,
    pub terminated_by: Termination,
}

type Outcome = anyhow::Result<u8>;

fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> anyhow::Result<()> {
    match out {
        Some(path) => save_json(value, path)?,
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            serde_json::to_writer_pretty(&mut lock, value)?;
            writeln!(lock)?;
        }
    }
    Ok(())
}

fn cmd_generate(a: &GenerateArgs) -> Outcome {
    let design = match a.design {
        DesignKind::GaussianIdentity => DesignSpec::GaussianIdentity,
        DesignKind::Rademacher => DesignSpec::Rademacher,
        DesignKind::UniformScaled => DesignSpec::UniformScaled,
        DesignKind::StudentT => DesignSpec::StudentT { df: a.df },
    };
    let noise = match a.noise {
        NoiseKind::Gaussian => NoiseSpec::Gaussian {
            sigma: a.noise_sigma,
        },
        NoiseKind::StudentT => NoiseSpec::StudentT {
            df: a.df,
            scale: a.noise_sigma,
        },
        NoiseKind::Laplace => NoiseSpec::Laplace {
            scale: a.noise_sigma,
        },
    };
    let attack = match a.attack {
        AttackKind::None => AttackSpec::None,
        AttackKind::PointCluster => AttackSpec::PointCluster {
            center_x: vec![a.magnitude / (a.d.max(1) as f64).sqrt(); a.d],
            center_y: -a.magnitude,
        },
        AttackKind::Leverage => AttackSpec::Leverage {
            scale: a.magnitude,
            response_flip: a.response_flip,
        },
        AttackKind::ResponseOnly => AttackSpec::ResponseOnly {
            magnitude: a.magnitude,
        },
        AttackKind::MeanShift => AttackSpec::MeanShift {
            direction: None,
            magnitude: a.magnitude,
        },
    };
    if a.d == 0 {
        bail!("--d must be at least 1");
    }
    let generator = GeneratorSpec::new(design, noise);
    let beta_star = vec![1.0 / (a.d as f64).sqrt(); a.d];
    let clean = generate(&generator, a.n, a.d, &beta_star, a.seed)?;
    let spec = ContaminationSpec {
        eps: a.eps,
        attack,
        seed: a.seed,
    };
    let inst = contaminate(&clean, &spec)?;
    save_csv(&inst.dataset, &a.out)?;
    save_json(&OracleSidecar::from_instance(&inst), &sidecar_path(&a.out))?;
    Ok(0)
}

fn weight_stage(a: &WeightArgs) -> anyhow::Result<(Dataset, FitConfig, RobustWeightConfig)> {
    let ds = load_csv(&a.input)?;
    let file = a.file_config()?;
    let cfg = a.robust_config(&file, ds.d())?;
    Ok((ds, file, cfg))
}

fn budget_code(rw: &RobustWeightResult) -> u8 {
    match rw.terminated_by {
        Termination::Certificate => 0,
        Termination::Budget => 2,
    }
}

fn cmd_estimate(a: &EstimateArgs) -> Outcome {
    let (ds, file, rw_cfg) = weight_stage(&a.weights)?;
    let mut huber = file.huber;
    if a.lambda.is_some() {
        huber.lambda_scaled = a.lambda;
    }
    if let Some(s) = a.solver {
        huber.solver = s.into();
    }
    if let Some(t) = a.grad_tol {
        huber.grad_tol = t;
    }
    if let Some(m) = a.max_iter {
        huber.max_iter = m;
    }
    huber.validate()?;
    let est = two_step_estimate(&ds, &rw_cfg, &huber)?;
    let rw = est
        .robust_weights
        .clone()
        .expect("two-step fits carry their weights");
    let cert = certificate(&ds, &rw, &rw_cfg)?;
    let json = estimate_json(&est, &rw, cert);
    write_json(&json, a.weights.out.as_deref())?;
    Ok(if est.converged { budget_code(&rw) } else { 2 })
}

fn estimate_json(
    est: &EstimationResult,
    rw: &RobustWeightResult,
    cert: rhuber_core::CertificateReport,
) -> EstimateJson {
    EstimateJson {
        beta_hat: est.beta_hat.clone(),
        objective: est.objective,
        grad_norm: est.grad_norm,
        iters: est.iters,
        converged: est.converged,
        lambda_scaled: est.lambda_scaled,
        certificate: CertificateJson {
            lambda_max: cert.lambda_max,
            threshold: cert.threshold,
            pass: cert.pass,
            dual_cert: cert.dual_cert,
        },
        weights: WeightsJson {
            w: rw.w.as_slice().to_vec(),
            mu_w: rw.mu_w.clone(),
            outer_iters: rw.outer_iters,
            terminated_by: rw.terminated_by,
        },
    }
}

fn cmd_robust_mean(a: &RobustMeanArgs) -> Outcome {
    let (ds, _, cfg) = weight_stage(&a.weights)?;
    let rw = robust_weights(&ds, &cfg)?;
    let json = RobustMeanJson {
        w: rw.w.as_slice().to_vec(),
        mu_w: rw.mu_w.clone(),
        lambda_max: rw.lambda_max,
        dual_cert: rw.dual_cert,
        outer_iters: rw.outer_iters,
        terminated_by: rw.terminated_by,
    };
    write_json(&json, a.weights.out.as_deref())?;
    Ok(budget_code(&rw))
}

/// Reads a sweep description, rejecting unknown keys with their location.
pub fn load_experiment(path: &Path) -> anyhow::Result<ExperimentSpec> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let spec: ExperimentSpec =
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(spec)
}

fn cmd_sweep(a: &SweepArgs) -> Outcome {
    let mut spec = load_experiment(&a.config)?;
    if let Some(m) = a.master_seed {
        spec.master_seed = m;
    }
    spec.validate()?;
    let workers = a
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if workers == 0 {
        bail!("--workers must be at least 1");
    }
    let file =
        File::create(&a.records).with_context(|| format!("creating {}", a.records.display()))?;
    let mut sink = BufWriter::new(file);
    let out = run_sweep(&spec, workers, Some(&mut sink))?;
    sink.flush()?;
    let summary = out.summary();
    for f in &summary.failures {
        eprintln!(
            "warning: eps={} n={} d={} attack={} seed={}: {}",
            f.eps, f.n, f.d, f.attack, f.seed, f.message
        );
    }
    write_json(&summary, a.summary.as_deref())?;
    Ok(0)
}

fn cmd_certify(a: &CertifyArgs) -> Outcome {
    let ds = load_csv(&a.input)?;
    let oracle_path = a.oracle.clone().unwrap_or_else(|| sidecar_path(&a.input));
    let sidecar: OracleSidecar = load_json(&oracle_path)?;
    let inst = sidecar.replay()?;
    if inst.dataset != ds {
        bail!(
            "{} does not match the instance described by {}",
            a.input.display(),
            oracle_path.display()
        );
    }
    let grid = a.eta_grid.clone().unwrap_or_else(default_eta_grid);
    let eps = sidecar.spec.contamination.eps;

    let (w, mu_w, beta_hat, lambda) = if let Some(path) = &a.estimate {
        let est: EstimateJson = load_json(path)?;
        (
            est.weights.w,
            est.weights.mu_w,
            est.beta_hat,
            est.lambda_scaled,
        )
    } else {
        let mut cfg = RobustWeightConfig::new(eps, CovarianceMode::IdentityCov, ds.d());
        cfg.seed = a.seed;
        let est = two_step_estimate(&ds, &cfg, &HuberConfig::default())?;
        let rw = est
            .robust_weights
            .expect("two-step fits carry their weights");
        let beta = if a.at_beta_star {
            inst.beta_star.clone()
        } else {
            est.beta_hat
        };
        (rw.w.into_vec(), rw.mu_w, beta, est.lambda_scaled)
    };
    let report = check_conditions(&inst, &w, &mu_w, &beta_hat, lambda, &grid)?;
    write_json(&report, a.out.as_deref())?;
    Ok(0)
}

pub fn run(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::RobustMean(a) => cmd_robust_mean(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Certify(a) => cmd_certify(a),
    }
}

pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors count as configuration errors
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(code) => {
            eprintln!("error: stopped on the iteration budget before converging");
            ExitCode::from(code)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
