//! The `ac-probit` command line.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde::Serialize;
use serde_json::{json, Value};

use crate::certify::{self, DriftVariant, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::experiments::{
    self, DesignKind, GeneratorConfig, Mechanism, PriorFamily, PriorSequenceConfig, SweepOptions,
};
use crate::io;
use crate::model::{self, GaussianPrior, ModeOptions, PosteriorModel};
use crate::sampler::{self, ChainVariant};

#[derive(Debug, Parser)]
#[command(
    name = "ac-probit",
    version,
    about = "Albert-Chib sampling and certified convergence bounds for Bayesian probit regression"
)]
struct Cli {
    /// Seed for every random stream the command uses.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Json)]
    output: OutputFormat,
    /// Total-variation tolerance for burn-in certificates.
    #[arg(long, global = true, default_value_t = 0.01)]
    tol: f64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    V1,
    V2,
}

impl From<VariantArg> for DriftVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::V1 => DriftVariant::V1Flipped,
            VariantArg::V2 => DriftVariant::V2Flipped,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ChainArg {
    Beta,
    Gamma,
    Z,
}

impl From<ChainArg> for ChainVariant {
    fn from(c: ChainArg) -> Self {
        match c {
            ChainArg::Beta => ChainVariant::Beta,
            ChainArg::Gamma => ChainVariant::Gamma,
            ChainArg::Z => ChainVariant::Z,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MechanismArg {
    Gaussian,
    InterceptOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FamilyArg {
    GPrior,
    ScaledIdentity,
    FixedIdentity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DesignArg {
    UnitColumns,
    UnitRows,
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Dataset CSV with header x1,...,xp,y.
    #[arg(long)]
    data: PathBuf,
    /// Prior JSON; the flat prior when omitted.
    #[arg(long)]
    prior: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the posterior propriety conditions.
    CheckPropriety(DataArgs),
    /// Posterior mode by Newton's method.
    Mode(DataArgs),
    /// Run one of the three chains and print its trace.
    Sample {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum, default_value_t = ChainArg::Beta)]
        chain: ChainArg,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
    },
    /// Certified drift/minorization bound and burn-in for a dataset.
    Certify {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum)]
        variant: VariantArg,
        /// Starting point beta0 (comma separated); zero when omitted.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        beta0: Option<Vec<f64>>,
    },
    /// Total-variation bound after a given number of steps.
    TvBound {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum)]
        variant: VariantArg,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        beta0: Option<Vec<f64>>,
        #[arg(long)]
        steps: u64,
    },
    /// Closed-form certificate for the intercept-only model.
    InterceptOnly {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        s: usize,
        #[arg(long, default_value_t = 0.0)]
        q: f64,
    },
    /// V1 certificates along a growing-n sequence of synthetic datasets.
    SweepN {
        #[arg(long, value_enum, default_value_t = MechanismArg::Gaussian)]
        mechanism: MechanismArg,
        #[arg(
            long,
            value_delimiter = ',',
            allow_hyphen_values = true,
            default_value = "1,1"
        )]
        beta_star: Vec<f64>,
        /// Use a leading column of ones (Gaussian mechanism).
        #[arg(long)]
        intercept: bool,
        #[arg(long, default_value_t = 0.5)]
        success_fraction: f64,
        #[arg(long, value_delimiter = ',', default_value = "200,2000,20000")]
        n_grid: Vec<usize>,
        /// Prior precision q for Q = q I (0 means the flat prior).
        #[arg(long, default_value_t = 0.0)]
        q: f64,
        /// Write wall_time_ms as 0 so output bytes depend only on inputs.
        #[arg(long)]
        no_timing: bool,
    },
    /// V2 certificates along a growing-p sequence with fixed n.
    SweepP {
        #[arg(long, default_value_t = 5)]
        n: usize,
        #[arg(long, value_delimiter = ',', default_value = "10,100,1000")]
        p_grid: Vec<usize>,
        #[arg(long, value_enum, default_value_t = FamilyArg::GPrior)]
        family: FamilyArg,
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        #[arg(long, default_value_t = 1.0)]
        q: f64,
        #[arg(long, default_value_t = 1e-11)]
        ridge_rel: f64,
        #[arg(long, value_enum, default_value_t = DesignArg::UnitColumns)]
        design: DesignArg,
        /// Declared constant in lambda_max(X Q^-1 X^T) < c; defaults to 2/c for the g-prior, 10 otherwise.
        #[arg(long)]
        b2_constant: Option<f64>,
        #[arg(long)]
        no_timing: bool,
    },
    /// Overlap bounds showing the unstable minorization of the flat-prior chain.
    InstabilityDemo {
        #[arg(long, value_delimiter = ',', default_value = "100,400,1600,6400")]
        n_grid: Vec<usize>,
        #[arg(
            long,
            value_delimiter = ',',
            allow_hyphen_values = true,
            default_value = "1,1"
        )]
        beta_star: Vec<f64>,
        #[arg(
            long,
            value_delimiter = ',',
            allow_hyphen_values = true,
            default_value = "1,1"
        )]
        gamma: Vec<f64>,
    },
    /// Lower bound on the rate of the single-observation chain.
    RateLowerBoundN1 {
        #[arg(long)]
        psi: f64,
    },
    /// Empirical lag-1 autocorrelation of a simulated chain.
    RateEstimate {
        /// Simulate the single-observation model with this psi.
        #[arg(long, conflicts_with = "data")]
        psi: Option<f64>,
        #[arg(long, required_unless_present = "psi")]
        data: Option<PathBuf>,
        #[arg(long)]
        prior: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = ChainArg::Z)]
        chain: ChainArg,
        #[arg(long, default_value_t = 1_000_000)]
        steps: usize,
        /// Defaults to 10% of the trace.
        #[arg(long)]
        burn_in: Option<usize>,
    },
}

/// Runs the command line on `args` (including the program name) and returns
/// the process exit code: 0 on success, 1 when certification fails, 2 on
/// invalid input or usage errors.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                2
            } else {
                let _ = write!(out, "{text}");
                0
            };
        }
    };
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::CertificationFailed(_)
        | Error::NoCertificate { .. }
        | Error::CombinatorialBlowup { .. }
        | Error::RankDeficient(_)
        | Error::NonConvergence { .. }
        | Error::DiagnosticInconclusive(_) => 1,
        _ => 2,
    }
}

fn load(args: &DataArgs) -> Result<(model::Dataset, GaussianPrior)> {
    let data = io::read_dataset_file(&args.data)?;
    let prior = match &args.prior {
        Some(path) => io::read_prior_file(path, data.p())?,
        None => GaussianPrior::flat(data.p()),
    };
    Ok((data, prior))
}

fn load_model(args: &DataArgs) -> Result<PosteriorModel> {
    let (data, prior) = load(args)?;
    PosteriorModel::new(data, prior)
}

fn beta0_vec(beta0: &Option<Vec<f64>>, p: usize) -> Result<DVector<f64>> {
    match beta0 {
        None => Ok(DVector::zeros(p)),
        Some(v) if v.len() == p => Ok(DVector::from_column_slice(v)),
        Some(v) => Err(Error::DimensionMismatch {
            expected: p,
            got: v.len(),
        }),
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "--tol must be positive and finite, got {tol}"
        )))
    }
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    check_tol(cli.tol)?;
    let fmt = cli.output;
    match &cli.command {
        Command::CheckPropriety(args) => {
            let (data, prior) = load(args)?;
            if prior.dim() != data.p() {
                return Err(Error::DimensionMismatch {
                    expected: data.p(),
                    got: prior.dim(),
                });
            }
            let report = model::check_propriety(&data, &prior);
            emit_record(out, fmt, &report)
        }
        Command::Mode(args) => {
            let (data, prior) = load(args)?;
            let res = model::posterior_mode(&data, &prior, ModeOptions::default())?;
            let model = PosteriorModel::new(data, prior)?;
            let v = json!({
                "mode": res.mode.as_slice(),
                "grad_norm": res.grad_norm,
                "iterations": res.iterations,
                "fixed_point_residual": model.fixed_point_residual(),
            });
            emit_record(out, fmt, &v)
        }
        Command::Sample { data, chain, steps } => {
            let model = load_model(data)?;
            let variant = ChainVariant::from(*chain);
            let start = chain_start(&model, variant);
            let trace = sampler::run_chain(&model, variant, &start, *steps, cli.seed)?;
            match fmt {
                OutputFormat::Csv => trace.write_csv(out),
                OutputFormat::Json => {
                    let states: Vec<&[f64]> = trace.states().collect();
                    let v = json!({
                        "schema_version": SCHEMA_VERSION,
                        "seed": trace.seed(),
                        "variant": trace.variant().as_str(),
                        "states": states,
                    });
                    write_json(out, &v)
                }
            }
        }
        Command::Certify {
            data,
            variant,
            beta0,
        } => {
            let model = load_model(data)?;
            let b0 = beta0_vec(beta0, model.p())?;
            let cert = certify::optimize_certificate(&model, (*variant).into(), cli.tol, &b0)?;
            emit_record(out, fmt, &cert)
        }
        Command::TvBound {
            data,
            variant,
            beta0,
            steps,
        } => {
            if *steps == 0 {
                return Err(Error::invalid("--steps must be at least 1"));
            }
            let model = load_model(data)?;
            let b0 = beta0_vec(beta0, model.p())?;
            let cert = certify::optimize_certificate(&model, (*variant).into(), cli.tol, &b0)?;
            let log10_bound = cert.h_beta0.log10()
                - (*steps - 1) as f64 * cert.log_rate_gap.exp() / std::f64::consts::LN_10;
            let v = json!({
                "steps": steps,
                "tv_bound": certify::tv_bound(cert.h_beta0, cert.rho_hat, *steps),
                "log10_tv_bound": log10_bound,
                "rho_hat": cert.rho_hat,
                "log_rate_gap": cert.log_rate_gap,
                "H_beta0": cert.h_beta0,
            });
            emit_record(out, fmt, &v)
        }
        Command::InterceptOnly { n, s, q } => {
            let cert = certify::intercept_only_certificate(*n, *s, *q, cli.tol)?;
            emit_record(out, fmt, &cert)
        }
        Command::SweepN {
            mechanism,
            beta_star,
            intercept,
            success_fraction,
            n_grid,
            q,
            no_timing,
        } => {
            let config = match mechanism {
                MechanismArg::Gaussian => GeneratorConfig {
                    mechanism: Mechanism::GaussianCovariates {
                        intercept: *intercept,
                    },
                    p: beta_star.len(),
                    true_beta: beta_star.clone(),
                    seed: cli.seed,
                    n: 1,
                },
                MechanismArg::InterceptOnly => GeneratorConfig {
                    seed: cli.seed,
                    ..GeneratorConfig::intercept_only(1, *success_fraction)
                },
            };
            let prior = GaussianPrior::scaled_identity(config.p, *q)?;
            let opts = SweepOptions {
                tv_tolerance: cli.tol,
                record_timing: !no_timing,
            };
            let res = experiments::sweep_n(&config, n_grid, &prior, opts)?;
            emit_sweep(out, fmt, &res)
        }
        Command::SweepP {
            n,
            p_grid,
            family,
            c,
            q,
            ridge_rel,
            design,
            b2_constant,
            no_timing,
        } => {
            let family = match family {
                FamilyArg::GPrior => PriorFamily::GPrior {
                    c: *c,
                    ridge_rel: *ridge_rel,
                },
                FamilyArg::ScaledIdentity => PriorFamily::ScaledIdentity { q: *q },
                FamilyArg::FixedIdentity => PriorFamily::FixedIdentity { q: *q },
            };
            let default_b2 = match family {
                PriorFamily::GPrior { c, .. } => 2.0 / c,
                _ => 10.0,
            };
            let seq = PriorSequenceConfig {
                family,
                design: match design {
                    DesignArg::UnitColumns => DesignKind::UnitColumns,
                    DesignArg::UnitRows => DesignKind::UnitRows,
                },
                b2_constant: b2_constant.unwrap_or(default_b2),
            };
            let opts = SweepOptions {
                tv_tolerance: cli.tol,
                record_timing: !no_timing,
            };
            let res = experiments::sweep_p(*n, p_grid, &seq, cli.seed, opts)?;
            emit_sweep(out, fmt, &res)
        }
        Command::InstabilityDemo {
            n_grid,
            beta_star,
            gamma,
        } => {
            let config = GeneratorConfig::gaussian(1, beta_star.clone(), cli.seed);
            let rows = experiments::instability_sweep(
                &config,
                n_grid,
                &DVector::from_column_slice(gamma),
            )?;
            match fmt {
                OutputFormat::Csv => write_table_csv(out, &rows),
                OutputFormat::Json => write_json(
                    out,
                    &json!({
                        "schema_version": SCHEMA_VERSION,
                        "seed": cli.seed,
                        "delta_rule": "delta = Delta / 5",
                        "rows": rows,
                    }),
                ),
            }
        }
        Command::RateLowerBoundN1 { psi } => {
            let bound = certify::rate_lower_bound_n1(*psi)?;
            emit_record(out, fmt, &json!({ "psi": psi, "lower_bound": bound }))
        }
        Command::RateEstimate {
            psi,
            data,
            prior,
            chain,
            steps,
            burn_in,
        } => {
            let model = match (psi, data) {
                (Some(psi), _) => experiments::n1_model(*psi)?,
                (None, Some(path)) => load_model(&DataArgs {
                    data: path.clone(),
                    prior: prior.clone(),
                })?,
                (None, None) => return Err(Error::invalid("either --psi or --data is required")),
            };
            let variant = ChainVariant::from(*chain);
            let start = chain_start(&model, variant);
            let trace = sampler::run_chain(&model, variant, &start, *steps, cli.seed)?;
            let burn = burn_in.unwrap_or_else(|| sampler::default_burn_in(trace.len()));
            let est = sampler::lag1_rate_estimate(&trace, |s| s[0], burn)?;
            let bound = psi.map(certify::rate_lower_bound_n1).transpose()?;
            let v = json!({
                "estimate": est.estimate,
                "mc_se": est.mc_se,
                "burn_in": est.burn_in,
                "used": est.used,
                "variant": variant.as_str(),
                "seed": cli.seed,
                "lower_bound": bound,
            });
            emit_record(out, fmt, &v)
        }
    }
}

/// Mode for the `β` chain, the origin for `Γ`, and `φ(B̂)` for the latent chain
/// (its entries have the signs the truncation requires).
fn chain_start(model: &PosteriorModel, variant: ChainVariant) -> DVector<f64> {
    match variant {
        ChainVariant::Beta => model.mode().clone(),
        ChainVariant::Gamma => DVector::zeros(model.p()),
        ChainVariant::Z => model.varphi(model.mode()),
    }
}

fn write_json(out: &mut dyn Write, v: &impl Serialize) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, v)?;
    writeln!(out)?;
    Ok(())
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Array(items) => items.iter().map(cell).collect::<Vec<_>>().join(" "),
        other => other.to_string(),
    }
}

/// One JSON object as a header line plus one data line.
fn emit_record(out: &mut dyn Write, fmt: OutputFormat, rec: &impl Serialize) -> Result<()> {
    match fmt {
        OutputFormat::Json => write_json(out, rec),
        OutputFormat::Csv => write_table_csv(out, std::slice::from_ref(rec)),
    }
}

fn write_table_csv<T: Serialize>(out: &mut dyn Write, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header_done = false;
    for row in rows {
        let Value::Object(map) = serde_json::to_value(row)? else {
            return Err(Error::invalid("record is not a JSON object"));
        };
        if !header_done {
            w.write_record(map.keys())?;
            header_done = true;
        }
        w.write_record(map.values().map(cell))?;
    }
    w.flush()?;
    Ok(())
}

fn emit_sweep(
    out: &mut dyn Write,
    fmt: OutputFormat,
    res: &experiments::SweepResult,
) -> Result<()> {
    match fmt {
        OutputFormat::Csv => res.write_csv(out),
        OutputFormat::Json => write_json(out, res),
    }
}
