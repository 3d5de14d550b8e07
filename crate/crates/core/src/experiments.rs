//! Synthetic data generators and the large-`n` / large-`p` stability sweeps.

use std::f64::consts::LN_10;
use std::io::Write;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::certify::{
    self, BurnIn, ConvergenceCertificate, DriftVariant, LambdaSource, SCHEMA_VERSION,
};
use crate::error::{Error, Result};
use crate::model::{Dataset, GaussianPrior, PosteriorModel};
use crate::sampler::chain_rng;
use crate::symmat::SymMatrix;
use crate::truncnorm;

/// How covariates and responses are produced.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Mechanism {
    /// Rows iid standard normal, optionally with a leading intercept column of ones.
    GaussianCovariates { intercept: bool },
    /// A fixed list of rows, recycled in order; responses drawn from the probit link.
    FixedDesign { rows: Vec<Vec<f64>> },
    /// A lone intercept with a deterministic success pattern: `yᵢ = 1` iff
    /// `⌊(i+1)f⌋ > ⌊if⌋`, so exactly `⌊nf⌋` of the first `n` rows succeed.
    InterceptOnly { success_fraction: f64 },
}

/// Everything needed to reproduce one synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratorConfig {
    pub mechanism: Mechanism,
    pub true_beta: Vec<f64>,
    pub seed: u64,
    pub n: usize,
    pub p: usize,
}

impl GeneratorConfig {
    pub fn gaussian(n: usize, true_beta: Vec<f64>, seed: u64) -> Self {
        GeneratorConfig {
            mechanism: Mechanism::GaussianCovariates { intercept: false },
            p: true_beta.len(),
            true_beta,
            seed,
            n,
        }
    }

    pub fn intercept_only(n: usize, success_fraction: f64) -> Self {
        GeneratorConfig {
            mechanism: Mechanism::InterceptOnly { success_fraction },
            true_beta: vec![0.0],
            seed: 0,
            n,
            p: 1,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 {
            return Err(Error::invalid("generator needs n >= 1 and p >= 1"));
        }
        if self.true_beta.len() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                got: self.true_beta.len(),
            });
        }
        match &self.mechanism {
            Mechanism::GaussianCovariates { .. } => Ok(()),
            Mechanism::FixedDesign { rows } => {
                if rows.is_empty() || rows.iter().any(|r| r.len() != self.p) {
                    Err(Error::invalid(
                        "fixed design rows must be non-empty with length p",
                    ))
                } else {
                    Ok(())
                }
            }
            Mechanism::InterceptOnly { success_fraction } => {
                if self.p != 1 {
                    Err(Error::invalid("intercept-only mechanism needs p = 1"))
                } else if !(0.0..=1.0).contains(success_fraction) {
                    Err(Error::invalid("success fraction must lie in [0, 1]"))
                } else {
                    Ok(())
                }
            }
        }
    }
}

/// Draws the dataset described by `config`. Rows are produced sequentially
/// from one seeded stream, so the dataset for `n` is the first `n` rows of the
/// dataset for any larger `n` with the same seed.
pub fn generate_dataset(config: &GeneratorConfig) -> Result<Dataset> {
    config.validate()?;
    let (n, p) = (config.n, config.p);
    let beta = DVector::from_column_slice(&config.true_beta);
    let mut rng = chain_rng(config.seed);
    let mut x = DMatrix::zeros(n, p);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        match &config.mechanism {
            Mechanism::InterceptOnly {
                success_fraction: f,
            } => {
                x[(i, 0)] = 1.0;
                y.push(((i + 1) as f64 * f).floor() > (i as f64 * f).floor());
                continue;
            }
            Mechanism::GaussianCovariates { intercept } => {
                for j in 0..p {
                    x[(i, j)] = if *intercept && j == 0 {
                        1.0
                    } else {
                        rng.sample(StandardNormal)
                    };
                }
            }
            Mechanism::FixedDesign { rows } => {
                let row = &rows[i % rows.len()];
                for j in 0..p {
                    x[(i, j)] = row[j];
                }
            }
        }
        let eta = x.row(i).transpose().dot(&beta);
        let u: f64 = rng.random();
        y.push(u < truncnorm::std_normal_cdf(eta));
    }
    Dataset::new(x, y)
}

/// Prior family for the growing-`p` sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PriorFamily {
    /// `Q_p = q·p·I`.
    ScaledIdentity { q: f64 },
    /// `Q_p = c·XᵀX + ridge·I` with `ridge = ridge_rel · λ_min(XXᵀ)`.
    GPrior { c: f64, ridge_rel: f64 },
    /// `Q_p = q·I` for every `p`; `λ_max(XQ⁻¹Xᵀ)` is unbounded once the row norms grow.
    FixedIdentity { q: f64 },
}

/// How the growing design is normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKind {
    /// Identity block, then iid Gaussian columns scaled to unit norm.
    UnitColumns,
    /// As `UnitColumns`, then every row rescaled to unit norm.
    UnitRows,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriorSequenceConfig {
    pub family: PriorFamily,
    pub design: DesignKind,
    /// Declared constant `c` in `λ_max(XQ⁻¹Xᵀ) < c`.
    pub b2_constant: f64,
}

impl PriorSequenceConfig {
    /// g-prior with the default relative ridge `1e-11` and `c = 2/c_g`.
    pub fn g_prior(c: f64) -> Self {
        PriorSequenceConfig {
            family: PriorFamily::GPrior {
                c,
                ridge_rel: 1e-11,
            },
            design: DesignKind::UnitColumns,
            b2_constant: 2.0 / c,
        }
    }
}

/// The `n × p` design of the growing-`p` sequence. Columns are generated in
/// order from the seed, so before row normalization the design for `p` is the
/// first `p` columns of the design for any larger `p`.
pub fn growing_design(n: usize, p: usize, kind: DesignKind, seed: u64) -> Result<DMatrix<f64>> {
    if p < n {
        return Err(Error::RankDeficient(format!(
            "full row rank needs p >= n, got n = {n}, p = {p}"
        )));
    }
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        x[(i, i)] = 1.0;
    }
    let mut rng = chain_rng(seed);
    for j in n..p {
        let mut col = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let nrm = col.norm();
        if nrm > 0.0 {
            col /= nrm;
        }
        x.set_column(j, &col);
    }
    if kind == DesignKind::UnitRows {
        for mut row in x.row_iter_mut() {
            let nrm = row.norm();
            row /= nrm;
        }
    }
    Ok(x)
}

/// Prior for one element of the growing-`p` sequence.
pub fn sequence_prior(family: PriorFamily, x: &DMatrix<f64>) -> Result<GaussianPrior> {
    let p = x.ncols();
    let q = match family {
        PriorFamily::ScaledIdentity { q } => SymMatrix::scaled_identity(p, q * p as f64),
        PriorFamily::FixedIdentity { q } => SymMatrix::scaled_identity(p, q),
        PriorFamily::GPrior { c, ridge_rel } => {
            let xxt_min = SymMatrix::gram(&x.transpose()).lambda_min();
            let ridge = ridge_rel * xxt_min;
            SymMatrix::gram(x)
                .scale(c)
                .add(&SymMatrix::scaled_identity(p, ridge))?
        }
    };
    GaussianPrior::new(q, DVector::zeros(p))
}

/// `λ_max(XQ⁻¹Xᵀ)`.
pub fn b2_value(x: &DMatrix<f64>, prior: &GaussianPrior) -> Result<f64> {
    let chol = nalgebra::Cholesky::new(prior.q().as_matrix().clone()).ok_or(Error::NotPd {
        lambda_min: prior.q().lambda_min(),
    })?;
    let w = chol.solve(&x.transpose());
    Ok(SymMatrix::symmetrized(x * w).lambda_max())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    N,
    P,
}

/// One grid point of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub size: usize,
    pub lambda: Option<f64>,
    pub lambda_source: Option<LambdaSource>,
    #[serde(rename = "L")]
    pub l: Option<f64>,
    pub epsilon: Option<f64>,
    pub log_epsilon: Option<f64>,
    pub rho_hat: Option<f64>,
    pub log_rate_gap: Option<f64>,
    pub m_star: Option<u64>,
    pub log10_m_star: Option<f64>,
    pub wall_time_ms: f64,
    /// `λ_max(XQ⁻¹Xᵀ)` for `p` sweeps.
    pub b2_value: Option<f64>,
    pub b2_ok: Option<bool>,
    pub error: Option<String>,
}

impl SweepRow {
    fn from_certificate(size: usize, cert: &ConvergenceCertificate, ms: f64) -> Self {
        SweepRow {
            size,
            lambda: Some(cert.params.lambda),
            lambda_source: Some(cert.lambda_source),
            l: Some(cert.params.l),
            epsilon: Some(cert.params.epsilon),
            log_epsilon: Some(cert.params.log_epsilon),
            rho_hat: Some(cert.rho_hat),
            log_rate_gap: Some(cert.log_rate_gap),
            m_star: cert.m_star.exact(),
            log10_m_star: Some(cert.m_star.log10()),
            wall_time_ms: ms,
            b2_value: None,
            b2_ok: None,
            error: None,
        }
    }

    fn failed(size: usize, err: &Error, ms: f64) -> Self {
        SweepRow {
            size,
            lambda: None,
            lambda_source: None,
            l: None,
            epsilon: None,
            log_epsilon: None,
            rho_hat: None,
            log_rate_gap: None,
            m_star: None,
            log10_m_star: None,
            wall_time_ms: ms,
            b2_value: None,
            b2_ok: None,
            error: Some(err.to_string()),
        }
    }

    /// `ρ̂ < 1`, decided through the log gap so that it survives rounding of `ρ̂`.
    pub fn certified(&self) -> bool {
        self.log_rate_gap.is_some_and(f64::is_finite)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    /// Observed supremum of `λ` over the successful rows.
    pub lambda_sup: Option<f64>,
    pub all_certified: bool,
    pub failed_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub schema_version: u32,
    pub axis: SweepAxis,
    pub seed: u64,
    pub rows: Vec<SweepRow>,
    pub summary: SweepSummary,
}

impl SweepResult {
    fn new(axis: SweepAxis, seed: u64, rows: Vec<SweepRow>) -> Self {
        let ok: Vec<&SweepRow> = rows.iter().filter(|r| r.error.is_none()).collect();
        let summary = SweepSummary {
            lambda_sup: ok.iter().filter_map(|r| r.lambda).reduce(f64::max),
            all_certified: !rows.is_empty() && rows.iter().all(SweepRow::certified),
            failed_rows: rows.len() - ok.len(),
        };
        SweepResult {
            schema_version: SCHEMA_VERSION,
            axis,
            seed,
            rows,
            summary,
        }
    }

    /// Writes the columns `size, lambda, L, epsilon, rho_hat, m_star, wall_time_ms`.
    /// Values that underflow or overflow `f64`/`u64` are written from their logs.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "size",
            "lambda",
            "L",
            "epsilon",
            "rho_hat",
            "m_star",
            "wall_time_ms",
        ])?;
        for row in &self.rows {
            let num = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:e}"));
            let epsilon = match (row.epsilon, row.log_epsilon) {
                (Some(e), _) if e > 0.0 => format!("{e:e}"),
                (_, Some(le)) => BurnIn::Astronomical { log10: le / LN_10 }.to_string(),
                _ => String::new(),
            };
            let m_star = match (row.m_star, row.log10_m_star) {
                (Some(m), _) => m.to_string(),
                (None, Some(l)) => BurnIn::Astronomical { log10: l }.to_string(),
                _ => String::new(),
            };
            w.write_record([
                row.size.to_string(),
                num(row.lambda),
                num(row.l),
                epsilon,
                num(row.rho_hat),
                m_star,
                format!("{:.3}", row.wall_time_ms),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Options shared by the sweeps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub tv_tolerance: f64,
    /// When false, `wall_time_ms` is written as 0 so output bytes depend only on inputs.
    pub record_timing: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            tv_tolerance: 0.01,
            record_timing: true,
        }
    }
}

fn check_grid(grid: &[usize]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid("size grid is empty"));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("size grid must be strictly increasing"));
    }
    Ok(())
}

fn elapsed_ms(start: Instant, record: bool) -> f64 {
    if record {
        start.elapsed().as_secs_f64() * 1e3
    } else {
        0.0
    }
}

/// V1 certificates along a growing-`n` sequence drawn from `config`
/// (its `n` is ignored), started at `β₀ = 0`.
pub fn sweep_n(
    config: &GeneratorConfig,
    n_grid: &[usize],
    prior: &GaussianPrior,
    opts: SweepOptions,
) -> Result<SweepResult> {
    check_grid(n_grid)?;
    if prior.dim() != config.p {
        return Err(Error::DimensionMismatch {
            expected: config.p,
            got: prior.dim(),
        });
    }
    let rows: Vec<SweepRow> = n_grid
        .par_iter()
        .map(|&n| {
            let start = Instant::now();
            let cfg = GeneratorConfig {
                n,
                ..config.clone()
            };
            let cert = generate_dataset(&cfg)
                .and_then(|data| PosteriorModel::new(data, prior.clone()))
                .and_then(|model| {
                    certify::optimize_certificate(
                        &model,
                        DriftVariant::V1Flipped,
                        opts.tv_tolerance,
                        &DVector::zeros(config.p),
                    )
                });
            let ms = elapsed_ms(start, opts.record_timing);
            match cert {
                Ok(c) => SweepRow::from_certificate(n, &c, ms),
                Err(e) => SweepRow::failed(n, &e, ms),
            }
        })
        .collect();
    Ok(SweepResult::new(SweepAxis::N, config.seed, rows))
}

/// Default responses for the growing-`p` sequence: `yᵢ = 1` for even `i`.
pub fn alternating_responses(n: usize) -> Vec<bool> {
    (0..n).map(|i| i % 2 == 0).collect()
}

/// V2 certificates along a growing-`p` sequence with fixed `n` and responses.
pub fn sweep_p(
    n: usize,
    p_grid: &[usize],
    prior_seq: &PriorSequenceConfig,
    seed: u64,
    opts: SweepOptions,
) -> Result<SweepResult> {
    check_grid(p_grid)?;
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    let y = alternating_responses(n);
    let rows: Vec<SweepRow> = p_grid
        .par_iter()
        .map(|&p| {
            let start = Instant::now();
            let mut b2 = None;
            let cert = growing_design(n, p, prior_seq.design, seed).and_then(|x| {
                let prior = sequence_prior(prior_seq.family, &x)?;
                b2 = Some(b2_value(&x, &prior)?);
                let model = PosteriorModel::new(Dataset::new(x, y.clone())?, prior)?;
                certify::optimize_certificate(
                    &model,
                    DriftVariant::V2Flipped,
                    opts.tv_tolerance,
                    &DVector::zeros(p),
                )
            });
            let ms = elapsed_ms(start, opts.record_timing);
            let mut row = match cert {
                Ok(c) => SweepRow::from_certificate(p, &c, ms),
                Err(e) => SweepRow::failed(p, &e, ms),
            };
            row.b2_value = b2;
            row.b2_ok = b2.map(|v| v < prior_seq.b2_constant);
            row
        })
        .collect();
    Ok(SweepResult::new(SweepAxis::P, seed, rows))
}

/// Instability table for the flat-prior chain along nested Gaussian datasets.
pub fn instability_sweep(
    config: &GeneratorConfig,
    n_grid: &[usize],
    gamma: &DVector<f64>,
) -> Result<Vec<certify::InstabilityRow>> {
    check_grid(n_grid)?;
    let datasets = n_grid
        .iter()
        .map(|&n| {
            generate_dataset(&GeneratorConfig {
                n,
                ..config.clone()
            })
        })
        .collect::<Result<Vec<_>>>()?;
    certify::instability_diagnostic(&datasets, gamma)
}

/// The single-observation model with `X = 1`, `Y = 1`, `v = 0` and
/// `Q = (1−ψ)/ψ`, so that `XΣ⁻¹Xᵀ = ψ`.
pub fn n1_model(psi: f64) -> Result<PosteriorModel> {
    if !(psi > 0.0 && psi < 1.0) {
        return Err(Error::invalid(format!("psi must lie in (0, 1), got {psi}")));
    }
    let data = Dataset::from_rows(&[vec![1.0]], &[1])?;
    let prior = GaussianPrior::scaled_identity(1, (1.0 - psi) / psi)?;
    PosteriorModel::new(data, prior)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_is_seed_deterministic_and_nested() {
        let cfg = GeneratorConfig::gaussian(50, vec![1.0, -0.5], 3);
        let a = generate_dataset(&cfg).unwrap();
        assert_eq!(a, generate_dataset(&cfg).unwrap());
        let big = generate_dataset(&GeneratorConfig {
            n: 80,
            ..cfg.clone()
        })
        .unwrap();
        assert_eq!(a.x(), &big.x().rows(0, 50).into_owned());
        assert_eq!(a.y(), &big.y()[..50]);
    }

    #[test]
    fn intercept_pattern_hits_fraction() {
        let d = generate_dataset(&GeneratorConfig::intercept_only(100, 0.37)).unwrap();
        assert_eq!(d.successes(), 37);
        let d = generate_dataset(&GeneratorConfig::intercept_only(10, 1.0)).unwrap();
        assert_eq!(d.successes(), 10);
    }

    #[test]
    fn g_prior_design_and_b2() {
        let x = growing_design(5, 40, DesignKind::UnitColumns, 1).unwrap();
        let prior = sequence_prior(
            PriorFamily::GPrior {
                c: 1.0,
                ridge_rel: 1e-11,
            },
            &x,
        )
        .unwrap();
        assert!(prior.is_positive_definite());
        let b2 = b2_value(&x, &prior).unwrap();
        assert!((b2 - 1.0).abs() < 1e-6, "{b2}");
        assert!(growing_design(5, 4, DesignKind::UnitColumns, 1).is_err());
    }

    #[test]
    fn unsorted_grid_rejected() {
        let cfg = GeneratorConfig::gaussian(1, vec![1.0], 0);
        let prior = GaussianPrior::flat(1);
        assert!(sweep_n(&cfg, &[100, 50], &prior, SweepOptions::default()).is_err());
    }

    #[test]
    fn n1_model_psi() {
        let m = n1_model(0.9).unwrap();
        let psi = m.hat_parts().unwrap().hat.as_matrix()[(0, 0)];
        assert!((psi - 0.9).abs() < 1e-14);
    }
}
