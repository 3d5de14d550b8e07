//! Drift and minorization parameters for the two flipped chains, the
//! Rosenthal rate bound optimized over `(r, d)`, and total-variation burn-in
//! certificates built from them.
//!
//! The minorization number `ε = 2^{-k/2}e^{-d}` underflows `f64` once `d`
//! exceeds roughly 745, which happens whenever `λ` is within a few percent
//! of one. Everything that depends on `ε` is therefore carried in log space as
//! well: `log_epsilon` and the log of the rate gap `−ln ρ̂`.

use std::collections::HashMap;
use std::f64::consts::{LN_10, LN_2, PI};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::{Dataset, GaussianPrior, PosteriorModel};
use crate::sampler::chain_rng;
use crate::symmat::{SymMatrix, REL_EIG_TOL};
use crate::truncnorm;

/// Version tag written into every JSON/CSV artifact.
pub const SCHEMA_VERSION: u32 = 1;

/// Default cap on `p` for the orthant bound (it scans `2^p` orthants).
pub const DEFAULT_P_MAX: usize = 20;

/// Relative margin kept between `r` and its optimal value so that the
/// minorization branch of `ρ̂` is the binding one and can be evaluated in logs.
const R_MARGIN: f64 = 1e-6;

/// Which flipped chain the drift function belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum DriftVariant {
    /// `Ṽ₁(γ) = ‖γ‖²` on the `Γ` chain.
    #[serde(rename = "v1_flipped")]
    V1Flipped,
    /// `V̌₂(z)` on the latent-data chain.
    #[serde(rename = "v2_flipped")]
    V2Flipped,
}

impl DriftVariant {
    /// The dimension `k` entering `L = k(1+λ)` and `ε = 2^{-k/2}e^{-d}`.
    pub fn dimension(self, n: usize, p: usize) -> usize {
        match self {
            DriftVariant::V1Flipped => p,
            DriftVariant::V2Flipped => n,
        }
    }
}

/// Where a certified `λ` came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaSource {
    OrthantBound,
    PdPriorBound,
    InterceptClosedForm,
    HatMatrix,
}

/// Drift coefficient `λ`, drift constant `L`, small-set size `d` and
/// minorization number `ε` for one flipped chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriftMinParams {
    pub variant: DriftVariant,
    pub lambda: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub d: f64,
    /// `ε` as an `f64`; zero when it underflows.
    pub epsilon: f64,
    pub log_epsilon: f64,
}

impl DriftMinParams {
    /// Parameters at an explicit small-set size `d > 2L/(1−λ)`.
    pub fn at_d(variant: DriftVariant, lambda: f64, n: usize, p: usize, d: f64) -> Result<Self> {
        check_lambda(lambda)?;
        let k = variant.dimension(n, p);
        if k == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        let l = k as f64 * (1.0 + lambda);
        let d_lo = 2.0 * l / (1.0 - lambda);
        if !(d > d_lo) || !d.is_finite() {
            return Err(Error::invalid(format!(
                "d = {d} must exceed 2L/(1-lambda) = {d_lo}"
            )));
        }
        let log_epsilon = -0.5 * k as f64 * LN_2 - d;
        Ok(DriftMinParams {
            variant,
            lambda,
            l,
            d,
            epsilon: log_epsilon.exp(),
            log_epsilon,
        })
    }

    /// `2L/(1−λ)`, the infimum of admissible `d`.
    pub fn d_lower_limit(&self) -> f64 {
        2.0 * self.l / (1.0 - self.lambda)
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(Error::CertificationFailed(format!(
            "drift coefficient lambda = {lambda} is not in [0, 1)"
        )));
    }
    Ok(())
}

/// `d = d_multiplier · 2L/(1−λ)` with `L` and `ε` per variant.
pub fn make_dm_params(
    variant: DriftVariant,
    lambda: f64,
    n: usize,
    p: usize,
    d_multiplier: f64,
) -> Result<DriftMinParams> {
    check_lambda(lambda)?;
    if !(d_multiplier > 1.0) || !d_multiplier.is_finite() {
        return Err(Error::invalid(format!(
            "d multiplier must be finite and > 1, got {d_multiplier}"
        )));
    }
    let k = variant.dimension(n, p) as f64;
    let d = d_multiplier * 2.0 * k * (1.0 + lambda) / (1.0 - lambda);
    DriftMinParams::at_d(variant, lambda, n, p, d)
}

/// `ρ̂ = (1−ε)^r ∨ [(1+2L+λd)/(1+d)]^{1−r}·[1+2(λd+L)]^r`.
pub fn rosenthal_rho(params: &DriftMinParams, r: f64) -> f64 {
    let first = (r * (-params.epsilon).ln_1p()).exp();
    let (a, ln_b) = drift_logs(params.lambda, params.l, params.d);
    let second = (-(1.0 - r) * a + r * ln_b).exp();
    first.max(second)
}

/// `(−ln A, ln B)` with `A = (1+2L+λd)/(1+d)` and `B = 1+2(λd+L)`.
fn drift_logs(lambda: f64, l: f64, d: f64) -> (f64, f64) {
    let x = ((1.0 - lambda) * d - 2.0 * l) / (1.0 + d);
    (-(-x).ln_1p(), (2.0 * (lambda * d + l)).ln_1p())
}

/// `ln(−ln(1−ε))` from `ln ε`.
fn ln_e1(log_epsilon: f64) -> f64 {
    if log_epsilon < -30.0 {
        log_epsilon
    } else {
        (-(-log_epsilon.exp()).ln_1p()).ln()
    }
}

/// `ln(−ln ρ̂)`; `−∞` when `ρ̂ ≥ 1`. Evaluated in logs so that it stays
/// meaningful when `ρ̂` rounds to 1.
pub fn log_rate_gap(params: &DriftMinParams, r: f64) -> f64 {
    let (a, ln_b) = drift_logs(params.lambda, params.l, params.d);
    let branch1 = r.ln() + ln_e1(params.log_epsilon);
    let second = (1.0 - r) * a - r * ln_b;
    let branch2 = if second > 0.0 {
        second.ln()
    } else {
        f64::NEG_INFINITY
    };
    branch1.min(branch2)
}

/// For fixed `d`, the gap `min(r·e₁, a − r·b)` is maximized at `r = a/(e₁+b)`.
/// Returns `(ln gap*, r*)`.
fn best_r(lambda: f64, l: f64, d: f64, log_epsilon: f64) -> (f64, f64) {
    let (a, ln_b) = drift_logs(lambda, l, d);
    let b = a + ln_b;
    let le1 = ln_e1(log_epsilon);
    let e1 = le1.exp();
    let r = a / (e1 + b);
    (a.ln() + le1 - (e1 + b).ln(), r)
}

/// Result of minimizing `ρ̂` over `(r, d)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateOptimum {
    pub params: DriftMinParams,
    pub r: f64,
    pub rho_hat: f64,
    pub log_rate_gap: f64,
}

/// Minimizes `ρ̂` over `d ∈ (2L/(1−λ)(1+1e-6), 2L/(1−λ)·10⁴]` and `r ∈ (0,1)`.
///
/// For each `d` the optimal `r` is available in closed form, so the search is
/// one-dimensional: a 64-point log grid in `d` followed by golden-section
/// refinement of `ln d` around the best grid point.
pub fn optimize_rate(
    variant: DriftVariant,
    lambda: f64,
    n: usize,
    p: usize,
) -> Result<RateOptimum> {
    check_lambda(lambda)?;
    let k = variant.dimension(n, p) as f64;
    let l = k * (1.0 + lambda);
    let d_lo = 2.0 * l / (1.0 - lambda);
    let lo = (d_lo * (1.0 + 1e-6)).ln();
    let hi = (d_lo * 1e4).ln();
    let objective = |ln_d: f64| {
        let d = ln_d.exp();
        let log_eps = -0.5 * k * LN_2 - d;
        best_r(lambda, l, d, log_eps).0
    };

    const GRID: usize = 64;
    let grid: Vec<f64> = (0..GRID)
        .map(|i| lo + (hi - lo) * i as f64 / (GRID - 1) as f64)
        .collect();
    let values: Vec<f64> = grid.iter().map(|&x| objective(x)).collect();
    let best = (0..GRID)
        .filter(|&i| values[i].is_finite())
        .max_by(|&i, &j| values[i].total_cmp(&values[j]))
        .ok_or(Error::NoCertificate {
            best_log_gap: f64::NEG_INFINITY,
        })?;
    let mut a = grid[best.saturating_sub(1)];
    let mut b = grid[(best + 1).min(GRID - 1)];
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - inv_phi * (b - a);
    let mut e = a + inv_phi * (b - a);
    let mut fc = objective(c);
    let mut fe = objective(e);
    for _ in 0..200 {
        if (b - a).abs() <= 1e-14 * (1.0 + b.abs()) {
            break;
        }
        if fc >= fe {
            b = e;
            e = c;
            fe = fc;
            c = b - inv_phi * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + inv_phi * (b - a);
            fe = objective(e);
        }
    }
    let (mut ln_d, mut best_val) = if fc >= fe { (c, fc) } else { (e, fe) };
    if !(best_val >= values[best]) {
        ln_d = grid[best];
        best_val = values[best];
    }
    if !best_val.is_finite() {
        return Err(Error::NoCertificate {
            best_log_gap: best_val,
        });
    }
    let d = ln_d.exp().max(d_lo * (1.0 + 1e-6));
    let params = DriftMinParams::at_d(variant, lambda, n, p, d)?;
    let (_, r_star) = best_r(lambda, l, d, params.log_epsilon);
    let r = r_star * (1.0 - R_MARGIN);
    let log_gap = log_rate_gap(&params, r);
    if !log_gap.is_finite() || !(r > 0.0 && r < 1.0) {
        return Err(Error::NoCertificate {
            best_log_gap: log_gap,
        });
    }
    Ok(RateOptimum {
        params,
        r,
        rho_hat: rosenthal_rho(&params, r),
        log_rate_gap: log_gap,
    })
}

/// The smallest `m ≥ 1` with `H·ρ̂^{m−1} ≤ tol`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BurnIn {
    Exact(u64),
    /// Too large to represent as an integer; only `log₁₀ m*` is known.
    Astronomical {
        log10: f64,
    },
}

impl BurnIn {
    pub fn exact(self) -> Option<u64> {
        match self {
            BurnIn::Exact(m) => Some(m),
            BurnIn::Astronomical { .. } => None,
        }
    }

    pub fn log10(self) -> f64 {
        match self {
            BurnIn::Exact(m) => (m as f64).log10(),
            BurnIn::Astronomical { log10 } => log10,
        }
    }
}

impl std::fmt::Display for BurnIn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BurnIn::Exact(m) => write!(f, "{m}"),
            BurnIn::Astronomical { log10 } => {
                let exp = log10.floor();
                write!(f, "{:.3}e{}", 10f64.powf(log10 - exp), exp as i64)
            }
        }
    }
}

/// `H·ρ̂^{m−1}`.
pub fn tv_bound(h: f64, rho_hat: f64, m: u64) -> f64 {
    h * rho_hat.powf(m.saturating_sub(1) as f64)
}

/// Burn-in from `H`, the tolerance and the rate. Exact when `−ln ρ̂ ≥ 1e-12`
/// (so the stored `ρ̂` resolves the rate) and the count fits comfortably in an
/// integer; otherwise reported through `log₁₀ m*`.
pub fn burn_in(h: f64, tv_tolerance: f64, rho_hat: f64, log_gap: f64) -> BurnIn {
    let k = (h / tv_tolerance).ln();
    if k <= 0.0 {
        return BurnIn::Exact(1);
    }
    let gap = log_gap.exp();
    if rho_hat < 1.0 && gap >= 1e-12 {
        let g = -rho_hat.ln();
        let steps = (k / g).ceil();
        if steps < 1e15 {
            let mut m = steps as u64 + 1;
            while tv_bound(h, rho_hat, m) > tv_tolerance {
                m += 1;
            }
            while m >= 2 && tv_bound(h, rho_hat, m - 1) <= tv_tolerance {
                m -= 1;
            }
            return BurnIn::Exact(m);
        }
    }
    BurnIn::Astronomical {
        log10: (k.ln() - log_gap) / LN_10,
    }
}

/// A total-variation burn-in guarantee for the original chain started at `β₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceCertificate {
    pub params: DriftMinParams,
    pub lambda_source: LambdaSource,
    pub r: f64,
    pub rho_hat: f64,
    pub log_rate_gap: f64,
    pub h_beta0: f64,
    pub m_star: BurnIn,
    pub tv_tolerance: f64,
}

/// Outcome of re-deriving a certificate's numbers from its stored fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub rho_error: f64,
    pub d_admissible: bool,
    pub burn_in_ok: bool,
}

impl ConsistencyReport {
    pub fn ok(&self) -> bool {
        self.rho_error <= 1e-12 && self.d_admissible && self.burn_in_ok
    }
}

impl ConvergenceCertificate {
    pub fn variant(&self) -> DriftVariant {
        self.params.variant
    }

    pub fn lambda(&self) -> f64 {
        self.params.lambda
    }

    /// Recomputes `ρ̂` and the burn-in conditions from the stored fields.
    pub fn check_consistency(&self) -> ConsistencyReport {
        let rho = rosenthal_rho(&self.params, self.r);
        let rho_error = (rho - self.rho_hat).abs();
        let d_admissible = self.params.d > self.params.d_lower_limit();
        let burn_in_ok = match self.m_star {
            BurnIn::Exact(m) => {
                let below = tv_bound(self.h_beta0, self.rho_hat, m) <= self.tv_tolerance;
                let tight =
                    m < 2 || self.tv_tolerance < tv_bound(self.h_beta0, self.rho_hat, m - 1);
                below && tight
            }
            BurnIn::Astronomical { log10 } => {
                let k = (self.h_beta0 / self.tv_tolerance).ln();
                let gap = log_rate_gap(&self.params, self.r);
                let expect = (k.ln() - gap) / LN_10;
                k > 0.0
                    && log10.is_finite()
                    && (log10 - expect).abs() <= 1e-9 * (1.0 + expect.abs())
            }
        };
        ConsistencyReport {
            rho_error,
            d_admissible,
            burn_in_ok,
        }
    }

    /// Certificate as a JSON value with a stable field set.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("certificate serializes")
    }
}

impl Serialize for ConvergenceCertificate {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Out {
            schema_version: u32,
            variant: DriftVariant,
            lambda: f64,
            lambda_source: LambdaSource,
            #[serde(rename = "L")]
            l: f64,
            d: f64,
            epsilon: f64,
            log_epsilon: f64,
            r: f64,
            rho_hat: f64,
            log_rate_gap: f64,
            #[serde(rename = "H_beta0")]
            h_beta0: f64,
            m_star: Option<u64>,
            log10_m_star: f64,
            tv_tolerance: f64,
        }
        Out {
            schema_version: SCHEMA_VERSION,
            variant: self.params.variant,
            lambda: self.params.lambda,
            lambda_source: self.lambda_source,
            l: self.params.l,
            d: self.params.d,
            epsilon: self.params.epsilon,
            log_epsilon: self.params.log_epsilon,
            r: self.r,
            rho_hat: self.rho_hat,
            log_rate_gap: self.log_rate_gap,
            h_beta0: self.h_beta0,
            m_star: self.m_star.exact(),
            log10_m_star: self.m_star.log10(),
            tv_tolerance: self.tv_tolerance,
        }
        .serialize(s)
    }
}

/// Orthant bound on `λ` together with whether it certifies anything.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrthantBound {
    pub value: f64,
    /// False when the bound is `≥ 1` and therefore useless.
    pub certifying: bool,
}

/// Upper bound on the `V₁` drift coefficient from the open orthants of ℝᵖ.
pub fn lambda_v1_orthant_bound(model: &PosteriorModel, p_max: usize) -> Result<OrthantBound> {
    let p = model.p();
    if p > p_max {
        return Err(Error::CombinatorialBlowup { p, p_max });
    }
    let s = model.sigma_inv_sqrt()?;
    let x = model.data().x();
    let top = SymMatrix::gram(x).congruence(s)?.lambda_max();

    // Gram sums per (sign pattern, response); bit j set means coordinate j > 0.
    let mut blocks: HashMap<(u32, bool), (DMatrix<f64>, usize)> = HashMap::new();
    'rows: for i in 0..model.n() {
        let mut pattern = 0u32;
        for j in 0..p {
            let v = x[(i, j)];
            if v == 0.0 {
                continue 'rows;
            }
            if v > 0.0 {
                pattern |= 1 << j;
            }
        }
        let row = x.row(i).transpose();
        let entry = blocks
            .entry((pattern, model.data().y()[i]))
            .or_insert_with(|| (DMatrix::zeros(p, p), 0));
        entry.0 += &row * row.transpose();
        entry.1 += 1;
    }

    let full: u32 = if p == 32 { u32::MAX } else { (1u32 << p) - 1 };
    let mut min_eig = f64::INFINITY;
    for orthant in 0..=full {
        let mut w = DMatrix::zeros(p, p);
        let mut rows = 0usize;
        if let Some((g, c)) = blocks.get(&(orthant, false)) {
            w += g;
            rows += c;
        }
        if let Some((g, c)) = blocks.get(&(!orthant & full, true)) {
            w += g;
            rows += c;
        }
        let eig = if rows < p {
            0.0
        } else {
            SymMatrix::symmetrized(w)
                .congruence(s)?
                .lambda_min()
                .max(0.0)
        };
        min_eig = min_eig.min(eig);
        if min_eig <= 0.0 {
            break;
        }
    }
    let root = (top - 2.0 / PI * min_eig).max(0.0);
    let value = root * root;
    Ok(OrthantBound {
        value,
        certifying: value < 1.0,
    })
}

/// `λ_max²(I − Σ^{-1/2}QΣ^{-1/2})`, valid when `Q` is positive definite.
pub fn lambda_v1_pdq_bound(model: &PosteriorModel) -> Result<f64> {
    if !model.prior().is_positive_definite() {
        return Err(Error::NotPd {
            lambda_min: model.prior().q().lambda_min(),
        });
    }
    let s = model.sigma_inv_sqrt()?;
    let m = SymMatrix::identity(model.p()).sub(&model.prior().q().congruence(s)?)?;
    let top = m.lambda_max().max(0.0);
    Ok(top * top)
}

/// Certified `λ` for the `V₁` flipped chain and the bounds it was chosen from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LambdaV1 {
    pub lambda: f64,
    pub source: LambdaSource,
    pub orthant: Option<f64>,
    pub pd_prior: Option<f64>,
}

/// Smallest certified bound below 1 among the orthant and positive-definite-prior bounds.
pub fn lambda_v1(model: &PosteriorModel) -> Result<LambdaV1> {
    lambda_v1_with(model, DEFAULT_P_MAX)
}

pub fn lambda_v1_with(model: &PosteriorModel, p_max: usize) -> Result<LambdaV1> {
    let orthant = match lambda_v1_orthant_bound(model, p_max) {
        Ok(b) => Some(b.value),
        Err(Error::CombinatorialBlowup { .. }) => None,
        Err(e) => return Err(e),
    };
    let pd_prior = if model.prior().is_positive_definite() {
        Some(lambda_v1_pdq_bound(model)?)
    } else {
        None
    };
    let mut best: Option<(f64, LambdaSource)> = None;
    for (value, source) in [
        (orthant, LambdaSource::OrthantBound),
        (pd_prior, LambdaSource::PdPriorBound),
    ] {
        if let Some(v) = value.filter(|v| *v < 1.0) {
            if best.is_none_or(|(b, _)| v < b) {
                best = Some((v, source));
            }
        }
    }
    match best {
        Some((lambda, source)) => Ok(LambdaV1 {
            lambda,
            source,
            orthant,
            pd_prior,
        }),
        None => Err(Error::CertificationFailed(format!(
            "no certified drift coefficient below 1 (orthant bound: {}, positive-definite prior bound: {})",
            orthant.map_or("unavailable".into(), |v| v.to_string()),
            pd_prior.map_or("unavailable".into(), |v| v.to_string()),
        ))),
    }
}

/// `λ_max²(XΣ⁻¹Xᵀ)` for the `V₂` flipped chain; needs `X` of full row rank.
pub fn lambda_v2(model: &PosteriorModel) -> Result<f64> {
    let top = model.hat_parts()?.lambda_max;
    Ok(top * top)
}

/// `‖M(β)u‖²` with `M(β) = Σ^{-1/2}XᵀD(β)XΣ^{-1/2}`, the drift ratio at
/// `α ∝ Σ^{-1/2}u` and `β = B̂ + sΣ^{-1/2}u`.
fn drift_ratio(model: &PosteriorModel, s_inv: &DMatrix<f64>, u: &DVector<f64>, s: f64) -> f64 {
    let w = s_inv * u;
    let beta = model.mode() + &w * s;
    let dvec = model.d_matrix(&beta);
    let xw = model.data().x() * &w;
    let weighted = xw.component_mul(&dvec);
    let v = s_inv * model.data().x().tr_mul(&weighted);
    v.norm_squared()
}

/// Uncertified estimate of the exact drift coefficient, from a multi-start
/// local search over the direction `u` and the step `s`. Any value it returns
/// is attained, hence a lower bound on the supremum.
pub fn lambda_v1_heuristic(model: &PosteriorModel, starts: usize, seed: u64) -> Result<f64> {
    let s_inv = model.sigma_inv_sqrt()?.as_matrix().clone();
    let p = model.p();
    let mut rng = chain_rng(seed);
    let log_steps: Vec<f64> = (0..25).map(|i| -6.0 + 0.5 * i as f64).collect();
    let mut best = 0.0f64;
    for _ in 0..starts.max(1) {
        let mut u = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
        u /= u.norm();
        let (mut ls, mut val) = log_steps
            .iter()
            .map(|&ls| (ls, drift_ratio(model, &s_inv, &u, ls.exp())))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty grid");
        let mut radius = 0.5;
        for _ in 0..200 {
            let mut cand =
                &u + DVector::from_fn(p, |_, _| radius * rng.sample::<f64, _>(StandardNormal));
            let nrm = cand.norm();
            if nrm == 0.0 {
                continue;
            }
            cand /= nrm;
            let cand_ls = ls + radius * rng.sample::<f64, _>(StandardNormal);
            let v = drift_ratio(model, &s_inv, &cand, cand_ls.exp());
            if v > val {
                u = cand;
                ls = cand_ls;
                val = v;
            } else {
                radius = (radius * 0.97).max(1e-4);
            }
        }
        best = best.max(val);
    }
    Ok(best)
}

fn check_beta(model: &PosteriorModel, beta: &DVector<f64>) -> Result<()> {
    if beta.len() != model.p() {
        return Err(Error::DimensionMismatch {
            expected: model.p(),
            got: beta.len(),
        });
    }
    if beta.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("starting point has non-finite entries"));
    }
    Ok(())
}

fn h_common(model: &PosteriorModel, params: &DriftMinParams) -> f64 {
    2.0 + params.l / (1.0 - params.lambda) + model.trace_hat()
}

/// `H(β)` for the `V₁` certificate.
pub fn h_beta_v1(
    model: &PosteriorModel,
    beta: &DVector<f64>,
    params: &DriftMinParams,
) -> Result<f64> {
    if params.variant != DriftVariant::V1Flipped {
        return Err(Error::invalid("h_beta_v1 needs V1 parameters"));
    }
    check_beta(model, beta)?;
    let w = model.fixed_point_map(beta) - model.mode();
    let last = w.dot(&(model.sigma().as_matrix() * &w));
    Ok(h_common(model, params) + last)
}

/// `H(β)` for the `V₂` certificate.
pub fn h_beta_v2(
    model: &PosteriorModel,
    beta: &DVector<f64>,
    params: &DriftMinParams,
) -> Result<f64> {
    if params.variant != DriftVariant::V2Flipped {
        return Err(Error::invalid("h_beta_v2 needs V2 parameters"));
    }
    check_beta(model, beta)?;
    let hat = model.hat_parts()?;
    let w = model.fixed_point_map(beta) - model.mode();
    let xw = model.data().x() * w;
    let y = hat
        .chol
        .l_dirty()
        .solve_lower_triangular(&xw)
        .expect("Cholesky factor has a nonzero diagonal");
    Ok(h_common(model, params) + y.norm_squared())
}

/// Optimized certificate for a given certified `λ`.
pub fn certificate_for_lambda(
    model: &PosteriorModel,
    variant: DriftVariant,
    lambda: f64,
    source: LambdaSource,
    tv_tolerance: f64,
    beta0: &DVector<f64>,
) -> Result<ConvergenceCertificate> {
    if !(tv_tolerance > 0.0) || !tv_tolerance.is_finite() {
        return Err(Error::invalid(format!(
            "tv tolerance must be positive and finite, got {tv_tolerance}"
        )));
    }
    let opt = optimize_rate(variant, lambda, model.n(), model.p())?;
    let h = match variant {
        DriftVariant::V1Flipped => h_beta_v1(model, beta0, &opt.params)?,
        DriftVariant::V2Flipped => h_beta_v2(model, beta0, &opt.params)?,
    };
    Ok(ConvergenceCertificate {
        params: opt.params,
        lambda_source: source,
        r: opt.r,
        rho_hat: opt.rho_hat,
        log_rate_gap: opt.log_rate_gap,
        h_beta0: h,
        m_star: burn_in(h, tv_tolerance, opt.rho_hat, opt.log_rate_gap),
        tv_tolerance,
    })
}

/// Certified `λ` for the variant, then the optimized certificate from `β₀`.
pub fn optimize_certificate(
    model: &PosteriorModel,
    variant: DriftVariant,
    tv_tolerance: f64,
    beta0: &DVector<f64>,
) -> Result<ConvergenceCertificate> {
    let (lambda, source) = match variant {
        DriftVariant::V1Flipped => {
            let l = lambda_v1(model)?;
            (l.lambda, l.source)
        }
        DriftVariant::V2Flipped => {
            let l = lambda_v2(model)?;
            if l >= 1.0 {
                return Err(Error::CertificationFailed(format!(
                    "lambda_max^2(X Sigma^-1 X^T) = {l} is not below 1; a positive definite prior is needed"
                )));
            }
            (l, LambdaSource::HatMatrix)
        }
    };
    certificate_for_lambda(model, variant, lambda, source, tv_tolerance, beta0)
}

/// Closed-form orthant bound for the intercept-only model with `s` successes
/// out of `n` and prior precision `q`.
pub fn intercept_only_lambda(n: usize, successes: usize, q: f64) -> Result<f64> {
    if successes == 0 || successes >= n {
        return Err(Error::invalid(format!(
            "need 0 < successes < n, got successes = {successes}, n = {n}"
        )));
    }
    if !(q >= 0.0) || !q.is_finite() {
        return Err(Error::invalid(format!(
            "q must be finite and >= 0, got {q}"
        )));
    }
    let nf = n as f64;
    let p_hat = successes as f64 / nf;
    let k = nf / (nf + q);
    let root = k - 2.0 / PI * k * p_hat.min(1.0 - p_hat);
    Ok(root * root)
}

/// Certificate for the intercept-only model, started at `β₀ = 0`.
pub fn intercept_only_certificate(
    n: usize,
    successes: usize,
    q: f64,
    tv_tolerance: f64,
) -> Result<ConvergenceCertificate> {
    let lambda = intercept_only_lambda(n, successes, q)?;
    let data = Dataset::intercept_only(n, successes)?;
    let prior = GaussianPrior::scaled_identity(1, q)?;
    let model = PosteriorModel::new(data, prior)?;
    certificate_for_lambda(
        &model,
        DriftVariant::V1Flipped,
        lambda,
        LambdaSource::InterceptClosedForm,
        tv_tolerance,
        &DVector::zeros(1),
    )
}

/// One row of the minorization-instability table for the flat-prior chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InstabilityRow {
    pub n: usize,
    /// `‖(XᵀX)⁻¹Xᵀ(φ(γ) − φ(−γ))‖²`.
    pub delta: f64,
    /// `2·tr{(XᵀX)⁻¹}`.
    pub trace_term: f64,
    /// The separation `δ = Delta/5` used in the overlap bound.
    pub delta_used: f64,
    pub overlap_upper_bound: f64,
}

/// Upper bounds on the overlap of the one-step laws from `γ` and `−γ` along a
/// sequence of datasets, for the flat prior.
pub fn instability_diagnostic(
    datasets: &[Dataset],
    gamma: &DVector<f64>,
) -> Result<Vec<InstabilityRow>> {
    let mut rows = Vec::with_capacity(datasets.len());
    for data in datasets {
        if gamma.len() != data.p() {
            return Err(Error::DimensionMismatch {
                expected: data.p(),
                got: gamma.len(),
            });
        }
        let xtx = SymMatrix::gram(data.x());
        let (lmin, lmax) = xtx.eig_extremes();
        if !(lmin > REL_EIG_TOL * lmax) {
            return Err(Error::RankDeficient(format!(
                "X^T X is singular at n = {} (lambda_min = {lmin:e})",
                data.n()
            )));
        }
        let chol = nalgebra::Cholesky::new(xtx.as_matrix().clone())
            .ok_or(Error::NotPd { lambda_min: lmin })?;
        let diff = data.varphi(gamma) - data.varphi(&(-gamma));
        let delta = chol.solve(&data.x().tr_mul(&diff)).norm_squared();
        if !(delta > 0.0) {
            return Err(Error::DiagnosticInconclusive(format!(
                "conditional means from gamma and -gamma coincide at n = {}",
                data.n()
            )));
        }
        let trace_inv = chol.inverse().trace();
        let delta_used = delta / 5.0;
        rows.push(InstabilityRow {
            n: data.n(),
            delta,
            trace_term: 2.0 * trace_inv,
            delta_used,
            overlap_upper_bound: (4.0 * trace_inv / delta_used).min(1.0),
        });
    }
    Ok(rows)
}

/// `max(0, 1 − (1−ψ)/(1−2/π))`, a lower bound on the `L²` rate of the `n = 1` chain.
pub fn rate_lower_bound_n1(psi: f64) -> Result<f64> {
    if !(psi > 0.0 && psi < 1.0) {
        return Err(Error::invalid(format!("psi must lie in (0, 1), got {psi}")));
    }
    Ok((1.0 - (1.0 - psi) / (1.0 - 2.0 / PI)).max(0.0))
}

/// Exact small-set overlap `2Φ(−√d)` of the scalar `V₁` flipped chain.
pub fn exact_overlap_p1(d: f64) -> f64 {
    2.0 * truncnorm::std_normal_cdf(-d.sqrt())
}

/// `2^{-k/2}e^{-d}`.
pub fn minorization_epsilon(k: usize, d: f64) -> f64 {
    (-0.5 * k as f64 * LN_2 - d).exp()
}
