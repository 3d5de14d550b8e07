//! The data augmentation kernel, its two flipped companions, seeded chain runs
//! and an empirical lag-1 rate estimate.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::PosteriorModel;
use crate::truncnorm;

/// Which chain a trace records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ChainVariant {
    /// `B_m`, the original chain on ℝᵖ.
    Beta,
    /// The flipped chain `Γ = Σ^{1/2}{Σ⁻¹(XᵀZ + Qv) − B̂}` on ℝᵖ.
    Gamma,
    /// The flipped chain of latent vectors on ℝⁿ.
    Z,
}

impl ChainVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            ChainVariant::Beta => "beta",
            ChainVariant::Gamma => "gamma",
            ChainVariant::Z => "z",
        }
    }

    /// Dimension of one state for a given model.
    pub fn state_dim(self, model: &PosteriorModel) -> usize {
        match self {
            ChainVariant::Beta | ChainVariant::Gamma => model.p(),
            ChainVariant::Z => model.n(),
        }
    }
}

impl fmt::Display for ChainVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ChainVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "beta" => Ok(ChainVariant::Beta),
            "gamma" => Ok(ChainVariant::Gamma),
            "z" => Ok(ChainVariant::Z),
            other => Err(Error::invalid(format!(
                "unknown chain variant '{other}' (expected beta, gamma or z)"
            ))),
        }
    }
}

/// Current state of the original chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub beta: DVector<f64>,
    pub step_index: u64,
}

/// Ordered chain states stored row-major, together with the seed and variant.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainTrace {
    variant: ChainVariant,
    seed: u64,
    dim: usize,
    values: Vec<f64>,
}

impl ChainTrace {
    pub fn new(variant: ChainVariant, seed: u64, dim: usize) -> Self {
        ChainTrace {
            variant,
            seed,
            dim,
            values: Vec::new(),
        }
    }

    /// Wraps externally produced states, e.g. synthetic sequences for testing estimators.
    pub fn from_states(variant: ChainVariant, seed: u64, states: &[Vec<f64>]) -> Result<Self> {
        let dim = states.first().map_or(0, Vec::len);
        if dim == 0 {
            return Err(Error::invalid("trace needs at least one non-empty state"));
        }
        let mut trace = ChainTrace::new(variant, seed, dim);
        for s in states {
            trace.push(s)?;
        }
        Ok(trace)
    }

    pub fn push(&mut self, state: &[f64]) -> Result<()> {
        if state.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: state.len(),
            });
        }
        self.values.extend_from_slice(state);
        Ok(())
    }

    pub fn variant(&self) -> ChainVariant {
        self.variant
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn states(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim)
    }

    /// Writes `# seed=`, `# variant=` lines, a header and one state per row.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# seed={}", self.seed)?;
        writeln!(out, "# variant={}", self.variant)?;
        let mut w = csv::Writer::from_writer(out);
        let prefix = self.variant.as_str();
        w.write_record((1..=self.dim).map(|j| format!("{prefix}{j}")))?;
        for s in self.states() {
            w.write_record(s.iter().map(|v| format!("{v:e}")))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Draws `Zᵢ ~ TN(Xᵢᵀβ, 1; Yᵢ)` independently.
pub fn draw_latent<R: Rng + ?Sized>(
    model: &PosteriorModel,
    beta: &DVector<f64>,
    rng: &mut R,
) -> DVector<f64> {
    let eta = model.data().x() * beta;
    let data = model.data();
    DVector::from_fn(model.n(), |i, _| {
        truncnorm::tn_sample(eta[i], data.side(i), rng)
    })
}

/// Draws `B ~ N_p(Σ⁻¹(Xᵀz + Qv), Σ⁻¹)`.
pub fn draw_beta<R: Rng + ?Sized>(
    model: &PosteriorModel,
    z: &DVector<f64>,
    rng: &mut R,
) -> DVector<f64> {
    model.sample_precision_normal(&model.conditional_mean(z), rng)
}

/// One step of the original chain: latent data given `β`, then a new `β`.
pub fn ac_step<R: Rng + ?Sized>(
    model: &PosteriorModel,
    beta: &DVector<f64>,
    rng: &mut R,
) -> DVector<f64> {
    let z = draw_latent(model, beta, rng);
    draw_beta(model, &z, rng)
}

/// One step of the `Γ` flipped chain.
pub fn gamma_step<R: Rng + ?Sized>(
    model: &PosteriorModel,
    gamma: &DVector<f64>,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let center = model.sigma_inv_sqrt()?.as_matrix() * gamma + model.mode();
    let beta = model.sample_precision_normal(&center, rng);
    let z = draw_latent(model, &beta, rng);
    let shifted = model.conditional_mean(&z) - model.mode();
    Ok(model.sigma_sqrt()?.as_matrix() * shifted)
}

/// One step of the latent-data flipped chain: `B | z`, then `Z' | B`.
pub fn z_step<R: Rng + ?Sized>(
    model: &PosteriorModel,
    z: &DVector<f64>,
    rng: &mut R,
) -> DVector<f64> {
    let beta = draw_beta(model, z, rng);
    draw_latent(model, &beta, rng)
}

/// The generator every chain in this crate uses.
pub fn chain_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Runs `steps` transitions of the chosen chain from `start`, recording the
/// start and every subsequent state.
pub fn run_chain(
    model: &PosteriorModel,
    variant: ChainVariant,
    start: &DVector<f64>,
    steps: usize,
    seed: u64,
) -> Result<ChainTrace> {
    if steps == 0 {
        return Err(Error::invalid("steps must be at least 1"));
    }
    let dim = variant.state_dim(model);
    if start.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: start.len(),
        });
    }
    if start.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("chain start has non-finite entries"));
    }
    if variant == ChainVariant::Z {
        for (i, &zi) in start.iter().enumerate() {
            let s = model.data().side(i).sign();
            if !(s * zi > 0.0) {
                return Err(Error::invalid(format!(
                    "z start entry {i} = {zi} violates the truncation sign of its response"
                )));
            }
        }
    }
    let mut rng = chain_rng(seed);
    let mut trace = ChainTrace::new(variant, seed, dim);
    trace.values.reserve((steps + 1) * dim);
    let mut cur = start.clone();
    trace.push(cur.as_slice())?;
    for _ in 0..steps {
        cur = match variant {
            ChainVariant::Beta => ac_step(model, &cur, &mut rng),
            ChainVariant::Gamma => gamma_step(model, &cur, &mut rng)?,
            ChainVariant::Z => z_step(model, &cur, &mut rng),
        };
        trace.push(cur.as_slice())?;
    }
    Ok(trace)
}

/// Lag-1 autocorrelation with its batch-means standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateEstimate {
    pub estimate: f64,
    pub mc_se: f64,
    pub burn_in: usize,
    pub used: usize,
}

/// Default burn-in: the first 10% of the trace.
pub fn default_burn_in(len: usize) -> usize {
    len / 10
}

/// Lag-1 autocorrelation of `functional` over the post-burn-in states.
pub fn lag1_rate_estimate<F>(
    trace: &ChainTrace,
    functional: F,
    burn_in: usize,
) -> Result<RateEstimate>
where
    F: Fn(&[f64]) -> f64,
{
    let len = trace.len();
    if len <= burn_in + 100 {
        return Err(Error::InsufficientLength { len, burn_in });
    }
    let xs: Vec<f64> = trace.states().skip(burn_in).map(&functional).collect();
    lag1_of_series(&xs).map(|(estimate, mc_se)| RateEstimate {
        estimate,
        mc_se,
        burn_in,
        used: xs.len(),
    })
}

fn lag1_of_series(xs: &[f64]) -> Result<(f64, f64)> {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    if !(var > 0.0) || !var.is_finite() {
        return Err(Error::DiagnosticInconclusive(
            "functional is constant along the trace".into(),
        ));
    }
    let u: Vec<f64> = xs
        .windows(2)
        .map(|w| (w[0] - mean) * (w[1] - mean) / var)
        .collect();
    let estimate = u.iter().sum::<f64>() / u.len() as f64;
    let batch = (u.len() as f64).sqrt().floor().max(1.0) as usize;
    let batches = u.len() / batch;
    if batches < 2 {
        return Err(Error::DiagnosticInconclusive("too few batches".into()));
    }
    let means: Vec<f64> = u
        .chunks_exact(batch)
        .map(|c| c.iter().sum::<f64>() / batch as f64)
        .collect();
    let bm = means.iter().sum::<f64>() / batches as f64;
    let bvar = means.iter().map(|m| (m - bm).powi(2)).sum::<f64>() / (batches - 1) as f64;
    Ok((estimate, (bvar / batches as f64).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Dataset, GaussianPrior};
    use rand_distr::StandardNormal;

    fn small_model() -> PosteriorModel {
        let d = Dataset::from_rows(
            &[
                vec![1.0, 0.2],
                vec![1.0, -0.7],
                vec![1.0, 1.1],
                vec![1.0, -1.5],
            ],
            &[1, 0, 1, 0],
        )
        .unwrap();
        PosteriorModel::new(d, GaussianPrior::scaled_identity(2, 0.5).unwrap()).unwrap()
    }

    #[test]
    fn one_step_trace_has_two_states() {
        let m = small_model();
        let t = run_chain(&m, ChainVariant::Beta, m.mode(), 1, 3).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.state(0), m.mode().as_slice());
    }

    #[test]
    fn traces_are_seed_deterministic() {
        let m = small_model();
        for variant in [ChainVariant::Beta, ChainVariant::Gamma] {
            let start = DVector::zeros(2);
            let a = run_chain(&m, variant, &start, 50, 9).unwrap();
            let b = run_chain(&m, variant, &start, 50, 9).unwrap();
            let c = run_chain(&m, variant, &start, 50, 10).unwrap();
            assert_eq!(a, b);
            assert_ne!(a.state(1), c.state(1));
        }
    }

    #[test]
    fn z_chain_respects_signs() {
        let m = small_model();
        let start = DVector::from_vec(vec![0.5, -0.5, 0.5, -0.5]);
        let t = run_chain(&m, ChainVariant::Z, &start, 200, 1).unwrap();
        for s in t.states() {
            for (i, v) in s.iter().enumerate() {
                assert!(m.data().side(i).sign() * v > 0.0);
            }
        }
    }

    #[test]
    fn bad_z_start_rejected() {
        let m = small_model();
        let start = DVector::from_vec(vec![-0.5, -0.5, 0.5, -0.5]);
        assert!(run_chain(&m, ChainVariant::Z, &start, 1, 1).is_err());
    }

    #[test]
    fn csv_export_has_metadata() {
        let m = small_model();
        let t = run_chain(&m, ChainVariant::Gamma, &DVector::zeros(2), 3, 42).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# seed=42");
        assert_eq!(lines[1], "# variant=gamma");
        assert_eq!(lines[2], "gamma1,gamma2");
        assert_eq!(lines.len(), 3 + 4);
    }

    #[test]
    fn lag1_of_iid_and_ar1() {
        let mut rng = chain_rng(5);
        let n = 100_000;
        let iid: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.sample(StandardNormal)]).collect();
        let t = ChainTrace::from_states(ChainVariant::Z, 5, &iid).unwrap();
        let r = lag1_rate_estimate(&t, |s| s[0], 0).unwrap();
        assert!(r.estimate.abs() < 5.0 * r.mc_se, "{r:?}");

        let mut x = 0.0f64;
        let ar: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let e: f64 = rng.sample(StandardNormal);
                x = 0.8 * x + e;
                vec![x]
            })
            .collect();
        let t = ChainTrace::from_states(ChainVariant::Z, 5, &ar).unwrap();
        let r = lag1_rate_estimate(&t, |s| s[0], default_burn_in(t.len())).unwrap();
        assert!((r.estimate - 0.8).abs() < 5.0 * r.mc_se, "{r:?}");
    }

    #[test]
    fn short_trace_rejected() {
        let states: Vec<Vec<f64>> = (0..150).map(|i| vec![i as f64]).collect();
        let t = ChainTrace::from_states(ChainVariant::Beta, 0, &states).unwrap();
        assert!(matches!(
            lag1_rate_estimate(&t, |s| s[0], 50),
            Err(Error::InsufficientLength {
                len: 150,
                burn_in: 50
            })
        ));
    }
}
