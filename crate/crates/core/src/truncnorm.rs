//! Unit-variance truncated normal distributions `TN(θ, 1; side)`: moments, the
//! variance function `g`, and an exact sampler that stays efficient deep in
//! either tail.

use libm::erfc;
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::error::{Error, Result};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Below this argument `φ/Φ` is evaluated by continued fraction.
const TAIL_SWITCH: f64 = -8.0;
const CF_TERMS: usize = 60;

/// Mass threshold under which naive rejection from `N(θ, 1)` is abandoned.
const NAIVE_MIN_MASS: f64 = 0.2;

/// Which half-line the draw is confined to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TruncSide {
    /// Support `(0, ∞)`, used for responses `y = 1`.
    Positive,
    /// Support `(−∞, 0)`, used for responses `y = 0`.
    Negative,
}

impl TruncSide {
    pub fn from_response(y: bool) -> Self {
        if y {
            TruncSide::Positive
        } else {
            TruncSide::Negative
        }
    }

    /// `+1` for the positive side, `−1` for the negative side.
    pub fn sign(self) -> f64 {
        match self {
            TruncSide::Positive => 1.0,
            TruncSide::Negative => -1.0,
        }
    }
}

pub fn std_normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

/// `ln Φ(x)`, accurate in the far left tail where `Φ` itself underflows.
pub fn ln_std_normal_cdf(x: f64) -> f64 {
    if x < TAIL_SWITCH {
        let (m, _) = tail_mills(x);
        -0.5 * x * x - LN_SQRT_2PI - m.ln()
    } else {
        std_normal_cdf(x).ln()
    }
}

/// Continued fraction for the far left tail. Returns `(m, θ + m)` where
/// `m = φ(θ)/Φ(θ)`; the second value is computed without cancellation.
fn tail_mills(theta: f64) -> (f64, f64) {
    let x = -theta;
    // m = x + 1/T with T = x + 2/(x + 3/(x + ...)), evaluated bottom-up
    let mut t = x;
    for k in (2..=CF_TERMS).rev() {
        t = x + k as f64 / t;
    }
    let c = 1.0 / t;
    (x + c, c)
}

/// Inverse Mills ratio `φ(θ)/Φ(θ)`.
pub fn mills_ratio(theta: f64) -> f64 {
    if theta < TAIL_SWITCH {
        tail_mills(theta).0
    } else {
        std_normal_pdf(theta) / std_normal_cdf(theta)
    }
}

/// `θ + φ(θ)/Φ(θ)`, the mean of `TN(θ, 1; positive)`.
fn positive_mean(theta: f64) -> f64 {
    if theta < TAIL_SWITCH {
        tail_mills(theta).1
    } else {
        theta + mills_ratio(theta)
    }
}

fn g_raw(theta: f64) -> f64 {
    if theta < TAIL_SWITCH {
        let (m, c) = tail_mills(theta);
        m * c
    } else {
        let m = mills_ratio(theta);
        m * (theta + m)
    }
}

fn check_finite(theta: f64) -> Result<()> {
    if theta.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("theta must be finite, got {theta}")))
    }
}

/// `g(θ) = θφ(θ)/Φ(θ) + (φ(θ)/Φ(θ))²`, strictly decreasing from 1 to 0.
pub fn g(theta: f64) -> Result<f64> {
    check_finite(theta)?;
    Ok(g_raw(theta))
}

pub fn tn_mean(theta: f64, side: TruncSide) -> Result<f64> {
    check_finite(theta)?;
    Ok(tn_mean_raw(theta, side))
}

pub fn tn_var(theta: f64, side: TruncSide) -> Result<f64> {
    check_finite(theta)?;
    Ok(tn_var_raw(theta, side))
}

pub(crate) fn tn_mean_raw(theta: f64, side: TruncSide) -> f64 {
    match side {
        TruncSide::Positive => positive_mean(theta),
        TruncSide::Negative => -positive_mean(-theta),
    }
}

pub(crate) fn tn_var_raw(theta: f64, side: TruncSide) -> f64 {
    1.0 - g_side(theta, side)
}

/// `g(θ)` on the positive side, `g(−θ)` on the negative side.
pub(crate) fn g_side(theta: f64, side: TruncSide) -> f64 {
    match side {
        TruncSide::Positive => g_raw(theta),
        TruncSide::Negative => g_raw(-theta),
    }
}

/// One draw from `TN(θ, 1; side)`.
pub fn tn_sample<R: Rng + ?Sized>(theta: f64, side: TruncSide, rng: &mut R) -> f64 {
    match side {
        TruncSide::Positive => sample_positive(theta, rng),
        TruncSide::Negative => -sample_positive(-theta, rng),
    }
}

fn sample_positive<R: Rng + ?Sized>(theta: f64, rng: &mut R) -> f64 {
    if std_normal_cdf(theta) >= NAIVE_MIN_MASS {
        loop {
            let z = theta + rng.sample::<f64, _>(StandardNormal);
            if z > 0.0 {
                return z;
            }
        }
    }
    // Robert's translated-exponential proposal for N(0,1) restricted to (a, ∞),
    // returned as the increment over a so that far-tail draws keep full precision.
    let a = -theta;
    let alpha = 0.5 * (a + (a * a + 4.0).sqrt());
    loop {
        let u = rng.sample::<f64, _>(Exp1) / alpha;
        if u <= 0.0 {
            continue;
        }
        let w = a + u - alpha;
        if rng.random::<f64>() <= (-0.5 * w * w).exp() {
            return u;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn g_at_zero() {
        assert!((g(0.0).unwrap() - 2.0 / PI).abs() <= 1e-12);
    }

    #[test]
    fn g_ranges_match_sign_of_theta() {
        let hi = g(5.0).unwrap();
        assert!(hi > 0.0 && hi < 2.0 / PI);
        let lo = g(-5.0).unwrap();
        assert!(lo > 2.0 / PI && lo < 1.0);
    }

    #[test]
    fn g_deep_tail_is_finite_and_below_one() {
        for theta in [-12.0, -20.0, -38.0, -40.0] {
            let v = g(theta).unwrap();
            assert!(v > 0.9 && v < 1.0, "g({theta}) = {v}");
        }
    }

    #[test]
    fn tail_branches_join_continuously() {
        let t = TAIL_SWITCH;
        let direct = t + std_normal_pdf(t) / std_normal_cdf(t);
        let cf = tail_mills(t).1;
        assert!((direct - cf).abs() < 1e-11, "{direct} vs {cf}");
        let ln_direct = std_normal_cdf(t - 1e-9).ln();
        assert!((ln_std_normal_cdf(t - 1e-9) - ln_direct).abs() < 1e-12);
    }

    #[test]
    fn half_normal_moments() {
        let m = (2.0 / PI).sqrt();
        assert!((tn_mean(0.0, TruncSide::Positive).unwrap() - m).abs() < 1e-14);
        assert!((tn_mean(0.0, TruncSide::Negative).unwrap() + m).abs() < 1e-14);
        assert!((tn_var(0.0, TruncSide::Positive).unwrap() - (1.0 - 2.0 / PI)).abs() < 1e-14);
    }

    #[test]
    fn variance_ranges() {
        let v = tn_var(3.0, TruncSide::Positive).unwrap();
        assert!(v > 1.0 - 2.0 / PI && v < 1.0);
        let v = tn_var(-3.0, TruncSide::Positive).unwrap();
        assert!(v > 0.0 && v < 1.0 - 2.0 / PI);
    }

    #[test]
    fn non_finite_rejected() {
        assert!(g(f64::NAN).is_err());
        assert!(tn_mean(f64::INFINITY, TruncSide::Positive).is_err());
        assert!(tn_var(f64::NEG_INFINITY, TruncSide::Negative).is_err());
    }

    #[test]
    fn sampler_respects_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            assert!(tn_sample(-10.0, TruncSide::Positive, &mut rng) > 0.0);
            assert!(tn_sample(4.0, TruncSide::Negative, &mut rng) < 0.0);
            assert!(tn_sample(-40.0, TruncSide::Positive, &mut rng) > 0.0);
        }
    }

    #[test]
    fn sampler_far_tail_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 200_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| tn_sample(-10.0, TruncSide::Positive, &mut rng))
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let expect = tn_mean(-10.0, TruncSide::Positive).unwrap();
        let sd = tn_var(-10.0, TruncSide::Positive).unwrap().sqrt();
        assert!((mean - expect).abs() < 5.0 * sd / (n as f64).sqrt());
    }
}
