use ac_probit::certify::{self, BurnIn, DriftMinParams, DriftVariant};
use ac_probit::model::{Dataset, GaussianPrior, PosteriorModel};
use ac_probit::sampler;
use ac_probit::symmat::SymMatrix;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

fn variant() -> impl Strategy<Value = DriftVariant> {
    prop_oneof![Just(DriftVariant::V1Flipped), Just(DriftVariant::V2Flipped)]
}

fn small_model() -> impl Strategy<Value = PosteriorModel> {
    (
        15usize..40,
        prop::collection::vec(-2.0..2.0f64, 80),
        prop::collection::vec(any::<bool>(), 40),
        0.05..2.0f64,
    )
        .prop_map(|(n, vals, y, q)| {
            let x = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { vals[i] });
            let data = Dataset::new(x, y[..n].to_vec()).unwrap();
            PosteriorModel::new(data, GaussianPrior::scaled_identity(2, q).unwrap()).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn rho_hat_nonincreasing_in_epsilon(
        lambda in 0.0..0.99f64,
        k in 1usize..30,
        mult in 1.01..50.0f64,
        r in 0.001..0.999f64,
        e1 in 1e-6..1.0f64,
        e2 in 1e-6..1.0f64,
    ) {
        let base = certify::make_dm_params(DriftVariant::V1Flipped, lambda, 1, k, mult).unwrap();
        let at = |e: f64| DriftMinParams { epsilon: e, log_epsilon: e.ln(), ..base };
        let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
        prop_assert!(certify::rosenthal_rho(&at(lo), r) >= certify::rosenthal_rho(&at(hi), r));
        prop_assert!(certify::rosenthal_rho(&base, r) >= (1.0 - base.epsilon).powf(r));
    }

    #[test]
    fn optimum_beats_random_choices(
        variant in variant(),
        lambda in 0.0..0.98f64,
        k in 1usize..20,
        mult in 1.001..1e4f64,
        r in 1e-9..0.999f64,
    ) {
        let (n, p) = (k, k);
        let opt = certify::optimize_rate(variant, lambda, n, p).unwrap();
        prop_assert!(opt.log_rate_gap.is_finite());
        prop_assert!(opt.rho_hat <= 1.0);
        let other = certify::make_dm_params(variant, lambda, n, p, mult).unwrap();
        prop_assert!(certify::log_rate_gap(&other, r) <= opt.log_rate_gap + 1e-6 * opt.log_rate_gap.abs());
    }

    #[test]
    fn exact_burn_in_is_tight(h in 1.0..1e6f64, tol in 1e-6..0.5f64, rho in 0.01..0.9999f64) {
        let gap = (-rho.ln()).ln();
        match certify::burn_in(h, tol, rho, gap) {
            BurnIn::Exact(m) => {
                prop_assert!(certify::tv_bound(h, rho, m) <= tol);
                prop_assert!(m < 2 || certify::tv_bound(h, rho, m - 1) > tol);
            }
            BurnIn::Astronomical { .. } => prop_assert!(false, "expected an exact burn-in"),
        }
    }

    #[test]
    fn overlap_dominates_epsilon(d in 0.01..60.0f64) {
        let exact = 2.0 * Normal::standard().cdf(-d.sqrt());
        prop_assert!(certify::exact_overlap_p1(d) >= certify::minorization_epsilon(1, d));
        prop_assert!((certify::exact_overlap_p1(d) - exact).abs() <= 1e-9 * exact);
    }

    #[test]
    fn intercept_closed_form_equals_orthant(n in 2usize..400, frac in 0.0..1.0f64, q in 0.0..4.0f64) {
        let s = 1 + ((n - 1) as f64 * frac) as usize;
        prop_assume!(s < n);
        let m = PosteriorModel::new(
            Dataset::intercept_only(n, s).unwrap(),
            GaussianPrior::scaled_identity(1, q).unwrap(),
        )
        .unwrap();
        let orth = certify::lambda_v1_orthant_bound(&m, 20).unwrap().value;
        let nf = n as f64;
        let minority = s.min(n - s) as f64 / nf;
        let expect = (nf / (nf + q) * (1.0 - 2.0 * minority / std::f64::consts::PI)).powi(2);
        prop_assert!((orth - expect).abs() <= 1e-12);
        prop_assert!((certify::intercept_only_lambda(n, s, q).unwrap() - expect).abs() <= 1e-14);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn g_prior_v2_coefficient(c in 0.1..10.0f64, vals in prop::collection::vec(-1.0..1.0f64, 16)) {
        let x = DMatrix::from_fn(4, 4, |i, j| vals[4 * i + j] + if i == j { 3.0 } else { 0.0 });
        let q = SymMatrix::new(c * x.transpose() * &x).unwrap();
        let m = PosteriorModel::new(
            Dataset::new(x, vec![true, false, true, false]).unwrap(),
            GaussianPrior::new(q, DVector::zeros(4)).unwrap(),
        )
        .unwrap();
        let lam = certify::lambda_v2(&m).unwrap();
        prop_assert!((lam - (1.0 / (1.0 + c)).powi(2)).abs() <= 1e-10);
    }

    #[test]
    fn heuristic_stays_below_certified_bounds(m in small_model(), seed in any::<u64>()) {
        let h = certify::lambda_v1_heuristic(&m, 3, seed).unwrap();
        let orth = certify::lambda_v1_orthant_bound(&m, 20).unwrap().value;
        let pdq = certify::lambda_v1_pdq_bound(&m).unwrap();
        prop_assert!(h <= orth.min(pdq) + 1e-9, "heuristic {} vs bounds {} {}", h, orth, pdq);
    }

    #[test]
    fn h_is_smallest_at_the_mode(m in small_model(), beta in prop::collection::vec(-3.0..3.0f64, 2)) {
        let lam = certify::lambda_v1(&m).unwrap().lambda;
        let params = certify::make_dm_params(DriftVariant::V1Flipped, lam, m.n(), m.p(), 2.0).unwrap();
        let at_mode = certify::h_beta_v1(&m, m.mode(), &params).unwrap();
        let elsewhere = certify::h_beta_v1(&m, &DVector::from_vec(beta), &params).unwrap();
        prop_assert!(at_mode <= elsewhere + 1e-9 * at_mode);
    }

    #[test]
    fn certificates_are_self_consistent(m in small_model(), tol in 1e-5..0.2f64) {
        let c = certify::optimize_certificate(&m, DriftVariant::V1Flipped, tol, &DVector::zeros(2)).unwrap();
        prop_assert!(c.check_consistency().ok());
    }
}

/// Monte Carlo drift check for one model and a handful of starts.
#[test]
fn v1_drift_holds_empirically() {
    let x = DMatrix::from_fn(30, 2, |i, j| {
        if j == 0 {
            1.0
        } else {
            ((i * 37 % 11) as f64 - 5.0) / 3.0
        }
    });
    let y: Vec<bool> = (0..30).map(|i| (i * 13) % 5 < 3).collect();
    let m = PosteriorModel::new(Dataset::new(x, y).unwrap(), GaussianPrior::flat(2)).unwrap();
    let lam = certify::lambda_v1(&m).unwrap().lambda;
    let l = 2.0 * (1.0 + lam);
    for (k, scale) in [0.1, 1.0, 5.0, 25.0].into_iter().enumerate() {
        let gamma = DVector::from_vec(vec![scale, -0.5 * scale]);
        let mut rng = sampler::chain_rng(k as u64);
        let reps = 4000;
        let vals: Vec<f64> = (0..reps)
            .map(|_| {
                sampler::gamma_step(&m, &gamma, &mut rng)
                    .unwrap()
                    .norm_squared()
            })
            .collect();
        let mean = vals.iter().sum::<f64>() / reps as f64;
        let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
        let rhs = lam * gamma.norm_squared() + l;
        assert!(
            mean <= rhs + 5.0 * sd / (reps as f64).sqrt(),
            "scale {scale}: {mean} > {rhs}"
        );
    }
}
