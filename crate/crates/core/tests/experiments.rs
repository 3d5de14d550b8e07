use ac_probit::certify;
use ac_probit::experiments::{
    self, DesignKind, GeneratorConfig, Mechanism, PriorFamily, PriorSequenceConfig, SweepOptions,
};
use ac_probit::model::{self, GaussianPrior, PosteriorModel};
use ac_probit::sampler::{self, ChainTrace, ChainVariant};
use nalgebra::DVector;

fn no_timing() -> SweepOptions {
    SweepOptions {
        tv_tolerance: 0.01,
        record_timing: false,
    }
}

#[test]
fn generator_is_deterministic() {
    let cfg = GeneratorConfig::gaussian(300, vec![0.5, -1.0, 2.0], 42);
    assert_eq!(
        experiments::generate_dataset(&cfg).unwrap(),
        experiments::generate_dataset(&cfg).unwrap()
    );
    let other = GeneratorConfig {
        seed: 43,
        ..cfg.clone()
    };
    assert_ne!(
        experiments::generate_dataset(&cfg).unwrap(),
        experiments::generate_dataset(&other).unwrap()
    );
}

#[test]
fn null_coefficients_give_half_successes() {
    let n = 20_000;
    let d =
        experiments::generate_dataset(&GeneratorConfig::gaussian(n, vec![0.0, 0.0], 5)).unwrap();
    let frac = d.successes() as f64 / n as f64;
    let se = (0.25 / n as f64).sqrt();
    assert!((frac - 0.5).abs() <= 5.0 * se, "success fraction {frac}");
}

#[test]
fn strong_signal_separates_the_data() {
    let d =
        experiments::generate_dataset(&GeneratorConfig::gaussian(30, vec![40.0, 40.0], 1)).unwrap();
    let r = model::check_propriety(&d, &GaussianPrior::flat(2));
    assert!(!r.proper);
}

#[test]
fn sweeps_reproduce_byte_for_byte() {
    let cfg = GeneratorConfig::gaussian(1, vec![1.0, 1.0], 8);
    let prior = GaussianPrior::flat(2);
    let mut a = Vec::new();
    let mut b = Vec::new();
    experiments::sweep_n(&cfg, &[100, 300, 900], &prior, no_timing())
        .unwrap()
        .write_csv(&mut a)
        .unwrap();
    experiments::sweep_n(&cfg, &[100, 300, 900], &prior, no_timing())
        .unwrap()
        .write_csv(&mut b)
        .unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "size,lambda,L,epsilon,rho_hat,m_star,wall_time_ms"
    );
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn balanced_intercept_sweep_matches_closed_form() {
    let cfg = GeneratorConfig::intercept_only(1, 0.5);
    let q = 1.5;
    let res = experiments::sweep_n(
        &cfg,
        &[10, 100, 1000, 10_000],
        &GaussianPrior::scaled_identity(1, q).unwrap(),
        no_timing(),
    )
    .unwrap();
    for row in &res.rows {
        let n = row.size as f64;
        let expect = (n / (n + q) * (1.0 - 1.0 / std::f64::consts::PI)).powi(2);
        assert!(
            (row.lambda.unwrap() - expect).abs() <= 1e-12,
            "n = {}",
            row.size
        );
    }
    assert!(res.summary.all_certified);
}

#[test]
fn all_success_intercept_lambda_trends_to_one() {
    // With every response a success the orthant bound reduces to (n/(n+q))², which tends to 1.
    let cfg = GeneratorConfig::intercept_only(1, 1.0);
    let res = experiments::sweep_n(
        &cfg,
        &[10, 100, 1000],
        &GaussianPrior::scaled_identity(1, 1.0).unwrap(),
        no_timing(),
    )
    .unwrap();
    let lams: Vec<f64> = res.rows.iter().map(|r| r.lambda.unwrap()).collect();
    assert!(lams.windows(2).all(|w| w[1] > w[0]), "{lams:?}");
    assert!(1.0 - lams[2] < 3e-3);
}

#[test]
fn g_prior_sweep_is_flat_in_p() {
    for c in [0.5, 2.0] {
        let res = experiments::sweep_p(
            4,
            &[4, 16, 64],
            &PriorSequenceConfig::g_prior(c),
            2,
            no_timing(),
        )
        .unwrap();
        for row in &res.rows {
            assert!((row.lambda.unwrap() - (1.0 / (1.0 + c)).powi(2)).abs() <= 1e-10);
            assert_eq!(row.b2_ok, Some(true));
        }
    }
}

#[test]
fn scaled_identity_sequence_shrinks_and_fixed_prior_violates_b2() {
    let seq = PriorSequenceConfig {
        family: PriorFamily::ScaledIdentity { q: 1.0 },
        design: DesignKind::UnitRows,
        b2_constant: 1.0,
    };
    let res = experiments::sweep_p(4, &[8, 32, 128], &seq, 0, no_timing()).unwrap();
    let b2: Vec<f64> = res.rows.iter().map(|r| r.b2_value.unwrap()).collect();
    assert!(b2.windows(2).all(|w| w[1] < w[0]), "{b2:?}");
    assert!(res.rows.iter().all(|r| r.lambda.unwrap() < 1.0));

    let fixed = PriorSequenceConfig {
        family: PriorFamily::FixedIdentity { q: 1.0 },
        design: DesignKind::UnitColumns,
        b2_constant: 10.0,
    };
    let res = experiments::sweep_p(4, &[8, 64, 512], &fixed, 0, no_timing()).unwrap();
    assert_eq!(res.rows.last().unwrap().b2_ok, Some(false));
}

#[test]
fn bad_grids_are_rejected() {
    let cfg = GeneratorConfig::gaussian(1, vec![1.0], 0);
    assert!(experiments::sweep_n(&cfg, &[], &GaussianPrior::flat(1), no_timing()).is_err());
    assert!(experiments::sweep_n(&cfg, &[10, 10], &GaussianPrior::flat(1), no_timing()).is_err());
    assert!(
        experiments::instability_sweep(&cfg, &[20, 10], &DVector::from_vec(vec![1.0])).is_err()
    );
}

#[test]
fn chains_are_reproducible_and_trace_round_trips() {
    let d = experiments::generate_dataset(&GeneratorConfig {
        mechanism: Mechanism::GaussianCovariates { intercept: true },
        ..GeneratorConfig::gaussian(50, vec![0.2, 1.0], 3)
    })
    .unwrap();
    let m = PosteriorModel::new(d, GaussianPrior::flat(2)).unwrap();
    for variant in [ChainVariant::Beta, ChainVariant::Gamma, ChainVariant::Z] {
        let start = match variant {
            ChainVariant::Beta => m.mode().clone(),
            ChainVariant::Gamma => DVector::zeros(2),
            ChainVariant::Z => m.varphi(m.mode()),
        };
        let a = sampler::run_chain(&m, variant, &start, 50, 17).unwrap();
        let b = sampler::run_chain(&m, variant, &start, 50, 17).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 51);
        assert_eq!(a.state(0), start.as_slice());
        let states: Vec<Vec<f64>> = a.states().map(<[f64]>::to_vec).collect();
        assert_eq!(ChainTrace::from_states(variant, 17, &states).unwrap(), a);
    }
    // A latent start with the wrong signs is not in the state space.
    let bad = -m.varphi(m.mode());
    assert!(sampler::run_chain(&m, ChainVariant::Z, &bad, 5, 0).is_err());
}

#[test]
fn rate_estimate_needs_enough_draws() {
    let m = experiments::n1_model(0.5).unwrap();
    let trace = sampler::run_chain(&m, ChainVariant::Z, &m.varphi(m.mode()), 50, 0).unwrap();
    assert!(sampler::lag1_rate_estimate(&trace, |s| s[0], 5).is_err());
    assert!(certify::rate_lower_bound_n1(1.0).is_err());
}
