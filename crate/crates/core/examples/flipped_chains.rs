//! Runs the original chain and both flipped chains on one model and prints
//! the lag-1 autocorrelation of the first coordinate of each.

use ac_probit::experiments::{self, GeneratorConfig, Mechanism};
use ac_probit::model::{GaussianPrior, PosteriorModel};
use ac_probit::sampler::{self, ChainVariant};
use nalgebra::DVector;

fn main() -> ac_probit::Result<()> {
    let cfg = GeneratorConfig {
        mechanism: Mechanism::GaussianCovariates { intercept: true },
        ..GeneratorConfig::gaussian(200, vec![0.3, 1.0], 4)
    };
    let model = PosteriorModel::new(experiments::generate_dataset(&cfg)?, GaussianPrior::flat(2))?;
    let steps = 50_000;
    for variant in [ChainVariant::Beta, ChainVariant::Gamma, ChainVariant::Z] {
        let start = match variant {
            ChainVariant::Beta => model.mode().clone(),
            ChainVariant::Gamma => DVector::zeros(2),
            ChainVariant::Z => model.varphi(model.mode()),
        };
        let trace = sampler::run_chain(&model, variant, &start, steps, 7)?;
        let est =
            sampler::lag1_rate_estimate(&trace, |s| s[0], sampler::default_burn_in(trace.len()))?;
        println!(
            "{variant:>5}: lag-1 autocorrelation {:.4} (SE {:.4})",
            est.estimate, est.mc_se
        );
    }
    Ok(())
}
