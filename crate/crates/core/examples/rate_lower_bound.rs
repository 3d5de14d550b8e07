//! Lower bound on the rate of the single-observation chain against a simulated
//! lag-1 autocorrelation.

use ac_probit::certify;
use ac_probit::experiments;
use ac_probit::sampler::{self, ChainVariant};

fn main() -> ac_probit::Result<()> {
    for psi in [0.5, 0.8, 0.9, 0.99] {
        let model = experiments::n1_model(psi)?;
        let trace = sampler::run_chain(
            &model,
            ChainVariant::Z,
            &model.varphi(model.mode()),
            200_000,
            1,
        )?;
        let est =
            sampler::lag1_rate_estimate(&trace, |s| s[0], sampler::default_burn_in(trace.len()))?;
        println!(
            "psi = {psi:<5} bound {:.4}  estimate {:.4} (SE {:.4})",
            certify::rate_lower_bound_n1(psi)?,
            est.estimate,
            est.mc_se
        );
    }
    Ok(())
}
