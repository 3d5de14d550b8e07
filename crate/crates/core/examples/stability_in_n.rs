//! Drift coefficient and burn-in along growing samples with Gaussian covariates.

use ac_probit::experiments::{self, GeneratorConfig, SweepOptions};
use ac_probit::model::GaussianPrior;

fn main() -> ac_probit::Result<()> {
    let cfg = GeneratorConfig::gaussian(1, vec![1.0, 1.0], 0);
    let res = experiments::sweep_n(
        &cfg,
        &[200, 2000, 20000],
        &GaussianPrior::flat(2),
        SweepOptions::default(),
    )?;
    res.write_csv(std::io::stdout())?;
    println!(
        "sup lambda = {:?}, all certified = {}",
        res.summary.lambda_sup, res.summary.all_certified
    );
    Ok(())
}
