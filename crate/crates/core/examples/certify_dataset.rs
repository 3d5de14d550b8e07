//! Certified convergence bound for a bundled dataset and prior, with the
//! total-variation bound at a few chain lengths.

use ac_probit::certify::{self, DriftVariant};
use ac_probit::io;
use ac_probit::model::PosteriorModel;

fn main() -> ac_probit::Result<()> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    let data = io::read_dataset_file(format!("{dir}/small.csv"))?;
    let prior = io::read_prior_file(format!("{dir}/prior.json"), data.p())?;
    let model = PosteriorModel::new(data, prior)?;

    let lam = certify::lambda_v1(&model)?;
    println!("certified lambda = {:.6} ({:?})", lam.lambda, lam.source);
    println!(
        "heuristic lambda = {:.6} (uncertified)",
        certify::lambda_v1_heuristic(&model, 8, 0)?
    );

    let cert = certify::optimize_certificate(&model, DriftVariant::V1Flipped, 0.01, model.mode())?;
    println!("{}", serde_json::to_string_pretty(&cert)?);
    println!("self-consistent: {}", cert.check_consistency().ok());
    Ok(())
}
