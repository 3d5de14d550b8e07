//! Checks posterior propriety for a bundled dataset and a separated one, then
//! finds the posterior mode.

use ac_probit::io;
use ac_probit::model::{self, GaussianPrior, PosteriorModel};

fn main() -> ac_probit::Result<()> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    let separated = io::read_dataset_file(format!("{dir}/separated.csv"))?;
    let report = model::check_propriety(&separated, &GaussianPrior::flat(separated.p()));
    println!(
        "separated.csv under a flat prior: proper = {}",
        report.proper
    );

    let data = io::read_dataset_file(format!("{dir}/small.csv"))?;
    let report = model::check_propriety(&data, &GaussianPrior::flat(data.p()));
    println!("small.csv under a flat prior: proper = {}", report.proper);

    let model = PosteriorModel::new(data, GaussianPrior::flat(3))?;
    println!(
        "mode = {:?} after {} Newton steps, fixed-point residual {:.2e}",
        model.mode().as_slice(),
        model.mode_iterations(),
        model.fixed_point_residual()
    );
    Ok(())
}
