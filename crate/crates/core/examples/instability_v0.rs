//! Overlap of one-step laws from two fixed starting points shrinking with `n`
//! under the flat prior: minorization on a fixed set cannot be stable.

use ac_probit::experiments::{self, GeneratorConfig};
use nalgebra::DVector;

fn main() -> ac_probit::Result<()> {
    let gamma = DVector::from_vec(vec![1.0, 1.0]);
    println!("{:>6} {:>10} {:>10}", "n", "Delta", "overlap<=");
    for seed in 0..3 {
        let cfg = GeneratorConfig::gaussian(1, vec![1.0, 1.0], seed);
        for row in experiments::instability_sweep(&cfg, &[100, 400, 1600, 6400], &gamma)? {
            println!(
                "{:>6} {:>10.4} {:>10.5}",
                row.n, row.delta, row.overlap_upper_bound
            );
        }
    }
    Ok(())
}
