//! Moments and draws of the unit-variance truncated normal, including far tails.

use ac_probit::sampler::chain_rng;
use ac_probit::truncnorm::{self, TruncSide};

fn main() -> ac_probit::Result<()> {
    println!(
        "{:>8} {:>12} {:>12} {:>12} {:>12}",
        "theta", "g", "mean(+)", "var(+)", "draw(+)"
    );
    let mut rng = chain_rng(1);
    for theta in [-30.0, -8.0, -2.0, 0.0, 2.0, 8.0] {
        println!(
            "{theta:>8.1} {:>12.6e} {:>12.6e} {:>12.6e} {:>12.6e}",
            truncnorm::g(theta)?,
            truncnorm::tn_mean(theta, TruncSide::Positive)?,
            truncnorm::tn_var(theta, TruncSide::Positive)?,
            truncnorm::tn_sample(theta, TruncSide::Positive, &mut rng),
        );
    }
    let neg = truncnorm::tn_sample(3.0, TruncSide::Negative, &mut rng);
    println!("draw from TN(3, 1) restricted to (-inf, 0): {neg:.4}");
    Ok(())
}
