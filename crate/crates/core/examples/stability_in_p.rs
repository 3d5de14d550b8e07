//! Drift coefficient along growing `p` with a g-prior, where it stays at `(1/(1+c))²`.

use ac_probit::experiments::{self, PriorSequenceConfig, SweepOptions};

fn main() -> ac_probit::Result<()> {
    let res = experiments::sweep_p(
        5,
        &[10, 100, 300],
        &PriorSequenceConfig::g_prior(1.0),
        0,
        SweepOptions::default(),
    )?;
    res.write_csv(std::io::stdout())?;
    for row in &res.rows {
        println!(
            "p = {:>4}: lambda_max(X Q^-1 X^T) = {:.4}",
            row.size,
            row.b2_value.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
