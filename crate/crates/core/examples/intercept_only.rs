//! Closed-form drift coefficient and burn-in for the intercept-only model.

use ac_probit::certify;

fn main() -> ac_probit::Result<()> {
    println!(
        "{:>6} {:>6} {:>5} {:>10} {:>14} {:>10}",
        "n", "s", "q", "lambda", "rho_hat", "m*"
    );
    for (n, s, q) in [
        (10, 5, 1.0),
        (100, 50, 1.0),
        (100, 10, 1.0),
        (1000, 500, 0.0),
        (1000, 999, 0.0),
    ] {
        let cert = certify::intercept_only_certificate(n, s, q, 0.01)?;
        println!(
            "{n:>6} {s:>6} {q:>5.1} {:>10.6} {:>14.10} {:>10}",
            cert.lambda(),
            cert.rho_hat,
            cert.m_star
        );
    }
    Ok(())
}
