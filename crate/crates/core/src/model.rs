//! The Bayesian probit model: data and prior containers, the propriety check,
//! the posterior mode, and the conditional-moment maps `φ(β)` and `D(β)`.

use std::sync::OnceLock;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lp::{self, LpOutcome};
use crate::symmat::{SymMatrix, REL_EIG_TOL};
use crate::truncnorm::{self, TruncSide};

/// Design matrix and binary responses.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: Vec<bool>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: Vec<bool>) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::invalid(
                "dataset needs n >= 1 rows and p >= 1 columns",
            ));
        }
        if y.len() != x.nrows() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                got: y.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("design matrix has non-finite entries"));
        }
        Ok(Dataset { x, y })
    }

    /// Builds a dataset from row vectors and 0/1 responses.
    pub fn from_rows(rows: &[Vec<f64>], y: &[u8]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::invalid(
                "all covariate rows must have the same length",
            ));
        }
        if let Some(bad) = y.iter().find(|&&v| v > 1) {
            return Err(Error::invalid(format!(
                "responses must be 0 or 1, got {bad}"
            )));
        }
        let x = DMatrix::from_fn(n, p, |i, j| rows[i][j]);
        Self::new(x, y.iter().map(|&v| v == 1).collect())
    }

    /// `n` rows of a lone intercept column, the first `successes` of them with `y = 1`.
    pub fn intercept_only(n: usize, successes: usize) -> Result<Self> {
        if successes > n {
            return Err(Error::invalid(format!(
                "successes ({successes}) cannot exceed n ({n})"
            )));
        }
        Self::new(
            DMatrix::from_element(n, 1, 1.0),
            (0..n).map(|i| i < successes).collect(),
        )
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &[bool] {
        &self.y
    }

    pub fn successes(&self) -> usize {
        self.y.iter().filter(|&&v| v).count()
    }

    pub fn side(&self, i: usize) -> TruncSide {
        TruncSide::from_response(self.y[i])
    }

    /// `X` with the rows of successes negated.
    pub fn x_star(&self) -> DMatrix<f64> {
        let mut xs = self.x.clone();
        for (i, &yi) in self.y.iter().enumerate() {
            if yi {
                xs.row_mut(i).neg_mut();
            }
        }
        xs
    }

    /// Entrywise `E(Zᵢ | B = β)`.
    pub fn varphi(&self, beta: &DVector<f64>) -> DVector<f64> {
        let eta = &self.x * beta;
        DVector::from_fn(self.n(), |i, _| {
            truncnorm::tn_mean_raw(eta[i], self.side(i))
        })
    }

    /// Same data with rows reordered by `perm` (row `k` of the result is row `perm[k]`).
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.n()];
        if perm.len() != self.n()
            || perm
                .iter()
                .any(|&i| i >= self.n() || std::mem::replace(&mut seen[i], true))
        {
            return Err(Error::invalid(
                "row permutation is not a permutation of 0..n",
            ));
        }
        let x = DMatrix::from_fn(self.n(), self.p(), |i, j| self.x[(perm[i], j)]);
        Self::new(x, perm.iter().map(|&i| self.y[i]).collect())
    }
}

/// Gaussian prior `N(v, Q⁻¹)`; `Q = 0` encodes the flat prior.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPrior {
    q: SymMatrix,
    v: DVector<f64>,
    q_pd: bool,
}

impl GaussianPrior {
    pub fn new(q: SymMatrix, v: DVector<f64>) -> Result<Self> {
        if q.dim() != v.len() {
            return Err(Error::DimensionMismatch {
                expected: q.dim(),
                got: v.len(),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("prior mean has non-finite entries"));
        }
        let q_pd = if q.is_zero() {
            false
        } else {
            let (lmin, lmax) = q.eig_extremes();
            if lmin < -REL_EIG_TOL * lmax.abs() {
                return Err(Error::NotPsd {
                    lambda_min: lmin,
                    lambda_max: lmax,
                });
            }
            lmax > 0.0 && lmin > REL_EIG_TOL * lmax
        };
        Ok(GaussianPrior { q, v, q_pd })
    }

    pub fn flat(p: usize) -> Self {
        GaussianPrior {
            q: SymMatrix::zeros(p),
            v: DVector::zeros(p),
            q_pd: false,
        }
    }

    /// `Q = q·I`, `v = 0`.
    pub fn scaled_identity(p: usize, q: f64) -> Result<Self> {
        if !(q >= 0.0) || !q.is_finite() {
            return Err(Error::invalid(format!(
                "prior scale must be finite and >= 0, got {q}"
            )));
        }
        Self::new(SymMatrix::scaled_identity(p, q), DVector::zeros(p))
    }

    pub fn q(&self) -> &SymMatrix {
        &self.q
    }

    pub fn v(&self) -> &DVector<f64> {
        &self.v
    }

    pub fn dim(&self) -> usize {
        self.v.len()
    }

    pub fn is_flat(&self) -> bool {
        self.q.is_zero()
    }

    pub fn is_positive_definite(&self) -> bool {
        self.q_pd
    }
}

/// Outcome of the propriety conditions for the flat-prior part of the model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProprietyReport {
    pub c1_full_column_rank: bool,
    pub c2_feasible: bool,
    /// Strictly positive `a` with `X_*ᵀa = 0` and `Σaᵢ = n`, present when such a combination exists.
    pub c2_certificate: Option<Vec<f64>>,
    pub prior_positive_definite: bool,
    pub proper: bool,
}

/// Checks full column rank of `X` and the existence of a strictly positive
/// combination of the sign-flipped rows summing to zero.
pub fn check_propriety(data: &Dataset, prior: &GaussianPrior) -> ProprietyReport {
    let n = data.n();
    let p = data.p();
    let svd = data.x().clone().svd(false, false);
    let smax = svd.singular_values.max();
    let rank_tol = 1e-10 * smax * n.max(p) as f64;
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > rank_tol)
        .count();
    let c1 = smax > 0.0 && rank == p;

    let certificate = positive_combination(data);
    let c2 = certificate.is_some();
    let q_pd = prior.is_positive_definite();
    ProprietyReport {
        c1_full_column_rank: c1,
        c2_feasible: c2,
        c2_certificate: certificate,
        prior_positive_definite: q_pd,
        proper: q_pd || (c1 && c2),
    }
}

/// Solves `max t` s.t. `X_*ᵀa = 0`, `Σa = n`, `a ≥ t`; returns `a` when `t* > 1e-9`.
fn positive_combination(data: &Dataset) -> Option<Vec<f64>> {
    let n = data.n();
    let xs = data.x_star();
    // Replace X_*ᵀa = 0 by Uᵀa = 0 with U an orthonormal basis of col(X_*):
    // same feasible set, but the rows are independent.
    let svd = xs.clone().svd(true, false);
    let u = svd.u.as_ref()?;
    let smax = svd.singular_values.max();
    let basis: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| smax > 0.0 && svd.singular_values[k] > 1e-13 * smax)
        .collect();
    let r = basis.len();

    // variables: b (n) then t⁺, t⁻ with a = t·1 + b
    let cols = n + 2;
    let mut a = DMatrix::zeros(r + 1, cols);
    let mut rhs = vec![0.0; r + 1];
    for (row, &k) in basis.iter().enumerate() {
        let uk = u.column(k);
        let s: f64 = uk.sum();
        for i in 0..n {
            a[(row, i)] = uk[i];
        }
        a[(row, n)] = s;
        a[(row, n + 1)] = -s;
    }
    for i in 0..n {
        a[(r, i)] = 1.0;
    }
    a[(r, n)] = n as f64;
    a[(r, n + 1)] = -(n as f64);
    rhs[r] = n as f64;
    let mut c = vec![0.0; cols];
    c[n] = 1.0;
    c[n + 1] = -1.0;

    let LpOutcome::Optimal { x, .. } = lp::maximize(&c, &a, &rhs) else {
        return None;
    };
    let t = x[n] - x[n + 1];
    let mut av = DVector::from_iterator(n, x[..n].iter().map(|b| b + t));
    // clean up the null-space constraint and the normalization
    for &k in &basis {
        let uk = u.column(k);
        let proj = uk.dot(&av);
        av.axpy(-proj, &uk, 1.0);
    }
    let total = av.sum();
    if !(total > 0.0) {
        return None;
    }
    av *= n as f64 / total;
    if av.min() > 1e-9 {
        Some(av.iter().copied().collect())
    } else {
        None
    }
}

/// Newton iteration controls for the posterior mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeOptions {
    pub max_iterations: usize,
    /// Gradient tolerance before scaling by `√n`.
    pub grad_tol: f64,
}

impl Default for ModeOptions {
    fn default() -> Self {
        ModeOptions {
            max_iterations: 200,
            grad_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ModeResult {
    pub mode: DVector<f64>,
    pub grad_norm: f64,
    pub iterations: usize,
}

fn check_dims(data: &Dataset, prior: &GaussianPrior) -> Result<()> {
    if prior.dim() != data.p() {
        return Err(Error::DimensionMismatch {
            expected: data.p(),
            got: prior.dim(),
        });
    }
    Ok(())
}

/// Log posterior up to a constant: `Σ ln Φ(±Xᵢᵀβ) − ½(β−v)ᵀQ(β−v)`.
pub fn log_posterior(data: &Dataset, prior: &GaussianPrior, beta: &DVector<f64>) -> f64 {
    let eta = data.x() * beta;
    let lik: f64 = eta
        .iter()
        .zip(data.y())
        .map(|(&e, &y)| truncnorm::ln_std_normal_cdf(if y { e } else { -e }))
        .sum();
    let diff = beta - prior.v();
    lik - 0.5 * diff.dot(&(prior.q().as_matrix() * &diff))
}

/// Gradient of [`log_posterior`] and the negated Hessian `Q + XᵀG(β)X`.
pub fn log_posterior_derivatives(
    data: &Dataset,
    prior: &GaussianPrior,
    beta: &DVector<f64>,
) -> (DVector<f64>, DMatrix<f64>) {
    let x = data.x();
    let eta = x * beta;
    let mut score = DVector::zeros(data.n());
    let mut weights = DVector::zeros(data.n());
    for i in 0..data.n() {
        let s = data.side(i).sign();
        let arg = s * eta[i];
        score[i] = s * truncnorm::mills_ratio(arg);
        weights[i] = truncnorm::g_side(eta[i], data.side(i));
    }
    let grad = x.tr_mul(&score) - prior.q().as_matrix() * (beta - prior.v());
    let mut wx = x.clone();
    for (i, mut row) in wx.row_iter_mut().enumerate() {
        row *= weights[i];
    }
    let neg_hess = prior.q().as_matrix() + x.tr_mul(&wx);
    (grad, neg_hess)
}

/// Damped Newton ascent on the log posterior with step halving.
pub fn posterior_mode(
    data: &Dataset,
    prior: &GaussianPrior,
    opts: ModeOptions,
) -> Result<ModeResult> {
    check_dims(data, prior)?;
    if !prior.is_positive_definite() {
        let report = check_propriety(data, prior);
        if !report.proper {
            return Err(improper(&report));
        }
    }
    newton(data, prior, opts)
}

fn improper(report: &ProprietyReport) -> Error {
    let mut why = Vec::new();
    if !report.c1_full_column_rank {
        why.push("X is not of full column rank");
    }
    if !report.c2_feasible {
        why.push("no strictly positive combination of sign-flipped rows sums to zero");
    }
    Error::ImproperPosterior(why.join("; "))
}

fn newton(data: &Dataset, prior: &GaussianPrior, opts: ModeOptions) -> Result<ModeResult> {
    let tol = opts.grad_tol * (data.n() as f64).sqrt();
    let mut beta = if prior.is_positive_definite() {
        prior.v().clone()
    } else {
        DVector::zeros(data.p())
    };
    let mut grad_norm = f64::INFINITY;
    for iter in 0..opts.max_iterations {
        let (grad, neg_hess) = log_posterior_derivatives(data, prior, &beta);
        grad_norm = grad.norm();
        if grad_norm <= tol {
            return Ok(ModeResult {
                mode: beta,
                grad_norm,
                iterations: iter,
            });
        }
        let Some(chol) = Cholesky::new(neg_hess) else {
            break;
        };
        let step = chol.solve(&grad);
        // At extreme prior precisions the gradient cannot reach `tol` in floating
        // point; a step at rounding level means the iterate is already the mode.
        if step.norm() <= 4.0 * f64::EPSILON * (1.0 + beta.norm()) {
            return Ok(ModeResult {
                mode: beta,
                grad_norm,
                iterations: iter,
            });
        }
        let f0 = log_posterior(data, prior, &beta);
        let slack = 1e-13 * (1.0 + f0.abs());
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let cand = &beta + &step * scale;
            if log_posterior(data, prior, &cand) >= f0 - slack {
                accepted = Some(cand);
                break;
            }
            scale *= 0.5;
        }
        match accepted {
            Some(next) => beta = next,
            None => break,
        }
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iterations,
        grad_norm,
        last_iterate: beta.iter().copied().collect(),
    })
}

/// Pieces needed by the second drift function: `XΣ⁻¹Xᵀ` and its factorization.
#[derive(Debug, Clone)]
pub struct HatParts {
    pub hat: SymMatrix,
    pub chol: Cholesky<f64, Dyn>,
    pub lambda_max: f64,
}

/// Dataset, prior, the factored `Σ = XᵀX + Q` and the posterior mode.
#[derive(Debug)]
pub struct PosteriorModel {
    data: Dataset,
    prior: GaussianPrior,
    sigma: SymMatrix,
    chol: Cholesky<f64, Dyn>,
    qv: DVector<f64>,
    mode: DVector<f64>,
    mode_grad_norm: f64,
    mode_iterations: usize,
    roots: OnceLock<std::result::Result<(SymMatrix, SymMatrix), String>>,
    hat: OnceLock<std::result::Result<HatParts, String>>,
}

impl PosteriorModel {
    pub fn new(data: Dataset, prior: GaussianPrior) -> Result<Self> {
        Self::with_options(data, prior, ModeOptions::default())
    }

    pub fn with_options(data: Dataset, prior: GaussianPrior, opts: ModeOptions) -> Result<Self> {
        check_dims(&data, &prior)?;
        if !prior.is_positive_definite() {
            let report = check_propriety(&data, &prior);
            if !report.proper {
                return Err(improper(&report));
            }
        }
        let sigma = SymMatrix::gram(data.x()).add(prior.q())?;
        let chol = Cholesky::new(sigma.as_matrix().clone()).ok_or_else(|| Error::NotPd {
            lambda_min: sigma.lambda_min(),
        })?;
        let qv = prior.q().as_matrix() * prior.v();
        let mode = newton(&data, &prior, opts)?;
        Ok(PosteriorModel {
            data,
            prior,
            sigma,
            chol,
            qv,
            mode: mode.mode,
            mode_grad_norm: mode.grad_norm,
            mode_iterations: mode.iterations,
            roots: OnceLock::new(),
            hat: OnceLock::new(),
        })
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn prior(&self) -> &GaussianPrior {
        &self.prior
    }

    pub fn n(&self) -> usize {
        self.data.n()
    }

    pub fn p(&self) -> usize {
        self.data.p()
    }

    pub fn sigma(&self) -> &SymMatrix {
        &self.sigma
    }

    /// Lower Cholesky factor `L` with `Σ = LLᵀ`.
    pub fn sigma_cholesky(&self) -> &Cholesky<f64, Dyn> {
        &self.chol
    }

    pub fn mode(&self) -> &DVector<f64> {
        &self.mode
    }

    pub fn mode_grad_norm(&self) -> f64 {
        self.mode_grad_norm
    }

    pub fn mode_iterations(&self) -> usize {
        self.mode_iterations
    }

    /// `Qv`.
    pub fn prior_shift(&self) -> &DVector<f64> {
        &self.qv
    }

    pub fn solve_sigma(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(rhs)
    }

    /// `Σ⁻¹(Xᵀz + Qv)`, the conditional mean of `B` given latent data `z`.
    pub fn conditional_mean(&self, z: &DVector<f64>) -> DVector<f64> {
        self.solve_sigma(&(self.data.x().tr_mul(z) + &self.qv))
    }

    /// Entrywise `E(Zᵢ | B = β)`.
    pub fn varphi(&self, beta: &DVector<f64>) -> DVector<f64> {
        self.data.varphi(beta)
    }

    /// Diagonal of `D(β)`: entrywise `var(Zᵢ | B = β)`, each in `(0, 1)`.
    pub fn d_matrix(&self, beta: &DVector<f64>) -> DVector<f64> {
        let eta = self.data.x() * beta;
        DVector::from_fn(self.n(), |i, _| {
            truncnorm::tn_var_raw(eta[i], self.data.side(i))
        })
    }

    /// `Σ⁻¹(Xᵀφ(β) + Qv)`, the one-step conditional mean of the chain from `β`.
    pub fn fixed_point_map(&self, beta: &DVector<f64>) -> DVector<f64> {
        self.conditional_mean(&self.varphi(beta))
    }

    /// `‖Σ⁻¹(Xᵀφ(B̂) + Qv) − B̂‖`.
    pub fn fixed_point_residual(&self) -> f64 {
        self.residual_at(&self.mode)
    }

    /// The fixed-point residual evaluated at an arbitrary point.
    pub fn residual_at(&self, beta: &DVector<f64>) -> f64 {
        (self.fixed_point_map(beta) - beta).norm()
    }

    /// `tr(XΣ⁻¹Xᵀ) = ‖L⁻¹Xᵀ‖²_F`.
    pub fn trace_hat(&self) -> f64 {
        let xt = self.data.x().transpose();
        let w = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&xt)
            .expect("Cholesky factor has a nonzero diagonal");
        w.norm_squared()
    }

    fn roots(&self) -> Result<&(SymMatrix, SymMatrix)> {
        self.roots
            .get_or_init(|| {
                let s = self.sigma.sqrt().map_err(|e| e.to_string())?;
                let si = self.sigma.inv_sqrt().map_err(|e| e.to_string())?;
                Ok((s, si))
            })
            .as_ref()
            .map_err(|e| Error::CertificationFailed(format!("symmetric root of Sigma: {e}")))
    }

    pub fn sigma_sqrt(&self) -> Result<&SymMatrix> {
        Ok(&self.roots()?.0)
    }

    pub fn sigma_inv_sqrt(&self) -> Result<&SymMatrix> {
        Ok(&self.roots()?.1)
    }

    /// `XΣ⁻¹Xᵀ` with its Cholesky factor; requires `X` of full row rank.
    pub fn hat_parts(&self) -> Result<&HatParts> {
        self.hat
            .get_or_init(|| {
                let x = self.data.x();
                let n = self.n();
                if n > self.p() {
                    return Err(format!(
                        "X must have full row rank, but n = {n} exceeds p = {}",
                        self.p()
                    ));
                }
                let xxt = SymMatrix::gram(&x.transpose());
                let (lmin, lmax) = xxt.eig_extremes();
                if !(lmin > REL_EIG_TOL * lmax) {
                    return Err(format!(
                        "X must have full row rank, but lambda_min(XX^T) = {lmin:e}"
                    ));
                }
                let w = self.chol.solve(&x.transpose());
                let hat = SymMatrix::symmetrized(x * w);
                let chol = Cholesky::new(hat.as_matrix().clone())
                    .ok_or_else(|| "X Sigma^-1 X^T is numerically singular".to_string())?;
                let lambda_max = hat.lambda_max();
                Ok(HatParts {
                    hat,
                    chol,
                    lambda_max,
                })
            })
            .as_ref()
            .map_err(|e| Error::RankDeficient(e.clone()))
    }

    /// Draws from `N(mean, Σ⁻¹)` as `mean + L⁻ᵀξ`.
    pub fn sample_precision_normal<R: Rng + ?Sized>(
        &self,
        mean: &DVector<f64>,
        rng: &mut R,
    ) -> DVector<f64> {
        let xi = DVector::from_fn(self.p(), |_, _| rng.sample::<f64, _>(StandardNormal));
        let w = self
            .chol
            .l_dirty()
            .tr_solve_lower_triangular(&xi)
            .expect("Cholesky factor has a nonzero diagonal");
        mean + w
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ContinuousCDF, Normal};
    use std::f64::consts::PI;

    fn probit_inv(u: f64) -> f64 {
        Normal::standard().inverse_cdf(u)
    }

    #[test]
    fn all_success_is_improper_under_flat_prior() {
        let d = Dataset::from_rows(&[vec![1.0], vec![1.0], vec![1.0]], &[1, 1, 1]).unwrap();
        let r = check_propriety(&d, &GaussianPrior::flat(1));
        assert!(r.c1_full_column_rank);
        assert!(!r.c2_feasible);
        assert!(!r.proper);
        assert!(r.c2_certificate.is_none());
    }

    #[test]
    fn balanced_pair_has_unit_certificate() {
        let d = Dataset::from_rows(&[vec![1.0], vec![1.0]], &[1, 0]).unwrap();
        let r = check_propriety(&d, &GaussianPrior::flat(1));
        assert!(r.proper);
        let a = r.c2_certificate.unwrap();
        assert!((a[0] - 1.0).abs() < 1e-12 && (a[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pd_prior_is_always_proper() {
        let d = Dataset::from_rows(&[vec![1.0], vec![1.0], vec![1.0]], &[1, 1, 1]).unwrap();
        let r = check_propriety(&d, &GaussianPrior::scaled_identity(1, 0.5).unwrap());
        assert!(r.proper && !r.c2_feasible);
    }

    #[test]
    fn rank_deficient_design_fails_c1() {
        let d = Dataset::from_rows(
            &[vec![1.0, 2.0], vec![2.0, 4.0], vec![-1.0, -2.0]],
            &[1, 0, 1],
        )
        .unwrap();
        let r = check_propriety(&d, &GaussianPrior::flat(2));
        assert!(!r.c1_full_column_rank && !r.proper);
    }

    #[test]
    fn intercept_mode_closed_form() {
        for (n, s) in [(10usize, 5usize), (100, 37), (1000, 999)] {
            let m = PosteriorModel::new(
                Dataset::intercept_only(n, s).unwrap(),
                GaussianPrior::flat(1),
            )
            .unwrap();
            let expect = probit_inv(s as f64 / n as f64);
            assert!((m.mode()[0] - expect).abs() < 1e-8, "n={n} s={s}");
            assert!(m.fixed_point_residual() <= 1e-6);
        }
    }

    #[test]
    fn symmetric_intercept_mode_is_zero() {
        let m = PosteriorModel::new(
            Dataset::intercept_only(10, 5).unwrap(),
            GaussianPrior::flat(1),
        )
        .unwrap();
        assert!(m.mode()[0].abs() < 1e-12);
        assert!(m.fixed_point_residual() < 1e-12);
    }

    #[test]
    fn perturbed_mode_has_visible_residual() {
        let m = PosteriorModel::new(
            Dataset::intercept_only(10, 5).unwrap(),
            GaussianPrior::flat(1),
        )
        .unwrap();
        let off = m.mode().add_scalar(0.1);
        assert!(m.residual_at(&off) > 1e-3);
    }

    #[test]
    fn varphi_and_d_at_zero() {
        let m = PosteriorModel::new(
            Dataset::intercept_only(4, 2).unwrap(),
            GaussianPrior::flat(1),
        )
        .unwrap();
        let zero = DVector::zeros(1);
        let phi = m.varphi(&zero);
        let r = (2.0 / PI).sqrt();
        assert!((phi[0] - r).abs() < 1e-14 && (phi[3] + r).abs() < 1e-14);
        for v in m.d_matrix(&zero).iter() {
            assert!((v - (1.0 - 2.0 / PI)).abs() < 1e-14);
        }
    }

    #[test]
    fn improper_model_is_rejected() {
        let err = PosteriorModel::new(
            Dataset::intercept_only(3, 3).unwrap(),
            GaussianPrior::flat(1),
        )
        .unwrap_err();
        assert!(matches!(err, Error::ImproperPosterior(_)));
    }

    #[test]
    fn strong_prior_pins_mode_to_prior_mean() {
        let d = Dataset::from_rows(
            &[
                vec![1.0, 0.3],
                vec![1.0, -1.2],
                vec![1.0, 0.8],
                vec![1.0, 2.0],
            ],
            &[1, 0, 0, 1],
        )
        .unwrap();
        let v = DVector::from_vec(vec![0.7, -0.4]);
        let prior = GaussianPrior::new(SymMatrix::scaled_identity(2, 1e8), v.clone()).unwrap();
        let m = PosteriorModel::new(d, prior).unwrap();
        assert!((m.mode() - v).norm() <= 1e-3);
    }

    #[test]
    fn trace_hat_matches_dense_formula() {
        let d = Dataset::from_rows(
            &[vec![1.0, 0.5], vec![1.0, -1.0], vec![1.0, 2.0]],
            &[1, 0, 1],
        )
        .unwrap();
        let m = PosteriorModel::new(d, GaussianPrior::scaled_identity(2, 1.0).unwrap()).unwrap();
        let x = m.data().x();
        let sinv = m.sigma().as_matrix().clone().try_inverse().unwrap();
        let dense = (x * sinv * x.transpose()).trace();
        assert!((m.trace_hat() - dense).abs() < 1e-12);
    }

    #[test]
    fn precision_normal_has_inverse_covariance() {
        let d = Dataset::from_rows(
            &[
                vec![1.0, 0.5, -1.0],
                vec![1.0, -1.0, 0.3],
                vec![1.0, 2.0, 1.5],
                vec![1.0, 0.1, -0.4],
            ],
            &[1, 0, 1, 0],
        )
        .unwrap();
        let m = PosteriorModel::new(d, GaussianPrior::scaled_identity(3, 0.5).unwrap()).unwrap();
        let target = m.sigma().as_matrix().clone().try_inverse().unwrap();
        let mut rng = crate::sampler::chain_rng(4);
        let zero = DVector::zeros(3);
        let reps = 200_000;
        let mut cov = DMatrix::zeros(3, 3);
        for _ in 0..reps {
            let w = m.sample_precision_normal(&zero, &mut rng);
            cov += &w * w.transpose();
        }
        cov /= reps as f64;
        let err = (cov - &target).abs().max();
        assert!(err < 0.02 * target.abs().max(), "covariance error {err}");
    }
}
