use nalgebra::{DMatrix, DVector};

use super::FitResult;
use crate::error::{Error, Result};
use crate::model::BlockLmmData;

const EB_VARIANCE_GUARD: f64 = 1e-12;

/// `L_d^-1 (y_d - X_d beta_hat)` with `V_d(theta_hat) = L_d L_d'`, stacked.
pub fn cholesky_residuals(data: &BlockLmmData, fit: &FitResult) -> Result<Vec<f64>> {
    fit.theta.check_model(data.model())?;
    let beta = fit.beta();
    if beta.len() != data.n_fixed() {
        return Err(Error::ShapeMismatch("fit does not match data".into()));
    }
    let s = fit.theta.sigma2_u();
    let mut out = Vec::with_capacity(data.n_total());
    for c in data.clusters() {
        let n = c.n();
        let r = fit.theta.sigma2_e().or(c.error_var).unwrap_or(f64::NAN);
        let v = DMatrix::from_fn(n, n, |i, j| s + if i == j { r } else { 0.0 });
        let chol = v
            .cholesky()
            .ok_or_else(|| Error::CholeskyFailure(format!("V_d of cluster `{}`", c.id)))?;
        let resid = DVector::from_column_slice(&c.y) - &c.x * &beta;
        let z = chol
            .l()
            .solve_lower_triangular(&resid)
            .ok_or_else(|| Error::CholeskyFailure(format!("triangular solve in cluster `{}`", c.id)))?;
        out.extend(z.iter());
    }
    Ok(out)
}

/// Standardized empirical Bayes random effects `u_d / sqrt(sigma2_u - g1_d)`.
///
/// Clusters whose standardizing variance falls below `1e-12` get 0.
pub fn eb_random_effects(data: &BlockLmmData, fit: &FitResult) -> Result<Vec<f64>> {
    let g1 = super::g1(data, &fit.theta)?;
    if fit.u_hat.len() != g1.len() {
        return Err(Error::ShapeMismatch("fit does not match data".into()));
    }
    let s = fit.theta.sigma2_u();
    Ok(fit
        .u_hat
        .iter()
        .zip(&g1)
        .map(|(u, g)| {
            let var = s - g;
            if var < EB_VARIANCE_GUARD {
                0.0
            } else {
                u / var.sqrt()
            }
        })
        .collect())
}
