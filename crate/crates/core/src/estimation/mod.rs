//! GLS/BLUP and EBLUP fitting, MSE components and residual diagnostics.

pub(crate) mod blocks;
mod diagnostics;
mod reml;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{eval_mixed_parameters, BlockLmmData, MixedParameterSpec, ModelKind, VARIANCE_FLOOR};
use blocks::{residual_moments, DesignStats, ResponseStats};

pub use diagnostics::{cholesky_residuals, eb_random_effects};
pub(crate) use reml::{block_variances, evaluate, reml_from_stats};
pub use reml::{reml_fit, restricted_loglik, RemlEstimate};

/// Variance components: `(sigma2_e, sigma2_u)` for unit-level data,
/// `sigma2_u` alone for Fay-Herriot data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceComponents {
    sigma2_e: Option<f64>,
    sigma2_u: f64,
}

fn floored(name: &str, v: f64) -> Result<f64> {
    if !v.is_finite() || v < 0.0 {
        return Err(Error::InvalidVariance(format!("{name} = {v}")));
    }
    Ok(v.max(VARIANCE_FLOOR))
}

impl VarianceComponents {
    pub fn nerm(sigma2_e: f64, sigma2_u: f64) -> Result<Self> {
        Ok(Self {
            sigma2_e: Some(floored("sigma2_e", sigma2_e)?),
            sigma2_u: floored("sigma2_u", sigma2_u)?,
        })
    }

    pub fn fhm(sigma2_u: f64) -> Result<Self> {
        Ok(Self {
            sigma2_e: None,
            sigma2_u: floored("sigma2_u", sigma2_u)?,
        })
    }

    pub fn sigma2_e(&self) -> Option<f64> {
        self.sigma2_e
    }

    pub fn sigma2_u(&self) -> f64 {
        self.sigma2_u
    }

    pub fn model(&self) -> ModelKind {
        if self.sigma2_e.is_some() {
            ModelKind::Nerm
        } else {
            ModelKind::Fhm
        }
    }

    pub(crate) fn params(&self) -> Vec<f64> {
        match self.sigma2_e {
            Some(e) => vec![e, self.sigma2_u],
            None => vec![self.sigma2_u],
        }
    }

    pub(crate) fn from_params(model: ModelKind, params: &[f64]) -> Self {
        match model {
            ModelKind::Nerm => Self {
                sigma2_e: Some(params[0].max(VARIANCE_FLOOR)),
                sigma2_u: params[1].max(VARIANCE_FLOOR),
            },
            ModelKind::Fhm => Self {
                sigma2_e: None,
                sigma2_u: params[0].max(VARIANCE_FLOOR),
            },
        }
    }

    pub(crate) fn check_model(&self, model: ModelKind) -> Result<()> {
        if self.model() != model {
            return Err(Error::ShapeMismatch(format!(
                "variance components for {} data used with {} data",
                self.model().as_str(),
                model.as_str()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub beta_hat: Vec<f64>,
    pub u_hat: Vec<f64>,
    pub mu_hat: Vec<f64>,
    pub theta: VarianceComponents,
    /// `|m_d| sqrt(g1_d)`, the standard error used for every interval.
    pub scale: Vec<f64>,
    /// `g1_d` for the mixed parameter, i.e. `m_d^2 * g1_d(theta)`.
    pub g1: Vec<f64>,
    pub loglik_restricted: f64,
}

impl FitResult {
    pub fn beta(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.beta_hat)
    }
}

/// GLS estimate, BLUP of the random effects and restricted log-likelihood.
pub(crate) struct GlsCore {
    pub beta: DVector<f64>,
    pub u: Vec<f64>,
    pub loglik: f64,
}

pub(crate) fn gls_from_stats(design: &DesignStats, resp: &ResponseStats, params: &[f64]) -> Result<GlsCore> {
    let ev = evaluate(design, resp, params, false)?;
    let u = (0..design.n_clusters())
        .map(|d| {
            let (r, s) = block_variances(design, params, d);
            let (rsum, _) = residual_moments(design, resp, d, &ev.beta);
            s / (r + design.n[d] * s) * rsum
        })
        .collect();
    Ok(GlsCore {
        beta: ev.beta,
        u,
        loglik: ev.loglik,
    })
}

/// Simplified `g1_d` with `m_d = 1`: `sigma2_u r_d / (r_d + n_d sigma2_u)`.
pub(crate) fn g1_from_design(design: &DesignStats, params: &[f64]) -> Vec<f64> {
    (0..design.n_clusters())
        .map(|d| {
            let (r, s) = block_variances(design, params, d);
            let n = design.n[d];
            match design.model {
                // shrinkage factor times sigma2_e / n_d
                ModelKind::Nerm => s / (s + r / n) * (r / n),
                ModelKind::Fhm => s * r / (s + r),
            }
        })
        .collect()
}

pub(crate) fn assemble_fit(
    spec: &MixedParameterSpec,
    theta: VarianceComponents,
    core: GlsCore,
    g1_unit: &[f64],
) -> FitResult {
    let mu_hat = spec
        .k
        .iter()
        .zip(&spec.m)
        .zip(&core.u)
        .map(|((k, m), u)| k.dot(&core.beta) + m * u)
        .collect();
    let g1: Vec<f64> = g1_unit.iter().zip(&spec.m).map(|(g, m)| m * m * g).collect();
    FitResult {
        beta_hat: core.beta.as_slice().to_vec(),
        u_hat: core.u,
        mu_hat,
        theta,
        scale: g1.iter().map(|g| g.sqrt()).collect(),
        g1,
        loglik_restricted: core.loglik,
    }
}

/// BLUP at known variance components.
pub fn fit_gls_blup(data: &BlockLmmData, spec: &MixedParameterSpec, theta: &VarianceComponents) -> Result<FitResult> {
    spec.check_against(data)?;
    theta.check_model(data.model())?;
    let design = DesignStats::from_data(data);
    let resp = ResponseStats::from_data(data);
    let params = theta.params();
    let core = gls_from_stats(&design, &resp, &params)?;
    let g1 = g1_from_design(&design, &params);
    let fit = assemble_fit(spec, *theta, core, &g1);
    debug_assert!({
        let mu = eval_mixed_parameters(data, spec, &fit.beta(), &fit.u_hat).unwrap();
        mu.iter()
            .zip(&fit.mu_hat)
            .all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(1.0))
    });
    Ok(fit)
}

/// REML followed by the BLUP at the estimate.
pub fn eblup(data: &BlockLmmData, spec: &MixedParameterSpec) -> Result<FitResult> {
    let est = reml_fit(data)?;
    fit_gls_blup(data, spec, &est.theta)
}

/// First MSE component per cluster, closed form, `m_d = 1`.
pub fn g1(data: &BlockLmmData, theta: &VarianceComponents) -> Result<Vec<f64>> {
    theta.check_model(data.model())?;
    Ok(g1_from_design(&DesignStats::from_data(data), &theta.params()))
}

/// `g1_d = m_d'(G_d - G_d Z_d' V_d^-1 Z_d G_d) m_d` with `m_d = 1`, from the
/// dense inverse of each `V_d`.
pub fn g1_matrix_form(data: &BlockLmmData, theta: &VarianceComponents) -> Result<Vec<f64>> {
    theta.check_model(data.model())?;
    let s = theta.sigma2_u();
    data.clusters()
        .iter()
        .map(|c| {
            let n = c.n();
            let r = theta.sigma2_e().or(c.error_var).unwrap_or(f64::NAN);
            let v = DMatrix::from_fn(n, n, |i, j| s + if i == j { r } else { 0.0 });
            let vinv = v
                .try_inverse()
                .ok_or_else(|| Error::SingularSystem("V_d is singular".into()))?;
            let z = DVector::from_element(n, 1.0);
            Ok(s - s * s * (z.transpose() * vinv * &z)[(0, 0)])
        })
        .collect()
}

/// Second MSE component `b_d' (sum_d X_d' V_d^-1 X_d)^-1 b_d` with
/// `b_d = k_d - a_d' X_d` and `a_d' = m_d G_d Z_d' V_d^-1`.
pub fn g2(data: &BlockLmmData, theta: &VarianceComponents, spec: &MixedParameterSpec) -> Result<Vec<f64>> {
    spec.check_against(data)?;
    theta.check_model(data.model())?;
    let design = DesignStats::from_data(data);
    let resp = ResponseStats::from_data(data);
    let params = theta.params();
    let m = evaluate(&design, &resp, &params, false)?.xtvx_inv;
    Ok(data
        .clusters()
        .iter()
        .enumerate()
        .map(|(d, c)| {
            let (r, s) = block_variances(&design, &params, d);
            let n = design.n[d];
            let gamma = n * s / (r + n * s);
            let b = &spec.k[d] - c.covariate_means() * (spec.m[d] * gamma);
            (b.transpose() * &m * &b)[(0, 0)].max(0.0)
        })
        .collect())
}
