//! Monte Carlo critical values from the joint normal approximation
//! `(beta_hat - beta, u_hat - u) ~ N(0, (C' R^-1 C + G+)^-1)`, `C = [X Z]`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimation::VarianceComponents;
use crate::maxstat::{CriticalValue, Method, SCALE_FLOOR};
use crate::model::{BlockLmmData, MixedParameterSpec};
use crate::orderstat::upper_order_statistic;
use crate::seeds::stream_rng;

const CHUNK: usize = 4096;

#[derive(Debug, Clone)]
pub struct JointNormalModel {
    /// `C' R^-1 C + G+`, fixed effects first.
    pub precision: DMatrix<f64>,
    pub covariance: DMatrix<f64>,
    /// Lower Cholesky factor of `covariance`.
    pub cov_factor: DMatrix<f64>,
    pub n_fixed: usize,
    pub n_random: usize,
}

impl JointNormalModel {
    pub fn dim(&self) -> usize {
        self.n_fixed + self.n_random
    }

    /// `c_d = (k_d, m_d e_d)` stacked as rows.
    pub fn selectors(&self, spec: &MixedParameterSpec) -> Result<DMatrix<f64>> {
        if spec.len() != self.n_random || spec.k.iter().any(|k| k.len() != self.n_fixed) {
            return Err(Error::ShapeMismatch(
                "spec does not match the joint normal model".into(),
            ));
        }
        let mut c = DMatrix::zeros(spec.len(), self.dim());
        for (d, (k, m)) in spec.k.iter().zip(&spec.m).enumerate() {
            for (j, v) in k.iter().enumerate() {
                c[(d, j)] = *v;
            }
            c[(d, self.n_fixed + d)] = *m;
        }
        Ok(c)
    }

    /// Model-implied standard deviation `sqrt(c' Cov c)` of each row of `c`.
    pub fn implied_sd(&self, c: &DMatrix<f64>) -> Vec<f64> {
        let w = c * &self.cov_factor;
        w.row_iter().map(|r| r.norm()).collect()
    }
}

/// Assembles the precision matrix of the mixed model equations and
/// factorizes its inverse.
pub fn build_joint_normal(data: &BlockLmmData, theta: &VarianceComponents) -> Result<JointNormalModel> {
    theta.check_model(data.model())?;
    let k = data.n_fixed();
    let nd = data.n_clusters();
    let dim = k + nd;
    let mut prec = DMatrix::<f64>::zeros(dim, dim);
    let ginv = 1.0 / theta.sigma2_u();
    for (d, c) in data.clusters().iter().enumerate() {
        let r = theta.sigma2_e().or(c.error_var).unwrap_or(f64::NAN);
        let xtx = c.x.transpose() * &c.x / r;
        let mut top = prec.view_mut((0, 0), (k, k));
        top += xtx;
        for j in 0..k {
            let v = c.x.column(j).sum() / r;
            prec[(j, k + d)] = v;
            prec[(k + d, j)] = v;
        }
        prec[(k + d, k + d)] = c.n() as f64 / r + ginv;
    }
    let covariance = prec
        .clone()
        .cholesky()
        .ok_or_else(|| Error::CholeskyFailure("precision matrix is not positive definite".into()))?
        .inverse();
    let covariance = (&covariance + covariance.transpose()) * 0.5;
    let cov_factor = covariance
        .clone()
        .cholesky()
        .ok_or_else(|| Error::CholeskyFailure("covariance matrix is not positive definite".into()))?
        .l();
    Ok(JointNormalModel {
        precision: prec,
        covariance,
        cov_factor,
        n_fixed: k,
        n_random: nd,
    })
}

/// Upper order statistic of `max_d |w_d' z| / scale_d` over `draws`
/// standard normal vectors `z`.
///
/// `weights` holds one row per cluster; its column count is the dimension
/// of `z`. Draws are generated in fixed-size chunks, each from its own
/// stream, so the result does not depend on the thread count.
pub fn max_normal_quantile(weights: &DMatrix<f64>, scales: &[f64], draws: usize, alpha: f64, seed: u64) -> Result<f64> {
    if draws == 0 {
        return Err(Error::InvalidConfig("at least one Monte Carlo draw is required".into()));
    }
    if weights.nrows() != scales.len() || weights.nrows() == 0 {
        return Err(Error::ShapeMismatch(format!(
            "{} weight rows, {} scales",
            weights.nrows(),
            scales.len()
        )));
    }
    crate::orderstat::order_statistic_rank(draws, alpha)?;
    let dim = weights.ncols();
    let scaled = DMatrix::from_fn(weights.nrows(), dim, |i, j| {
        weights[(i, j)] / scales[i].max(SCALE_FLOOR)
    });
    let n_chunks = draws.div_ceil(CHUNK);
    let mut maxima: Vec<f64> = (0..n_chunks)
        .into_par_iter()
        .flat_map_iter(|chunk| {
            let mut rng = stream_rng(seed, chunk as u64);
            let len = CHUNK.min(draws - chunk * CHUNK);
            let mut z = DVector::<f64>::zeros(dim);
            let mut proj = DVector::<f64>::zeros(scaled.nrows());
            (0..len)
                .map(|_| {
                    for v in z.iter_mut() {
                        *v = rng.sample(StandardNormal);
                    }
                    proj.gemv(1.0, &scaled, &z, 0.0);
                    proj.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
                })
                .collect::<Vec<_>>()
        })
        .collect();
    upper_order_statistic(&mut maxima, alpha)
}

/// Critical value with the model-implied standard deviations as scales.
pub fn critical_value_mc(
    model: &JointNormalModel,
    spec: &MixedParameterSpec,
    draws: usize,
    alpha: f64,
    seed: u64,
) -> Result<CriticalValue> {
    let c = model.selectors(spec)?;
    let sd = model.implied_sd(&c);
    critical_value_mc_with_scales(model, spec, &sd, draws, alpha, seed)
}

/// Critical value with caller-supplied scales, e.g. `sqrt(g1)`.
pub fn critical_value_mc_with_scales(
    model: &JointNormalModel,
    spec: &MixedParameterSpec,
    scales: &[f64],
    draws: usize,
    alpha: f64,
    seed: u64,
) -> Result<CriticalValue> {
    let w = model.selectors(spec)? * &model.cov_factor;
    let c = max_normal_quantile(&w, scales, draws, alpha, seed)?;
    CriticalValue::new(c, Method::Mc, alpha)
}

/// Critical value for the max-type test of `A mu = h`.
pub fn critical_value_mc_contrast(
    model: &JointNormalModel,
    spec: &MixedParameterSpec,
    a: &DMatrix<f64>,
    draws: usize,
    alpha: f64,
    seed: u64,
) -> Result<CriticalValue> {
    if a.ncols() != spec.len() {
        return Err(Error::ShapeMismatch(format!(
            "contrast matrix has {} columns for {} clusters",
            a.ncols(),
            spec.len()
        )));
    }
    let c = a * model.selectors(spec)?;
    let sd = model.implied_sd(&c);
    let w = c * &model.cov_factor;
    CriticalValue::new(max_normal_quantile(&w, &sd, draws, alpha, seed)?, Method::Mc, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ClusterBlock, ModelKind};

    #[test]
    fn single_unit_precision() {
        let c = ClusterBlock::new("a", vec![0.3], DMatrix::from_element(1, 1, 1.0));
        let data = BlockLmmData::new(ModelKind::Nerm, vec![c]).unwrap();
        let theta = VarianceComponents::nerm(1.0, 1.0).unwrap();
        let m = build_joint_normal(&data, &theta).unwrap();
        assert_eq!(m.precision, DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 2.0]));
        let recon = &m.cov_factor * m.cov_factor.transpose();
        assert!((recon - &m.covariance).abs().max() < 1e-14);
        assert!((&m.covariance * &m.precision - DMatrix::identity(2, 2)).abs().max() < 1e-12);
    }

    #[test]
    fn deterministic_under_seed() {
        let w = DMatrix::identity(3, 3);
        let a = max_normal_quantile(&w, &[1.0; 3], 10_000, 0.05, 11).unwrap();
        let b = max_normal_quantile(&w, &[1.0; 3], 10_000, 0.05, 11).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert!(max_normal_quantile(&w, &[1.0; 2], 10, 0.05, 1).is_err());
        assert!(max_normal_quantile(&w, &[1.0; 3], 0, 0.05, 1).is_err());
    }
}
