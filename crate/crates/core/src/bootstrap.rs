//! Parametric bootstrap of the studentized max statistic.
//!
//! Replicate `b` draws `u*_d = sigma_u W`, errors `e* = sigma_e W` per unit
//! (or `sigma_{e_d} W` per area for Fay-Herriot data), builds
//! `y* = X beta_hat + u* + e*`, refits with the same REML/EBLUP pipeline and
//! records `(mu_hat*_d - mu*_d) / sqrt(g1_d(theta*))` where the bootstrap
//! target is `mu*_d = k_d' beta_hat + m_d u*_d`.

use std::io::Write;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimation::blocks::{DesignStats, ResponseStats};
use crate::estimation::{g1_from_design, gls_from_stats, reml_from_stats, FitResult};
use crate::maxstat::{CriticalValue, Method, SCALE_FLOOR};
use crate::model::{BlockLmmData, MixedParameterSpec, ModelKind};
use crate::orderstat::{order_statistic_rank, upper_order_statistic};
use crate::seeds::stream_rng;

/// Bootstrap replicates, one row per replicate and one column per cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapDraws {
    /// Studentized statistics `S*_{bd}`.
    pub s_matrix: DMatrix<f64>,
    /// Prediction errors `mu_hat*_{bd} - mu*_{bd}`.
    pub errors: DMatrix<f64>,
    /// Floored standard errors `|m_d| sqrt(g1_d(theta*_b))`.
    pub scales: DMatrix<f64>,
    pub master_seed: u64,
    pub model: ModelKind,
    /// Replicates whose REML refit failed or did not converge; they are kept.
    pub refit_failures: usize,
}

impl BootstrapDraws {
    pub fn replicates(&self) -> usize {
        self.s_matrix.nrows()
    }

    pub fn clusters(&self) -> usize {
        self.s_matrix.ncols()
    }

    /// Builds draws directly from a matrix of studentized statistics, with
    /// unit scales. Used for calibration against known distributions.
    pub fn from_statistics(s_matrix: DMatrix<f64>, master_seed: u64, model: ModelKind) -> Result<Self> {
        if s_matrix.nrows() == 0 || s_matrix.ncols() == 0 {
            return Err(Error::ShapeMismatch("empty draw matrix".into()));
        }
        if s_matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::ShapeMismatch("non-finite statistic in draw matrix".into()));
        }
        let scales = DMatrix::from_element(s_matrix.nrows(), s_matrix.ncols(), 1.0);
        Ok(Self {
            errors: s_matrix.clone(),
            s_matrix,
            scales,
            master_seed,
            model,
            refit_failures: 0,
        })
    }

    /// Studentized contrast statistics, `B x D'`:
    /// `(A e*)_j / sqrt(sum_d a_jd^2 scale*_d^2)`.
    pub fn contrast_statistics(&self, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if a.ncols() != self.clusters() || a.nrows() == 0 || a.nrows() > a.ncols() {
            return Err(Error::ShapeMismatch(format!(
                "contrast matrix is {}x{}, draws have {} clusters",
                a.nrows(),
                a.ncols(),
                self.clusters()
            )));
        }
        let b = self.replicates();
        let num = &self.errors * a.transpose();
        let var = self.scales.map(|s| s * s) * a.map(|v| v * v).transpose();
        Ok(DMatrix::from_fn(b, a.nrows(), |i, j| {
            num[(i, j)] / var[(i, j)].sqrt().max(SCALE_FLOOR)
        }))
    }

    /// Writes the statistics as CSV: header `c1..cD`, one row per replicate.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let header: Vec<String> = (1..=self.clusters()).map(|d| format!("c{d}")).collect();
        writeln!(out, "{}", header.join(","))?;
        for row in self.s_matrix.row_iter() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

struct Replicate {
    errors: Vec<f64>,
    scales: Vec<f64>,
    failed: bool,
}

/// Runs `b` parametric bootstrap replicates around `fit`.
pub fn parametric_bootstrap(
    data: &BlockLmmData,
    spec: &MixedParameterSpec,
    fit: &FitResult,
    b: usize,
    master_seed: u64,
) -> Result<BootstrapDraws> {
    if b == 0 {
        return Err(Error::InvalidConfig(
            "at least one bootstrap replicate is required".into(),
        ));
    }
    if b > u32::MAX as usize {
        return Err(Error::SeedOverflow(b));
    }
    spec.check_against(data)?;
    fit.theta.check_model(data.model())?;
    let beta = fit.beta();
    if beta.len() != data.n_fixed() {
        return Err(Error::ShapeMismatch("fit does not match data".into()));
    }
    let design = DesignStats::from_data(data);
    let mean: Vec<f64> = (data.stacked_x() * &beta).iter().copied().collect();
    let fixed_part: Vec<f64> = spec.k.iter().map(|k| k.dot(&beta)).collect();
    let sd_u = fit.theta.sigma2_u().sqrt();
    let sd_e: Vec<f64> = data
        .clusters()
        .iter()
        .map(|c| fit.theta.sigma2_e().or(c.error_var).unwrap_or(f64::NAN).sqrt())
        .collect();
    let sizes = data.cluster_sizes();
    let fallback = fit.theta.params();

    let replicate = |idx: usize| -> Result<Replicate> {
        let mut rng = stream_rng(master_seed, idx as u64);
        let u_star: Vec<f64> = (0..sizes.len())
            .map(|_| sd_u * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let mut y_star = Vec::with_capacity(mean.len());
        let mut row = 0;
        for (d, &n) in sizes.iter().enumerate() {
            for _ in 0..n {
                let e: f64 = rng.sample(StandardNormal);
                y_star.push(mean[row] + u_star[d] + sd_e[d] * e);
                row += 1;
            }
        }
        let resp = ResponseStats::from_stacked(data, &y_star);
        let (params, failed) = match reml_from_stats(&design, &resp) {
            Ok(est) => (est.theta.params(), !est.converged),
            Err(_) => (fallback.clone(), true),
        };
        let core = gls_from_stats(&design, &resp, &params).map_err(|_| Error::RefitFailure { replicate: idx })?;
        let g1 = g1_from_design(&design, &params);
        let mut errors = Vec::with_capacity(sizes.len());
        let mut scales = Vec::with_capacity(sizes.len());
        for d in 0..sizes.len() {
            let target = fixed_part[d] + spec.m[d] * u_star[d];
            let estimate = spec.k[d].dot(&core.beta) + spec.m[d] * core.u[d];
            errors.push(estimate - target);
            scales.push((spec.m[d] * spec.m[d] * g1[d]).max(SCALE_FLOOR).sqrt());
        }
        if errors.iter().chain(&scales).any(|v| !v.is_finite()) {
            return Err(Error::RefitFailure { replicate: idx });
        }
        Ok(Replicate { errors, scales, failed })
    };

    let reps = (0..b).into_par_iter().map(replicate).collect::<Result<Vec<_>>>()?;
    let nd = sizes.len();
    let errors = DMatrix::from_fn(b, nd, |i, j| reps[i].errors[j]);
    let scales = DMatrix::from_fn(b, nd, |i, j| reps[i].scales[j]);
    let s_matrix = errors.component_div(&scales);
    Ok(BootstrapDraws {
        s_matrix,
        errors,
        scales,
        master_seed,
        model: data.model(),
        refit_failures: reps.iter().filter(|r| r.failed).count(),
    })
}

fn row_max_abs(s: &DMatrix<f64>, cols: &[usize]) -> Vec<f64> {
    s.row_iter()
        .map(|row| cols.iter().map(|&c| row[c].abs()).fold(0.0, f64::max))
        .collect()
}

/// Upper order statistic of the row-wise max of `|S|`.
pub fn max_statistic_quantile(s: &DMatrix<f64>, alpha: f64) -> Result<f64> {
    let cols: Vec<usize> = (0..s.ncols()).collect();
    upper_order_statistic(&mut row_max_abs(s, &cols), alpha)
}

pub fn critical_value_bs(draws: &BootstrapDraws, alpha: f64) -> Result<CriticalValue> {
    CriticalValue::new(max_statistic_quantile(&draws.s_matrix, alpha)?, Method::Bs, alpha)
}

/// Critical value for the max-type test of `A mu = h` from the same replicates.
pub fn critical_value_contrast(draws: &BootstrapDraws, a: &DMatrix<f64>, alpha: f64) -> Result<CriticalValue> {
    let s = draws.contrast_statistics(a)?;
    CriticalValue::new(max_statistic_quantile(&s, alpha)?, Method::Bs, alpha)
}

/// Beran balanced critical values.
///
/// Each `|S*_{bd}|` is mapped to its level under the right-continuous
/// empirical cdf of column `d`; the upper order statistic `q` of the row
/// maxima of those levels is then pulled back through each column's
/// generalized inverse. Levels are kept as integer ranks so the round trip
/// is exact.
pub fn beran_critical_values(draws: &BootstrapDraws, alpha: f64) -> Result<CriticalValue> {
    let b = draws.replicates();
    let nd = draws.clusters();
    let rank_idx = order_statistic_rank(b, alpha)?;
    let mut sorted_cols = Vec::with_capacity(nd);
    let mut max_level = vec![0usize; b];
    for d in 0..nd {
        let mut col: Vec<f64> = draws.s_matrix.column(d).iter().map(|v| v.abs()).collect();
        col.sort_by(f64::total_cmp);
        for (i, level) in max_level.iter_mut().enumerate() {
            let v = draws.s_matrix[(i, d)].abs();
            // number of draws <= v
            let rank = col.partition_point(|&x| x <= v);
            *level = (*level).max(rank);
        }
        sorted_cols.push(col);
    }
    max_level.sort_unstable();
    let q = max_level[rank_idx - 1];
    let per_cluster = sorted_cols.iter().map(|col| col[q.max(1) - 1]).collect();
    CriticalValue::beran(per_cluster, alpha)
}

/// Subset quantiles `c_S` of `max_{d in S} |S*_{bd}|` from shared draws.
#[derive(Debug, Clone)]
pub struct SubsetQuantiles {
    abs_s: DMatrix<f64>,
    alpha: f64,
}

impl SubsetQuantiles {
    pub fn new(s: &DMatrix<f64>, alpha: f64) -> Result<Self> {
        order_statistic_rank(s.nrows(), alpha)?;
        Ok(Self { abs_s: s.abs(), alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn quantile(&self, subset: &[usize]) -> Result<f64> {
        if subset.is_empty() {
            return Err(Error::EmptySubset);
        }
        if let Some(&bad) = subset.iter().find(|&&d| d >= self.abs_s.ncols()) {
            return Err(Error::ShapeMismatch(format!(
                "cluster index {bad} out of range for {} columns",
                self.abs_s.ncols()
            )));
        }
        upper_order_statistic(&mut row_max_abs(&self.abs_s, subset), self.alpha)
    }
}

pub fn stepdown_quantile_provider(draws: &BootstrapDraws, alpha: f64) -> Result<SubsetQuantiles> {
    SubsetQuantiles::new(&draws.s_matrix, alpha)
}

/// Subset quantiles over contrast components.
pub fn stepdown_contrast_provider(draws: &BootstrapDraws, a: &DMatrix<f64>, alpha: f64) -> Result<SubsetQuantiles> {
    SubsetQuantiles::new(&draws.contrast_statistics(a)?, alpha)
}

/// Identity contrast of size `d`.
pub fn identity_contrast(d: usize) -> DMatrix<f64> {
    DMatrix::identity(d, d)
}
