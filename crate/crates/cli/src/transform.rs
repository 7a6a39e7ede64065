use maxspi::estimation::eblup;
use maxspi::model::cluster_mean_spec;
use maxspi::BlockLmmData;
use serde::Serialize;

use crate::error::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct LogShift {
    pub c_star: f64,
    #[serde(skip)]
    pub y_log: Vec<f64>,
    /// `(c, skewness)` for every grid point.
    pub skewness: Vec<(f64, f64)>,
}

/// Fisher moment skewness `m3 / m2^{3/2}`; 0 for constant input.
pub fn fisher_skewness(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let m2 = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m3 = v.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n;
    if m2 <= 0.0 {
        0.0
    } else {
        m3 / m2.powf(1.5)
    }
}

/// Conditional residuals `y - X beta_hat - u_hat_d` after an EBLUP fit.
pub fn conditional_residuals(data: &BlockLmmData) -> Result<Vec<f64>, CliError> {
    let fit = eblup(data, &cluster_mean_spec(data))?;
    let beta = fit.beta();
    let mut out = Vec::with_capacity(data.n_total());
    for (c, u) in data.clusters().iter().zip(&fit.u_hat) {
        let xb = &c.x * &beta;
        out.extend(c.y.iter().zip(xb.iter()).map(|(y, f)| y - f - u));
    }
    Ok(out)
}

/// Picks the grid value `c` minimizing the absolute skewness of the model
/// residuals of `log(y + c)`. Ties go to the first grid point.
pub fn log_shift_transform(data: &BlockLmmData, grid: &[f64]) -> Result<LogShift, CliError> {
    if grid.is_empty() {
        return Err(CliError::EmptyGrid);
    }
    let y = data.stacked_y();
    let ymin = y.iter().cloned().fold(f64::INFINITY, f64::min);
    if let Some(&bad) = grid.iter().find(|&&c| !(ymin + c > 0.0)) {
        return Err(CliError::NonPositiveShift(bad));
    }
    let mut skewness = Vec::with_capacity(grid.len());
    let mut best: Option<(f64, f64, Vec<f64>)> = None;
    for &c in grid {
        let y_log: Vec<f64> = y.iter().map(|v| (v + c).ln()).collect();
        let shifted = data.with_stacked_y(&y_log)?;
        let s = fisher_skewness(&conditional_residuals(&shifted)?);
        skewness.push((c, s));
        if best.as_ref().is_none_or(|b| s.abs() < b.1) {
            best = Some((c, s.abs(), y_log));
        }
    }
    let (c_star, _, y_log) = best.expect("grid is non-empty");
    Ok(LogShift {
        c_star,
        y_log,
        skewness,
    })
}

/// `n` equally spaced points over `[min(y), max(y)]`.
pub fn range_grid(data: &BlockLmmData, n: usize) -> Vec<f64> {
    let y = data.stacked_y();
    let lo = y.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}
