//! Max-type statistics, simultaneous intervals and multiple tests.
//!
//! Conventions shared by every method: intervals are closed, so a parameter
//! on a bound is covered, and a test rejects when its statistic is greater
//! than or equal to the critical value.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimation::FitResult;

/// Standard errors below this are replaced by it before dividing.
pub const SCALE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Method {
    /// Parametric bootstrap.
    Bs,
    /// Monte Carlo from the joint normal approximation.
    Mc,
    /// Bonferroni.
    Bo,
    /// Beran balanced intervals.
    Be,
    /// Volume of tube.
    Vt,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Bs => "BS",
            Method::Mc => "MC",
            Method::Bo => "BO",
            Method::Be => "BE",
            Method::Vt => "VT",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bs" => Ok(Method::Bs),
            "mc" => Ok(Method::Mc),
            "bo" => Ok(Method::Bo),
            "be" => Ok(Method::Be),
            "vt" => Ok(Method::Vt),
            other => Err(Error::InvalidConfig(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalValue {
    pub value: f64,
    pub method: Method,
    pub alpha: f64,
    /// Per-cluster critical values, Beran only.
    pub per_cluster: Option<Vec<f64>>,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::AlphaOutOfRange(alpha))
    }
}

impl CriticalValue {
    pub fn new(value: f64, method: Method, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if method == Method::Be {
            return Err(Error::MissingPerCluster);
        }
        if !(value >= 0.0) {
            return Err(Error::InvalidConfig(format!("critical value {value} must be >= 0")));
        }
        Ok(Self {
            value,
            method,
            alpha,
            per_cluster: None,
        })
    }

    /// Beran critical values; `value` holds their maximum.
    pub fn beran(per_cluster: Vec<f64>, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if per_cluster.is_empty() || per_cluster.iter().any(|c| !(*c >= 0.0)) {
            return Err(Error::InvalidConfig("Beran critical values must be >= 0".into()));
        }
        Ok(Self {
            value: per_cluster.iter().cloned().fold(0.0, f64::max),
            method: Method::Be,
            alpha,
            per_cluster: Some(per_cluster),
        })
    }

    /// Critical value applied to cluster `d`.
    pub fn for_cluster(&self, d: usize) -> Result<f64> {
        match self.method {
            Method::Be => self
                .per_cluster
                .as_ref()
                .ok_or(Error::MissingPerCluster)?
                .get(d)
                .copied()
                .ok_or_else(|| Error::ShapeMismatch(format!("no Beran critical value for cluster {d}"))),
            _ => Ok(self.value),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Interval {
    pub center: f64,
    pub half_width: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimultaneousIntervals {
    pub intervals: Vec<Interval>,
    pub critical: CriticalValue,
    pub level: f64,
}

impl SimultaneousIntervals {
    pub fn widths(&self) -> impl Iterator<Item = f64> + '_ {
        self.intervals.iter().map(|i| 2.0 * i.half_width)
    }
}

/// `max_d |numerator_d / scale_d|`.
pub fn max_abs_stat(numerators: &[f64], scales: &[f64]) -> Result<f64> {
    if numerators.len() != scales.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} numerators, {} scales",
            numerators.len(),
            scales.len()
        )));
    }
    Ok(numerators
        .iter()
        .zip(scales)
        .map(|(n, s)| (n / s.max(SCALE_FLOOR)).abs())
        .fold(0.0, f64::max))
}

/// Intervals `center_d -/+ c_d * scale_d`.
pub fn build_spi_with_scales(
    centers: &[f64],
    scales: &[f64],
    critical: &CriticalValue,
) -> Result<SimultaneousIntervals> {
    check_alpha(critical.alpha)?;
    if centers.len() != scales.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} centers, {} scales",
            centers.len(),
            scales.len()
        )));
    }
    if let Some(pc) = &critical.per_cluster {
        if pc.len() != centers.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} Beran critical values for {} clusters",
                pc.len(),
                centers.len()
            )));
        }
    }
    let intervals = centers
        .iter()
        .zip(scales)
        .enumerate()
        .map(|(d, (&center, &scale))| {
            let half_width = critical.for_cluster(d)? * scale;
            Ok(Interval {
                center,
                half_width,
                lower: center - half_width,
                upper: center + half_width,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SimultaneousIntervals {
        intervals,
        critical: critical.clone(),
        level: 1.0 - critical.alpha,
    })
}

/// Intervals centered at the EBLUPs with the fit's `sqrt(g1)` scales.
pub fn build_spi(fit: &FitResult, critical: &CriticalValue) -> Result<SimultaneousIntervals> {
    build_spi_with_scales(&fit.mu_hat, &fit.scale, critical)
}

/// True iff every `truth_d` lies in its closed interval.
pub fn covers_all(intervals: &SimultaneousIntervals, truth: &[f64]) -> Result<bool> {
    if intervals.intervals.len() != truth.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} intervals, {} true values",
            intervals.intervals.len(),
            truth.len()
        )));
    }
    Ok(intervals
        .intervals
        .iter()
        .zip(truth)
        .all(|(i, &t)| i.lower <= t && t <= i.upper))
}

/// Contrast estimates `A mu_hat` and their standard errors
/// `sqrt(sum_j a_dj^2 g1_j)`.
pub fn contrast_estimates(a: &DMatrix<f64>, mu_hat: &[f64], g1: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if a.ncols() != mu_hat.len() || mu_hat.len() != g1.len() {
        return Err(Error::ShapeMismatch(format!(
            "contrast matrix has {} columns for {} clusters",
            a.ncols(),
            mu_hat.len()
        )));
    }
    if a.nrows() == 0 || a.nrows() > a.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "contrast matrix must have between 1 and {} rows, got {}",
            a.ncols(),
            a.nrows()
        )));
    }
    let est = a
        .row_iter()
        .map(|row| row.iter().zip(mu_hat).map(|(a, m)| a * m).sum())
        .collect();
    let se = a
        .row_iter()
        .map(|row| row.iter().zip(g1).map(|(a, g)| a * a * g).sum::<f64>().sqrt())
        .collect();
    Ok((est, se))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContrastTest {
    pub h: Vec<f64>,
    /// Studentized components `t_{H_d}`.
    pub t_values: Vec<f64>,
    pub decisions: Vec<bool>,
    /// `t_H = max_d |t_{H_d}|`.
    pub statistic: f64,
    pub reject: bool,
    pub critical: CriticalValue,
}

/// Single-step max-type test of `A mu = h`.
pub fn single_step_test(
    mu_hat_h: &[f64],
    scales_h: &[f64],
    h: &[f64],
    critical: &CriticalValue,
) -> Result<ContrastTest> {
    if mu_hat_h.len() != scales_h.len() || mu_hat_h.len() != h.len() {
        return Err(Error::ShapeMismatch(format!(
            "estimates {}, scales {}, h {}",
            mu_hat_h.len(),
            scales_h.len(),
            h.len()
        )));
    }
    check_alpha(critical.alpha)?;
    let t_values: Vec<f64> = mu_hat_h
        .iter()
        .zip(h)
        .zip(scales_h)
        .map(|((m, h), s)| (m - h) / s.max(SCALE_FLOOR))
        .collect();
    let statistic = t_values.iter().map(|t| t.abs()).fold(0.0, f64::max);
    let decisions = t_values.iter().map(|t| t.abs() >= critical.value).collect();
    Ok(ContrastTest {
        h: h.to_vec(),
        t_values,
        decisions,
        statistic,
        reject: statistic >= critical.value,
        critical: critical.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepDownStep {
    pub tested: Vec<usize>,
    pub critical_value: f64,
    pub rejected: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepDownResult {
    /// Rejected hypotheses, ascending.
    pub rejected: Vec<usize>,
    pub steps: Vec<StepDownStep>,
}

/// Step-down multiple test over the studentized `t_values`.
///
/// `quantile` maps a set of surviving hypotheses to the `(1 - alpha)`
/// quantile of their maximum absolute statistic; it must be monotone in the
/// set, which is checked as the loop proceeds.
pub fn step_down_test<F>(t_values: &[f64], mut quantile: F, alpha: f64) -> Result<StepDownResult>
where
    F: FnMut(&[usize]) -> Result<f64>,
{
    check_alpha(alpha)?;
    let mut active: Vec<usize> = (0..t_values.len()).collect();
    let mut rejected = Vec::new();
    let mut steps = Vec::new();
    let mut previous_c = f64::INFINITY;
    while !active.is_empty() {
        let c = quantile(&active)?;
        if c > previous_c {
            return Err(Error::ProviderInconsistent {
                larger: c,
                smaller: previous_c,
            });
        }
        previous_c = c;
        let (now, keep): (Vec<usize>, Vec<usize>) = active.iter().partition(|&&d| t_values[d].abs() >= c);
        steps.push(StepDownStep {
            tested: active.clone(),
            critical_value: c,
            rejected: now.clone(),
        });
        if now.is_empty() {
            break;
        }
        rejected.extend(now);
        active = keep;
    }
    rejected.sort_unstable();
    Ok(StepDownResult { rejected, steps })
}
