//! Bonferroni critical values, ridge weights of the BLUP and the
//! volume-of-tube tail bound.

use std::f64::consts::PI;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, Normal, StudentsT};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::estimation::VarianceComponents;
use crate::maxstat::{CriticalValue, Method};
use crate::mc::build_joint_normal;
use crate::model::BlockLmmData;

pub const TUBE_BRACKET: (f64, f64) = (1e-6, 100.0);
const TUBE_TOL: f64 = 1e-8;
const TUBE_MAX_ITER: usize = 200;
const TUBE_SCAN: usize = 1000;

/// `Phi^-1(1 - alpha / (2D))`.
pub fn bonferroni_cv(d: usize, alpha: f64) -> Result<CriticalValue> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::AlphaOutOfRange(alpha));
    }
    if d == 0 {
        return Err(Error::InvalidConfig("Bonferroni needs at least one cluster".into()));
    }
    let n = Normal::standard();
    let c = -n.inverse_cdf(alpha / (2.0 * d as f64));
    CriticalValue::new(c, Method::Bo, alpha)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeWeights {
    /// `l` with `l' y` the BLUP of `c' (beta, u)`, stacked in unit order.
    pub l: DVector<f64>,
    /// `||l_M||^2`, so that `Var(l' y - c' phi) = sigma_e^2 ||l_M||^2`.
    pub l_m_norm: f64,
    /// `sigma_e` used to scale `||l_M||`; 1 under FHM.
    pub error_sd: f64,
}

impl RidgeWeights {
    /// `c_vt * sigma_e * ||l_M||`.
    pub fn half_width(&self, c_vt: f64) -> f64 {
        c_vt * self.error_sd * self.l_m_norm.sqrt()
    }
}

/// `l' = c' (C' R^-1 C + G+)^-1 C' R^-1`.
pub fn ridge_weights(data: &BlockLmmData, theta: &VarianceComponents, c: &DVector<f64>) -> Result<RidgeWeights> {
    let joint = build_joint_normal(data, theta)?;
    if c.len() != joint.dim() {
        return Err(Error::ShapeMismatch(format!(
            "selector has length {}, expected {}",
            c.len(),
            joint.dim()
        )));
    }
    let k = joint.n_fixed;
    let w = &joint.covariance * c;
    let quad = c.dot(&w).max(0.0);
    let mut l = Vec::with_capacity(data.n_total());
    for (d, cl) in data.clusters().iter().enumerate() {
        let r = theta.sigma2_e().or(cl.error_var).unwrap_or(f64::NAN);
        for row in cl.x.row_iter() {
            let mut v = w[k + d];
            for j in 0..k {
                v += row[j] * w[j];
            }
            l.push(v / r);
        }
    }
    let (l_m_norm, error_sd) = match theta.sigma2_e() {
        Some(s2) => (quad / s2, s2.sqrt()),
        None => (quad, 1.0),
    };
    Ok(RidgeWeights {
        l: DVector::from_vec(l),
        l_m_norm,
        error_sd,
    })
}

/// Geometric constants of the tube bound. Supplied by the caller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TubeConstants {
    pub kappa0: f64,
    pub zeta0: f64,
    pub kappa2: f64,
    pub zeta1: f64,
    pub m0: f64,
    pub euler: f64,
    pub xi0: f64,
    pub eta0: f64,
    pub nu: f64,
}

impl TubeConstants {
    /// Only `kappa0` and `nu` set, every correction term off.
    pub fn simple(kappa0: f64, nu: f64) -> Self {
        Self {
            kappa0,
            zeta0: 0.0,
            kappa2: 0.0,
            zeta1: 0.0,
            m0: 0.0,
            euler: 0.0,
            xi0: 1.0,
            eta0: 0.0,
            nu,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.kappa0,
            self.zeta0,
            self.kappa2,
            self.zeta1,
            self.m0,
            self.euler,
            self.xi0,
            self.eta0,
            self.nu,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConstants("constants must be finite".into()));
        }
        if self.kappa0 <= 0.0 {
            return Err(Error::InvalidConstants(format!("kappa0 = {} must be > 0", self.kappa0)));
        }
        if self.xi0 <= 0.0 {
            return Err(Error::InvalidConstants(format!("xi0 = {} must be > 0", self.xi0)));
        }
        if self.nu < 1.0 {
            return Err(Error::InvalidConstants(format!("nu = {} must be >= 1", self.nu)));
        }
        if self.zeta0 < 0.0 || self.eta0 < 0.0 {
            return Err(Error::InvalidConstants("zeta0 and eta0 must be >= 0".into()));
        }
        Ok(())
    }
}

fn t_two_sided(nu: f64, x: f64) -> Result<f64> {
    let t = StudentsT::new(0.0, 1.0, nu).map_err(|e| Error::InvalidConstants(e.to_string()))?;
    Ok(2.0 * t.sf(x.abs()))
}

fn f_tail(d1: f64, d2: f64, x: f64) -> Result<f64> {
    if x <= 0.0 {
        return Ok(1.0);
    }
    let f = FisherSnedecor::new(d1, d2).map_err(|e| Error::InvalidConstants(e.to_string()))?;
    Ok(f.sf(x))
}

/// Right-hand side of the tube inequality for a `p`-dimensional index set.
pub fn tube_alpha_bound(p: usize, c: f64, k: &TubeConstants) -> Result<f64> {
    k.validate()?;
    if p == 0 {
        return Err(Error::InvalidConfig("p must be >= 1".into()));
    }
    if !(c > 0.0) {
        return Err(Error::InvalidConfig(format!("c = {c} must be > 0")));
    }
    let nu = k.nu;
    let cx = c * k.xi0;
    let base = 1.0 + cx * cx / nu;
    // 2^{1/2} c xi0 Gamma((nu+1)/2) / (nu^{1/2} Gamma(nu/2))
    let gamma_ratio_1 = (ln_gamma((nu + 1.0) / 2.0) - ln_gamma(nu / 2.0)).exp();
    let a2_coef = 2f64.sqrt() * cx * gamma_ratio_1 / nu.sqrt();
    let bound = match p {
        1 => {
            let main = base.powf(-nu / 2.0) + k.eta0 * a2_coef * base.powf(-(nu + 1.0) / 2.0);
            k.kappa0 / PI * main + k.euler * t_two_sided(nu, cx)?
        }
        2 => {
            let gamma_ratio_2 = (ln_gamma((nu + 2.0) / 2.0) - ln_gamma(nu / 2.0)).exp();
            let inner = a2_coef * base.powf(-(nu + 1.0) / 2.0) - k.eta0 * cx / nu.sqrt() * base.powf(-nu / 2.0)
                + k.eta0 * 2.0 * c * k.xi0 * k.xi0 * gamma_ratio_2 / nu * base.powf(-(nu + 2.0) / 2.0);
            let boundary = base.powf(-nu / 2.0) + k.eta0 * a2_coef;
            k.kappa0 / (2f64.sqrt() * PI.powf(1.5)) * inner
                + k.zeta0 / (2.0 * PI) * boundary
                + 2.0 * k.euler * t_two_sided(nu, cx)?
        }
        _ => {
            let pf = p as f64;
            let w = cx - k.eta0;
            let w2 = if w > 0.0 { w * w } else { 0.0 };
            let term = |dim: f64| -> Result<f64> {
                let coef = (ln_gamma(dim / 2.0) - (dim / 2.0) * PI.ln()).exp();
                Ok(coef * f_tail(dim, nu, w2 / dim)?)
            };
            k.kappa0 * term(pf + 1.0)?
                + k.zeta0 / 2.0 * term(pf)?
                + (k.kappa2 + k.zeta1 + k.m0) / (2.0 * PI) * term(pf - 1.0)?
        }
    };
    if !bound.is_finite() {
        return Err(Error::InvalidConstants(format!("bound is not finite at c = {c}")));
    }
    Ok(bound)
}

/// Smallest `c` beyond which the tube bound stays at or below `alpha`.
pub fn tube_cv(p: usize, alpha: f64, k: &TubeConstants) -> Result<CriticalValue> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::AlphaOutOfRange(alpha));
    }
    let (lo, hi) = TUBE_BRACKET;
    let f = |c: f64| tube_alpha_bound(p, c, k);
    if f(hi)? > alpha {
        return Err(Error::BoundUnattainable { alpha });
    }
    // Locate the last grid cell where the bound crosses alpha from above.
    let step = (hi / lo).ln() / TUBE_SCAN as f64;
    let grid: Vec<f64> = (0..=TUBE_SCAN).map(|i| lo * (step * i as f64).exp()).collect();
    let values = grid.iter().map(|&c| f(c)).collect::<Result<Vec<_>>>()?;
    let last_above = match values.iter().rposition(|&v| v > alpha) {
        None => return CriticalValue::new(lo, Method::Vt, alpha),
        Some(i) => i,
    };
    let tol = 1e-9 * values[last_above].abs().max(1e-300);
    if values[last_above..].windows(2).any(|w| w[1] > w[0] + tol) {
        return Err(Error::NonMonotoneBound(grid[last_above]));
    }
    let (mut a, mut b) = (grid[last_above], grid[last_above + 1]);
    for _ in 0..TUBE_MAX_ITER {
        if b - a <= TUBE_TOL * 0.5 {
            break;
        }
        let mid = 0.5 * (a + b);
        if f(mid)? > alpha {
            a = mid;
        } else {
            b = mid;
        }
    }
    CriticalValue::new(b, Method::Vt, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bonferroni_examples() {
        assert!((bonferroni_cv(1, 0.05).unwrap().value - 1.959964).abs() < 1e-6);
        let c30 = bonferroni_cv(30, 0.05).unwrap().value;
        assert!((c30 - 3.144).abs() < 1e-3);
        assert!(bonferroni_cv(60, 0.05).unwrap().value > c30);
        assert!(matches!(bonferroni_cv(3, 1.0), Err(Error::AlphaOutOfRange(_))));
    }

    #[test]
    fn p1_reduces_to_t_power() {
        let k = TubeConstants::simple(2.0, 12.0);
        for c in [0.5, 1.0, 2.5] {
            let expect = 2.0 / PI * (1.0 + c * c / 12.0f64).powf(-6.0);
            assert!((tube_alpha_bound(1, c, &k).unwrap() - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn invalid_constants() {
        let mut k = TubeConstants::simple(0.0, 5.0);
        assert!(matches!(tube_alpha_bound(1, 1.0, &k), Err(Error::InvalidConstants(_))));
        k.kappa0 = 1.0;
        k.nu = 0.0;
        assert!(matches!(tube_alpha_bound(1, 1.0, &k), Err(Error::InvalidConstants(_))));
    }

    #[test]
    fn unattainable_alpha() {
        let k = TubeConstants::simple(1e6, 1.0);
        assert!(matches!(tube_cv(1, 1e-9, &k), Err(Error::BoundUnattainable { .. })));
    }

    #[test]
    fn left_edge_root() {
        let k = TubeConstants::simple(1.0, 5.0);
        let alpha = tube_alpha_bound(1, TUBE_BRACKET.0 + 5e-9, &k).unwrap();
        assert!(alpha < tube_alpha_bound(1, TUBE_BRACKET.0, &k).unwrap());
        let c = tube_cv(1, alpha, &k).unwrap().value;
        assert!((c - TUBE_BRACKET.0).abs() < 1e-8);
    }

    #[test]
    fn higher_dimension_is_finite_and_decreasing() {
        let k = TubeConstants {
            kappa0: 3.0,
            zeta0: 1.0,
            kappa2: 0.5,
            zeta1: 0.2,
            m0: 0.1,
            euler: 1.0,
            xi0: 1.0,
            eta0: 0.0,
            nu: 40.0,
        };
        let a = tube_alpha_bound(3, 2.0, &k).unwrap();
        let b = tube_alpha_bound(3, 3.0, &k).unwrap();
        assert!(a > b && b > 0.0);
    }
}
