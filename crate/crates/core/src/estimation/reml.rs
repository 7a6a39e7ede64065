//! Restricted maximum likelihood for the variance components.
//!
//! The restricted log-likelihood is
//! `-1/2 [ (n - k) log 2pi + log|V| + log|X'V^-1 X| + y'Py ]`,
//! maximized by Fisher scoring with step-halving on the nonnegative orthant
//! (floored at [`VARIANCE_FLOOR`]). If scoring breaks down the optimizer
//! falls back to cyclic golden-section search on the log scale.

use nalgebra::{DMatrix, DVector};

use super::blocks::{residual_moments, residual_quad, DesignStats, IjOp, ResponseStats};
use super::VarianceComponents;
use crate::error::{Error, Result};
use crate::model::{BlockLmmData, ModelKind, VARIANCE_FLOOR};

const MAX_ITER: usize = 200;
const LOGLIK_TOL: f64 = 1e-10;
const PARAM_TOL: f64 = 1e-8;
const MAX_HALVINGS: usize = 40;

#[derive(Debug, Clone, PartialEq)]
pub struct RemlEstimate {
    pub theta: VarianceComponents,
    pub loglik_restricted: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Restricted log-likelihood and, optionally, its score and expected information.
pub(crate) struct Evaluation {
    pub loglik: f64,
    pub beta: DVector<f64>,
    /// `(X' V^-1 X)^-1`.
    pub xtvx_inv: DMatrix<f64>,
    pub score: Vec<f64>,
    pub info: DMatrix<f64>,
}

/// Error variance and random-effect variance acting on cluster `d`.
#[inline]
pub(crate) fn block_variances(design: &DesignStats, params: &[f64], d: usize) -> (f64, f64) {
    match design.model {
        ModelKind::Nerm => (params[0], params[1]),
        ModelKind::Fhm => (design.error_var[d], params[0]),
    }
}

/// `V_d^-1` as an `a I + b J` operator.
#[inline]
pub(crate) fn inverse_op(r: f64, s: f64, n: f64) -> IjOp {
    IjOp {
        i: 1.0 / r,
        j: -s / (r * (r + n * s)),
    }
}

fn derivative_ops(model: ModelKind) -> &'static [IjOp] {
    match model {
        ModelKind::Nerm => &[IjOp::IDENTITY, IjOp::ONES],
        ModelKind::Fhm => &[IjOp::ONES],
    }
}

pub(crate) fn evaluate(
    design: &DesignStats,
    resp: &ResponseStats,
    params: &[f64],
    with_derivatives: bool,
) -> Result<Evaluation> {
    let k = design.k;
    let nd = design.n_clusters();
    let mut xtvx = DMatrix::<f64>::zeros(k, k);
    let mut xtvy = DVector::<f64>::zeros(k);
    let mut logdet_v = 0.0;
    let mut yvy = 0.0;

    for d in 0..nd {
        let n = design.n[d];
        let (r, s) = block_variances(design, params, d);
        let vinv = inverse_op(r, s, n);
        design.add_xx(d, vinv, &mut xtvx);
        let sx = design.sx(d);
        let sxy = resp.sxy(d, k);
        for a in 0..k {
            xtvy[a] += vinv.i * sxy[a] + vinv.j * sx[a] * resp.sy[d];
        }
        yvy += vinv.i * resp.syy[d] + vinv.j * resp.sy[d] * resp.sy[d];
        logdet_v += (n - 1.0) * r.ln() + (r + n * s).ln();
    }

    let chol = xtvx
        .clone()
        .cholesky()
        .ok_or_else(|| Error::SingularSystem("X'V^-1 X is not positive definite".into()))?;
    let logdet_xtvx = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let beta = chol.solve(&xtvy);
    let xtvx_inv = chol.inverse();
    // y'Py = y'V^-1 y - (X'V^-1 y)' beta
    let ypy = (yvy - xtvy.dot(&beta)).max(0.0);
    let dof = (design.n_total - k) as f64;
    let loglik = -0.5 * (dof * (2.0 * std::f64::consts::PI).ln() + logdet_v + logdet_xtvx + ypy);
    if !loglik.is_finite() {
        return Err(Error::SingularSystem("non-finite restricted log-likelihood".into()));
    }

    let np = params.len();
    let mut score = vec![0.0; np];
    let mut info = DMatrix::<f64>::zeros(np, np);
    if with_derivatives {
        let dops = derivative_ops(design.model);
        let mut tr_vd = vec![0.0; np];
        let mut rqr = vec![0.0; np];
        let mut xqx: Vec<DMatrix<f64>> = (0..np).map(|_| DMatrix::zeros(k, k)).collect();
        let mut tr_vdvd = DMatrix::<f64>::zeros(np, np);
        let mut tr_m_xqqx = DMatrix::<f64>::zeros(np, np);
        for d in 0..nd {
            let n = design.n[d];
            let (r, s) = block_variances(design, params, d);
            let vinv = inverse_op(r, s, n);
            let (rsum, rsq) = residual_moments(design, resp, d, &beta);
            let vd: Vec<IjOp> = dops.iter().map(|&op| vinv.then(op, n)).collect();
            for i in 0..np {
                tr_vd[i] += vd[i].trace(n);
                let q = vd[i].then(vinv, n);
                design.add_xx(d, q, &mut xqx[i]);
                rqr[i] += residual_quad(q, rsum, rsq);
                for j in i..np {
                    tr_vdvd[(i, j)] += vd[i].then(vd[j], n).trace(n);
                    let qij = vd[i].then(vd[j], n).then(vinv, n);
                    tr_m_xqqx[(i, j)] += design.trace_m_xx(d, qij, &xtvx_inv);
                }
            }
        }
        let mxq: Vec<DMatrix<f64>> = xqx.iter().map(|q| &xtvx_inv * q).collect();
        for i in 0..np {
            score[i] = -0.5 * (tr_vd[i] - mxq[i].trace()) + 0.5 * rqr[i];
            for j in i..np {
                let cross = (&mxq[i] * &mxq[j]).trace();
                let v = 0.5 * (tr_vdvd[(i, j)] - 2.0 * tr_m_xqqx[(i, j)] + cross);
                info[(i, j)] = v;
                info[(j, i)] = v;
            }
        }
    }

    Ok(Evaluation {
        loglik,
        beta,
        xtvx_inv,
        score,
        info,
    })
}

/// Restricted log-likelihood of `data` at `theta`.
pub fn restricted_loglik(data: &BlockLmmData, theta: &VarianceComponents) -> Result<f64> {
    theta.check_model(data.model())?;
    let design = DesignStats::from_data(data);
    let resp = ResponseStats::from_data(data);
    Ok(evaluate(&design, &resp, &theta.params(), false)?.loglik)
}

/// REML estimate of the variance components.
///
/// Fails with [`Error::NoConvergence`] when neither Fisher scoring nor the
/// fallback search meets the tolerances within the iteration budget.
pub fn reml_fit(data: &BlockLmmData) -> Result<RemlEstimate> {
    let design = DesignStats::from_data(data);
    let resp = ResponseStats::from_data(data);
    let est = reml_from_stats(&design, &resp)?;
    if !est.converged {
        return Err(Error::NoConvergence {
            iterations: est.iterations,
        });
    }
    Ok(est)
}

/// Same optimizer, but a non-converged run still returns its best iterate.
pub(crate) fn reml_from_stats(design: &DesignStats, resp: &ResponseStats) -> Result<RemlEstimate> {
    let k = design.k;
    if design.n_total <= k {
        return Err(Error::DegenerateData(format!(
            "{} units cannot support {} fixed effects",
            design.n_total, k
        )));
    }
    let start = starting_values(design, resp)?;
    let (params, loglik, iterations, converged) = match fisher_scoring(design, resp, &start) {
        Ok(Some(found)) => found,
        Ok(None) | Err(_) => golden_fallback(design, resp, &start)?,
    };
    Ok(RemlEstimate {
        theta: VarianceComponents::from_params(design.model, &params),
        loglik_restricted: loglik,
        iterations,
        converged,
    })
}

fn project(params: &mut [f64]) {
    for p in params.iter_mut() {
        if !(*p >= VARIANCE_FLOOR) {
            *p = VARIANCE_FLOOR;
        }
    }
}

fn starting_values(design: &DesignStats, resp: &ResponseStats) -> Result<Vec<f64>> {
    let k = design.k;
    let nd = design.n_clusters();
    let mut xtx = DMatrix::<f64>::zeros(k, k);
    let mut xty = DVector::<f64>::zeros(k);
    for d in 0..nd {
        design.add_xx(d, IjOp::IDENTITY, &mut xtx);
        for (a, v) in resp.sxy(d, k).iter().enumerate() {
            xty[a] += v;
        }
    }
    let beta = xtx
        .cholesky()
        .ok_or_else(|| Error::SingularSystem("X'X is not positive definite".into()))?
        .solve(&xty);
    let mut rss = 0.0;
    let mut within = 0.0;
    let mut mean_sq = 0.0;
    let mut yy = 0.0;
    for d in 0..nd {
        let (sum, sq) = residual_moments(design, resp, d, &beta);
        rss += sq;
        within += sq - sum * sum / design.n[d];
        mean_sq += (sum / design.n[d]).powi(2);
        yy += resp.syy[d];
    }
    if rss <= 1e-24 * yy.max(1.0) {
        return Err(Error::DegenerateData("zero residual variance".into()));
    }
    let total = rss / (design.n_total - k) as f64;
    Ok(match design.model {
        ModelKind::Nerm => {
            let n = design.n_total as f64;
            let e = if design.n_total > nd {
                (within / (n - nd as f64)).max(0.05 * total)
            } else {
                0.5 * total
            };
            let inv_n: f64 = design.n.iter().map(|n| 1.0 / n).sum::<f64>() / nd as f64;
            let u = (mean_sq / nd as f64 - e * inv_n).max(0.1 * total);
            vec![e, u]
        }
        ModelKind::Fhm => {
            let mean_err = design.error_var.iter().sum::<f64>() / nd as f64;
            vec![(total - mean_err).max(0.1 * total)]
        }
    })
}

type Optimum = (Vec<f64>, f64, usize, bool);

/// Returns `Ok(None)` when scoring stalls and the fallback should take over.
fn fisher_scoring(design: &DesignStats, resp: &ResponseStats, start: &[f64]) -> Result<Option<Optimum>> {
    let np = start.len();
    let mut params = start.to_vec();
    project(&mut params);
    let mut ev = evaluate(design, resp, &params, true)?;
    for iter in 1..=MAX_ITER {
        // coordinates held at the floor by an outward score stay fixed
        let free: Vec<usize> = (0..np)
            .filter(|&i| params[i] > VARIANCE_FLOOR || ev.score[i] > 0.0)
            .collect();
        let mut step = DVector::<f64>::zeros(np);
        if !free.is_empty() {
            let info = DMatrix::from_fn(free.len(), free.len(), |a, b| ev.info[(free[a], free[b])]);
            let score = DVector::from_fn(free.len(), |a, _| ev.score[free[a]]);
            match info.cholesky() {
                Some(ch) => {
                    for (a, v) in ch.solve(&score).iter().enumerate() {
                        step[free[a]] = *v;
                    }
                }
                None => return Ok(None),
            }
        }
        if step.iter().any(|v| !v.is_finite()) {
            return Ok(None);
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let mut trial: Vec<f64> = (0..np).map(|i| params[i] + t * step[i]).collect();
            project(&mut trial);
            if let Ok(tev) = evaluate(design, resp, &trial, true) {
                if tev.loglik >= ev.loglik - 1e-12 * ev.loglik.abs().max(1.0) {
                    accepted = Some((trial, tev));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((trial, tev)) = accepted else {
            return Ok(None);
        };
        let dll = (tev.loglik - ev.loglik).abs();
        let dpar = params
            .iter()
            .zip(&trial)
            .map(|(a, b)| (a - b).abs() / a.abs().max(1.0))
            .fold(0.0, f64::max);
        params = trial;
        ev = tev;
        if dll < LOGLIK_TOL && dpar < PARAM_TOL {
            return Ok(Some((params, ev.loglik, iter, true)));
        }
    }
    Ok(None)
}

fn golden_fallback(design: &DesignStats, resp: &ResponseStats, start: &[f64]) -> Result<Optimum> {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut params = start.to_vec();
    project(&mut params);
    let scale = params.iter().cloned().fold(1.0, f64::max);
    let lo = VARIANCE_FLOOR.ln();
    let hi = (1e4 * scale).ln();
    let loglik_at = |p: &[f64]| {
        evaluate(design, resp, p, false)
            .map(|e| e.loglik)
            .unwrap_or(f64::NEG_INFINITY)
    };
    let mut best = loglik_at(&params);
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < MAX_ITER {
        sweeps += 1;
        let before = params.clone();
        let before_ll = best;
        for i in 0..params.len() {
            let f = |x: f64| {
                let mut p = params.clone();
                p[i] = x.exp();
                loglik_at(&p)
            };
            let (mut a, mut b) = (lo, hi);
            let mut c = b - INV_PHI * (b - a);
            let mut d = a + INV_PHI * (b - a);
            let (mut fc, mut fd) = (f(c), f(d));
            while b - a > 1e-12 {
                if fc > fd {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - INV_PHI * (b - a);
                    fc = f(c);
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + INV_PHI * (b - a);
                    fd = f(d);
                }
            }
            let x = 0.5 * (a + b);
            let fx = f(x);
            if fx >= best {
                params[i] = x.exp();
                best = fx;
            }
        }
        let dpar = params
            .iter()
            .zip(&before)
            .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
            .fold(0.0, f64::max);
        if (best - before_ll).abs() < LOGLIK_TOL && dpar < PARAM_TOL {
            converged = true;
            break;
        }
    }
    project(&mut params);
    let ll = evaluate(design, resp, &params, false)?.loglik;
    Ok((params, ll, sweeps, converged))
}
