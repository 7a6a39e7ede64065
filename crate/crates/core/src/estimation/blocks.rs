//! Sufficient statistics and closed-form block algebra.
//!
//! With a single random intercept, every matrix that appears in GLS and REML
//! computations on cluster `d` is a combination `a I + b J` of the identity
//! and the all-ones matrix of size `n_d`. Such operators are closed under
//! products and their quadratic forms only need `n_d`, `X_d'1`, `X_d'X_d`,
//! `X_d'y_d`, `1'y_d` and `y_d'y_d`, so each likelihood evaluation is linear
//! in the number of clusters once these are precomputed.

use nalgebra::{DMatrix, DVector};

use crate::model::{BlockLmmData, ModelKind};

/// `i * I + j * J` acting on a block of size `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct IjOp {
    pub i: f64,
    pub j: f64,
}

impl IjOp {
    pub const IDENTITY: IjOp = IjOp { i: 1.0, j: 0.0 };
    pub const ONES: IjOp = IjOp { i: 0.0, j: 1.0 };

    pub fn then(self, other: IjOp, n: f64) -> IjOp {
        IjOp {
            i: self.i * other.i,
            j: self.i * other.j + self.j * other.i + n * self.j * other.j,
        }
    }

    pub fn trace(self, n: f64) -> f64 {
        n * (self.i + self.j)
    }
}

/// Response-free statistics of the design.
#[derive(Debug, Clone)]
pub(crate) struct DesignStats {
    pub model: ModelKind,
    pub k: usize,
    pub n: Vec<f64>,
    /// Known error variance per cluster (Fay-Herriot only).
    pub error_var: Vec<f64>,
    /// `X_d' 1`, `k` entries per cluster.
    pub sx: Vec<f64>,
    /// `X_d' X_d`, row-major `k x k` per cluster.
    pub sxx: Vec<f64>,
    pub n_total: usize,
}

/// Response-dependent statistics.
#[derive(Debug, Clone)]
pub(crate) struct ResponseStats {
    pub sy: Vec<f64>,
    /// `X_d' y_d`, `k` entries per cluster.
    pub sxy: Vec<f64>,
    pub syy: Vec<f64>,
}

impl DesignStats {
    pub fn from_data(data: &BlockLmmData) -> Self {
        let k = data.n_fixed();
        let d = data.n_clusters();
        let mut sx = Vec::with_capacity(d * k);
        let mut sxx = Vec::with_capacity(d * k * k);
        let mut n = Vec::with_capacity(d);
        let mut error_var = Vec::with_capacity(d);
        for c in data.clusters() {
            n.push(c.n() as f64);
            error_var.push(c.error_var.unwrap_or(f64::NAN));
            for col in c.x.column_iter() {
                sx.push(col.sum());
            }
            for a in 0..k {
                for b in 0..k {
                    sxx.push(c.x.column(a).dot(&c.x.column(b)));
                }
            }
        }
        Self {
            model: data.model(),
            k,
            n,
            error_var,
            sx,
            sxx,
            n_total: data.n_total(),
        }
    }

    pub fn n_clusters(&self) -> usize {
        self.n.len()
    }

    pub fn sx(&self, d: usize) -> &[f64] {
        &self.sx[d * self.k..(d + 1) * self.k]
    }

    pub fn sxx(&self, d: usize) -> &[f64] {
        let kk = self.k * self.k;
        &self.sxx[d * kk..(d + 1) * kk]
    }

    /// Adds `X_d' op X_d` into `acc`.
    pub fn add_xx(&self, d: usize, op: IjOp, acc: &mut DMatrix<f64>) {
        let k = self.k;
        let sx = self.sx(d);
        let sxx = self.sxx(d);
        for a in 0..k {
            for b in 0..k {
                acc[(a, b)] += op.i * sxx[a * k + b] + op.j * sx[a] * sx[b];
            }
        }
    }

    /// `tr(M X_d' op X_d)` for symmetric `M`, without forming the product.
    pub fn trace_m_xx(&self, d: usize, op: IjOp, m: &DMatrix<f64>) -> f64 {
        let k = self.k;
        let sx = self.sx(d);
        let sxx = self.sxx(d);
        let mut t = 0.0;
        for a in 0..k {
            for b in 0..k {
                t += m[(a, b)] * (op.i * sxx[a * k + b] + op.j * sx[a] * sx[b]);
            }
        }
        t
    }
}

impl ResponseStats {
    pub fn from_data(data: &BlockLmmData) -> Self {
        let y = data.stacked_y();
        Self::from_stacked(data, &y)
    }

    /// Statistics for an alternative stacked response on the same design.
    pub fn from_stacked(data: &BlockLmmData, y: &[f64]) -> Self {
        let k = data.n_fixed();
        let d = data.n_clusters();
        let mut sy = Vec::with_capacity(d);
        let mut sxy = Vec::with_capacity(d * k);
        let mut syy = Vec::with_capacity(d);
        let mut offset = 0;
        for c in data.clusters() {
            let yd = &y[offset..offset + c.n()];
            offset += c.n();
            sy.push(yd.iter().sum());
            syy.push(yd.iter().map(|v| v * v).sum());
            for col in c.x.column_iter() {
                sxy.push(col.iter().zip(yd).map(|(x, y)| x * y).sum());
            }
        }
        Self { sy, sxy, syy }
    }

    pub fn sxy(&self, d: usize, k: usize) -> &[f64] {
        &self.sxy[d * k..(d + 1) * k]
    }
}

/// Sum and sum of squares of the cluster residuals `y_d - X_d beta`.
pub(crate) fn residual_moments(
    design: &DesignStats,
    resp: &ResponseStats,
    d: usize,
    beta: &DVector<f64>,
) -> (f64, f64) {
    let k = design.k;
    let sx = design.sx(d);
    let sxx = design.sxx(d);
    let sxy = resp.sxy(d, k);
    let mut sum = resp.sy[d];
    let mut sq = resp.syy[d];
    for a in 0..k {
        sum -= sx[a] * beta[a];
        sq -= 2.0 * beta[a] * sxy[a];
        for b in 0..k {
            sq += beta[a] * sxx[a * k + b] * beta[b];
        }
    }
    (sum, sq.max(0.0))
}

/// Quadratic form `r' op r` from residual moments.
pub(crate) fn residual_quad(op: IjOp, sum: f64, sq: f64) -> f64 {
    op.i * sq + op.j * sum * sum
}
