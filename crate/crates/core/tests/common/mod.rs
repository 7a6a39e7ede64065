#![allow(dead_code)]

use maxspi::seeds::stream_rng;
use maxspi::{BlockLmmData, ClusterBlock, ModelKind, VarianceComponents};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

/// Random NERM data with unequal cluster sizes and `p` covariates.
pub fn toy_nerm(seed: u64, d: usize, max_n: usize, p: usize, s2e: f64, s2u: f64) -> BlockLmmData {
    let mut rng = stream_rng(seed, 99);
    let clusters = (0..d)
        .map(|i| {
            let n = rng.random_range(1..=max_n);
            let u: f64 = s2u.sqrt() * rng.sample::<f64, _>(StandardNormal);
            let x = DMatrix::from_fn(n, p + 1, |_, j| if j == 0 { 1.0 } else { rng.random::<f64>() * 2.0 });
            let y = (0..n)
                .map(|r| {
                    let xb: f64 = x.row(r).iter().sum();
                    xb + u + s2e.sqrt() * rng.sample::<f64, _>(StandardNormal)
                })
                .collect();
            ClusterBlock::new(format!("c{i}"), y, x)
        })
        .collect();
    BlockLmmData::new(ModelKind::Nerm, clusters).expect("valid toy data")
}

pub fn toy_fhm(seed: u64, d: usize, s2u: f64) -> BlockLmmData {
    let mut rng = stream_rng(seed, 98);
    let clusters = (0..d)
        .map(|i| {
            let ev = 0.2 + rng.random::<f64>();
            let x = DMatrix::from_row_slice(1, 2, &[1.0, rng.random::<f64>()]);
            let y = 1.0 + x[(0, 1)] + (s2u.sqrt() + ev.sqrt()) * rng.sample::<f64, _>(StandardNormal);
            ClusterBlock::new(format!("a{i}"), vec![y], x).with_error_var(ev)
        })
        .collect();
    BlockLmmData::new(ModelKind::Fhm, clusters).expect("valid toy data")
}

pub struct Dense {
    pub x: DMatrix<f64>,
    pub z: DMatrix<f64>,
    pub y: DVector<f64>,
    pub r: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub vinv: DMatrix<f64>,
    pub s2u: f64,
}

/// Full `n x n` matrices of the model at `theta`.
pub fn dense(data: &BlockLmmData, theta: &VarianceComponents) -> Dense {
    let n = data.n_total();
    let d = data.n_clusters();
    let x = data.stacked_x();
    let y = DVector::from_vec(data.stacked_y());
    let mut z = DMatrix::zeros(n, d);
    let mut r = DMatrix::zeros(n, n);
    let mut row = 0;
    for (j, c) in data.clusters().iter().enumerate() {
        let rv = theta.sigma2_e().or(c.error_var).unwrap();
        for _ in 0..c.n() {
            z[(row, j)] = 1.0;
            r[(row, row)] = rv;
            row += 1;
        }
    }
    let s2u = theta.sigma2_u();
    let v = &r + &z * z.transpose() * s2u;
    let vinv = v.clone().try_inverse().unwrap();
    Dense {
        x,
        z,
        y,
        r,
        v,
        vinv,
        s2u,
    }
}

/// GLS and BLUP applied literally with the dense inverse.
pub fn dense_blup(m: &Dense) -> (DVector<f64>, DVector<f64>) {
    let xtv = m.x.transpose() * &m.vinv;
    let beta = (&xtv * &m.x).try_inverse().unwrap() * &xtv * &m.y;
    let u = m.z.transpose() * &m.vinv * (&m.y - &m.x * &beta) * m.s2u;
    (beta, u)
}

/// Restricted log-likelihood evaluated with dense matrices.
pub fn dense_reml_loglik(m: &Dense) -> f64 {
    let n = m.y.len() as f64;
    let k = m.x.ncols() as f64;
    let xtvx = m.x.transpose() * &m.vinv * &m.x;
    let xtvx_inv = xtvx.clone().try_inverse().unwrap();
    let p = &m.vinv - &m.vinv * &m.x * xtvx_inv * m.x.transpose() * &m.vinv;
    let ldv = m.v.clone().cholesky().unwrap().l().diagonal().map(|v| v.ln()).sum() * 2.0;
    let ldx = xtvx.cholesky().unwrap().l().diagonal().map(|v| v.ln()).sum() * 2.0;
    let q = (m.y.transpose() * p * &m.y)[(0, 0)];
    -0.5 * ((n - k) * (2.0 * std::f64::consts::PI).ln() + ldv + ldx + q)
}

/// `max |a - b|`.
pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `c` with `(2 Phi(c) - 1)^D = 1 - alpha`.
pub fn independent_max_quantile(d: usize, alpha: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    let level = (1.0 - alpha).powf(1.0 / d as f64);
    Normal::standard().inverse_cdf((1.0 + level) / 2.0)
}
