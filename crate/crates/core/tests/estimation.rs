mod common;

use common::*;
use maxspi::estimation::{eb_random_effects, g1, restricted_loglik};
use maxspi::model::cluster_mean_spec;
use maxspi::sim::{generate_scenario, ScenarioConfig, FHM_SCENARIO_1};
use maxspi::{eblup, fit_gls_blup, reml_fit, ModelKind, VarianceComponents};
use nalgebra::DVector;

#[test]
fn reml_is_consistent_at_d90() {
    let config = ScenarioConfig::nerm(90, 0.5, 1.0).with_seed(2718);
    let (mut se, mut su) = (0.0, 0.0);
    for rep in 0..200 {
        let draw = generate_scenario(&config, rep).unwrap();
        let est = reml_fit(&draw.data).unwrap();
        se += est.theta.sigma2_e().unwrap();
        su += est.theta.sigma2_u();
    }
    let (se, su) = (se / 200.0, su / 200.0);
    assert!((se - 0.5).abs() < 0.05, "{se}");
    assert!((su - 1.0).abs() < 0.1, "{su}");
}

#[test]
fn reml_estimate_is_stationary() {
    for seed in 0..10 {
        let data = toy_nerm(seed, 20, 6, 1, 0.5, 1.0);
        let est = reml_fit(&data).unwrap();
        let se = est.theta.sigma2_e().unwrap();
        let su = est.theta.sigma2_u();
        let ll = |a: f64, b: f64| restricted_loglik(&data, &VarianceComponents::nerm(a, b).unwrap()).unwrap();
        let h = 1e-5;
        let de = (ll(se + h, su) - ll(se - h, su)) / (2.0 * h);
        assert!(de.abs() < 1e-4, "seed {seed}: {de}");
        if su > 1e-6 {
            let du = (ll(se, su + h) - ll(se, su - h)) / (2.0 * h);
            assert!(du.abs() < 1e-4, "seed {seed}: {du}");
        } else {
            assert!(ll(se, su + h) <= ll(se, su));
        }
    }
}

#[test]
fn gls_is_ols_when_random_effect_vanishes() {
    let data = toy_nerm(4, 12, 5, 2, 1.0, 0.5);
    let theta = VarianceComponents::nerm(1.0, 1e-10).unwrap();
    let fit = fit_gls_blup(&data, &cluster_mean_spec(&data), &theta).unwrap();
    let x = data.stacked_x();
    let y = DVector::from_vec(data.stacked_y());
    let ols = (x.transpose() * &x).try_inverse().unwrap() * x.transpose() * y;
    assert!(max_diff(&fit.beta_hat, ols.as_slice()) <= 1e-10);
}

#[test]
fn blup_is_shrunk_toward_zero() {
    for seed in 0..5 {
        let data = toy_nerm(seed, 15, 6, 1, 0.8, 0.6);
        let theta = VarianceComponents::nerm(0.8, 0.6).unwrap();
        let fit = fit_gls_blup(&data, &cluster_mean_spec(&data), &theta).unwrap();
        let beta = fit.beta();
        for (c, u) in data.clusters().iter().zip(&fit.u_hat) {
            let raw = c.y.iter().sum::<f64>() / c.n() as f64 - c.covariate_means().dot(&beta);
            let gamma = u / raw;
            assert!(gamma > 0.0 && gamma < 1.0, "{gamma}");
        }
    }
}

#[test]
fn g1_is_bounded_by_both_variances() {
    let data = toy_nerm(8, 30, 7, 1, 0.5, 1.0);
    for (se, su) in [(0.5, 1.0), (2.0, 0.1), (0.01, 5.0)] {
        let theta = VarianceComponents::nerm(se, su).unwrap();
        for (g, c) in g1(&data, &theta).unwrap().iter().zip(data.clusters()) {
            assert!(*g <= su.min(se / c.n() as f64) * (1.0 + 1e-12));
        }
    }
    let fhm = toy_fhm(9, 25, 1.0);
    let theta = VarianceComponents::fhm(0.7).unwrap();
    for (g, c) in g1(&fhm, &theta).unwrap().iter().zip(fhm.clusters()) {
        assert!(*g <= 0.7f64.min(c.error_var.unwrap()) * (1.0 + 1e-12));
    }
    let one = VarianceComponents::fhm(1.0).unwrap();
    let single = maxspi::BlockLmmData::new(
        ModelKind::Fhm,
        fhm.clusters().iter().map(|c| c.clone().with_error_var(0.5)).collect(),
    )
    .unwrap();
    assert!(g1(&single, &one).unwrap().iter().all(|g| (g - 1.0 / 3.0).abs() < 1e-15));
}

#[test]
fn fhm_scenario_fit_runs() {
    let config = ScenarioConfig::fhm(60, FHM_SCENARIO_1).with_seed(5);
    let draw = generate_scenario(&config, 0).unwrap();
    let fit = eblup(&draw.data, &draw.spec).unwrap();
    assert!(fit.theta.sigma2_u() > 0.0);
    assert_eq!(fit.mu_hat.len(), 60);
}

#[test]
fn eb_effects_vanish_at_the_floor() {
    let data = toy_nerm(2, 10, 4, 1, 1.0, 1.0);
    let theta = VarianceComponents::nerm(1.0, 1e-10).unwrap();
    let fit = fit_gls_blup(&data, &cluster_mean_spec(&data), &theta).unwrap();
    assert!(eb_random_effects(&data, &fit).unwrap().iter().all(|v| *v == 0.0));
}
