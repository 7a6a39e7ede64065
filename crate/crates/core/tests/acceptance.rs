//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line.
//!
//! Every simulation uses the same fixed master seed.

mod common;

use std::sync::OnceLock;

use common::*;
use maxspi::analytic::{ridge_weights, tube_alpha_bound, tube_cv, TubeConstants, TUBE_BRACKET};
use maxspi::bootstrap::{critical_value_bs, parametric_bootstrap, BootstrapDraws, SubsetQuantiles};
use maxspi::estimation::{g1, g1_matrix_form};
use maxspi::maxstat::{build_spi_with_scales, single_step_test, step_down_test, CriticalValue, Method};
use maxspi::mc::{build_joint_normal, critical_value_mc, max_normal_quantile};
use maxspi::model::cluster_mean_spec;
use maxspi::seeds::stream_rng;
use maxspi::sim::{
    run_fwer_experiment, run_power_experiment, run_spi_experiment, ExperimentResult, ScenarioConfig, FHM_SCENARIO_1,
};
use maxspi::{eblup, fit_gls_blup, reml_fit, BlockLmmData, ClusterBlock, ModelKind, VarianceComponents};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

const SEED: u64 = 1;

fn report(n: u32, title: &str, failures: &[String], detail: &str) {
    let status = if failures.is_empty() { "PASS" } else { "FAIL" };
    println!("criterion {n} [{title}]: {status} ({detail})");
    for f in failures {
        println!("  - {f}");
    }
    assert!(failures.is_empty(), "criterion {n} failed: {failures:?}");
}

fn check(failures: &mut Vec<String>, ok: bool, msg: String) {
    if !ok {
        failures.push(msg);
    }
}

fn table1_run() -> &'static ExperimentResult {
    static RUN: OnceLock<ExperimentResult> = OnceLock::new();
    RUN.get_or_init(|| {
        let config = ScenarioConfig::nerm(30, 0.5, 1.0)
            .with_sizes(500, 500, 10_000)
            .with_seed(SEED);
        run_spi_experiment(&config, &[Method::Bs, Method::Mc, Method::Bo]).unwrap()
    })
}

#[test]
fn criterion_1_table1_coverage() {
    let r = table1_run();
    let bs = 100.0 * r.value(Method::Bs, "ECP").unwrap();
    let mc = 100.0 * r.value(Method::Mc, "ECP").unwrap();
    let bo = 100.0 * r.value(Method::Bo, "ECP").unwrap();
    let mut f = Vec::new();
    check(
        &mut f,
        (bs - 95.2).abs() <= 2.0,
        format!("ECP_BS {bs:.1} not within 2.0 of 95.2"),
    );
    check(&mut f, bs >= mc, format!("ECP_BS {bs:.1} < ECP_MC {mc:.1}"));
    check(
        &mut f,
        r.failures.is_empty(),
        format!("{} failed replicates", r.failures.len()),
    );
    report(
        1,
        "NERM D=30 coverage",
        &f,
        &format!(
            "ECP_BS={bs:.1}% ECP_MC={mc:.1}% ECP_BO={bo:.1}% over {} replicates",
            r.completed_replicates
        ),
    );
}

#[test]
fn criterion_2_table1_widths() {
    let r = table1_run();
    let bs = r.value(Method::Bs, "WS").unwrap();
    let mc = r.value(Method::Mc, "WS").unwrap();
    let bo = r.value(Method::Bo, "WS").unwrap();
    let mut f = Vec::new();
    check(
        &mut f,
        (bs - 1.947).abs() <= 0.05,
        format!("WS_BS {bs:.3} not within 0.05 of 1.947"),
    );
    check(&mut f, bs > mc, format!("WS_BS {bs:.3} <= WS_MC {mc:.3}"));
    report(
        2,
        "NERM D=30 widths",
        &f,
        &format!("WS_BS={bs:.3} WS_MC={mc:.3} WS_BO={bo:.3}"),
    );
}

#[test]
fn criterion_3_fhm_coverage_and_beran() {
    let run = |d: usize| {
        let config = ScenarioConfig::fhm(d, FHM_SCENARIO_1)
            .with_sizes(500, 500, 10_000)
            .with_seed(SEED);
        run_spi_experiment(&config, &[Method::Bs, Method::Be]).unwrap()
    };
    let (r15, r60, r90) = (run(15), run(60), run(90));
    let bs60 = 100.0 * r60.value(Method::Bs, "ECP").unwrap();
    let be15 = 100.0 * r15.value(Method::Be, "ECP").unwrap();
    let be90 = 100.0 * r90.value(Method::Be, "ECP").unwrap();
    let mut f = Vec::new();
    check(
        &mut f,
        (bs60 - 95.7).abs() <= 2.5,
        format!("ECP_BS(D=60) {bs60:.1} not within 2.5 of 95.7"),
    );
    check(
        &mut f,
        be15 - be90 >= 5.0,
        format!("ECP_BE drops only {:.1} points", be15 - be90),
    );
    report(
        3,
        "FHM scenario 1",
        &f,
        &format!("ECP_BS(D=60)={bs60:.1}% ECP_BE(D=15)={be15:.1}% ECP_BE(D=90)={be90:.1}%"),
    );
}

#[test]
fn criterion_4_fwer() {
    let mut f = Vec::new();
    let mut detail = Vec::new();
    for d in [15, 30] {
        let config = ScenarioConfig::nerm(d, 1.0, 1.0)
            .with_sizes(500, 500, 10_000)
            .with_seed(SEED);
        let r = run_fwer_experiment(&config, 1.0).unwrap();
        let bs = r.value(Method::Bs, "FWER").unwrap();
        let bo = r.value(Method::Bo, "FWER").unwrap();
        check(&mut f, bs <= 0.069, format!("FWER_BS(D={d}) {bs:.3} > 0.069"));
        detail.push(format!("D={d}: FWER_BS={bs:.3} FWER_BO={bo:.3}"));
    }
    report(4, "step-down FWER", &f, &detail.join(", "));
}

#[test]
fn criterion_5_power() {
    let config = ScenarioConfig::nerm(30, 0.5, 1.0)
        .with_sizes(500, 500, 10_000)
        .with_seed(SEED);
    let r = run_power_experiment(&config, &[Method::Bs], &[-1.0, 0.0, 1.0]).unwrap();
    let p = |d: &str| r.value(Method::Bs, &format!("power@{d}")).unwrap();
    let (neg, size, pos) = (p("-1"), p("0"), p("1"));
    let mut f = Vec::new();
    check(
        &mut f,
        neg > 0.9 && pos > 0.9,
        format!("power at |delta|=1: {neg:.3}, {pos:.3}"),
    );
    check(
        &mut f,
        (size - 0.05).abs() <= 0.03,
        format!("size {size:.3} outside [0.02, 0.08]"),
    );
    report(
        5,
        "power at ICC 2/3",
        &f,
        &format!("power(-1)={neg:.3} size={size:.3} power(1)={pos:.3}"),
    );
}

fn random_instances() -> Vec<(BlockLmmData, VarianceComponents)> {
    (0..20u64)
        .map(|i| {
            if i % 4 == 3 {
                (
                    toy_fhm(100 + i, 8 + i as usize, 0.8),
                    VarianceComponents::fhm(0.5 + 0.05 * i as f64).unwrap(),
                )
            } else {
                (
                    toy_nerm(100 + i, 2 + i as usize % 9, 5, 1 + i as usize % 3, 0.6, 1.1),
                    VarianceComponents::nerm(0.3 + 0.05 * i as f64, 1.4 - 0.04 * i as f64).unwrap(),
                )
            }
        })
        .collect()
}

#[test]
fn criterion_6_oracles() {
    let mut f = Vec::new();
    let (mut blup_err, mut ridge_err, mut g1_err) = (0.0f64, 0.0f64, 0.0f64);
    for (data, theta) in random_instances() {
        let spec = cluster_mean_spec(&data);
        let fit = fit_gls_blup(&data, &spec, &theta).unwrap();
        let (beta, u) = dense_blup(&dense(&data, &theta));
        blup_err = blup_err
            .max(max_diff(&fit.beta_hat, beta.as_slice()))
            .max(max_diff(&fit.u_hat, u.as_slice()));
        let y = DVector::from_vec(data.stacked_y());
        let kf = data.n_fixed();
        for d in 0..data.n_clusters() {
            let mut c = DVector::zeros(kf + data.n_clusters());
            c.rows_mut(0, kf).copy_from(&spec.k[d]);
            c[kf + d] = 1.0;
            let w = ridge_weights(&data, &theta, &c).unwrap();
            ridge_err = ridge_err.max((w.l.dot(&y) - fit.mu_hat[d]).abs());
        }
        g1_err = g1_err.max(max_diff(
            &g1(&data, &theta).unwrap(),
            &g1_matrix_form(&data, &theta).unwrap(),
        ));
    }
    check(&mut f, blup_err <= 1e-10, format!("BLUP vs dense {blup_err:e}"));
    check(&mut f, ridge_err <= 1e-10, format!("ridge vs BLUP {ridge_err:e}"));
    check(&mut f, g1_err <= 1e-12, format!("g1 forms {g1_err:e}"));

    // REML against a 0.01 lattice of the dense restricted likelihood
    let clusters = (0..4)
        .map(|i| {
            let mut rng = stream_rng(SEED, 500 + i as u64);
            let u: f64 = 1.5 * rng.sample::<f64, _>(StandardNormal);
            let x = DMatrix::from_fn(3, 2, |_, j| if j == 0 { 1.0 } else { rng.random::<f64>() });
            let y = (0..3)
                .map(|r| 1.0 + x[(r, 1)] + u + rng.sample::<f64, _>(StandardNormal))
                .collect();
            ClusterBlock::new(format!("{i}"), y, x)
        })
        .collect();
    let data = BlockLmmData::new(ModelKind::Nerm, clusters).unwrap();
    let est = reml_fit(&data).unwrap();
    let step = 0.01;
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    for i in 1..=600 {
        for j in 0..=800 {
            let (se, su) = (i as f64 * step, (j as f64 * step).max(1e-10));
            let ll = dense_reml_loglik(&dense(&data, &VarianceComponents::nerm(se, su).unwrap()));
            if ll > best.0 {
                best = (ll, se, su);
            }
        }
    }
    let (se, su) = (est.theta.sigma2_e().unwrap(), est.theta.sigma2_u());
    check(
        &mut f,
        (se - best.1).abs() <= step && (su - best.2).abs() <= step,
        format!("REML ({se:.4}, {su:.4}) vs lattice ({}, {})", best.1, best.2),
    );

    // independent columns: (2 Phi(c) - 1)^30 = 0.95
    let exact = independent_max_quantile(30, 0.05);
    let mut rng = stream_rng(SEED, 600);
    let s = DMatrix::from_fn(10_000, 30, |_, _| rng.sample::<f64, _>(StandardNormal));
    let c_bs = critical_value_bs(
        &BootstrapDraws::from_statistics(s, SEED, ModelKind::Nerm).unwrap(),
        0.05,
    )
    .unwrap()
    .value;
    let c_mc = max_normal_quantile(&DMatrix::identity(30, 30), &[1.0; 30], 100_000, 0.05, SEED).unwrap();
    check(
        &mut f,
        (c_bs - exact).abs() < 0.05,
        format!("c_BS {c_bs:.4} vs {exact:.4}"),
    );
    check(
        &mut f,
        (c_mc - exact).abs() < 0.02,
        format!("c_MC {c_mc:.4} vs {exact:.4}"),
    );
    report(
        6,
        "oracle equivalences",
        &f,
        &format!(
            "BLUP {blup_err:.1e}, ridge {ridge_err:.1e}, g1 {g1_err:.1e}, REML ({se:.3}, {su:.3}) vs ({}, {}), c_BS {c_bs:.3} c_MC {c_mc:.3} exact {exact:.3}",
            best.1, best.2
        ),
    );
}

#[test]
fn criterion_7_properties() {
    let mut f = Vec::new();
    let mut rng = stream_rng(SEED, 700);

    // symmetric intervals, built from one half-width
    for _ in 0..200 {
        let d = rng.random_range(1..20);
        let centers: Vec<f64> = (0..d).map(|_| 100.0 * rng.sample::<f64, _>(StandardNormal)).collect();
        let scales: Vec<f64> = (0..d).map(|_| 0.01 + rng.random::<f64>()).collect();
        let cv = CriticalValue::new(3.0 * rng.random::<f64>(), Method::Bs, 0.05).unwrap();
        for i in build_spi_with_scales(&centers, &scales, &cv).unwrap().intervals {
            if i.lower != i.center - i.half_width || i.upper != i.center + i.half_width {
                f.push("interval not built from a single half-width".into());
            }
        }
    }

    // alpha monotonicity, nested subset quantiles and step-down dominance
    for trial in 0..50 {
        let d = rng.random_range(3..15);
        let s = DMatrix::from_fn(400, d, |_, j| {
            (1.0 + 0.1 * j as f64) * rng.sample::<f64, _>(StandardNormal)
        });
        let draws = BootstrapDraws::from_statistics(s.clone(), trial, ModelKind::Nerm).unwrap();
        let (a1, a2) = (0.01 + 0.1 * rng.random::<f64>(), 0.12 + 0.1 * rng.random::<f64>());
        if critical_value_bs(&draws, a1).unwrap().value < critical_value_bs(&draws, a2).unwrap().value {
            f.push(format!("c_BS not monotone in alpha, trial {trial}"));
        }
        let q = SubsetQuantiles::new(&s, 0.05).unwrap();
        let mut order: Vec<usize> = (0..d).collect();
        for i in (1..d).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let c1 = q.quantile(&order[..1]).unwrap();
        let c2 = q.quantile(&order[..d / 2 + 1]).unwrap();
        let c3 = q.quantile(&order).unwrap();
        if !(c1 <= c2 && c2 <= c3) {
            f.push(format!("nested chain broken, trial {trial}"));
        }
        let t: Vec<f64> = (0..d).map(|_| 4.0 * rng.sample::<f64, _>(StandardNormal)).collect();
        let single = single_step_test(
            &t,
            &vec![1.0; d],
            &vec![0.0; d],
            &CriticalValue::new(c3, Method::Bs, 0.05).unwrap(),
        )
        .unwrap();
        let sd = step_down_test(&t, |set| q.quantile(set), 0.05).unwrap();
        if single
            .decisions
            .iter()
            .enumerate()
            .any(|(i, r)| *r && !sd.rejected.contains(&i))
        {
            f.push(format!("step-down misses a single-step rejection, trial {trial}"));
        }
    }

    // thread-count determinism
    let config = ScenarioConfig::nerm(15, 0.5, 1.0)
        .with_sizes(10, 100, 5000)
        .with_seed(SEED);
    let draw = maxspi::sim::generate_scenario(&config, 0).unwrap();
    let fit = eblup(&draw.data, &draw.spec).unwrap();
    let model = build_joint_normal(&draw.data, &fit.theta).unwrap();
    let run = || {
        let bs = parametric_bootstrap(&draw.data, &draw.spec, &fit, 200, SEED).unwrap();
        let mc = critical_value_mc(&model, &draw.spec, 20_000, 0.05, SEED).unwrap();
        let sim = run_spi_experiment(&config, &[Method::Bs, Method::Mc]).unwrap();
        let bits: Vec<u64> = bs
            .s_matrix
            .iter()
            .chain(std::iter::once(&mc.value))
            .chain(sim.rows.iter().map(|r| &r.value))
            .map(|v| v.to_bits())
            .collect();
        bits
    };
    let pool = |n| rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
    if pool(1).install(run) != pool(4).install(run) {
        f.push("results differ between 1 and 4 threads".into());
    }

    // REML invariance under y -> y + X r
    let data = toy_nerm(SEED, 25, 6, 2, 0.5, 1.0);
    let base = reml_fit(&data).unwrap().theta;
    for k in 0..3 {
        let r = DVector::from_fn(3, |_, _| 10.0 * rng.sample::<f64, _>(StandardNormal));
        let shift = data.stacked_x() * r;
        let y: Vec<f64> = data.stacked_y().iter().zip(shift.iter()).map(|(a, b)| a + b).collect();
        let moved = reml_fit(&data.with_stacked_y(&y).unwrap()).unwrap().theta;
        let de = (base.sigma2_e().unwrap() - moved.sigma2_e().unwrap()).abs();
        let du = (base.sigma2_u() - moved.sigma2_u()).abs();
        if de > 1e-6 || du > 1e-6 {
            f.push(format!("REML moved by ({de:e}, {du:e}) under translation {k}"));
        }
    }
    report(
        7,
        "property suites",
        &f,
        "symmetry, alpha monotonicity, nested quantiles, step-down, threads, REML invariance",
    );
}

#[test]
fn criterion_8_tube() {
    let mut f = Vec::new();
    let (kappa0, nu, alpha) = (3.0, 20.0, 0.05);
    let k = TubeConstants::simple(kappa0, nu);
    let c = tube_cv(1, alpha, &k).unwrap().value;
    let exact = (nu * ((kappa0 / (std::f64::consts::PI * alpha)).powf(2.0 / nu) - 1.0)).sqrt();
    check(
        &mut f,
        (c - exact).abs() <= 1e-8,
        format!("bisection {c} vs closed form {exact}"),
    );

    let (lo, hi) = TUBE_BRACKET;
    let mut prev = f64::INFINITY;
    let mut monotone = true;
    for i in 0..1000 {
        let v = tube_alpha_bound(1, lo + (hi - lo) * i as f64 / 999.0, &k).unwrap();
        monotone &= v < prev;
        prev = v;
    }
    check(&mut f, monotone, "bound not decreasing on the grid".into());

    let g = tube_alpha_bound(1, 2.0, &TubeConstants::simple(std::f64::consts::PI, 1e4)).unwrap();
    let target = (-2.0f64).exp();
    check(
        &mut f,
        (g / target - 1.0).abs() < 0.01,
        format!("Gaussian limit {g} vs {target}"),
    );
    report(
        8,
        "tube bound",
        &f,
        &format!("c={c:.10} closed form={exact:.10}, limit {g:.5} vs {target:.5}"),
    );
}
