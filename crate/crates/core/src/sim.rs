//! Scenario generation and the simulation experiments: simultaneous interval
//! comparison, power of the max-type test and step-down FWER.

use std::io::Write;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::analytic::bonferroni_cv;
use crate::bootstrap::{beran_critical_values, critical_value_bs, parametric_bootstrap, stepdown_quantile_provider};
use crate::error::{Error, Result};
use crate::estimation::{eblup, FitResult};
use crate::maxstat::{
    build_spi, build_spi_with_scales, covers_all, single_step_test, step_down_test, Method, SimultaneousIntervals,
};
use crate::mc::{build_joint_normal, critical_value_mc};
use crate::model::{
    cluster_mean_spec, eval_mixed_parameters, BlockLmmData, ClusterBlock, MixedParameterSpec, ModelKind,
};
use crate::seeds::{derive_seed, stream_rng};

/// Error variances of the two FHM scenarios, one per fifth of the areas.
pub const FHM_SCENARIO_1: [f64; 5] = [0.7, 0.6, 0.5, 0.4, 0.3];
pub const FHM_SCENARIO_2: [f64; 5] = [2.0, 0.6, 0.5, 0.4, 0.2];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub model: ModelKind,
    pub d: usize,
    /// Units per cluster, NERM only.
    pub n_d: usize,
    pub sigma2_e: f64,
    pub sigma2_u: f64,
    pub fhm_sigma_pattern: [f64; 5],
    pub beta: Vec<f64>,
    pub replicates: usize,
    pub bootstrap: usize,
    pub mc_draws: usize,
    pub alpha: f64,
    pub master_seed: u64,
}

impl ScenarioConfig {
    pub fn nerm(d: usize, sigma2_e: f64, sigma2_u: f64) -> Self {
        Self {
            model: ModelKind::Nerm,
            d,
            n_d: 5,
            sigma2_e,
            sigma2_u,
            fhm_sigma_pattern: FHM_SCENARIO_1,
            beta: vec![1.0, 1.0],
            replicates: 500,
            bootstrap: 500,
            mc_draws: 10_000,
            alpha: 0.05,
            master_seed: 0,
        }
    }

    pub fn fhm(d: usize, pattern: [f64; 5]) -> Self {
        Self {
            model: ModelKind::Fhm,
            n_d: 1,
            sigma2_e: f64::NAN,
            fhm_sigma_pattern: pattern,
            ..Self::nerm(d, 1.0, 1.0)
        }
    }

    pub fn with_sizes(mut self, replicates: usize, bootstrap: usize, mc_draws: usize) -> Self {
        self.replicates = replicates;
        self.bootstrap = bootstrap;
        self.mc_draws = mc_draws;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.master_seed = seed;
        self
    }

    /// Short label used in result tables.
    pub fn label(&self) -> String {
        match self.model {
            ModelKind::Nerm => format!("nerm_D{}_se{}_su{}", self.d, self.sigma2_e, self.sigma2_u),
            ModelKind::Fhm => {
                let p: Vec<String> = self.fhm_sigma_pattern.iter().map(|v| v.to_string()).collect();
                format!("fhm_D{}_{}", self.d, p.join("-"))
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.d == 0 {
            return bad("D must be >= 1");
        }
        if self.beta.is_empty() || self.beta.iter().any(|b| !b.is_finite()) {
            return bad("beta must be a non-empty finite vector");
        }
        if self.replicates == 0 || self.bootstrap == 0 || self.mc_draws == 0 {
            return bad("I, B and K must be >= 1");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::AlphaOutOfRange(self.alpha));
        }
        if !(self.sigma2_u > 0.0) {
            return bad("sigma2_u must be > 0");
        }
        match self.model {
            ModelKind::Nerm => {
                if self.n_d == 0 {
                    return bad("n_d must be >= 1");
                }
                if !(self.sigma2_e > 0.0) {
                    return bad("sigma2_e must be > 0");
                }
                if self.d * self.n_d <= self.beta.len() {
                    return bad("too few units for the number of fixed effects");
                }
            }
            ModelKind::Fhm => {
                if self.d % 5 != 0 {
                    return bad("FHM scenarios need D divisible by 5");
                }
                if self.fhm_sigma_pattern.iter().any(|v| !(*v > 0.0)) {
                    return bad("FHM error variances must be > 0");
                }
                if self.d <= self.beta.len() {
                    return bad("too few areas for the number of fixed effects");
                }
            }
        }
        Ok(())
    }

    fn area_error_var(&self, d: usize) -> f64 {
        self.fhm_sigma_pattern[d * 5 / self.d]
    }
}

/// One simulated data set together with its true mixed parameters.
#[derive(Debug, Clone)]
pub struct ScenarioDraw {
    pub data: BlockLmmData,
    pub spec: MixedParameterSpec,
    pub truth: Vec<f64>,
    pub u: Vec<f64>,
    /// Seed of this replicate; bootstrap and MC seeds derive from it.
    pub seed: u64,
}

fn bootstrap_seed(rep_seed: u64) -> u64 {
    derive_seed(rep_seed, 1)
}

fn mc_seed(rep_seed: u64) -> u64 {
    derive_seed(rep_seed, 2)
}

/// Draws replicate `replicate` of the scenario. Covariates are drawn anew
/// for every replicate.
pub fn generate_scenario(config: &ScenarioConfig, replicate: u64) -> Result<ScenarioDraw> {
    config.validate()?;
    let seed = derive_seed(config.master_seed, replicate);
    let mut rng = stream_rng(seed, 0);
    let p = config.beta.len();
    let beta = DVector::from_column_slice(&config.beta);
    let mut clusters = Vec::with_capacity(config.d);
    let mut u = Vec::with_capacity(config.d);
    for d in 0..config.d {
        let ud = config.sigma2_u.sqrt() * rng.sample::<f64, _>(StandardNormal);
        u.push(ud);
        let (n, sd_e) = match config.model {
            ModelKind::Nerm => (config.n_d, config.sigma2_e.sqrt()),
            ModelKind::Fhm => (1, config.area_error_var(d).sqrt()),
        };
        let x = DMatrix::from_fn(n, p, |_, j| if j == 0 { 1.0 } else { rng.random::<f64>() });
        let y: Vec<f64> = (0..n)
            .map(|i| x.row(i).transpose().dot(&beta) + ud + sd_e * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let block = ClusterBlock::new(format!("{}", d + 1), y, x);
        clusters.push(match config.model {
            ModelKind::Nerm => block,
            ModelKind::Fhm => block.with_error_var(config.area_error_var(d)),
        });
    }
    let data = BlockLmmData::new(config.model, clusters)?;
    let spec = cluster_mean_spec(&data);
    let truth = eval_mixed_parameters(&data, &spec, &beta, &u)?;
    Ok(ScenarioDraw {
        data,
        spec,
        truth,
        u,
        seed,
    })
}

/// One row of a result table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub method: Method,
    pub criterion: String,
    pub value: f64,
    /// `1.96` binomial or normal Monte Carlo half-width, when meaningful.
    pub mc_halfwidth: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateFailure {
    pub replicate: u64,
    pub error: String,
}

/// Intervals of one replicate, kept for audit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateIntervals {
    pub replicate: u64,
    pub truth: Vec<f64>,
    pub spis: Vec<SimultaneousIntervals>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub experiment: String,
    pub scenario: String,
    pub config: ScenarioConfig,
    pub rows: Vec<ResultRow>,
    pub completed_replicates: usize,
    pub failures: Vec<ReplicateFailure>,
    pub bootstrap_refit_failures: usize,
    pub runtime_secs: f64,
    #[serde(skip)]
    pub intervals: Vec<ReplicateIntervals>,
}

impl ExperimentResult {
    pub fn value(&self, method: Method, criterion: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.criterion == criterion)
            .map(|r| r.value)
    }

    /// `scenario,method,criterion,value,mc_halfwidth`, six significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W, header: bool) -> std::io::Result<()> {
        if header {
            writeln!(out, "scenario,method,criterion,value,mc_halfwidth")?;
        }
        for r in &self.rows {
            let hw = r.mc_halfwidth.map(sig6).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{}",
                self.scenario,
                r.method.as_str(),
                r.criterion,
                sig6(r.value),
                hw
            )?;
        }
        Ok(())
    }

    /// `delta,method,power,mc_halfwidth` rows of a power experiment.
    pub fn write_power_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "delta,method,power,mc_halfwidth")?;
        for r in &self.rows {
            if let Some(delta) = r.criterion.strip_prefix("power@") {
                let hw = r.mc_halfwidth.map(sig6).unwrap_or_default();
                writeln!(out, "{},{},{},{}", delta, r.method.as_str(), sig6(r.value), hw)?;
            }
        }
        Ok(())
    }
}

/// Formats with six significant digits.
pub fn sig6(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let mag = v.abs().log10().floor() as i32;
    if (-5..6).contains(&mag) {
        let decimals = (5 - mag).max(0) as usize;
        let s = format!("{v:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{v:.5e}")
    }
}

fn binomial_halfwidth(p: f64, n: usize) -> f64 {
    1.96 * (p * (1.0 - p) / n as f64).sqrt()
}

/// Per-method aggregates from coverage indicators and per-cluster widths
/// (`widths[k][d]` for replicate `k`).
#[derive(Debug, Clone, PartialEq)]
pub struct SpiSummary {
    pub ecp: f64,
    pub ws: f64,
    pub vs: f64,
    pub ws_mc_halfwidth: f64,
}

pub fn summarize_spi(covered: &[bool], widths: &[Vec<f64>]) -> Result<SpiSummary> {
    let i = covered.len();
    if i == 0 || widths.len() != i {
        return Err(Error::ShapeMismatch("coverage and width records disagree".into()));
    }
    let d = widths[0].len();
    if d == 0 || widths.iter().any(|w| w.len() != d) {
        return Err(Error::ShapeMismatch("ragged width records".into()));
    }
    let ecp = covered.iter().filter(|&&c| c).count() as f64 / i as f64;
    let mut ws = 0.0;
    let mut vs = 0.0;
    for col in 0..d {
        let mean = widths.iter().map(|w| w[col]).sum::<f64>() / i as f64;
        ws += mean;
        if i > 1 {
            vs += widths.iter().map(|w| (w[col] - mean).powi(2)).sum::<f64>() / (i - 1) as f64;
        }
    }
    ws /= d as f64;
    vs /= d as f64;
    let rep_means: Vec<f64> = widths.iter().map(|w| w.iter().sum::<f64>() / d as f64).collect();
    let ws_mc_halfwidth = if i > 1 {
        let var = rep_means.iter().map(|m| (m - ws).powi(2)).sum::<f64>() / (i - 1) as f64;
        1.96 * (var / i as f64).sqrt()
    } else {
        0.0
    };
    Ok(SpiSummary {
        ecp,
        ws,
        vs,
        ws_mc_halfwidth,
    })
}

struct Fitted {
    draw: ScenarioDraw,
    fit: FitResult,
}

fn fit_replicate(config: &ScenarioConfig, rep: u64) -> Result<Fitted> {
    let draw = generate_scenario(config, rep)?;
    let fit = eblup(&draw.data, &draw.spec)?;
    Ok(Fitted { draw, fit })
}

fn mc_intervals(f: &Fitted, config: &ScenarioConfig) -> Result<SimultaneousIntervals> {
    let joint = build_joint_normal(&f.draw.data, &f.fit.theta)?;
    let cv = critical_value_mc(
        &joint,
        &f.draw.spec,
        config.mc_draws,
        config.alpha,
        mc_seed(f.draw.seed),
    )?;
    let sd = joint.implied_sd(&joint.selectors(&f.draw.spec)?);
    build_spi_with_scales(&f.fit.mu_hat, &sd, &cv)
}

struct SpiOutcome {
    replicate: u64,
    truth: Vec<f64>,
    spis: Vec<SimultaneousIntervals>,
    covered: Vec<bool>,
    refit_failures: usize,
}

fn spi_replicate(config: &ScenarioConfig, methods: &[Method], rep: u64) -> Result<SpiOutcome> {
    let f = fit_replicate(config, rep)?;
    let needs_boot = methods.iter().any(|m| matches!(m, Method::Bs | Method::Be));
    let draws = if needs_boot {
        Some(parametric_bootstrap(
            &f.draw.data,
            &f.draw.spec,
            &f.fit,
            config.bootstrap,
            bootstrap_seed(f.draw.seed),
        )?)
    } else {
        None
    };
    let mut spis = Vec::with_capacity(methods.len());
    for m in methods {
        let spi = match m {
            Method::Bs => build_spi(&f.fit, &critical_value_bs(draws.as_ref().unwrap(), config.alpha)?)?,
            Method::Be => build_spi(&f.fit, &beran_critical_values(draws.as_ref().unwrap(), config.alpha)?)?,
            Method::Bo => build_spi(&f.fit, &bonferroni_cv(config.d, config.alpha)?)?,
            Method::Mc => mc_intervals(&f, config)?,
            Method::Vt => {
                return Err(Error::InvalidConfig(
                    "the interval experiment supports bs, mc, bo and be".into(),
                ))
            }
        };
        spis.push(spi);
    }
    let covered = spis
        .iter()
        .map(|s| covers_all(s, &f.draw.truth))
        .collect::<Result<Vec<_>>>()?;
    Ok(SpiOutcome {
        replicate: rep,
        truth: f.draw.truth,
        spis,
        covered,
        refit_failures: draws.map(|d| d.refit_failures).unwrap_or(0),
    })
}

fn split_outcomes<T>(results: Vec<(u64, Result<T>)>) -> (Vec<T>, Vec<ReplicateFailure>) {
    let mut ok = Vec::new();
    let mut failures = Vec::new();
    for (replicate, r) in results {
        match r {
            Ok(v) => ok.push(v),
            Err(e) => failures.push(ReplicateFailure {
                replicate,
                error: e.to_string(),
            }),
        }
    }
    (ok, failures)
}

fn run_replicates<T: Send>(config: &ScenarioConfig, f: impl Fn(u64) -> Result<T> + Sync) -> Vec<(u64, Result<T>)> {
    (0..config.replicates as u64)
        .into_par_iter()
        .map(|rep| (rep, f(rep)))
        .collect()
}

/// Coverage, average width and width variance of each interval method.
pub fn run_spi_experiment(config: &ScenarioConfig, methods: &[Method]) -> Result<ExperimentResult> {
    config.validate()?;
    if methods.is_empty() {
        return Err(Error::InvalidConfig("no methods selected".into()));
    }
    if methods.contains(&Method::Vt) {
        return Err(Error::InvalidConfig(
            "the interval experiment supports bs, mc, bo and be".into(),
        ));
    }
    let start = Instant::now();
    let (outcomes, failures) = split_outcomes(run_replicates(config, |rep| spi_replicate(config, methods, rep)));
    if outcomes.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "every replicate failed; first error: {}",
            failures.first().map(|f| f.error.as_str()).unwrap_or("none")
        )));
    }
    let n = outcomes.len();
    let mut rows = Vec::new();
    for (mi, &m) in methods.iter().enumerate() {
        let covered: Vec<bool> = outcomes.iter().map(|o| o.covered[mi]).collect();
        let widths: Vec<Vec<f64>> = outcomes.iter().map(|o| o.spis[mi].widths().collect()).collect();
        let s = summarize_spi(&covered, &widths)?;
        rows.push(ResultRow {
            method: m,
            criterion: "ECP".into(),
            value: s.ecp,
            mc_halfwidth: Some(binomial_halfwidth(s.ecp, n)),
        });
        rows.push(ResultRow {
            method: m,
            criterion: "WS".into(),
            value: s.ws,
            mc_halfwidth: Some(s.ws_mc_halfwidth),
        });
        rows.push(ResultRow {
            method: m,
            criterion: "VS".into(),
            value: s.vs,
            mc_halfwidth: None,
        });
    }
    Ok(ExperimentResult {
        experiment: "spi".into(),
        scenario: config.label(),
        config: config.clone(),
        rows,
        completed_replicates: n,
        failures,
        bootstrap_refit_failures: outcomes.iter().map(|o| o.refit_failures).sum(),
        runtime_secs: start.elapsed().as_secs_f64(),
        intervals: outcomes
            .into_iter()
            .map(|o| ReplicateIntervals {
                replicate: o.replicate,
                truth: o.truth,
                spis: o.spis,
            })
            .collect(),
    })
}

struct PowerOutcome {
    /// `reject[method][delta]`.
    reject: Vec<Vec<bool>>,
    refit_failures: usize,
}

fn power_replicate(config: &ScenarioConfig, methods: &[Method], deltas: &[f64], rep: u64) -> Result<PowerOutcome> {
    let f = fit_replicate(config, rep)?;
    let mut reject = Vec::with_capacity(methods.len());
    let mut refit_failures = 0;
    for m in methods {
        let (cv, scales) = match m {
            Method::Bs => {
                let draws = parametric_bootstrap(
                    &f.draw.data,
                    &f.draw.spec,
                    &f.fit,
                    config.bootstrap,
                    bootstrap_seed(f.draw.seed),
                )?;
                refit_failures += draws.refit_failures;
                (critical_value_bs(&draws, config.alpha)?, f.fit.scale.clone())
            }
            Method::Mc => {
                let joint = build_joint_normal(&f.draw.data, &f.fit.theta)?;
                let cv = critical_value_mc(
                    &joint,
                    &f.draw.spec,
                    config.mc_draws,
                    config.alpha,
                    mc_seed(f.draw.seed),
                )?;
                (cv, joint.implied_sd(&joint.selectors(&f.draw.spec)?))
            }
            _ => return Err(Error::InvalidConfig("the power experiment supports bs and mc".into())),
        };
        let row = deltas
            .iter()
            .map(|delta| {
                let h: Vec<f64> = f.draw.truth.iter().map(|mu| mu + delta).collect();
                Ok(single_step_test(&f.fit.mu_hat, &scales, &h, &cv)?.reject)
            })
            .collect::<Result<Vec<_>>>()?;
        reject.push(row);
    }
    Ok(PowerOutcome { reject, refit_failures })
}

/// Rejection rate of `H0: mu = h` with `h = mu + delta` for each `delta`.
pub fn run_power_experiment(config: &ScenarioConfig, methods: &[Method], deltas: &[f64]) -> Result<ExperimentResult> {
    config.validate()?;
    if deltas.is_empty() || deltas.iter().any(|d| !d.is_finite()) {
        return Err(Error::InvalidConfig("delta grid must be non-empty and finite".into()));
    }
    if methods.is_empty() || methods.iter().any(|m| !matches!(m, Method::Bs | Method::Mc)) {
        return Err(Error::InvalidConfig("the power experiment supports bs and mc".into()));
    }
    let start = Instant::now();
    let (outcomes, failures) = split_outcomes(run_replicates(config, |rep| {
        power_replicate(config, methods, deltas, rep)
    }));
    if outcomes.is_empty() {
        return Err(Error::InvalidConfig("every replicate failed".into()));
    }
    let n = outcomes.len();
    let mut rows = Vec::new();
    for (mi, &m) in methods.iter().enumerate() {
        for (di, delta) in deltas.iter().enumerate() {
            let power = outcomes.iter().filter(|o| o.reject[mi][di]).count() as f64 / n as f64;
            rows.push(ResultRow {
                method: m,
                criterion: format!("power@{delta}"),
                value: power,
                mc_halfwidth: Some(binomial_halfwidth(power, n)),
            });
        }
    }
    Ok(ExperimentResult {
        experiment: "power".into(),
        scenario: config.label(),
        config: config.clone(),
        rows,
        completed_replicates: n,
        failures,
        bootstrap_refit_failures: outcomes.iter().map(|o| o.refit_failures).sum(),
        runtime_secs: start.elapsed().as_secs_f64(),
        intervals: Vec::new(),
    })
}

struct FwerOutcome {
    bs_false: bool,
    bo_false: bool,
    bs_true_rejections: usize,
    refit_failures: usize,
}

fn fwer_replicate(config: &ScenarioConfig, shift: f64, rep: u64) -> Result<FwerOutcome> {
    let f = fit_replicate(config, rep)?;
    let n_alt = config.d / 5;
    let h: Vec<f64> = f
        .draw
        .truth
        .iter()
        .enumerate()
        .map(|(d, mu)| if d < n_alt { mu - shift } else { *mu })
        .collect();
    let t: Vec<f64> = f
        .fit
        .mu_hat
        .iter()
        .zip(&h)
        .zip(&f.fit.scale)
        .map(|((m, h), s)| (m - h) / s.max(crate::maxstat::SCALE_FLOOR))
        .collect();
    let draws = parametric_bootstrap(
        &f.draw.data,
        &f.draw.spec,
        &f.fit,
        config.bootstrap,
        bootstrap_seed(f.draw.seed),
    )?;
    let provider = stepdown_quantile_provider(&draws, config.alpha)?;
    let sd = step_down_test(&t, |s| provider.quantile(s), config.alpha)?;
    let bo = single_step_test(&f.fit.mu_hat, &f.fit.scale, &h, &bonferroni_cv(config.d, config.alpha)?)?;
    Ok(FwerOutcome {
        bs_false: sd.rejected.iter().any(|&d| d >= n_alt),
        bo_false: bo.decisions.iter().skip(n_alt).any(|&r| r),
        bs_true_rejections: sd.rejected.iter().filter(|&&d| d < n_alt).count(),
        refit_failures: draws.refit_failures,
    })
}

/// Family-wise error rate of the bootstrap step-down test and of the
/// Bonferroni single-step test when `mu_d = h_d + shift` for the first
/// `D / 5` clusters and every other null is true.
pub fn run_fwer_experiment(config: &ScenarioConfig, shift: f64) -> Result<ExperimentResult> {
    config.validate()?;
    if config.d % 5 != 0 {
        return Err(Error::InvalidConfig(
            "the FWER experiment needs D divisible by 5".into(),
        ));
    }
    let start = Instant::now();
    let (outcomes, failures) = split_outcomes(run_replicates(config, |rep| fwer_replicate(config, shift, rep)));
    if outcomes.is_empty() {
        return Err(Error::InvalidConfig("every replicate failed".into()));
    }
    let n = outcomes.len();
    let rate = |f: &dyn Fn(&FwerOutcome) -> bool| outcomes.iter().filter(|o| f(o)).count() as f64 / n as f64;
    let fwer_bs = rate(&|o| o.bs_false);
    let fwer_bo = rate(&|o| o.bo_false);
    let n_alt = (config.d / 5).max(1);
    let alt_rate = outcomes.iter().map(|o| o.bs_true_rejections).sum::<usize>() as f64 / (n * n_alt) as f64;
    let rows = vec![
        ResultRow {
            method: Method::Bs,
            criterion: "FWER".into(),
            value: fwer_bs,
            mc_halfwidth: Some(binomial_halfwidth(fwer_bs, n)),
        },
        ResultRow {
            method: Method::Bo,
            criterion: "FWER".into(),
            value: fwer_bo,
            mc_halfwidth: Some(binomial_halfwidth(fwer_bo, n)),
        },
        ResultRow {
            method: Method::Bs,
            criterion: "alt_rejection_rate".into(),
            value: alt_rate,
            mc_halfwidth: None,
        },
    ];
    Ok(ExperimentResult {
        experiment: "fwer".into(),
        scenario: config.label(),
        config: config.clone(),
        rows,
        completed_replicates: n,
        failures,
        bootstrap_refit_failures: outcomes.iter().map(|o| o.refit_failures).sum(),
        runtime_secs: start.elapsed().as_secs_f64(),
        intervals: Vec::new(),
    })
}
