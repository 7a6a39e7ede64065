//! Command-line front end for `maxspi`.

pub mod error;
pub mod io;
pub mod transform;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use maxspi::analytic::{bonferroni_cv, ridge_weights, tube_cv, TubeConstants};
use maxspi::bootstrap::{
    beran_critical_values, critical_value_bs, critical_value_contrast, parametric_bootstrap, stepdown_contrast_provider,
};
use maxspi::estimation::{cholesky_residuals, eb_random_effects, eblup};
use maxspi::maxstat::{build_spi, build_spi_with_scales, contrast_estimates, single_step_test, step_down_test};
use maxspi::mc::{build_joint_normal, critical_value_mc, critical_value_mc_contrast};
use maxspi::model::cluster_mean_spec;
use maxspi::sim::{
    run_fwer_experiment, run_power_experiment, run_spi_experiment, ExperimentResult, ScenarioConfig, FHM_SCENARIO_1,
    FHM_SCENARIO_2,
};
use maxspi::{BlockLmmData, FitResult, Method, ModelKind};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use serde_json::json;

pub use error::CliError;
pub use io::{ingest_area_csv, ingest_unit_csv};
pub use transform::log_shift_transform;

#[derive(Parser, Debug)]
#[command(
    name = "maxspi",
    version,
    about = "Simultaneous prediction intervals and max-type tests for mixed models"
)]
pub struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Print errors as JSON on stderr.
    #[arg(long, global = true)]
    pub error_json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// REML fit and EBLUPs of the cluster means.
    Fit(FitArgs),
    /// Simultaneous prediction intervals.
    Spi(SpiArgs),
    /// Max-type test of A mu = h.
    Test(TestArgs),
    /// Simulation experiments.
    Simulate(SimArgs),
    /// Log-shift transformation of the response.
    Transform(TransformArgs),
    /// Standardized residuals.
    Residuals(ResidualArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
pub enum ModelArg {
    Nerm,
    Fhm,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
pub enum MethodArg {
    Bs,
    Mc,
    Bo,
    Be,
    Vt,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Bs => Method::Bs,
            MethodArg::Mc => Method::Mc,
            MethodArg::Bo => Method::Bo,
            MethodArg::Be => Method::Be,
            MethodArg::Vt => Method::Vt,
        }
    }
}

#[derive(Args, Debug)]
pub struct DataArgs {
    #[arg(long, value_enum, default_value = "nerm")]
    pub model: ModelArg,
    /// Unit CSV (`cluster,y,x1..`) or area CSV (`area,y,x1..,error_var`).
    #[arg(long)]
    pub data: PathBuf,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SpiArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value = "bs")]
    pub method: MethodArg,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long = "B", default_value_t = 1000)]
    pub b: usize,
    #[arg(long = "K", default_value_t = 100_000)]
    pub k: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// key=value file with kappa0, zeta0, kappa2, zeta1, m0, euler, xi0, eta0, nu.
    #[arg(long)]
    pub tube_constants: Option<PathBuf>,
    /// Dimension of the tube index set; defaults to the number of covariates.
    #[arg(long)]
    pub tube_dim: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TestArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Headerless CSV with one contrast per row.
    #[arg(long)]
    pub contrasts: Option<PathBuf>,
    /// Headerless CSV with the hypothesized values.
    #[arg(long)]
    pub h: PathBuf,
    #[arg(long, value_enum, default_value = "bs")]
    pub method: MethodArg,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long = "B", default_value_t = 1000)]
    pub b: usize,
    #[arg(long = "K", default_value_t = 100_000)]
    pub k: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Step-down procedure on shared bootstrap draws.
    #[arg(long)]
    pub stepdown: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
pub enum Experiment {
    Spi,
    Power,
    Fwer,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
pub enum Preset {
    /// Interval comparison under NERM, all four methods.
    Table1Row,
    /// Interval comparison under FHM, all four methods.
    Table2Row,
    /// Power curve of BS and MC under NERM.
    Power,
    /// Step-down FWER under NERM.
    Fwer,
}

#[derive(Args, Debug)]
pub struct SimArgs {
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    #[arg(long, value_enum)]
    pub experiment: Option<Experiment>,
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    #[arg(long = "D", default_value_t = 30)]
    pub d: usize,
    #[arg(long, default_value_t = 5)]
    pub n_d: usize,
    #[arg(long = "sigma-e2", default_value_t = 0.5)]
    pub sigma_e2: f64,
    #[arg(long = "sigma-u2", default_value_t = 1.0)]
    pub sigma_u2: f64,
    /// FHM error-variance scenario (1 or 2).
    #[arg(long, default_value_t = 1)]
    pub scenario: u8,
    #[arg(long = "I", default_value_t = 500)]
    pub i: usize,
    #[arg(long = "B", default_value_t = 500)]
    pub b: usize,
    #[arg(long = "K", default_value_t = 10_000)]
    pub k: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Comma-separated methods.
    #[arg(long, value_delimiter = ',', value_enum)]
    pub methods: Option<Vec<MethodArg>>,
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        default_value = "-2,-1.5,-1,-0.5,0,0.5,1,1.5,2"
    )]
    pub deltas: Vec<f64>,
    /// Shift of the false nulls in the FWER experiment.
    #[arg(long, default_value_t = 1.0)]
    pub shift: f64,
    /// Result CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Result JSON with metadata.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Long-format power CSV (`delta,method,power,mc_halfwidth`).
    #[arg(long)]
    pub power_csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TransformArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Comma-separated shifts; defaults to an equally spaced grid over the range of y.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = 50)]
    pub grid_size: usize,
    /// Transformed unit CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
pub enum ResidualKind {
    Cholesky,
    Eb,
}

#[derive(Args, Debug)]
pub struct ResidualArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value = "cholesky")]
    pub kind: ResidualKind,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Files and standard output produced by a command. Nothing is written
/// until the whole command has succeeded.
#[derive(Debug, Default)]
pub struct Output {
    pub stdout: String,
    pub files: Vec<(PathBuf, String)>,
}

impl Output {
    fn emit(&mut self, path: Option<&PathBuf>, text: String) {
        match path {
            Some(p) => self.files.push((p.clone(), text)),
            None => self.stdout.push_str(&text),
        }
    }

    pub fn commit(&self) -> Result<(), CliError> {
        for (path, text) in &self.files {
            std::fs::write(path, text).map_err(|e| CliError::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
        }
        print!("{}", self.stdout);
        Ok(())
    }
}

fn load(args: &DataArgs) -> Result<BlockLmmData, CliError> {
    match args.model {
        ModelArg::Nerm => ingest_unit_csv(&args.data),
        ModelArg::Fhm => ingest_area_csv(&args.data),
    }
}

fn json_string<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn cmd_fit(a: &FitArgs) -> Result<Output, CliError> {
    let data = load(&a.data)?;
    let fit = eblup(&data, &cluster_mean_spec(&data))?;
    let ids: Vec<&str> = data.clusters().iter().map(|c| c.id.as_str()).collect();
    let body = json!({
        "model": data.model().as_str(),
        "clusters": ids,
        "beta_hat": fit.beta_hat,
        "sigma2_e": fit.theta.sigma2_e(),
        "sigma2_u": fit.theta.sigma2_u(),
        "u_hat": fit.u_hat,
        "mu_hat": fit.mu_hat,
        "g1": fit.g1,
        "loglik_restricted": fit.loglik_restricted,
    });
    let mut out = Output::default();
    out.emit(a.out.as_ref(), json_string(&body));
    Ok(out)
}

/// Parses a flat `key = value` file; `#` starts a comment.
pub fn parse_tube_constants(text: &str) -> Result<TubeConstants, CliError> {
    let mut k = TubeConstants::simple(f64::NAN, f64::NAN);
    let mut seen = std::collections::HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| CliError::Parse {
            row: i + 1,
            column: String::new(),
            message: "expected key=value".into(),
        })?;
        let key = key.trim();
        let v: f64 = value.trim().parse().map_err(|_| CliError::Parse {
            row: i + 1,
            column: key.to_string(),
            message: format!("`{}` is not a number", value.trim()),
        })?;
        let slot = match key {
            "kappa0" => &mut k.kappa0,
            "zeta0" => &mut k.zeta0,
            "kappa2" => &mut k.kappa2,
            "zeta1" => &mut k.zeta1,
            "m0" => &mut k.m0,
            "euler" => &mut k.euler,
            "xi0" => &mut k.xi0,
            "eta0" => &mut k.eta0,
            "nu" => &mut k.nu,
            _ => {
                return Err(CliError::Parse {
                    row: i + 1,
                    column: key.to_string(),
                    message: "unknown key".into(),
                })
            }
        };
        *slot = v;
        seen.insert(key.to_string());
    }
    for required in ["kappa0", "nu"] {
        if !seen.contains(required) {
            return Err(CliError::Usage(format!("tube constants file lacks `{required}`")));
        }
    }
    k.validate()?;
    Ok(k)
}

#[derive(Serialize)]
struct IntervalRow<'a> {
    cluster: &'a str,
    center: f64,
    lower: f64,
    upper: f64,
}

fn cmd_spi(a: &SpiArgs) -> Result<Output, CliError> {
    if a.method == MethodArg::Vt && a.tube_constants.is_none() {
        return Err(CliError::Usage("--method vt requires --tube-constants".into()));
    }
    let tube = match &a.tube_constants {
        Some(path) if a.method == MethodArg::Vt => Some(parse_tube_constants(&read_text(path)?)?),
        _ => None,
    };
    let data = load(&a.data)?;
    let spec = cluster_mean_spec(&data);
    let fit = eblup(&data, &spec)?;
    let spis = match a.method {
        MethodArg::Bs | MethodArg::Be => {
            let draws = parametric_bootstrap(&data, &spec, &fit, a.b, a.seed)?;
            let cv = if a.method == MethodArg::Bs {
                critical_value_bs(&draws, a.alpha)?
            } else {
                beran_critical_values(&draws, a.alpha)?
            };
            build_spi(&fit, &cv)?
        }
        MethodArg::Bo => build_spi(&fit, &bonferroni_cv(data.n_clusters(), a.alpha)?)?,
        MethodArg::Mc => {
            let joint = build_joint_normal(&data, &fit.theta)?;
            let cv = critical_value_mc(&joint, &spec, a.k, a.alpha, a.seed)?;
            let sd = joint.implied_sd(&joint.selectors(&spec)?);
            build_spi_with_scales(&fit.mu_hat, &sd, &cv)?
        }
        MethodArg::Vt => {
            let k = tube.expect("checked above");
            let p = a.tube_dim.unwrap_or(data.p().max(1));
            let cv = tube_cv(p, a.alpha, &k)?;
            let joint = build_joint_normal(&data, &fit.theta)?;
            let sel = joint.selectors(&spec)?;
            let scales = (0..sel.nrows())
                .map(|d| {
                    let c = DVector::from_iterator(sel.ncols(), sel.row(d).iter().copied());
                    Ok(ridge_weights(&data, &fit.theta, &c)?.half_width(1.0))
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            build_spi_with_scales(&fit.mu_hat, &scales, &cv)?
        }
    };
    let rows: Vec<IntervalRow> = data
        .clusters()
        .iter()
        .zip(&spis.intervals)
        .map(|(c, i)| IntervalRow {
            cluster: &c.id,
            center: i.center,
            lower: i.lower,
            upper: i.upper,
        })
        .collect();
    let uses_b = matches!(a.method, MethodArg::Bs | MethodArg::Be);
    let body = json!({
        "method": spis.critical.method.as_str(),
        "alpha": a.alpha,
        "critical_value": spis.critical.value,
        "per_cluster_critical_values": spis.critical.per_cluster,
        "seed": a.seed,
        "B": if uses_b { Some(a.b) } else { None },
        "K": if a.method == MethodArg::Mc { Some(a.k) } else { None },
        "intervals": rows,
    });
    let mut out = Output::default();
    out.emit(a.out.as_ref(), json_string(&body));
    Ok(out)
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn contrast_matrix(a: &TestArgs, d: usize) -> Result<DMatrix<f64>, CliError> {
    match &a.contrasts {
        None => Ok(DMatrix::identity(d, d)),
        Some(path) => {
            let rows = io::read_numeric_rows(path)?;
            if rows.iter().any(|r| r.len() != d) {
                return Err(CliError::Usage(format!("every contrast row needs {d} entries")));
            }
            Ok(DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]))
        }
    }
}

fn cmd_test(a: &TestArgs) -> Result<Output, CliError> {
    if a.stepdown && a.method != MethodArg::Bs {
        return Err(CliError::Usage("--stepdown needs --method bs".into()));
    }
    if matches!(a.method, MethodArg::Be | MethodArg::Vt) {
        return Err(CliError::Usage("tests support --method bs, mc or bo".into()));
    }
    let data = load(&a.data)?;
    let amat = contrast_matrix(a, data.n_clusters())?;
    let h: Vec<f64> = io::read_numeric_rows(&a.h)?.into_iter().flatten().collect();
    if h.len() != amat.nrows() {
        return Err(CliError::Usage(format!(
            "h has {} values for {} contrasts",
            h.len(),
            amat.nrows()
        )));
    }
    let spec = cluster_mean_spec(&data);
    let fit: FitResult = eblup(&data, &spec)?;
    let (est, se) = contrast_estimates(&amat, &fit.mu_hat, &fit.g1)?;
    let mut stepdown = None;
    let test = match a.method {
        MethodArg::Bs => {
            let draws = parametric_bootstrap(&data, &spec, &fit, a.b, a.seed)?;
            let cv = critical_value_contrast(&draws, &amat, a.alpha)?;
            let test = single_step_test(&est, &se, &h, &cv)?;
            if a.stepdown {
                let provider = stepdown_contrast_provider(&draws, &amat, a.alpha)?;
                stepdown = Some(step_down_test(&test.t_values, |s| provider.quantile(s), a.alpha)?);
            }
            test
        }
        MethodArg::Mc => {
            let joint = build_joint_normal(&data, &fit.theta)?;
            let cv = critical_value_mc_contrast(&joint, &spec, &amat, a.k, a.alpha, a.seed)?;
            let sd = joint.implied_sd(&(&amat * joint.selectors(&spec)?));
            single_step_test(&est, &sd, &h, &cv)?
        }
        _ => single_step_test(&est, &se, &h, &bonferroni_cv(amat.nrows(), a.alpha)?)?,
    };
    let body = json!({
        "method": test.critical.method.as_str(),
        "alpha": a.alpha,
        "seed": a.seed,
        "statistic": test.statistic,
        "critical_value": test.critical.value,
        "reject": test.reject,
        "t_values": test.t_values,
        "decisions": test.decisions,
        "stepdown": stepdown,
    });
    let mut out = Output::default();
    out.emit(a.out.as_ref(), json_string(&body));
    Ok(out)
}

fn sim_config(a: &SimArgs, model: ModelKind) -> Result<ScenarioConfig, CliError> {
    let base = match model {
        ModelKind::Nerm => {
            let mut c = ScenarioConfig::nerm(a.d, a.sigma_e2, a.sigma_u2);
            c.n_d = a.n_d;
            c
        }
        ModelKind::Fhm => {
            let pattern = match a.scenario {
                1 => FHM_SCENARIO_1,
                2 => FHM_SCENARIO_2,
                s => return Err(CliError::Usage(format!("unknown FHM scenario {s}"))),
            };
            let mut c = ScenarioConfig::fhm(a.d, pattern);
            c.sigma2_u = a.sigma_u2;
            c
        }
    };
    let mut cfg = base.with_sizes(a.i, a.b, a.k).with_seed(a.seed);
    cfg.alpha = a.alpha;
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

fn cmd_simulate(a: &SimArgs) -> Result<Output, CliError> {
    let (experiment, model, default_methods) = match a.preset {
        Some(Preset::Table1Row) => (
            Experiment::Spi,
            ModelArg::Nerm,
            vec![Method::Bs, Method::Mc, Method::Bo, Method::Be],
        ),
        Some(Preset::Table2Row) => (
            Experiment::Spi,
            ModelArg::Fhm,
            vec![Method::Bs, Method::Mc, Method::Bo, Method::Be],
        ),
        Some(Preset::Power) => (Experiment::Power, ModelArg::Nerm, vec![Method::Bs, Method::Mc]),
        Some(Preset::Fwer) => (Experiment::Fwer, ModelArg::Nerm, vec![Method::Bs, Method::Bo]),
        None => {
            let e = a
                .experiment
                .ok_or_else(|| CliError::Usage("give --preset or --experiment".into()))?;
            let m = match e {
                Experiment::Spi => vec![Method::Bs, Method::Mc, Method::Bo, Method::Be],
                Experiment::Power => vec![Method::Bs, Method::Mc],
                Experiment::Fwer => vec![Method::Bs, Method::Bo],
            };
            (e, a.model.unwrap_or(ModelArg::Nerm), m)
        }
    };
    let experiment = a.experiment.unwrap_or(experiment);
    let model = match a.model.unwrap_or(model) {
        ModelArg::Nerm => ModelKind::Nerm,
        ModelArg::Fhm => ModelKind::Fhm,
    };
    let methods: Vec<Method> = a
        .methods
        .as_ref()
        .map(|m| m.iter().map(|&x| x.into()).collect())
        .unwrap_or(default_methods);
    let cfg = sim_config(a, model)?;
    let result: ExperimentResult = match experiment {
        Experiment::Spi => {
            if methods.contains(&Method::Vt) {
                return Err(CliError::Usage(
                    "the interval experiment supports bs, mc, bo and be".into(),
                ));
            }
            run_spi_experiment(&cfg, &methods)?
        }
        Experiment::Power => {
            if methods.iter().any(|m| !matches!(m, Method::Bs | Method::Mc)) {
                return Err(CliError::Usage("the power experiment supports bs and mc".into()));
            }
            run_power_experiment(&cfg, &methods, &a.deltas)?
        }
        Experiment::Fwer => run_fwer_experiment(&cfg, a.shift)?,
    };
    let mut out = Output::default();
    let mut csv = Vec::new();
    result.write_csv(&mut csv, true).expect("writing to memory");
    out.emit(a.out.as_ref(), String::from_utf8(csv).expect("utf8"));
    if let Some(p) = &a.json {
        out.files.push((p.clone(), json_string(&result)));
    }
    if let Some(p) = &a.power_csv {
        let mut buf = Vec::new();
        result.write_power_csv(&mut buf).expect("writing to memory");
        out.files.push((p.clone(), String::from_utf8(buf).expect("utf8")));
    }
    Ok(out)
}

fn cmd_transform(a: &TransformArgs) -> Result<Output, CliError> {
    let data = ingest_unit_csv(&a.data)?;
    let grid = match &a.grid {
        Some(g) => g.clone(),
        None => transform::range_grid(&data, a.grid_size),
    };
    let t = log_shift_transform(&data, &grid)?;
    let mut out = Output::default();
    out.stdout.push_str(&json_string(&t));
    if let Some(p) = &a.out {
        let mut buf = Vec::new();
        io::write_data_csv(&data, Some(&t.y_log), &mut buf)?;
        out.files.push((p.clone(), String::from_utf8(buf).expect("utf8")));
    }
    Ok(out)
}

fn cmd_residuals(a: &ResidualArgs) -> Result<Output, CliError> {
    let data = load(&a.data)?;
    let fit = eblup(&data, &cluster_mean_spec(&data))?;
    let mut text = String::new();
    match a.kind {
        ResidualKind::Cholesky => {
            let r = cholesky_residuals(&data, &fit)?;
            text.push_str("cluster,residual\n");
            let mut i = 0;
            for c in data.clusters() {
                for _ in 0..c.n() {
                    text.push_str(&format!("{},{}\n", c.id, r[i]));
                    i += 1;
                }
            }
        }
        ResidualKind::Eb => {
            let r = eb_random_effects(&data, &fit)?;
            text.push_str("cluster,eb_effect\n");
            for (c, v) in data.clusters().iter().zip(&r) {
                text.push_str(&format!("{},{}\n", c.id, v));
            }
        }
    }
    let mut out = Output::default();
    out.emit(a.out.as_ref(), text);
    Ok(out)
}

/// Runs a parsed command and returns its outputs without writing them.
pub fn execute(cli: &Cli) -> Result<Output, CliError> {
    let run = || match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Spi(a) => cmd_spi(a),
        Command::Test(a) => cmd_test(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Transform(a) => cmd_transform(a),
        Command::Residuals(a) => cmd_residuals(a),
    };
    match cli.threads {
        Some(0) => Err(CliError::Usage("--threads must be >= 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Usage(e.to_string()))?
            .install(run),
        None => run(),
    }
}

/// Parses `argv`, runs the command, writes its outputs and returns the
/// process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli).and_then(|o| o.commit()) {
        Ok(()) => 0,
        Err(e) => {
            if cli.error_json {
                eprintln!("{}", e.to_json());
            } else {
                eprintln!("error: {e}");
            }
            e.exit_code()
        }
    }
}
