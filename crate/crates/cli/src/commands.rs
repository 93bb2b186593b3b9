use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::{json, Value};

use mdingarch::diagnostics::{gof, GofOptions, P1Variance, WeightDist};
use mdingarch::estimate::{estimate_dispersion, fit, FitOptions, FitReport};
use mdingarch::evaluate::{pit_histogram, sign_forecast_eval, SignEvalOptions};
use mdingarch::model::{
    parameter_names, simulate, DgpSpec, Family, InitPolicy, Linkage, ModelOrder, SeriesZ, SignSpec, Theta,
};
use mdingarch::rng;
use mdingarch::stationarity::{check_conditions, closed_form_rho, stationary_mean, SignMode, Stationarity};

use crate::error::CliError;
use crate::{acceptance, csv, json};

#[derive(Debug, Parser)]
#[command(name = "mdingarch", version, about = "Mixed difference INGARCH models for signed integer series")]
pub struct Cli {
    /// Worker threads for parallel loops; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a trajectory to CSV.
    Simulate(SimulateArgs),
    /// Fit the model by block quasi-maximum likelihood.
    Fit(FitArgs),
    /// Portmanteau goodness-of-fit tests on the residual autocorrelations.
    Gof(GofArgs),
    /// Non-randomized PIT histogram of the fitted model.
    Pit(PitArgs),
    /// Out-of-sample sign forecasts with Diebold–Mariano comparisons.
    EvalSign(EvalSignArgs),
    /// Stationarity conditions for a parameter vector.
    Stationarity(StationarityArgs),
    /// Run the acceptance suite and print a pass/fail table.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Preset {
    #[value(name = "sec6-pois")]
    ReferencePoisson,
    #[value(name = "sec6-nb")]
    ReferenceNegBin,
    #[value(name = "sec6-loglinear")]
    ReferenceLogLinear,
}

#[derive(Debug, Args)]
pub struct SeedArg {
    /// Random seed (falls back to MDINGARCH_SEED, then 0).
    #[arg(long, env = "MDINGARCH_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ModelSource {
    /// Named parameter set.
    #[arg(long, conflicts_with = "params")]
    pub preset: Option<Preset>,
    /// JSON file with `p`, `q`, `theta` and optional `family`, `linkage`, `sign`.
    #[arg(long)]
    pub params: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub source: ModelSource,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 500)]
    pub burn_in: usize,
    #[command(flatten)]
    pub seed: SeedArg,
    /// CSV destination; a `<out>.json` metadata file is written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write a `y` header line.
    #[arg(long)]
    pub header: bool,
    /// Simulate even when a necessary stationarity condition fails.
    #[arg(long)]
    pub allow_nonstationary: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum InitArg {
    Stationary,
    SampleMean,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Single-column integer CSV.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub p: usize,
    #[arg(long, default_value_t = 1)]
    pub q: usize,
    /// Initial values of the recursions.
    #[arg(long, value_enum, default_value_t = InitArg::Stationary)]
    pub init: InitArg,
    /// Report destination (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: InputArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum P1Arg {
    Bootstrap,
    Asymptotic,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum WeightsArg {
    Exponential,
    Unit,
}

#[derive(Debug, Args)]
pub struct GofArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = 10)]
    pub lags: usize,
    #[arg(long, default_value_t = 500)]
    pub bootstrap: usize,
    #[command(flatten)]
    pub seed: SeedArg,
    /// Covariance used for the chi-square p-value `p1`.
    #[arg(long, value_enum, default_value_t = P1Arg::Bootstrap)]
    pub p1_variance: P1Arg,
    #[arg(long, value_enum, default_value_t = WeightsArg::Exponential)]
    pub weights: WeightsArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FamilyArg {
    Pois,
    Nb,
}

#[derive(Debug, Args)]
pub struct PitArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum, default_value_t = FamilyArg::Pois)]
    pub family: FamilyArg,
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
}

#[derive(Debug, Args)]
pub struct EvalSignArgs {
    /// Single-column integer CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// Training sizes, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub m: Vec<usize>,
    /// Refit the sign block every this many steps.
    #[arg(long, default_value_t = 1)]
    pub refit_cadence: usize,
    #[arg(long, value_enum, default_value_t = InitArg::Stationary)]
    pub init: InitArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SignArg {
    Iid,
    Markov,
    BernoulliIngarch,
    Bounds,
}

#[derive(Debug, Args)]
pub struct StationarityArgs {
    #[command(flatten)]
    pub source: ModelSource,
    #[arg(long, value_enum, default_value_t = SignArg::BernoulliIngarch)]
    pub sign: SignArg,
    /// Selector probability for `--sign iid`.
    #[arg(long)]
    pub pi: Option<f64>,
    /// Transition probabilities for `--sign markov`.
    #[arg(long)]
    pub p00: Option<f64>,
    #[arg(long)]
    pub p01: Option<f64>,
    #[arg(long)]
    pub p10: Option<f64>,
    #[arg(long)]
    pub p11: Option<f64>,
    /// Bounds for `--sign bounds`.
    #[arg(long)]
    pub pi1_plus: Option<f64>,
    #[arg(long)]
    pub pi0_plus: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    /// Run only these criteria (comma separated ids).
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<usize>,
}

/// Parameters file layout.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsFile {
    p: usize,
    q: usize,
    theta: Vec<f64>,
    #[serde(default)]
    family: Option<Family>,
    #[serde(default)]
    linkage: Option<Linkage>,
    #[serde(default)]
    sign: Option<SignSpec>,
}

pub fn preset_spec(preset: Preset) -> DgpSpec {
    let (theta, family, linkage) = match preset {
        Preset::ReferencePoisson => ([0.2, 0.2, 0.2, 1.0, 0.3, 0.3, 2.0, 0.3, 0.3], Family::Poisson, Linkage::Linear),
        Preset::ReferenceNegBin => (
            [0.2, 0.2, 0.2, 1.0, 0.3, 0.3, 2.0, 0.3, 0.3],
            Family::NegBinomialFixedProb { p: 0.5 },
            Linkage::Linear,
        ),
        Preset::ReferenceLogLinear => ([0.2, 0.2, 0.2, 1.0, 0.2, 0.2, 2.0, 0.2, 0.2], Family::Poisson, Linkage::LogLinear),
    };
    let order = ModelOrder { p: 1, q: 1 };
    DgpSpec { theta: Theta::from_slice(&theta, order), family, linkage, sign: SignSpec::BernoulliIngarch }
}

fn load_spec(source: &ModelSource) -> Result<DgpSpec, CliError> {
    let spec = match (&source.preset, &source.params) {
        (Some(p), _) => preset_spec(*p),
        (None, Some(path)) => {
            let text = read(path)?;
            let pf: ParamsFile = serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            let order = ModelOrder::new(pf.p, pf.q)?;
            if pf.theta.len() != order.theta_dim() {
                return Err(CliError::Usage(format!(
                    "theta has {} entries; order ({}, {}) needs {}",
                    pf.theta.len(),
                    pf.p,
                    pf.q,
                    order.theta_dim()
                )));
            }
            DgpSpec {
                theta: Theta::from_slice(&pf.theta, order),
                family: pf.family.unwrap_or(Family::Poisson),
                linkage: pf.linkage.unwrap_or_default(),
                sign: pf.sign.unwrap_or(SignSpec::BernoulliIngarch),
            }
        }
        (None, None) => return Err(CliError::Usage("one of --preset or --params is required".into())),
    };
    spec.validate()?;
    Ok(spec)
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn load_series(path: &Path) -> Result<SeriesZ, CliError> {
    let text = read(path)?;
    let y = csv::parse_series(&text).map_err(|e| match e {
        CliError::Data(m) => CliError::Data(format!("{}: {m}", path.display())),
        other => other,
    })?;
    Ok(SeriesZ::new(y))
}

fn init_policy(a: InitArg) -> InitPolicy {
    match a {
        InitArg::Stationary => InitPolicy::Stationary,
        InitArg::SampleMean => InitPolicy::SampleMean,
    }
}

/// Output of a command: what goes to stdout, plus files to write.
#[derive(Debug, Default)]
pub struct Output {
    pub stdout: String,
    pub files: Vec<(PathBuf, String)>,
}

impl Output {
    fn report(out: &Option<PathBuf>, body: String) -> Self {
        match out {
            Some(p) => Output { stdout: String::new(), files: vec![(p.clone(), body)] },
            None => Output { stdout: body, files: vec![] },
        }
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run_args<I, T>(args: I) -> Result<Output, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| CliError::Usage(e.to_string()))?;
    run(cli)
}

pub fn run(cli: Cli) -> Result<Output, CliError> {
    match cli.threads {
        Some(0) => Err(CliError::Usage("--threads must be at least 1".into())),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| CliError::Usage(e.to_string()))?
            .install(|| dispatch(cli.command)),
        None => dispatch(cli.command),
    }
}

fn dispatch(cmd: Command) -> Result<Output, CliError> {
    match cmd {
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Fit(a) => cmd_fit(&a),
        Command::Gof(a) => cmd_gof(&a),
        Command::Pit(a) => cmd_pit(&a),
        Command::EvalSign(a) => cmd_eval_sign(&a),
        Command::Stationarity(a) => cmd_stationarity(&a),
        Command::Reproduce(a) => cmd_reproduce(&a),
    }
}

fn sign_mode_for(spec: &DgpSpec) -> SignMode {
    match spec.sign {
        SignSpec::IidBernoulli { pi } => SignMode::Iid { pi },
        SignSpec::BernoulliIngarch => SignMode::BernoulliIngarch,
    }
}

fn cmd_simulate(a: &SimulateArgs) -> Result<Output, CliError> {
    let spec = load_spec(&a.source)?;
    if a.n == 0 {
        return Err(CliError::Usage("--n must be positive".into()));
    }
    // The stability conditions concern the linear recursion only.
    if spec.linkage == Linkage::Linear {
        let report = check_conditions(&spec.theta, sign_mode_for(&spec))?;
        match report.status {
            Stationarity::Stationary => {}
            Stationarity::Inconclusive => {
                eprintln!(
                    "warning: spectral radius {:.4} >= 1; stationarity is not guaranteed",
                    report.spectral_radius
                );
            }
            Stationarity::Nonstationary if !a.allow_nonstationary => {
                return Err(CliError::Usage(format!(
                    "parameters violate a necessary stationarity condition (spectral radius {:.4}); \
                     pass --allow-nonstationary to simulate anyway",
                    report.spectral_radius
                )));
            }
            Stationarity::Nonstationary => eprintln!("warning: simulating a nonstationary model"),
        }
    }
    let series = simulate(&spec, a.n, a.burn_in, &mut rng::stream(a.seed.seed))?;
    let body = csv::write_series(series.y(), a.header);
    match &a.out {
        None => Ok(Output { stdout: body, files: vec![] }),
        Some(path) => {
            let meta = json!({
                "schema_version": json::SCHEMA_VERSION,
                "seed": a.seed.seed,
                "n": a.n,
                "burn_in": a.burn_in,
                "spec": serde_json::to_value(&spec).expect("spec serializes"),
            });
            let mut sidecar = path.clone().into_os_string();
            sidecar.push(".json");
            Ok(Output { stdout: String::new(), files: vec![(path.clone(), body), (sidecar.into(), json::to_string(&meta))] })
        }
    }
}

fn fit_options(a: &InputArgs) -> FitOptions {
    FitOptions { init: init_policy(a.init), ..Default::default() }
}

fn fit_input(a: &InputArgs) -> Result<(SeriesZ, FitReport), CliError> {
    let series = load_series(&a.input)?;
    let order = ModelOrder::new(a.p, a.q)?;
    let report = fit(&series, order, &fit_options(a))?;
    Ok((series, report))
}

pub fn fit_json(series: &SeriesZ, f: &FitReport) -> Result<Value, CliError> {
    let order = f.theta_hat.order();
    let names = parameter_names(order);
    let theta = f.theta_hat.to_vec();
    let estimates: serde_json::Map<String, Value> =
        names.iter().zip(theta.iter().zip(&f.se)).map(|(n, (v, s))| (n.clone(), json!({"estimate": v, "se": s}))).collect();
    let blocks: Vec<Value> = ["phi", "psi1", "psi2"]
        .iter()
        .zip(&f.blocks)
        .map(|(name, b)| {
            json!({
                "block": name,
                "converged": b.converged,
                "iterations": b.iterations,
                "gradient_norm": b.gradient_norm,
                "objective": b.objective,
            })
        })
        .collect();
    let c = &f.covariance;
    let disp = estimate_dispersion(series, &f.theta_hat, f.init)?;
    Ok(json!({
        "schema_version": json::SCHEMA_VERSION,
        "n": f.n,
        "order": {"p": order.p, "q": order.q},
        "init": serde_json::to_value(f.init).expect("init serializes"),
        "parameter_names": names,
        "theta_hat": theta,
        "se": f.se,
        "estimates": estimates,
        "persistence_pos": f.theta_hat.psi1.alpha_sum() + f.theta_hat.psi1.beta_sum(),
        "persistence_neg": f.theta_hat.psi2.alpha_sum() + f.theta_hat.psi2.beta_sum(),
        "loglik": f.loglik,
        "loglik_full": f.loglik_full,
        "converged": f.converged(),
        "convergence": blocks,
        "covariance": {
            "available": c.available,
            "pi_hat": json::matrix(&c.pi_hat),
            "j1": json::matrix(&c.j1),
            "i1": json::matrix(&c.i1),
            "j2": json::matrix(&c.j2),
            "i2": json::matrix(&c.i2),
            "sigma": json::matrix(&c.sigma),
        },
        "dispersion": {
            "r1": disp.r1,
            "r2": disp.r2,
            "r1_underdispersed": disp.r1_underdispersed,
            "r2_underdispersed": disp.r2_underdispersed,
        },
    }))
}

fn cmd_fit(a: &FitArgs) -> Result<Output, CliError> {
    let (series, f) = fit_input(&a.input)?;
    Ok(Output::report(&a.input.out, json::to_string(&fit_json(&series, &f)?)))
}

fn cmd_gof(a: &GofArgs) -> Result<Output, CliError> {
    let (series, f) = fit_input(&a.input)?;
    let opts = GofOptions {
        lags: a.lags,
        bootstrap: a.bootstrap,
        weights: match a.weights {
            WeightsArg::Exponential => WeightDist::Exponential,
            WeightsArg::Unit => WeightDist::Unit,
        },
        seed: a.seed.seed,
        p1_variance: match a.p1_variance {
            P1Arg::Bootstrap => P1Variance::Bootstrap,
            P1Arg::Asymptotic => P1Variance::Asymptotic,
        },
    };
    let g = gof(&series, &f, &opts)?;
    let body = json!({
        "schema_version": json::SCHEMA_VERSION,
        "n": g.n,
        "k": g.k,
        "bootstrap": g.bootstrap,
        "seed": g.seed,
        "weights": serde_json::to_value(g.weights).expect("weights serialize"),
        "p1_variance": serde_json::to_value(g.p1_variance).expect("variance choice serializes"),
        "theta_hat": f.theta_hat.to_vec(),
        "gamma0": g.gamma0,
        "rho_hat": g.rho_hat,
        "v_hat": json::matrix(&g.v_hat),
        "v_star": json::matrix(&g.v_star),
        "stat": g.stat,
        "p1": g.p1,
        "p2": g.p2,
        "stat_asymptotic": g.stat_asymptotic,
        "p1_asymptotic": g.p1_asymptotic,
        "stat_bootstrap": g.stat_bootstrap,
        "p1_bootstrap": g.p1_bootstrap,
        "pinv_used": g.pinv_used,
    });
    Ok(Output::report(&a.input.out, json::to_string(&body)))
}

fn cmd_pit(a: &PitArgs) -> Result<Output, CliError> {
    let (series, f) = fit_input(&a.input)?;
    let (family, disp) = match a.family {
        FamilyArg::Pois => (Family::Poisson, Value::Null),
        FamilyArg::Nb => {
            let d = estimate_dispersion(&series, &f.theta_hat, f.init)?;
            if d.r1_underdispersed || d.r2_underdispersed {
                return Err(CliError::Data(
                    "no overdispersion relative to Poisson on at least one side; use --family pois".into(),
                ));
            }
            (Family::NegBinomial { r1: d.r1, r2: d.r2 }, json!({"r1": d.r1, "r2": d.r2}))
        }
    };
    let h = pit_histogram(&series, &f, family, a.bins)?;
    let table: Vec<Value> = h
        .heights
        .iter()
        .enumerate()
        .map(|(j, v)| {
            json!({
                "bin": j + 1,
                "lower": j as f64 / h.bins as f64,
                "upper": (j + 1) as f64 / h.bins as f64,
                "height": v,
            })
        })
        .collect();
    let body = json!({
        "schema_version": json::SCHEMA_VERSION,
        "n": h.n,
        "bins": h.bins,
        "family": serde_json::to_value(family).expect("family serializes"),
        "dispersion": disp,
        "table": table,
        "band_low": h.band_low,
        "band_high": h.band_high,
        "outside_band": h.outside_band().iter().map(|j| j + 1).collect::<Vec<_>>(),
        "zero_mass": h.zero_mass,
    });
    Ok(Output::report(&a.input.out, json::to_string(&body)))
}

fn cmd_eval_sign(a: &EvalSignArgs) -> Result<Output, CliError> {
    let series = load_series(&a.input)?;
    let opts = SignEvalOptions {
        refit_every: a.refit_cadence,
        fit: FitOptions { init: init_policy(a.init), ..Default::default() },
    };
    let reports = sign_forecast_eval(&series, &a.m, &opts)?;
    let rows: Vec<Value> = reports
        .iter()
        .map(|r| {
            json!({
                "m": r.m,
                "forecasts": r.forecasts,
                "mae1": r.mae1,
                "mae2": r.mae2,
                "mae3": r.mae3,
                "dm_p_mae2": r.dm_mae2.p_value,
                "dm_p_mae3": r.dm_mae3.p_value,
                "dm_stat_mae2": r.dm_mae2.stat,
                "dm_stat_mae3": r.dm_mae3.stat,
                "dm_degenerate_mae2": r.dm_mae2.degenerate,
                "dm_degenerate_mae3": r.dm_mae3.degenerate,
            })
        })
        .collect();
    let body = json!({
        "schema_version": json::SCHEMA_VERSION,
        "n": series.len(),
        "refit_cadence": a.refit_cadence,
        "approximate": a.refit_cadence > 1,
        "reports": rows,
    });
    Ok(Output::report(&a.out, json::to_string(&body)))
}

fn need(v: Option<f64>, flag: &str) -> Result<f64, CliError> {
    v.ok_or_else(|| CliError::Usage(format!("{flag} is required for this --sign mode")))
}

fn cmd_stationarity(a: &StationarityArgs) -> Result<Output, CliError> {
    let spec = load_spec(&a.source)?;
    let theta = &spec.theta;
    let mode = match a.sign {
        SignArg::Iid => SignMode::Iid { pi: need(a.pi, "--pi")? },
        SignArg::Markov => SignMode::MarkovChain {
            p00: need(a.p00, "--p00")?,
            p01: need(a.p01, "--p01")?,
            p10: need(a.p10, "--p10")?,
            p11: need(a.p11, "--p11")?,
        },
        SignArg::BernoulliIngarch => SignMode::BernoulliIngarch,
        SignArg::Bounds => SignMode::Bounds { pi1_plus: need(a.pi1_plus, "--pi1-plus")?, pi0_plus: need(a.pi0_plus, "--pi0-plus")? },
    };
    let r = check_conditions(theta, mode)?;
    let (mut e_abs, mut e_y, mut closed) = (Value::Null, Value::Null, Value::Null);
    if let SignMode::Iid { pi } = mode {
        if let Ok((ea, ey)) = stationary_mean(theta, pi) {
            if r.status == Stationarity::Stationary {
                e_abs = json!(ea);
                e_y = json!(ey);
            }
        }
        if let Ok(c) = closed_form_rho(theta, pi) {
            closed = json!(c);
        }
    }
    let body = json!({
        "schema_version": json::SCHEMA_VERSION,
        "theta": theta.to_vec(),
        "sign_mode": serde_json::to_value(mode).expect("mode serializes"),
        "rho": r.spectral_radius,
        "closed_form_rho": closed,
        "pi1_plus": r.pi1_plus,
        "pi0_plus": r.pi0_plus,
        "sufficient_spectral": r.sufficient_spectral,
        "necessary_beta_sum": r.necessary_beta_sum,
        "necessary_mean_persistence": r.necessary_mean_persistence,
        "equivalence_agrees": r.equivalence_agrees,
        "status": serde_json::to_value(r.status).expect("status serializes"),
        "e_abs_y": e_abs,
        "e_y": e_y,
    });
    Ok(Output::report(&a.out, json::to_string(&body)))
}

fn cmd_reproduce(a: &ReproduceArgs) -> Result<Output, CliError> {
    let results = acceptance::run_selected(&a.only);
    let table = acceptance::format_table(&results);
    let failed = results.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        print!("{table}");
        return Err(CliError::AcceptanceFailed(failed));
    }
    Ok(Output { stdout: table, files: vec![] })
}
