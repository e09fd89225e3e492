//! Command line for fitting, probing, and benchmarking the robust learner.
//!
//! Subcommands:
//!
//! - `fit`: fit one method to a CSV dataset; prints the fit as JSON.
//! - `solve-inner`: maximize excess risk over the confidence set for a
//!   fixed profile; prints the least favorable distribution.
//! - `coverage`: Monte Carlo coverage of the KL confidence set.
//! - `experiment`: multi-run synthetic benchmark of all three methods.
//! - `gen`: dump a synthetic dataset to CSV with a metadata sidecar.
//!
//! Every command prints one JSON document whose `config` field is the fully
//! resolved configuration. Re-running a command from that config alone
//! reproduces its outputs byte for byte; explicit flags override config
//! file fields. Exit codes: 0 on success, 2 on invalid input, 3 on solver
//! failure (for `experiment`, 3 also when more than 20% of runs fail).

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use ctxrobust::confidence::{kl_bits, ConfidenceParams};
use ctxrobust::evaluate::{run_experiment, EvalMetric, ExperimentPlan, TrainPlan};
use ctxrobust::inner_solver::{solve_least_favorable, ExcessProfile, Regime};
use ctxrobust::losses::{LogisticLoss, NewsvendorLoss};
use ctxrobust::model::{ContextStats, Dataset, LossModel};
use ctxrobust::optimize::{
    fit_erm, fit_group_dro, fit_robust, GroupDroOptions, Method, OptimizerOptions,
};
use ctxrobust::synthetic::{
    describe, gen_from_sampler, gen_with_counts, ClassifyConfig, ClassifySampler,
    ContextSampler, DeskConfig, DeskSampler, StockConfig, StockSampler,
};
use ctxrobust::{Error, Result};

#[derive(Parser)]
#[command(
    name = "ctxrobust",
    version,
    about = "Confidence-set robust learning from heterogeneous-context data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a method to a CSV dataset and print the result as JSON.
    Fit(FitArgs),
    /// Maximize excess risk over the confidence set for a fixed profile.
    SolveInner(InnerArgs),
    /// Estimate Monte Carlo coverage of the KL confidence set.
    Coverage(CoverageArgs),
    /// Benchmark erm, minimax, and robust over Monte Carlo runs.
    Experiment(ExperimentArgs),
    /// Generate a synthetic dataset CSV with a metadata sidecar.
    Gen(GenArgs),
}

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Fit(args) => run_fit(args),
        Command::SolveInner(args) => run_solve_inner(args),
        Command::Coverage(args) => run_coverage(args),
        Command::Experiment(args) => run_experiment_cmd(args),
        Command::Gen(args) => run_gen(args),
    };
    if let Err(e) = outcome {
        eprintln!("error: {e}");
        std::process::exit(if e.is_input_error() { 2 } else { 3 });
    }
}

/// Reads and parses a JSON file, reporting parse failures as input errors.
fn read_json<T: DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| Error::InvalidInput(format!("malformed {what} {}: {e}", path.display())))
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("output types serialize")
}

/// Prints the document to stdout and optionally writes the same bytes to a
/// file.
fn emit(doc: &Value, out: Option<&Path>) -> Result<()> {
    let text = format!("{doc:#}\n");
    print!("{text}");
    if let Some(path) = out {
        fs::write(path, &text)?;
    }
    Ok(())
}

// ---------------------------------------------------------------- fit

#[derive(Args)]
struct FitArgs {
    /// Training data CSV: header then context,x1,...,xd,y rows.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Loss family; its parameters come from the config file.
    #[arg(long, value_enum)]
    loss: Option<LossName>,
    /// Fitting method.
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Confidence level in (0, 1]; used by the robust method.
    #[arg(long)]
    beta: Option<f64>,
    /// JSON config file; explicit flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Also write the printed JSON to this path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum LossName {
    Newsvendor,
    Logistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum MethodArg {
    Erm,
    Minimax,
    Robust,
}

impl MethodArg {
    fn to_method(self) -> Method {
        match self {
            MethodArg::Erm => Method::Erm,
            MethodArg::Minimax => Method::MinimaxGroupDro,
            MethodArg::Robust => Method::Robust,
        }
    }
}

fn default_r() -> f64 {
    10.0
}
fn default_theta_max() -> f64 {
    100.0
}
fn default_true() -> bool {
    true
}

/// Loss family plus parameters, as stored in config files.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
enum LossSpec {
    Newsvendor {
        #[serde(default = "default_r")]
        r: f64,
        #[serde(default = "default_theta_max")]
        theta_max: f64,
    },
    Logistic {
        #[serde(default = "default_true")]
        add_bias: bool,
    },
}

impl LossSpec {
    fn family(&self) -> LossName {
        match self {
            LossSpec::Newsvendor { .. } => LossName::Newsvendor,
            LossSpec::Logistic { .. } => LossName::Logistic,
        }
    }

    fn with_defaults(name: LossName) -> Self {
        match name {
            LossName::Newsvendor => {
                LossSpec::Newsvendor { r: default_r(), theta_max: default_theta_max() }
            }
            LossName::Logistic => LossSpec::Logistic { add_bias: true },
        }
    }

    fn build(&self) -> Result<Box<dyn LossModel>> {
        Ok(match *self {
            LossSpec::Newsvendor { r, theta_max } => {
                Box::new(NewsvendorLoss::new(r, theta_max)?)
            }
            LossSpec::Logistic { add_bias } => Box::new(LogisticLoss { add_bias }),
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FitSpec {
    /// Path of the training CSV.
    data: Option<PathBuf>,
    loss: LossSpec,
    method: MethodArg,
    beta: f64,
    /// Resolved to the loss family's defaults when absent.
    optimizer: Option<OptimizerOptions>,
    /// Adversary settings for the minimax method.
    minimax: GroupDroOptions,
}

impl Default for FitSpec {
    fn default() -> Self {
        FitSpec {
            data: None,
            loss: LossSpec::with_defaults(LossName::Newsvendor),
            method: MethodArg::Robust,
            beta: 0.99,
            optimizer: None,
            minimax: GroupDroOptions::default(),
        }
    }
}

fn run_fit(args: FitArgs) -> Result<()> {
    let mut spec: FitSpec = match &args.config {
        Some(path) => read_json(path, "config")?,
        None => FitSpec::default(),
    };
    if let Some(data) = args.data {
        spec.data = Some(data);
    }
    // A bare family name keeps config-file parameters when the family
    // matches and otherwise switches to that family's defaults.
    if let Some(name) = args.loss {
        if spec.loss.family() != name {
            spec.loss = LossSpec::with_defaults(name);
        }
    }
    if let Some(method) = args.method {
        spec.method = method;
    }
    if let Some(beta) = args.beta {
        spec.beta = beta;
    }
    let data = spec.data.clone().ok_or_else(|| {
        Error::InvalidInput("no dataset: pass --data or set \"data\" in the config".into())
    })?;
    let ds = Dataset::from_csv(&data)?;
    for w in ds.warnings() {
        eprintln!("warning: {w}");
    }
    let loss = spec.loss.build()?;
    if let LossSpec::Logistic { add_bias } = spec.loss {
        LogisticLoss { add_bias }.validate_labels(&ds)?;
    }
    let opts = spec.optimizer.unwrap_or_else(|| OptimizerOptions::for_loss(loss.as_ref()));
    spec.optimizer = Some(opts);
    let fit = match spec.method.to_method() {
        Method::Erm => fit_erm(loss.as_ref(), &ds, &opts)?,
        Method::MinimaxGroupDro => fit_group_dro(loss.as_ref(), &ds, &opts, &spec.minimax)?,
        Method::Robust => fit_robust(loss.as_ref(), &ds, spec.beta, &opts)?,
    };
    let stats = ContextStats::from_dataset(&ds);
    // Echo the KL certificate of the least favorable distribution so the
    // constraint activity can be checked from the output alone.
    let kl = match (&fit.p_star, fit.regime) {
        (Some(p_star), Some(Regime::Interior)) => Some(kl_bits(&stats.p_hat, p_star)?),
        _ => None,
    };
    let mut doc = to_value(&fit);
    let obj = doc.as_object_mut().expect("fit result is a JSON object");
    obj.insert("p_hat".into(), to_value(&stats.p_hat));
    obj.insert("eps_bits".into(), to_value(&fit.config.eps_bits));
    obj.insert("kl_bits".into(), to_value(&kl));
    obj.insert("config".into(), to_value(&spec));
    emit(&doc, args.out.as_deref())
}

// --------------------------------------------------------- solve-inner

#[derive(Args)]
struct InnerArgs {
    /// JSON profile: {"p_hat": [...], "deltas": [...]} with optional
    /// "r_hats" and "eps_bits".
    #[arg(long)]
    profile: PathBuf,
    /// Confidence radius in bits; overrides --beta and the profile.
    #[arg(long)]
    eps: Option<f64>,
    /// Confidence level in (0, 1]; needs --n and --contexts.
    #[arg(long)]
    beta: Option<f64>,
    /// Sample size behind the profile (with --beta).
    #[arg(long = "n")]
    n: Option<usize>,
    /// Number of contexts (with --beta).
    #[arg(long)]
    contexts: Option<usize>,
    /// Also write the printed JSON to this path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileFile {
    #[serde(alias = "phat")]
    p_hat: Vec<f64>,
    deltas: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    r_hats: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eps_bits: Option<f64>,
}

fn run_solve_inner(args: InnerArgs) -> Result<()> {
    let profile: ProfileFile = read_json(&args.profile, "profile")?;
    let eps = if let Some(eps) = args.eps {
        eps
    } else if args.beta.is_some() || args.n.is_some() || args.contexts.is_some() {
        let (Some(beta), Some(n), Some(k)) = (args.beta, args.n, args.contexts) else {
            return Err(Error::InvalidInput(
                "--beta, --n, and --contexts must be given together".into(),
            ));
        };
        if k != profile.p_hat.len() {
            return Err(Error::InvalidInput(format!(
                "--contexts {k} disagrees with the profile length {}",
                profile.p_hat.len()
            )));
        }
        ConfidenceParams::new(beta, n, k)?.eps_bits
    } else if let Some(eps) = profile.eps_bits {
        eps
    } else {
        return Err(Error::InvalidInput(
            "no radius: pass --eps, or --beta with --n and --contexts, or put eps_bits in the profile".into(),
        ));
    };
    let excess = match &profile.r_hats {
        Some(r_hats) => ExcessProfile::new(
            profile.p_hat.clone(),
            profile.deltas.clone(),
            r_hats.clone(),
        )?,
        None => ExcessProfile::without_r_hats(profile.p_hat.clone(), profile.deltas.clone())?,
    };
    let solution = solve_least_favorable(&excess, eps)?;
    let resolved = ProfileFile { eps_bits: Some(eps), ..profile };
    let mut doc = to_value(&solution);
    let obj = doc.as_object_mut().expect("solution is a JSON object");
    obj.insert("eps_bits".into(), to_value(&eps));
    obj.insert("config".into(), serde_json::json!({ "profile": resolved }));
    emit(&doc, args.out.as_deref())
}

// ------------------------------------------------------------ coverage

#[derive(Args)]
struct CoverageArgs {
    /// True context distribution, comma separated (e.g. 0.95,0.05).
    #[arg(long)]
    p: Option<String>,
    /// Categorical sample size per trial.
    #[arg(long = "n")]
    n: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// JSON config file; explicit flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Also write the printed JSON to this path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct CoverageSpec {
    p: Vec<f64>,
    n: usize,
    beta: f64,
    trials: usize,
    seed: u64,
}

impl Default for CoverageSpec {
    fn default() -> Self {
        CoverageSpec { p: Vec::new(), n: 100, beta: 0.99, trials: 2000, seed: 0 }
    }
}

fn parse_prob_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|part| {
            part.trim().parse::<f64>().map_err(|_| {
                Error::InvalidInput(format!("--p entry {part:?} is not a number"))
            })
        })
        .collect()
}

fn run_coverage(args: CoverageArgs) -> Result<()> {
    let mut spec: CoverageSpec = match &args.config {
        Some(path) => read_json(path, "config")?,
        None => CoverageSpec::default(),
    };
    if let Some(p) = &args.p {
        spec.p = parse_prob_list(p)?;
    }
    if let Some(n) = args.n {
        spec.n = n;
    }
    if let Some(beta) = args.beta {
        spec.beta = beta;
    }
    if let Some(trials) = args.trials {
        spec.trials = trials;
    }
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if spec.p.is_empty() {
        return Err(Error::InvalidInput(
            "no distribution: pass --p or set \"p\" in the config".into(),
        ));
    }
    if spec.n == 0 {
        return Err(Error::InvalidInput("--n must be at least 1".into()));
    }
    let coverage =
        ctxrobust::confidence::simulate_coverage(&spec.p, spec.n, spec.beta, spec.trials, spec.seed)?;
    let doc = serde_json::json!({
        "coverage": coverage,
        "trials": spec.trials,
        "beta": spec.beta,
        "config": spec,
    });
    emit(&doc, args.out.as_deref())
}

// ---------------------------------------------------------- experiment

#[derive(Args)]
struct ExperimentArgs {
    /// Benchmark population.
    #[arg(long, value_enum)]
    name: Option<ExperimentName>,
    #[arg(long)]
    runs: Option<usize>,
    /// Confidence level of the robust fit.
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo draws per context when scoring a fit.
    #[arg(long = "eval-m")]
    eval_m: Option<usize>,
    /// Training sample size per run.
    #[arg(long = "train-n")]
    train_n: Option<usize>,
    /// JSON config file; explicit flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory receiving runs.csv, summary.json, and config.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum ExperimentName {
    Stock,
    Classify,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ExperimentSpec {
    name: Option<ExperimentName>,
    runs: usize,
    beta: f64,
    seed: u64,
    /// Defaults per population: 100000 (stock risks), 10000 (classify
    /// error rates).
    eval_m: Option<usize>,
    /// Defaults to the generator config's n.
    train_n: Option<usize>,
    stock: StockConfig,
    classify: ClassifyConfig,
    optimizer: Option<OptimizerOptions>,
    minimax: GroupDroOptions,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            name: None,
            runs: 50,
            beta: 0.99,
            seed: 1,
            eval_m: None,
            train_n: None,
            stock: StockConfig::default(),
            classify: ClassifyConfig::default(),
            optimizer: None,
            minimax: GroupDroOptions::default(),
        }
    }
}

fn run_experiment_cmd(args: ExperimentArgs) -> Result<()> {
    let mut spec: ExperimentSpec = match &args.config {
        Some(path) => read_json(path, "config")?,
        None => ExperimentSpec::default(),
    };
    if let Some(name) = args.name {
        spec.name = Some(name);
    }
    if let Some(runs) = args.runs {
        spec.runs = runs;
    }
    if let Some(beta) = args.beta {
        spec.beta = beta;
    }
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if let Some(m) = args.eval_m {
        spec.eval_m = Some(m);
    }
    if let Some(n) = args.train_n {
        spec.train_n = Some(n);
    }
    let name = spec.name.ok_or_else(|| {
        Error::InvalidInput("no experiment: pass --name stock|classify".into())
    })?;
    let (sampler, loss, metric, default_m, default_n): (
        Box<dyn ContextSampler>,
        Box<dyn LossModel>,
        EvalMetric,
        usize,
        usize,
    ) = match name {
        ExperimentName::Stock => (
            Box::new(StockSampler::new(&spec.stock)?),
            Box::new(NewsvendorLoss::new(spec.stock.r, spec.stock.theta_max)?),
            EvalMetric::Risk,
            100_000,
            spec.stock.n,
        ),
        ExperimentName::Classify => (
            Box::new(ClassifySampler::new(&spec.classify)?),
            Box::new(LogisticLoss { add_bias: true }),
            EvalMetric::ErrorRate,
            10_000,
            spec.classify.n,
        ),
    };
    let eval_m = spec.eval_m.unwrap_or(default_m);
    spec.eval_m = Some(eval_m);
    let train_n = spec.train_n.unwrap_or(default_n);
    spec.train_n = Some(train_n);
    let opts = spec.optimizer.unwrap_or_else(|| OptimizerOptions::for_loss(loss.as_ref()));
    spec.optimizer = Some(opts);
    let plan = ExperimentPlan {
        runs: spec.runs,
        eval_m,
        beta: spec.beta,
        seed: spec.seed,
        metric,
        train: TrainPlan::Mixture { n: train_n },
    };
    let summary = run_experiment(loss.as_ref(), sampler.as_ref(), &plan, &opts, &spec.minimax)?;
    let mut doc = to_value(&summary);
    let obj = doc.as_object_mut().expect("summary is a JSON object");
    obj.insert("name".into(), to_value(&name));
    obj.insert("config".into(), to_value(&spec));
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("runs.csv"), summary.csv_rows())?;
        fs::write(dir.join("summary.json"), format!("{doc:#}\n"))?;
        fs::write(dir.join("config.json"), format!("{:#}\n", to_value(&spec)))?;
    }
    println!("{doc:#}");
    for failure in &summary.failures {
        eprintln!("warning: run {} failed: {}", failure.run, failure.message);
    }
    if summary.success_fraction() < 0.8 {
        eprintln!(
            "error: only {} of {} runs succeeded",
            summary.runs_succeeded, summary.runs_requested
        );
        std::process::exit(3);
    }
    Ok(())
}

// ----------------------------------------------------------------- gen

#[derive(Args)]
struct GenArgs {
    /// Population to sample.
    #[arg(long, value_enum)]
    name: Option<ScenarioName>,
    /// Training sample size (stock and classify; desk uses fixed counts).
    #[arg(long = "n")]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Run index selecting the generation stream.
    #[arg(long)]
    run: Option<u64>,
    /// JSON config file; explicit flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV path; metadata goes to <out>.meta.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum ScenarioName {
    Stock,
    Classify,
    Desk,
}

impl ScenarioName {
    fn as_str(self) -> &'static str {
        match self {
            ScenarioName::Stock => "stock",
            ScenarioName::Classify => "classify",
            ScenarioName::Desk => "desk",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct GenSpec {
    name: Option<ScenarioName>,
    seed: u64,
    run: u64,
    stock: StockConfig,
    classify: ClassifyConfig,
    desk: DeskConfig,
}

impl Default for GenSpec {
    fn default() -> Self {
        GenSpec {
            name: None,
            seed: 0,
            run: 0,
            stock: StockConfig::default(),
            classify: ClassifyConfig::default(),
            desk: DeskConfig::default(),
        }
    }
}

fn run_gen(args: GenArgs) -> Result<()> {
    let mut spec: GenSpec = match &args.config {
        Some(path) => read_json(path, "config")?,
        None => GenSpec::default(),
    };
    if let Some(name) = args.name {
        spec.name = Some(name);
    }
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if let Some(run) = args.run {
        spec.run = run;
    }
    let name = spec.name.ok_or_else(|| {
        Error::InvalidInput("no population: pass --name stock|classify|desk".into())
    })?;
    if let Some(n) = args.n {
        match name {
            ScenarioName::Stock => spec.stock.n = n,
            ScenarioName::Classify => spec.classify.n = n,
            ScenarioName::Desk => {
                return Err(Error::InvalidInput(
                    "the desk population has fixed per-context counts; set n1/n2 in the config"
                        .into(),
                ))
            }
        }
    }
    let (sampler, dataset, coefficients): (Box<dyn ContextSampler>, Dataset, Value) = match name
    {
        ScenarioName::Stock => {
            let sampler = StockSampler::new(&spec.stock)?;
            let ds = gen_from_sampler(&sampler, spec.stock.n, spec.seed, spec.run)?;
            let coeff = to_value(&sampler.contexts());
            (Box::new(sampler), ds, coeff)
        }
        ScenarioName::Classify => {
            let sampler = ClassifySampler::new(&spec.classify)?;
            let ds = gen_from_sampler(&sampler, spec.classify.n, spec.seed, spec.run)?;
            let coeff = to_value(&sampler.contexts());
            (Box::new(sampler), ds, coeff)
        }
        ScenarioName::Desk => {
            let sampler = DeskSampler::new(&spec.desk)?;
            let counts = [spec.desk.n1, spec.desk.n2];
            let ds = gen_with_counts(&sampler, &counts, spec.seed, spec.run)?;
            let coeff = to_value(&[&spec.desk.context1, &spec.desk.context2]);
            (Box::new(sampler), ds, coeff)
        }
    };
    dataset.to_csv(&args.out)?;
    let metadata = describe(sampler.as_ref(), &dataset, name.as_str(), spec.seed, spec.run);
    let doc = serde_json::json!({
        "metadata": metadata,
        "coefficients": coefficients,
        "config": spec,
    });
    let mut sidecar = args.out.clone().into_os_string();
    sidecar.push(".meta.json");
    emit(&doc, Some(Path::new(&sidecar)))
}
