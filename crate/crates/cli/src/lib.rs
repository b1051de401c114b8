//! Command-line front end: argument parsing, data loading and output.
// `!(a <= b)` comparisons double as NaN rejection.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use otsg::diagnostics::{critical_set, empirical_graph, graph_excess, linspace};
use otsg::experiments::{
    run_convergence_sweep, run_relu, run_spurious, ExperimentReport, ReluExperimentConfig, SpuriousExperimentConfig,
    SweepCase, SweepConfig,
};
use otsg::measures::{EmpiricalMeasureD, SourceDistribution};
use otsg::models::{BuiltinModel, ParamModel};
use otsg::objectives::{
    CompositeCost, FairnessPenalty, Objective, PlanMode, PopulationCase, PopulationObjective, RegularizedErm,
    SlicedWasserstein, SpectralRisk, TransportObjective, UnitCost,
};
use otsg::optimize::{run_seeded, FeasibleSet, StepSchedule};
use otsg::oracles::SpectralWeight;
use otsg::ot1d::{monotone_plan, w_unequal};
use otsg::rng::substream;

pub use data::{load_samples, Column};

/// Environment variable consulted when no `--seed` is given.
pub const SEED_ENV: &str = "OTSG_SEED";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Core(#[from] otsg::Error),
    #[error("usage: {0}")]
    Usage(String),
    #[error("data: {0}")]
    Data(String),
    #[error("io: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn parse_q(s: &str) -> Result<f64, String> {
    let q: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if !(q >= 1.0 && q.is_finite()) {
        return Err(format!("q must be >= 1, got {q}"));
    }
    Ok(q)
}

fn parse_text<T: std::str::FromStr<Err = otsg::Error>>(s: &str) -> Result<T, String> {
    s.parse().map_err(|e: otsg::Error| e.to_string())
}

/// Scalar parameter grid given as `lo:hi:points`.
#[derive(Debug, Clone)]
pub struct Grid(pub Vec<Vec<f64>>);

fn parse_grid(s: &str) -> Result<Grid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, count] = parts[..] else {
        return Err(format!("grid must be lo:hi:points, got '{s}'"));
    };
    let lo: f64 = lo.parse().map_err(|_| format!("invalid grid start '{lo}'"))?;
    let hi: f64 = hi.parse().map_err(|_| format!("invalid grid end '{hi}'"))?;
    let count: usize = count.parse().map_err(|_| format!("invalid grid size '{count}'"))?;
    if !(lo <= hi) || count == 0 {
        return Err(format!("grid needs lo <= hi and at least one point, got '{s}'"));
    }
    Ok(Grid(linspace(lo, hi, count)))
}

#[derive(Debug, Parser)]
#[command(name = "otsg", version, about = "Empirical optimal-transport objectives, subgradient oracles and diagnostics")]
pub struct Cli {
    /// Worker threads (default: all available cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Random seed; falls back to OTSG_SEED, then to a fresh seed that is echoed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact W_q^q between two 1D samples.
    Ot1d(Ot1dArgs),
    /// Objective value and oracle output at a parameter.
    Eval(EvalArgs),
    /// Projected subgradient run; writes the trace as CSV.
    Optimize(OptimizeArgs),
    /// Set-valued diagnostics.
    #[command(subcommand)]
    Diag(DiagCommand),
    /// Monte Carlo experiments.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
}

#[derive(Debug, Args)]
pub struct Ot1dArgs {
    #[arg(long)]
    pub u: PathBuf,
    #[arg(long)]
    pub v: PathBuf,
    #[arg(long, value_parser = parse_q)]
    pub q: f64,
    /// Column to read from both files (name or 0-based index).
    #[arg(long)]
    pub column: Option<String>,
    /// Write the monotone plan (i,j,mass) to this file.
    #[arg(long)]
    pub plan: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ObjectiveKind {
    /// Spectral risk of a scalar loss.
    Sr,
    /// Fairness penalty between two groups.
    Fr,
    /// Sliced quadratic transport.
    Sw,
    /// Transport between pushed-forward samples.
    Transport,
    /// Mean loss plus a fairness penalty.
    Erm,
    /// Closed-form population objective.
    Population,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Sorted1d,
    BruteForce,
}

/// Objective description shared by `eval`, `optimize` and `diag`.
#[derive(Debug, Clone, Args)]
pub struct ObjectiveArgs {
    #[arg(long, value_enum)]
    pub objective: ObjectiveKind,
    /// Samples: a CSV path or a distribution such as `unif(0,1)` (needs --n).
    #[arg(long)]
    pub data: Option<String>,
    /// Second sample (targets) for `sw` and `transport`.
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long)]
    pub group0: Option<String>,
    #[arg(long)]
    pub group1: Option<String>,
    /// Column for CSV inputs (name or 0-based index).
    #[arg(long)]
    pub column: Option<String>,
    /// Point dimension for CSV inputs and sampled data.
    #[arg(long)]
    pub dims: Option<usize>,
    /// Sample size when drawing from a distribution.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, value_parser = parse_text::<SpectralWeight>)]
    pub weight: Option<SpectralWeight>,
    /// Loss model, e.g. `sqloss(2)`.
    #[arg(long, value_parser = parse_text::<BuiltinModel>)]
    pub loss: Option<BuiltinModel>,
    /// Score model, e.g. `linear(2)`.
    #[arg(long, value_parser = parse_text::<BuiltinModel>)]
    pub score: Option<BuiltinModel>,
    /// Generator or source model, e.g. `translate` or `affine(2,2)`.
    #[arg(long, value_parser = parse_text::<BuiltinModel>)]
    pub model: Option<BuiltinModel>,
    /// Target-side model for `transport` (default: identity).
    #[arg(long, value_parser = parse_text::<BuiltinModel>)]
    pub target_model: Option<BuiltinModel>,
    #[arg(long, value_parser = parse_q, default_value = "2")]
    pub q: f64,
    /// Cost scale; defaults to 1/q.
    #[arg(long)]
    pub scale: Option<f64>,
    #[arg(long, value_enum, default_value = "sorted1d")]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    /// Number of random projection directions for `sw`.
    #[arg(long, default_value_t = 16)]
    pub directions: usize,
    #[arg(long, value_parser = parse_text::<PopulationCase>)]
    pub case: Option<PopulationCase>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub objective: ObjectiveArgs,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
    pub theta: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub objective: ObjectiveArgs,
    /// Feasible set: `box(lo:hi,...)` or `ball(r;c1,...)`.
    #[arg(long, value_parser = parse_text::<FeasibleSet>)]
    pub set: FeasibleSet,
    /// Step schedule: `const(eta)` or `invsqrt(eta0)`.
    #[arg(long, value_parser = parse_text::<StepSchedule>, default_value = "invsqrt(1)")]
    pub schedule: StepSchedule,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
    pub theta0: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    pub iters: usize,
    /// Trace CSV destination (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum DiagCommand {
    /// Excess of the empirical oracle graph over a population graph.
    GraphExcess(GraphExcessArgs),
    /// Grid points that are critical for the objective on a feasible set.
    Crit(CritArgs),
}

#[derive(Debug, Args)]
pub struct GraphExcessArgs {
    #[command(flatten)]
    pub objective: ObjectiveArgs,
    /// Population case whose subdifferential is the reference.
    #[arg(long, value_parser = parse_text::<PopulationCase>)]
    pub population: PopulationCase,
    /// Scalar grid `lo:hi:points`.
    #[arg(long, value_parser = parse_grid, allow_hyphen_values = true)]
    pub grid: Grid,
    #[arg(long, default_value_t = 0.0)]
    pub pad: f64,
}

#[derive(Debug, Args)]
pub struct CritArgs {
    #[command(flatten)]
    pub objective: ObjectiveArgs,
    #[arg(long, value_parser = parse_text::<FeasibleSet>)]
    pub set: FeasibleSet,
    #[arg(long, value_parser = parse_grid, allow_hyphen_values = true)]
    pub grid: Grid,
    #[arg(long)]
    pub tol: f64,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Debug, Subcommand)]
pub enum ExperimentCommand {
    Relu(ReluArgs),
    Spurious(SpuriousArgs),
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct ExperimentIo {
    /// TOML config, or a summary.json from an earlier run.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory for trials.csv, summary.json and curves.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReluArgs {
    #[command(flatten)]
    pub io: ExperimentIo,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SpuriousArgs {
    #[command(flatten)]
    pub io: ExperimentIo,
    #[arg(long)]
    pub w: Option<f64>,
    #[arg(long = "M")]
    pub atom: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub curve_trials: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub io: ExperimentIo,
    #[arg(long, value_parser = parse_text::<SweepCase>)]
    pub case: Option<SweepCase>,
    #[arg(long, value_delimiter = ',')]
    pub ns: Option<Vec<usize>>,
    /// Number of seeds, taken as `seed, seed + 1, ...`.
    #[arg(long)]
    pub seeds: Option<u64>,
    #[arg(long)]
    pub pad: Option<f64>,
}

/// Seed from the flag, else the environment, else a fresh one (echoed on stderr).
pub fn resolve_seed(flag: Option<u64>) -> CliResult<u64> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    if let Ok(raw) = std::env::var(SEED_ENV) {
        return raw.trim().parse().map_err(|_| CliError::Usage(format!("{SEED_ENV}='{raw}' is not an unsigned integer")));
    }
    let seed: u64 = rand::random();
    eprintln!("seed: {seed}");
    Ok(seed)
}

fn require<'a, T>(value: &'a Option<T>, flag: &str, objective: ObjectiveKind) -> CliResult<&'a T> {
    value.as_ref().ok_or_else(|| CliError::Usage(format!("--{flag} is required for --objective {objective:?}")))
}

fn column(args: &ObjectiveArgs) -> Option<Column> {
    args.column.as_deref().map(Column::from)
}

/// Builds the objective; `seed` drives sampled data and random directions.
pub fn build_objective(args: &ObjectiveArgs, seed: u64) -> CliResult<Box<dyn Objective>> {
    let kind = args.objective;
    let col = column(args);
    let source = |spec: &Option<String>, flag: &str, stream: u64, dims: Option<usize>| -> CliResult<EmpiricalMeasureD> {
        data::resolve_source(require(spec, flag, kind)?, col.as_ref(), dims, args.n, seed, stream)
    };
    Ok(match kind {
        ObjectiveKind::Sr => {
            let loss = require(&args.loss, "loss", kind)?.clone();
            let xs = source(&args.data, "data", 0, Some(args.dims.unwrap_or(loss.input_dim())))?;
            Box::new(SpectralRisk { weight: require(&args.weight, "weight", kind)?.clone(), loss: Arc::new(loss), xs })
        }
        ObjectiveKind::Fr => Box::new(fairness_penalty(args, &source)?),
        ObjectiveKind::Erm => {
            let loss = require(&args.loss, "loss", kind)?.clone();
            let xs = source(&args.data, "data", 0, Some(args.dims.unwrap_or(loss.input_dim())))?;
            Box::new(RegularizedErm { loss: Arc::new(loss), lambda: args.lambda, xs, penalty: fairness_penalty(args, &source)? })
        }
        ObjectiveKind::Sw => {
            let gen = require(&args.model, "model", kind)?.clone();
            let xs = source(&args.data, "data", 0, Some(args.dims.unwrap_or(gen.input_dim())))?;
            let ys = source(&args.target, "target", 1, Some(gen.output_dim()))?;
            if args.directions == 0 {
                return Err(CliError::Usage("--directions must be at least 1".into()));
            }
            let sphere = SourceDistribution::UniformSphere(gen.output_dim());
            let dirs = sphere.sample_with(args.directions, &mut substream(seed, 10))?.into_cloud();
            let phis = dirs.points().map(<[f64]>::to_vec).collect();
            Box::new(SlicedWasserstein { gen: Arc::new(gen), xs, ys, phis, exec: Default::default() })
        }
        ObjectiveKind::Transport => {
            let model = args.model.clone().unwrap_or(BuiltinModel::Translation { dim: 1 });
            let target_model = args
                .target_model
                .clone()
                .unwrap_or(BuiltinModel::Identity { dim: model.output_dim(), param_dim: model.param_dim() });
            let xs = source(&args.data, "data", 0, Some(args.dims.unwrap_or(model.input_dim())))?;
            let ys = source(&args.target, "target", 1, Some(target_model.input_dim()))?;
            let unit = UnitCost::Power { q: args.q, scale: args.scale.unwrap_or(1.0 / args.q) };
            let cost = CompositeCost::new(Arc::new(model), Arc::new(target_model), unit)?;
            let mode = match args.mode {
                ModeArg::Sorted1d => PlanMode::Sorted1d,
                ModeArg::BruteForce => PlanMode::BruteForce,
            };
            Box::new(TransportObjective { cost, xs, ys, mode })
        }
        ObjectiveKind::Population => Box::new(PopulationObjective(*require(&args.case, "case", kind)?)),
    })
}

type SourceFn<'a> = dyn Fn(&Option<String>, &str, u64, Option<usize>) -> CliResult<EmpiricalMeasureD> + 'a;

fn fairness_penalty(args: &ObjectiveArgs, source: &SourceFn) -> CliResult<FairnessPenalty> {
    let score = require(&args.score, "score", args.objective)?.clone();
    let dims = Some(score.input_dim());
    Ok(FairnessPenalty {
        xs0: source(&args.group0, "group0", 2, dims)?,
        xs1: source(&args.group1, "group1", 3, dims)?,
        score: Arc::new(score),
    })
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn print_json(value: &Value) {
    println!("{}", serde_json::to_string(value).expect("finite values serialize"));
}

fn number_or_null(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}

fn ot1d(args: &Ot1dArgs) -> CliResult<()> {
    let col = args.column.as_deref().map(Column::from);
    let u = load_samples(&args.u, col.as_ref(), None)?.into_line()?;
    let v = load_samples(&args.v, col.as_ref(), None)?.into_line()?;
    let value = w_unequal(&u, &v, args.q)?;
    if let Some(path) = &args.plan {
        write_file(path, &monotone_plan(&u, &v)?.to_csv())?;
    }
    println!("{{\"w_q^q\": {}}}", number_or_null(value));
    Ok(())
}

fn eval(args: &EvalArgs, seed: u64) -> CliResult<()> {
    let obj = build_objective(&args.objective, seed)?;
    let value = obj.value(&args.theta)?;
    let grad = match obj.oracle(&args.theta) {
        Ok(g) => json!(g.into_inner()),
        Err(e) if e.is_kink() => {
            eprintln!("oracle undefined here: {e}");
            Value::Null
        }
        Err(e) => return Err(e.into()),
    };
    print_json(&json!({ "objective": obj.name(), "theta": args.theta, "value": number_or_null(value), "grad": grad, "seed": seed }));
    Ok(())
}

fn optimize(args: &OptimizeArgs, seed: u64) -> CliResult<()> {
    let obj = build_objective(&args.objective, seed)?;
    let trace = run_seeded(obj.as_ref(), &args.set, args.schedule, &args.theta0, args.iters, seed)?;
    let csv = trace.to_csv();
    match &args.out {
        Some(path) => write_file(path, &csv),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn graph_excess_cmd(args: &GraphExcessArgs, seed: u64) -> CliResult<()> {
    let obj = build_objective(&args.objective, seed)?;
    let case = args.population;
    let pop = move |t: &[f64]| case.subdifferential_vertices(t[0]);
    let excess = graph_excess(obj.as_ref(), &pop, &args.grid.0, args.pad)?;
    let graph = empirical_graph(obj.as_ref(), &args.grid.0, Default::default())?;
    let values: Vec<Value> = graph.entries.iter().map(|(t, g)| json!([t[0], g])).collect();
    print_json(&json!({
        "grid": args.grid.0.iter().map(|t| t[0]).collect::<Vec<_>>(),
        "values": values,
        "excess": number_or_null(excess),
        "seed": seed,
    }));
    Ok(())
}

fn crit(args: &CritArgs, seed: u64) -> CliResult<()> {
    let obj = build_objective(&args.objective, seed)?;
    let points = critical_set(obj.as_ref(), &args.set, &args.grid.0, args.tol)?;
    match args.format {
        Format::Json => print_json(&json!({ "critical": points.iter().map(|t| t[0]).collect::<Vec<_>>(), "tol": args.tol })),
        Format::Csv => {
            println!("theta");
            for t in points {
                println!("{:?}", t[0]);
            }
        }
    }
    Ok(())
}

/// Reads a TOML config or the `config` object of a summary.json.
fn read_config(path: &Path) -> CliResult<Value> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let value: Value = if path.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with('{') {
        let doc: Value = serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        doc.get("config").cloned().unwrap_or(doc)
    } else {
        let doc: toml::Value = toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        serde_json::to_value(doc).map_err(|e| CliError::Usage(e.to_string()))?
    };
    if !value.is_object() {
        return Err(CliError::Usage(format!("{}: config must be a table", path.display())));
    }
    Ok(value)
}

/// Merges file config, flag overrides and the seed, then deserializes.
fn experiment_config<T: serde::de::DeserializeOwned>(
    io: &ExperimentIo,
    overrides: Vec<(&str, Option<Value>)>,
    seed_flag: Option<u64>,
    has_seed: bool,
) -> CliResult<T> {
    let mut cfg = match &io.config {
        Some(path) => read_config(path)?,
        None => json!({}),
    };
    let map = cfg.as_object_mut().expect("checked to be an object");
    for (key, value) in overrides {
        if let Some(v) = value {
            map.insert(key.to_string(), v);
        }
    }
    if has_seed && (seed_flag.is_some() || !map.contains_key("seed")) {
        map.insert("seed".into(), json!(resolve_seed(seed_flag)?));
    }
    serde_json::from_value(cfg).map_err(|e| CliError::Usage(format!("invalid experiment config: {e}")))
}

fn emit_report(report: &ExperimentReport, out: Option<&Path>) -> CliResult<()> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
            write_file(&dir.join("trials.csv"), &report.trials_csv())?;
            write_file(&dir.join("summary.json"), &report.summary_json())?;
            if let Some(curves) = report.curves_csv() {
                write_file(&dir.join("curves.csv"), &curves)?;
            }
        }
        None => print!("{}", report.summary_json()),
    }
    Ok(())
}

fn experiment(cmd: &ExperimentCommand, seed_flag: Option<u64>) -> CliResult<()> {
    let opt = |v: Option<Value>| v;
    match cmd {
        ExperimentCommand::Relu(a) => {
            let cfg: ReluExperimentConfig = experiment_config(
                &a.io,
                vec![("n", opt(a.n.map(|v| json!(v)))), ("trials", opt(a.trials.map(|v| json!(v))))],
                seed_flag,
                true,
            )?;
            emit_report(&run_relu(&cfg)?, a.io.out.as_deref())
        }
        ExperimentCommand::Spurious(a) => {
            let cfg: SpuriousExperimentConfig = experiment_config(
                &a.io,
                vec![
                    ("w", a.w.map(|v| json!(v))),
                    ("M", a.atom.map(|v| json!(v))),
                    ("n", a.n.map(|v| json!(v))),
                    ("trials", a.trials.map(|v| json!(v))),
                    ("curve_trials", a.curve_trials.map(|v| json!(v))),
                ],
                seed_flag,
                true,
            )?;
            emit_report(&run_spurious(&cfg)?, a.io.out.as_deref())
        }
        ExperimentCommand::Sweep(a) => {
            let mut cfg: SweepConfig = experiment_config(
                &a.io,
                vec![
                    ("case", a.case.map(|c| serde_json::to_value(c).expect("enum serializes"))),
                    ("ns", a.ns.as_ref().map(|v| json!(v))),
                    ("pad", a.pad.map(|v| json!(v))),
                ],
                None,
                false,
            )?;
            // seeds are a list here; --seed/--seeds regenerate it as a range
            if seed_flag.is_some() || a.seeds.is_some() || a.io.config.is_none() {
                let base = if seed_flag.is_some() || a.io.config.is_none() { resolve_seed(seed_flag)? } else { cfg.seeds[0] };
                let count = a.seeds.unwrap_or(cfg.seeds.len() as u64);
                cfg.seeds = (0..count).map(|i| base.wrapping_add(i)).collect();
            }
            emit_report(&run_convergence_sweep(&cfg)?, a.io.out.as_deref())
        }
    }
}

/// Runs a parsed command line.
pub fn execute(cli: &Cli) -> CliResult<()> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        // fails only if a pool already exists, e.g. on a second call in-process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    let needs_seed = |cmd: &Command| !matches!(cmd, Command::Ot1d(_) | Command::Experiment(_));
    let seed = if needs_seed(&cli.command) { resolve_seed(cli.seed)? } else { 0 };
    match &cli.command {
        Command::Ot1d(a) => ot1d(a),
        Command::Eval(a) => eval(a, seed),
        Command::Optimize(a) => optimize(a, seed),
        Command::Diag(DiagCommand::GraphExcess(a)) => graph_excess_cmd(a, seed),
        Command::Diag(DiagCommand::Crit(a)) => crit(a, seed),
        Command::Experiment(cmd) => experiment(cmd, cli.seed),
    }
}

/// Entry point returning the process exit code: 0 success, 1 runtime or IO
/// failure, 2 usage error.
pub fn main_with<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
