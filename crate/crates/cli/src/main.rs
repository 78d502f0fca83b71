//! `ridgeline`: sample, evaluate and analyze black-box simulations with a
//! one-dimensional active subspace.
//!
//! Exit codes: 0 success, 1 usage, 2 data or schema, 3 numerical
//! degeneracy, 4 evaluator failure.

mod analysis;
mod svg;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use ridgeline_core::active_subspace::apply_sign_convention;
use ridgeline_core::campaign::{evaluate_campaign, Condition, ConstantEvaluator, ExternalCommand, Link, SyntheticRidge};
use ridgeline_core::hyshot::{self, FlowRatios, REFERENCE_T0H0};
use ridgeline_core::uq::CdfOptions;
use ridgeline_core::{rng, Campaign, Error, ErrorClass, Evaluator, ParameterSpace};

use analysis::Source;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Insufficient(String),
    PartialFailure(String),
    Core(Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Insufficient(_) => 2,
            CliError::PartialFailure(_) => 4,
            CliError::Core(e) => match e.class() {
                ErrorClass::Usage => 1,
                ErrorClass::Data => 2,
                ErrorClass::Numerical => 3,
                ErrorClass::Evaluator => 4,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Insufficient(m) | CliError::PartialFailure(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

#[derive(Parser)]
#[command(name = "ridgeline", version, about = "Active-subspace uncertainty quantification for black-box simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Inspect parameter-space files
    #[command(subcommand)]
    Space(SpaceCommand),
    /// Draw a uniform design and write a campaign of pending runs
    Sample(SampleArgs),
    /// Evaluate the pending runs of a campaign
    Run(RunArgs),
    /// Fit the active direction, bootstrap it and run the requested analyses
    Analyze(AnalyzeArgs),
    /// Estimate the output range from the two extreme corners
    Range(RangeArgs),
    /// Invert an output threshold into safe parameter ranges
    Safeset(SafeSetArgs),
    /// Estimate the output CDF through the quadratic surrogate
    Cdf(CdfArgs),
    /// HyShot II inflow arithmetic
    #[command(subcommand)]
    Scenario(ScenarioCommand),
}

#[derive(Subcommand)]
enum SpaceCommand {
    /// Check a space file and print its parameters
    Validate { file: PathBuf },
    /// Write the bundled seven-parameter HyShot II space
    Hyshot {
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct OutDir {
    /// Output directory
    #[arg(long, env = "RIDGELINE_OUT", default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    space: PathBuf,
    /// Number of samples
    #[arg(short = 'M', value_parser = clap::value_parser!(u64).range(1..))]
    samples: u64,
    #[arg(long)]
    seed: u64,
    /// Operating-condition metadata, KEY=VALUE (VALUE parsed as JSON when possible)
    #[arg(long = "condition", value_name = "KEY=VALUE")]
    conditions: Vec<String>,
    /// Campaign file to write [default: <out>/campaign.json]
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Args, Default)]
struct EvaluatorArgs {
    /// Built-in evaluator: ridge:<linear|cubic|logistic|quadratic> or constant:<value>
    #[arg(long, conflicts_with = "command")]
    evaluator: Option<String>,
    /// Seed of the random ridge direction
    #[arg(long)]
    wtrue_seed: Option<u64>,
    /// Explicit ridge direction, comma separated (normalized on input)
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "wtrue_seed")]
    wtrue: Option<Vec<f64>>,
    /// Deterministic noise amplitude added to the ridge
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// External evaluator program
    #[arg(long)]
    command: Option<String>,
    /// Argument passed to the external program (repeatable)
    #[arg(long = "arg", allow_hyphen_values = true, requires = "command")]
    command_args: Vec<String>,
    /// Send HyShot solver boundary conditions instead of raw parameters
    #[arg(long, requires = "command")]
    inflow: bool,
    /// Per-run time limit for the external program, seconds
    #[arg(long, requires = "command")]
    timeout: Option<f64>,
}

#[derive(Args)]
struct RunArgs {
    campaign: PathBuf,
    #[command(flatten)]
    evaluator: EvaluatorArgs,
    #[arg(long, default_value_t = 1)]
    max_concurrency: usize,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Campaign JSON, or a CSV dataset with header x1..xm,f
    campaign: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Bootstrap replicates
    #[arg(short = 'N', default_value_t = 100)]
    bootstrap: usize,
    /// Evaluate the two extreme corners and report the output range
    #[arg(long)]
    corners: bool,
    #[command(flatten)]
    evaluator: EvaluatorArgs,
    /// Output threshold for the safe set
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, default_value_t = 0.99)]
    level: f64,
    /// Estimate the output CDF
    #[arg(long)]
    cdf: bool,
    /// Monte Carlo samples for the CDF
    #[arg(long = "n", default_value_t = 5000)]
    n_cdf: usize,
    #[arg(long, default_value_t = 512)]
    grid: usize,
    /// Also write SVG plots
    #[arg(long)]
    svg: bool,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Args)]
struct RangeArgs {
    campaign: PathBuf,
    #[command(flatten)]
    evaluator: EvaluatorArgs,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Args)]
struct SafeSetArgs {
    campaign: PathBuf,
    #[arg(long)]
    threshold: f64,
    #[arg(long, default_value_t = 0.99)]
    level: f64,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Args)]
struct CdfArgs {
    campaign: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long = "n", default_value_t = 5000)]
    n_cdf: usize,
    #[arg(long, default_value_t = 512)]
    grid: usize,
    /// Kernel bandwidth [default: Silverman's rule]
    #[arg(long)]
    bandwidth: Option<f64>,
    #[arg(long)]
    svg: bool,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Subcommand)]
enum ScenarioCommand {
    /// Fit T0 against H0 over the shot table
    ShotsFit {
        /// Shot table CSV [default: bundled HEG shots]
        #[arg(long)]
        shots: Option<PathBuf>,
        /// Ignore the exclusion flags
        #[arg(long)]
        all: bool,
    },
    /// Physical inflow record for a normalized point or a campaign run
    Inflow {
        #[arg(long)]
        space: Option<PathBuf>,
        /// Normalized point, comma separated
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "campaign")]
        x: Option<Vec<f64>>,
        #[arg(long, requires = "run")]
        campaign: Option<PathBuf>,
        #[arg(long)]
        run: Option<usize>,
    },
    /// Recompute the published scenario numbers
    Check,
}

fn parse_conditions(items: &[String]) -> Result<Condition, CliError> {
    let mut cond = Condition::new();
    for item in items {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("condition {item:?} is not KEY=VALUE")))?;
        let value = serde_json::from_str(v).unwrap_or_else(|_| serde_json::Value::String(v.to_string()));
        cond.insert(k.trim().to_string(), value);
    }
    Ok(cond)
}

fn build_evaluator(args: &EvaluatorArgs, space: &ParameterSpace) -> Result<Box<dyn Evaluator>, CliError> {
    if let Some(program) = &args.command {
        let mut cmd = ExternalCommand::new(program.clone(), args.command_args.clone())?;
        if let Some(t) = args.timeout {
            if !(t > 0.0 && t.is_finite()) {
                return Err(CliError::Usage(format!("--timeout {t} must be positive")));
            }
            cmd = cmd.with_timeout(Some(Duration::from_secs_f64(t)));
        }
        if args.inflow {
            let names = space.names();
            if names != hyshot::PARAMETER_NAMES {
                return Err(Error::Schema(format!("--inflow needs the HyShot parameters {:?}", hyshot::PARAMETER_NAMES)).into());
            }
            cmd = cmd.with_hyshot_inflow();
        }
        return Ok(Box::new(cmd));
    }
    let Some(spec) = &args.evaluator else {
        return Err(CliError::Usage("no evaluator: pass --evaluator ridge:<link>|constant:<c> or --command <program>".into()));
    };
    let (kind, value) = spec.split_once(':').unwrap_or((spec.as_str(), ""));
    match kind {
        "constant" => {
            let c: f64 = value
                .parse()
                .map_err(|_| CliError::Usage(format!("constant evaluator needs a number, got {value:?}")))?;
            Ok(Box::new(ConstantEvaluator(c)))
        }
        "ridge" => {
            let link: Link = value.parse()?;
            let m = space.dim();
            let (mut w, noise_seed) = match (&args.wtrue, args.wtrue_seed) {
                (Some(w), _) => {
                    if w.len() != m {
                        return Err(Error::Dimension { expected: m, got: w.len() }.into());
                    }
                    let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if !(norm > 0.0) {
                        return Err(CliError::Usage("--wtrue must be nonzero".into()));
                    }
                    (w.iter().map(|v| v / norm).collect(), 0)
                }
                (None, Some(seed)) => (rng::random_unit_vector(m, seed), seed),
                (None, None) => return Err(CliError::Usage("ridge evaluator needs --wtrue-seed or --wtrue".into())),
            };
            apply_sign_convention(&mut w);
            Ok(Box::new(SyntheticRidge::new(w, link, args.noise)?.with_noise_seed(noise_seed)))
        }
        other => Err(CliError::Usage(format!("unknown evaluator kind {other:?}"))),
    }
}

fn cmd_space(cmd: SpaceCommand) -> Result<(), CliError> {
    match cmd {
        SpaceCommand::Validate { file } => {
            let space = ParameterSpace::load(&file)?;
            println!("{}: m = {}", file.display(), space.dim());
            for p in space.params() {
                println!("  {:<24} [{}, {}] nominal {} {}", p.name, p.min, p.max, p.nominal, p.units);
            }
        }
        SpaceCommand::Hyshot { output } => {
            let json = ParameterSpace::hyshot().to_json();
            match output {
                Some(path) => std::fs::write(path, json + "\n")?,
                None => println!("{json}"),
            }
        }
    }
    Ok(())
}

fn cmd_sample(args: SampleArgs) -> Result<(), CliError> {
    let space = ParameterSpace::load(&args.space)?;
    let condition = parse_conditions(&args.conditions)?;
    let campaign = Campaign::sample(space, args.samples as usize, args.seed, condition)?;
    let path = args.output.unwrap_or_else(|| args.out.out.join("campaign.json"));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    campaign.save(&path)?;
    println!("{}: {} pending runs, m = {}", path.display(), campaign.runs.len(), campaign.dim());
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    if args.max_concurrency == 0 {
        return Err(CliError::Usage("--max-concurrency must be at least 1".into()));
    }
    let mut campaign = Campaign::load(&args.campaign)?;
    let evaluator = build_evaluator(&args.evaluator, &campaign.space)?;
    let path = args.campaign.clone();
    let summary = evaluate_campaign(&mut campaign, evaluator.as_ref(), args.max_concurrency, |c| c.save(&path));
    // failed records are written even when every run failed
    campaign.save(&path)?;
    let summary = summary?;
    println!(
        "{}: {} attempted, {} done, {} failed",
        path.display(),
        summary.attempted,
        summary.done,
        summary.failed
    );
    if summary.failed > 0 {
        return Err(CliError::PartialFailure(format!(
            "{} of {} runs failed; see the diagnostic field of the failed runs and rerun to retry",
            summary.failed, summary.attempted
        )));
    }
    Ok(())
}

fn require_level(level: f64) -> Result<(), CliError> {
    if level > 0.5 && level < 1.0 {
        Ok(())
    } else {
        Err(CliError::Usage(format!("--level {level} must lie in (0.5, 1)")))
    }
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<(), CliError> {
    require_level(args.level)?;
    if args.bootstrap == 0 {
        return Err(CliError::Usage("-N must be at least 1".into()));
    }
    let out = args.out.out.as_path();
    let mut source = Source::open(&args.campaign)?;
    let evaluator = if args.corners { Some(build_evaluator(&args.evaluator, &source.campaign.space)?) } else { None };

    let fit = analysis::fit_direction(&source.campaign)?;
    let dir = analysis::direction_reports(&source.campaign, &fit, args.bootstrap, args.seed, out)?;

    let needs_surrogate = args.threshold.is_some() || args.cdf || args.svg;
    let surrogate = match analysis::fit_surrogate(&fit) {
        Ok(s) => {
            analysis::surrogate_report(&s, out)?;
            Some(s)
        }
        Err(e) if !needs_surrogate => {
            eprintln!("warning: no quadratic surrogate: {e}");
            None
        }
        Err(e) => return Err(e),
    };

    let range = match &evaluator {
        Some(ev) => Some(analysis::corner_range(&mut source, &fit, dir.summary.discordant_pairs, ev.as_ref(), out)?),
        None => None,
    };
    if let (Some(threshold), Some(s)) = (args.threshold, &surrogate) {
        analysis::safe_set(&source.campaign, &fit, s, threshold, args.level, out)?;
    }
    let cdf = match (&surrogate, args.cdf) {
        (Some(s), true) => {
            let options = CdfOptions { n_samples: args.n_cdf, grid_size: args.grid, ..CdfOptions::default() };
            Some(analysis::cdf(&fit, s, args.seed, options, out)?)
        }
        _ => None,
    };
    if args.svg {
        analysis::write(out, "summary.svg", &analysis::summary_svg(&fit, &dir, surrogate.as_ref(), range.as_ref()))?;
        if let Some(est) = &cdf {
            analysis::write(out, "cdf.svg", &analysis::cdf_svg(est))?;
        }
    }
    Ok(())
}

fn cmd_range(args: RangeArgs) -> Result<(), CliError> {
    let mut source = Source::open(&args.campaign)?;
    let evaluator = build_evaluator(&args.evaluator, &source.campaign.space)?;
    let fit = analysis::fit_direction(&source.campaign)?;
    let summary = ridgeline_core::active_subspace::summary_data(&fit.xs, &fit.fs, &fit.active, None)?;
    analysis::corner_range(&mut source, &fit, summary.discordant_pairs, evaluator.as_ref(), &args.out.out)?;
    Ok(())
}

fn cmd_safeset(args: SafeSetArgs) -> Result<(), CliError> {
    require_level(args.level)?;
    let source = Source::open(&args.campaign)?;
    let fit = analysis::fit_direction(&source.campaign)?;
    let s = analysis::fit_surrogate(&fit)?;
    analysis::safe_set(&source.campaign, &fit, &s, args.threshold, args.level, &args.out.out)?;
    Ok(())
}

fn cmd_cdf(args: CdfArgs) -> Result<(), CliError> {
    let source = Source::open(&args.campaign)?;
    let fit = analysis::fit_direction(&source.campaign)?;
    let s = analysis::fit_surrogate(&fit)?;
    let options = CdfOptions {
        n_samples: args.n_cdf,
        grid_size: args.grid,
        bandwidth: args.bandwidth,
        ..CdfOptions::default()
    };
    let est = analysis::cdf(&fit, &s, args.seed, options, &args.out.out)?;
    if args.svg {
        analysis::write(&args.out.out, "cdf.svg", &analysis::cdf_svg(&est))?;
    }
    Ok(())
}

fn load_space(path: Option<&Path>) -> Result<ParameterSpace, CliError> {
    Ok(match path {
        Some(p) => ParameterSpace::load(p)?,
        None => ParameterSpace::hyshot(),
    })
}

fn cmd_scenario(cmd: ScenarioCommand) -> Result<(), CliError> {
    match cmd {
        ScenarioCommand::ShotsFit { shots, all } => {
            let mut records = match shots {
                Some(p) => hyshot::load_shots(p)?,
                None => hyshot::bundled_shots(),
            };
            if all {
                records.iter_mut().for_each(|s| s.excluded = false);
            }
            let fit = hyshot::fit_t0_h0(&records)?;
            println!("{}", serde_json::to_string_pretty(&fit).expect("serializes"));
        }
        ScenarioCommand::Inflow { space, x, campaign, run } => {
            let (space, x) = match (campaign, x) {
                (Some(path), _) => {
                    let c = Campaign::load(&path)?;
                    let i = run.expect("clap enforces --run");
                    let r = c
                        .runs
                        .get(i)
                        .ok_or_else(|| CliError::Usage(format!("campaign has no run {i}")))?;
                    (c.space.clone(), r.x.clone())
                }
                (None, x) => {
                    let space = load_space(space.as_deref())?;
                    let x = x.unwrap_or_else(|| vec![0.0; space.dim()]);
                    (space, x)
                }
            };
            let inflow = hyshot::build_inflow(&x, &space, &FlowRatios::default(), &REFERENCE_T0H0)?;
            if inflow.laminar {
                eprintln!("warning: zero turbulence intensity, laminar inflow");
            }
            let mut value = serde_json::to_value(&inflow).expect("serializes");
            value["params"] = inflow.solver_params();
            println!("{}", serde_json::to_string_pretty(&value).expect("serializes"));
        }
        ScenarioCommand::Check => {
            let checks = hyshot::reproduction_checks()?;
            let passed = checks.iter().filter(|c| c.pass).count();
            for c in &checks {
                println!(
                    "{}  {:<38} computed {:<22} expected {} (tol {})",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.name,
                    c.computed,
                    c.expected,
                    c.tolerance
                );
            }
            println!("{passed}/{} reproduced", checks.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Space(c) => cmd_space(c),
        Command::Sample(a) => cmd_sample(a),
        Command::Run(a) => cmd_run(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Range(a) => cmd_range(a),
        Command::Safeset(a) => cmd_safeset(a),
        Command::Cdf(a) => cmd_cdf(a),
        Command::Scenario(c) => cmd_scenario(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
