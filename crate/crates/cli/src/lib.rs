//! Command-line front end for the `orthoplex` library.
//!
//! [`run`] parses an argument vector and returns the exit code together with
//! everything destined for stdout and stderr, so the binary is a thin shell
//! around it and tests can drive commands in-process.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use orthoplex::optimizer::{best_run, optimize_seeds, StopReason};
use orthoplex::temperature::{threshold_report, threshold_with_grid, DEFAULT_TOL, X_GRID};
use orthoplex::{
    build_block_code, build_entropy_code, build_orthoplex_subset, build_simplex, ce_loss,
    ce_selfdual_closed, coherence, collapse_metrics, concavity_threshold, convexity_threshold,
    crossover_scan, find_rattlers, hardmax_loss, margin, orthoplex_decompose, radon_partition,
    random_config, DimensionTuple, EntropyKind, FeatureSet, HardmaxConvention, OptimizeOptions,
    SphericalConfig, StepRule,
};
use serde_json::{json, Value};

pub mod verify;

#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct CommandResult {
    pub exit_code: i32,
    pub stdout: String,
    pub stderr: String,
}

#[derive(Debug)]
enum CliError {
    Core(orthoplex::Error),
    Io(String),
    Parse(String),
}

impl CliError {
    fn code(&self) -> &str {
        match self {
            CliError::Core(e) => e.code(),
            CliError::Io(_) => "io",
            CliError::Parse(_) => "parse",
        }
    }

    fn detail(&self) -> String {
        match self {
            CliError::Core(e) => e.to_string(),
            CliError::Io(s) | CliError::Parse(s) => s.clone(),
        }
    }
}

impl From<orthoplex::Error> for CliError {
    fn from(e: orthoplex::Error) -> Self {
        CliError::Core(e)
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "orthoplex", version, about = "Spherical codes, softmax codes and cross-entropy temperature analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Construct a configuration and print it as JSON.
    Build {
        #[command(subcommand)]
        kind: BuildKind,
    },
    /// Coherence, margin, rattlers and structure of a configuration.
    Analyze {
        #[arg(long)]
        config: PathBuf,
    },
    /// Cross-entropy (and optionally hardmax) loss.
    Loss(LossArgs),
    /// Optimal block tuple across a temperature range.
    Sweep(SweepArgs),
    /// Temperatures where f_{n,tau} turns concave / convex.
    Thresholds {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long, default_value_t = X_GRID)]
        x_grid: usize,
    },
    /// Riemannian gradient descent from seeded random starts.
    Optimize(OptimizeArgs),
    /// Run the built-in property suite.
    Verify {
        /// Fewer instances per check.
        #[arg(long)]
        quick: bool,
    },
}

#[derive(Subcommand, Debug)]
enum BuildKind {
    /// Regular simplex of q points in R^d.
    Simplex {
        #[arg(long)]
        q: usize,
        #[arg(long)]
        d: usize,
    },
    /// First n vertices of the cross-polytope in R^d.
    Orthoplex {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        n: usize,
    },
    /// Low- or high-entropy block code.
    Entropy {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value = "low")]
        kind: EntropyKind,
    },
    /// Orthogonal sum of simplices for a tuple such as 3+1+1.
    Block {
        #[arg(long)]
        tuple: DimensionTuple,
    },
    /// Seeded Gaussian configuration, normalized.
    Random {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args, Debug)]
struct LossArgs {
    /// Class weight configuration; features default to H = W.
    #[arg(long)]
    config: Option<PathBuf>,
    /// FeatureSet JSON; its weights are used and --config is ignored.
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long, required = true, num_args = 1..)]
    tau: Vec<f64>,
    /// Also report the self-dual closed form for this tuple.
    #[arg(long)]
    closed_form: Option<DimensionTuple>,
    #[arg(long)]
    hardmax: bool,
    #[arg(long, default_value = "negated")]
    convention: HardmaxConvention,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    d: usize,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    tau_lo: f64,
    #[arg(long)]
    tau_hi: f64,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    /// Write the per-temperature loss table here.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StepKind {
    Armijo,
    Fixed,
}

#[derive(Args, Debug)]
struct OptimizeArgs {
    #[arg(long)]
    d: usize,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    m: usize,
    #[arg(long)]
    tau: f64,
    /// Number of runs; seeds are seed_base .. seed_base + seeds.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    seed_base: u64,
    #[arg(long, default_value_t = 10_000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-14)]
    grad_tol: f64,
    #[arg(long, value_enum, default_value_t = StepKind::Armijo)]
    step_rule: StepKind,
    /// Initial trial step (armijo) or constant step (fixed).
    #[arg(long, default_value_t = 1.0)]
    step: f64,
    /// Tuple for the gram_error_reference metric; defaults to the low-entropy tuple.
    #[arg(long)]
    reference: Option<DimensionTuple>,
    /// Directory for trajectories, final iterates and the run manifest.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

/// Parses `argv` (including the program name) and executes it.
pub fn run<I, T>(argv: I) -> CommandResult
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            let code = e.exit_code();
            return if code == 0 {
                CommandResult { exit_code: 0, stdout: text, stderr: String::new() }
            } else {
                CommandResult { exit_code: code, stdout: String::new(), stderr: text }
            };
        }
    };
    let mut out = CommandResult::default();
    let status = match cli.command {
        Command::Build { kind } => cmd_build(kind, &mut out),
        Command::Analyze { config } => cmd_analyze(&config, &mut out),
        Command::Loss(args) => cmd_loss(args, &mut out),
        Command::Sweep(args) => cmd_sweep(args, &mut out),
        Command::Thresholds { n, tol, x_grid } => cmd_thresholds(n, tol, x_grid, &mut out),
        Command::Optimize(args) => cmd_optimize(args, &mut out),
        Command::Verify { quick } => {
            let ok = verify::run_suite(quick, &mut |line| emit(&mut out, &line));
            if !ok {
                out.exit_code = 1;
            }
            Ok(())
        }
    };
    if let Err(e) = status {
        out.exit_code = 1;
        emit(&mut out, &json!({ "error": e.code(), "detail": e.detail() }));
    }
    out
}

fn emit(out: &mut CommandResult, v: &Value) {
    out.stdout.push_str(&v.to_string());
    out.stdout.push('\n');
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("library types serialize")
}

fn cmd_build(kind: BuildKind, out: &mut CommandResult) -> CliResult<()> {
    let config = match kind {
        BuildKind::Simplex { q, d } => build_simplex(q, d)?,
        BuildKind::Orthoplex { d, n } => build_orthoplex_subset(d, n)?,
        BuildKind::Entropy { d, n, kind } => build_entropy_code(d, n, kind)?.0,
        BuildKind::Block { tuple } => build_block_code(&tuple)?,
        BuildKind::Random { d, n, seed } => random_config(d, n, seed)?,
    };
    emit(out, &to_value(&config));
    Ok(())
}

fn cmd_analyze(path: &Path, out: &mut CommandResult) -> CliResult<()> {
    let x: SphericalConfig = read_json(path)?;
    let alpha = coherence(&x)?;
    let m = margin(&x)?;
    let r = find_rattlers(&x)?;
    let decomposition = orthoplex_decompose(&x).ok().map(|b| to_value(&b));
    let radon = radon_partition(&x).ok().map(|p| to_value(&p));
    emit(
        out,
        &json!({
            "d": x.d(),
            "n": x.n(),
            "coherence": alpha,
            "margin": m.margin,
            "distances": m.distances,
            "softmax_rattlers": r.softmax,
            "tammes_rattlers": r.tammes,
            "decomposition": decomposition,
            "radon": radon,
        }),
    );
    Ok(())
}

fn cmd_loss(args: LossArgs, out: &mut CommandResult) -> CliResult<()> {
    let fs = match (&args.features, &args.config) {
        (Some(p), _) => Some(read_json::<FeatureSet>(p)?),
        (None, Some(p)) => Some(FeatureSet::self_dual(read_json::<SphericalConfig>(p)?, 1)?),
        (None, None) => None,
    };
    if fs.is_none() && args.closed_form.is_none() {
        return Err(CliError::Core(orthoplex::Error::Argument(
            "loss needs --config, --features or --closed-form".into(),
        )));
    }
    let hardmax = match (&fs, args.hardmax) {
        (Some(fs), true) => Some(hardmax_loss(fs, args.convention)?),
        (None, true) => {
            return Err(CliError::Core(orthoplex::Error::Argument(
                "--hardmax needs --config or --features".into(),
            )))
        }
        _ => None,
    };
    for &tau in &args.tau {
        let mut line = serde_json::Map::new();
        line.insert("tau".into(), json!(tau));
        if let Some(fs) = &fs {
            line.insert("loss".into(), json!(ce_loss(fs, tau)?));
        }
        if let Some(t) = &args.closed_form {
            let n = fs.as_ref().map_or(t.points(), FeatureSet::n);
            line.insert("tuple".into(), json!(t.to_string()));
            line.insert("closed_form".into(), json!(ce_selfdual_closed(t, n, tau)?));
        }
        if let Some(h) = hardmax {
            line.insert("hardmax".into(), json!(h));
            line.insert("convention".into(), json!(args.convention.to_string()));
        }
        emit(out, &Value::Object(line));
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs, out: &mut CommandResult) -> CliResult<()> {
    let report = crossover_scan(args.d, args.n, args.tau_lo, args.tau_hi, args.tol)?;
    if let Some(path) = &args.csv {
        write_file(path, &report.to_csv())?;
    }
    let mut v = report.threshold_json();
    v["d"] = json!(report.d);
    v["tuples"] = json!(report.tuples.iter().map(ToString::to_string).collect::<Vec<_>>());
    emit(out, &v);
    Ok(())
}

fn cmd_thresholds(n: usize, tol: f64, x_grid: usize, out: &mut CommandResult) -> CliResult<()> {
    let (conc, conv) = if x_grid == X_GRID {
        (concavity_threshold(n, tol)?, convexity_threshold(n, tol)?)
    } else {
        (threshold_with_grid(n, tol, x_grid, true)?, threshold_with_grid(n, tol, x_grid, false)?)
    };
    emit(out, &threshold_report(n, conc, conv, &[]));
    Ok(())
}

fn cmd_optimize(args: OptimizeArgs, out: &mut CommandResult) -> CliResult<()> {
    let reference = match args.reference {
        Some(t) => t,
        None => DimensionTuple::low_entropy(args.d, args.n)?,
    };
    let step_rule = match args.step_rule {
        StepKind::Armijo => StepRule::Armijo { initial: args.step },
        StepKind::Fixed => StepRule::Fixed { step: args.step },
    };
    let opts = OptimizeOptions {
        tau: args.tau,
        max_iters: args.max_iters,
        grad_tol: args.grad_tol,
        step_rule,
        record_history: args.out_dir.is_some(),
    };
    let seeds: Vec<u64> = (args.seed_base..args.seed_base + args.seeds).collect();
    let states = optimize_seeds(args.d, args.n, args.m, &seeds, &opts)?;
    if let Some(dir) = &args.out_dir {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        write_file(
            &dir.join("manifest.json"),
            &json!({
                "seeds": seeds,
                "tau": args.tau,
                "d": args.d,
                "n": args.n,
                "m": args.m,
                "max_iters": args.max_iters,
                "grad_tol": args.grad_tol,
                "step_rule": to_value(&step_rule),
            })
            .to_string(),
        )?;
    }
    for (seed, st) in seeds.iter().zip(&states) {
        let metrics = collapse_metrics(st, &reference)?;
        if let Some(dir) = &args.out_dir {
            write_file(&dir.join(format!("trajectory_seed{seed}.csv")), &st.trajectory_csv())?;
            write_file(&dir.join(format!("final_seed{seed}.json")), &to_value(&st.iterate).to_string())?;
        }
        emit(
            out,
            &json!({
                "seed": seed,
                "loss": st.loss,
                "grad_norm": st.grad_norm,
                "iterations": st.step,
                "stop": to_value(&st.stop),
                "metrics": to_value(&metrics),
            }),
        );
        if st.stop == StopReason::LineSearch {
            out.stderr.push_str(&format!("seed {seed}: line search stalled at iteration {}\n", st.step));
        }
    }
    if let Some(i) = best_run(&states) {
        let metrics = collapse_metrics(&states[i], &reference)?;
        emit(
            out,
            &json!({
                "best_seed": seeds[i],
                "loss": states[i].loss,
                "reference": reference.to_string(),
                "metrics": to_value(&metrics),
            }),
        );
    }
    Ok(())
}
