//! `mcse`: single estimation runs, benchmark grids and hyperparameter sweeps.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mcse_core::bench::{
    build_method_model, estimate_traced, run_benchmark, summarize, summary_markdown, sweep_hyperparameters,
    write_outputs, BenchConfig, EstimateOptions, Method,
};
use mcse_core::bnb::BnbLimits;
use mcse_core::measgen::NoiseSpec;
use mcse_core::models::RegScaling;
use mcse_core::netmodel::load_case;
use mcse_core::scenario::{Scenario, ScenarioConfig};
use mcse_core::CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Conic(#[from] mcse_conic::ConicError),
    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

type Result<T> = std::result::Result<T, CliError>;

/// Matrix-completion state estimation for low-observability distribution feeders
#[derive(Parser, Debug)]
#[command(name = "mcse", version, about)]
struct Cli {
    /// More log output (-v info, -vv debug)
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate the state of one scenario
    Estimate(EstimateArgs),
    /// Run a benchmark grid from a JSON config
    Benchmark {
        #[arg(long)]
        config: PathBuf,
        /// Directory for records.csv, summary.csv and summary.md
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (0 = all cores); overrides the config
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run the S1 (d, n_d) sweep from a JSON config
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Also write records and summaries here
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    M1,
    M2,
    Full,
    S1,
    S2,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::M1 => Method::M1,
            MethodArg::M2 => Method::M2,
            MethodArg::Full => Method::Full,
            MethodArg::S1 => Method::S1,
            MethodArg::S2 => Method::S2,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ScalingArg {
    Normalized,
    Multiply,
    Divide,
}

impl From<ScalingArg> for RegScaling {
    fn from(s: ScalingArg) -> Self {
        match s {
            ScalingArg::Normalized => RegScaling::Normalized,
            ScalingArg::Multiply => RegScaling::Multiply,
            ScalingArg::Divide => RegScaling::Divide,
        }
    }
}

#[derive(Args, Debug)]
struct EstimateArgs {
    /// Built-in case (four-bus, case141, synthetic533) or a case file
    #[arg(long)]
    case: String,
    #[arg(long, value_enum, alias = "strategy", default_value = "s1")]
    method: MethodArg,
    /// Fraction of observed entries of the measurement matrix
    #[arg(long, default_value_t = 0.32)]
    fad: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Rank of the projection
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 10.0)]
    lambda: f64,
    #[arg(long, value_enum, default_value = "normalized")]
    scaling: ScalingArg,
    /// Submatrix size
    #[arg(long, default_value_t = 5)]
    d: usize,
    /// Submatrix cap (default: one per entry of X)
    #[arg(long)]
    nd: Option<usize>,
    /// Noise radius of M1 (default from the noise model)
    #[arg(long)]
    delta: Option<f64>,
    /// Relative noise of the voltage phasor columns
    #[arg(long, default_value_t = 0.005)]
    noise_v: f64,
    /// Relative noise of the magnitude column
    #[arg(long, default_value_t = 0.001)]
    noise_mag: f64,
    /// Relative noise of the power columns
    #[arg(long, default_value_t = 0.01)]
    noise_s: f64,
    /// Multiplier on every load
    #[arg(long, default_value_t = 1.0)]
    load_scale: f64,
    /// Relative solver tolerance (default depends on the case size)
    #[arg(long)]
    tol: Option<f64>,
    /// Time limit in seconds (per search for s2)
    #[arg(long)]
    time_limit: Option<f64>,
    /// Node budget for s2
    #[arg(long, default_value_t = 50)]
    max_nodes: usize,
    /// Relative gap tolerance for s2
    #[arg(long, default_value_t = 1e-3)]
    gap: f64,
    /// Projection residual accepted as rank-k for s2
    #[arg(long, default_value_t = 1e-4)]
    eps_proj: f64,
    /// Stream the s2 search trace as JSON lines
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write the conic program as JSON and exit
    #[arg(long)]
    dump_model: Option<PathBuf>,
    /// Print the full result as JSON
    #[arg(long)]
    json: bool,
}

fn create(path: &PathBuf) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|source| CliError::File {
        path: path.clone(),
        source,
    })
}

fn load_config(path: &PathBuf, workers: Option<usize>) -> Result<BenchConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::File {
        path: path.clone(),
        source,
    })?;
    let mut cfg = BenchConfig::from_json(&text)?;
    if let Some(w) = workers {
        cfg.workers = w;
    }
    Ok(cfg)
}

fn run_estimate(a: &EstimateArgs) -> Result<()> {
    let case = load_case(&a.case)?;
    let scenario = Scenario::generate(
        &case,
        &ScenarioConfig {
            fad: a.fad,
            seed: a.seed,
            noise: NoiseSpec::new(a.noise_v, a.noise_mag, a.noise_s),
            load_scale: a.load_scale,
            ..ScenarioConfig::default()
        },
    )?;
    let mut opts = EstimateOptions {
        k: a.k,
        lambda: a.lambda,
        scaling: a.scaling.into(),
        d: a.d,
        n_d: a.nd,
        delta: a.delta,
        solver_tol: a.tol,
        time_limit: a.time_limit,
        bnb: BnbLimits {
            max_nodes: a.max_nodes,
            gap_tol: a.gap,
            eps_proj: a.eps_proj,
            ..BnbLimits::default()
        },
        ..EstimateOptions::default()
    };
    if let Some(t) = a.time_limit {
        opts.bnb.time_limit = Duration::from_secs_f64(t);
    }
    let method: Method = a.method.into();

    if let Some(path) = &a.dump_model {
        let plan = if method.uses_plan() { Some(opts.plan(&scenario)?) } else { None };
        let model = build_method_model(method, &scenario, &opts, plan.as_ref())?;
        let mut w = create(path)?;
        w.write_all(model.program.to_json()?.as_bytes())?;
        w.flush()?;
        println!(
            "wrote {} ({} variables, {} constraints)",
            path.display(),
            model.program.num_vars(),
            model.program.num_constraints()
        );
        return Ok(());
    }

    let mut trace = a.trace.as_ref().map(create).transpose()?;
    let est = estimate_traced(method, &scenario, &opts, trace.as_mut().map(|w| w as &mut dyn Write))?;
    if let Some(mut w) = trace {
        w.flush()?;
    }
    if a.json {
        let mut out = std::io::stdout().lock();
        return match writeln!(out, "{}", serde_json::to_string_pretty(&est.result)?) {
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
            r => Ok(r?),
        };
    }
    let r = &est.result;
    println!("case          {} ({} load buses)", case.name, scenario.n());
    println!("method        {method}");
    println!("fad / seed    {} / {}", a.fad, a.seed);
    if let Some(n_d) = est.n_d {
        println!("submatrices   {n_d} of size {}", a.d.min(scenario.n() + 5));
    }
    println!("status        {}", est.bnb_status.map_or(r.status.as_str(), |s| s.as_str()));
    println!("objective     {:.6}", r.objective);
    println!("MAPE |v|      {:.4} %", r.mape);
    println!("phasor error  {:.4} %", r.phasor_mape);
    if let Some(s) = &est.bnb {
        println!("nodes         {}", s.nodes);
        println!("root bound    {:.6}", s.root_bound);
        if let Some(gap) = s.gap {
            println!("gap           {gap:.4}");
        }
    }
    println!("wall time     {:.3} s", est.wall_time);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let outcome = match &cli.command {
        Command::Estimate(a) => run_estimate(a),
        Command::Benchmark { config, out, workers } => load_config(config, *workers).and_then(|cfg| {
            let records = run_benchmark(&cfg)?;
            let rows = write_outputs(out, &records)?;
            print!("{}", summary_markdown(&rows));
            Ok(())
        }),
        Command::Sweep { config, out, workers } => load_config(config, *workers).and_then(|cfg| {
            let records = sweep_hyperparameters(&cfg)?;
            let rows = match out {
                Some(dir) => write_outputs(dir, &records)?,
                None => summarize(&records),
            };
            print!("{}", summary_markdown(&rows));
            Ok(())
        }),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
