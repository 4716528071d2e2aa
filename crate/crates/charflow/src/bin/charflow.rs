//! Command-line front end: one job per invocation, driven by a JSON
//! config, with machine-readable outputs.
//!
//! Exit codes: 0 on success (including an `unknown` verdict), 2 for
//! config validation problems, 1 for engine errors. Wall-clock timings
//! go to `timings.json` next to the report so `report.json` itself is
//! byte-identical across reruns of the same config and seed.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use charflow::config::{JobConfig, Mode};
use charflow::report::{emit_report, run_job};
use charflow::Error;

#[derive(Parser)]
#[command(
    name = "charflow",
    about = "Symbolic-numeric analyzer for systems of vector fields",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, clap::Args)]
struct JobArgs {
    /// JSON job configuration
    #[arg(long)]
    config: PathBuf,
    /// output directory (default: current directory)
    #[arg(long)]
    out: Option<PathBuf>,
    /// override the config's random seed
    #[arg(long)]
    seed: Option<u64>,
    /// override the config's computation budget
    #[arg(long)]
    budget: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Exact engine: degeneration ideal, characteristic chain, verdict
    Analyze(JobArgs),
    /// Low-spectrum probe of the assembled operator on a torus grid
    Spectrum(JobArgs),
    /// Bump-scaling energy experiment along a coordinate slice
    Weierstrass(JobArgs),
    /// Concentration-constant estimate near a marked set
    Concentration(JobArgs),
    /// Point-cloud tangent cones and numeric characteristic chain
    Glaeser(JobArgs),
    /// Iterated-derivative cover check against the sampled chain
    Amano(JobArgs),
}

impl Command {
    fn mode(&self) -> Mode {
        match self {
            Command::Analyze(_) => Mode::Analyze,
            Command::Spectrum(_) => Mode::Spectrum,
            Command::Weierstrass(_) => Mode::Weierstrass,
            Command::Concentration(_) => Mode::Concentration,
            Command::Glaeser(_) => Mode::Glaeser,
            Command::Amano(_) => Mode::Amano,
        }
    }

    fn args(&self) -> &JobArgs {
        match self {
            Command::Analyze(a)
            | Command::Spectrum(a)
            | Command::Weierstrass(a)
            | Command::Concentration(a)
            | Command::Glaeser(a)
            | Command::Amano(a) => a,
        }
    }
}

fn load_config(cmd: &Command) -> Result<JobConfig, Error> {
    let args = cmd.args();
    let text = std::fs::read_to_string(&args.config)?;
    let mut cfg = JobConfig::from_json(&text)?;
    if cfg.mode != cmd.mode() {
        return Err(Error::Config(format!(
            "mode: config says `{}` but the `{}` subcommand was invoked",
            cfg.mode.name(),
            cmd.mode().name()
        )));
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(budget) = args.budget {
        cfg.budget = budget;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load_config(&cli.command) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    let out_dir = cli
        .command
        .args()
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("."));

    let started = Instant::now();
    let report = match run_job(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("engine error: {e}");
            return ExitCode::from(1);
        }
    };
    let run_secs = started.elapsed().as_secs_f64();

    let emit_started = Instant::now();
    let written = match emit_report(&report, &out_dir) {
        Ok(w) => w,
        Err(e) => {
            eprintln!("output error: {e}");
            return ExitCode::from(1);
        }
    };
    let emit_secs = emit_started.elapsed().as_secs_f64();

    // timings sidecar, deliberately outside report.json
    let timings = serde_json::json!({
        "run_seconds": run_secs,
        "emit_seconds": emit_secs,
    });
    let timings_path = out_dir.join("timings.json");
    if let Err(e) = std::fs::write(&timings_path, format!("{timings:#}\n")) {
        eprintln!("output error: {e}");
        return ExitCode::from(1);
    }

    println!("verdict: {}", report.verdict.tag);
    for w in &report.warnings {
        println!("warning: {w}");
    }
    for p in &written {
        println!("wrote {}", p.display());
    }
    println!("wrote {}", timings_path.display());
    ExitCode::SUCCESS
}
