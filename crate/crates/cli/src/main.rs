//! `pp` — command-line front end for the periodic-portfolio solver.
//!
//! Subcommands: `solve`, `sweep`, `curve`, `simulate`. Input is a JSON
//! config (`--config`); data goes to stdout or `--out`, diagnostics to
//! stderr. Exit codes: 0 ok, 2 invalid input, 3 solver failure. The log
//! level is read from `PP_LOG_LEVEL` (error|warn|info|debug).

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use pp_cli::commands::{self, CliError, CmdOut, Format};
use pp_cli::config::{RunConfig, SweepConfig, SweepParam};
use pp_core::Tolerances;

#[derive(Debug, Parser)]
#[command(name = "pp", about = "Periodic portfolio selection under present bias")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Path to the JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Write data here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format.
    #[arg(long, value_parser = ["json", "csv"])]
    format: Option<String>,
    /// Override the simulation seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Override the quadrature absolute tolerance.
    #[arg(long = "tol-quad")]
    tol_quad: Option<f64>,
    /// Override the root-finding relative tolerance.
    #[arg(long = "tol-root")]
    tol_root: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve all value constants and verify the plan equations.
    Solve(Common),
    /// Re-solve the constants over a parameter grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Parameter to sweep (beta|gamma|k|delta); overrides the config.
        #[arg(long)]
        param: Option<String>,
        /// Comma-separated grid values; overrides the config.
        #[arg(long)]
        grid: Option<String>,
    },
    /// Investment-level curves on a log-return grid.
    Curve(Common),
    /// Monte-Carlo wealth paths.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Also write one row per simulated path to this CSV file.
        #[arg(long = "paths-out")]
        paths_out: Option<PathBuf>,
    },
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter("PP_LOG_LEVEL")).init();
    let cli = Cli::parse();
    std::process::exit(match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CliError::Input(_) => 2,
                CliError::Solver(_) => 3,
            }
        }
    });
}

fn load(common: &Common) -> Result<(RunConfig, Tolerances, Format), CliError> {
    if let Some(jobs) = common.jobs {
        // a repeated build_global in one process is harmless: later calls fail
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    let text = std::fs::read_to_string(&common.config)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", common.config.display())))?;
    let config = RunConfig::from_json(&text)
        .map_err(|e| CliError::Input(format!("bad config: {e}")))?;
    let mut tol = config.tolerances;
    if let Some(q) = common.tol_quad {
        tol.quad_abs = q;
    }
    if let Some(r) = common.tol_root {
        tol.root_rel = r;
    }
    let format = match common.format.as_deref() {
        Some("json") => Format::Json,
        Some("csv") => Format::Csv,
        Some(other) => return Err(CliError::Input(format!("unknown format {other}"))),
        None => Format::Json,
    };
    Ok((config, tol, format))
}

fn emit(common: &Common, out: CmdOut) -> Result<(), CliError> {
    match &common.out {
        Some(path) => std::fs::write(path, out.stdout)
            .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?,
        None => print!("{}", out.stdout),
    }
    match out.failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve(common) => {
            let (config, tol, format) = load(&common)?;
            let out = commands::cmd_solve(&config, tol, format)?;
            emit(&common, out)
        }
        Command::Sweep {
            common,
            param,
            grid,
        } => {
            let (config, tol, mut format) = load(&common)?;
            if common.format.is_none() {
                format = Format::Csv;
            }
            let mut sweep = config.sweep.clone();
            if let Some(p) = param {
                let param = SweepParam::parse(&p)
                    .ok_or_else(|| CliError::Input(format!("unknown sweep parameter {p}")))?;
                let grid_vals = match (&grid, &sweep) {
                    (Some(g), _) => parse_grid(g)?,
                    (None, Some(s)) => s.grid.clone(),
                    (None, None) => {
                        return Err(CliError::Input("sweep grid missing".into()));
                    }
                };
                sweep = Some(SweepConfig {
                    param,
                    grid: grid_vals,
                });
            } else if let (Some(g), Some(s)) = (&grid, &mut sweep) {
                s.grid = parse_grid(g)?;
            }
            let sweep = sweep.ok_or_else(|| {
                CliError::Input("sweep needs a `sweep` config section or --param/--grid".into())
            })?;
            if sweep.grid.is_empty() {
                return Err(CliError::Input("sweep grid must be nonempty".into()));
            }
            let out = commands::cmd_sweep(&config, &sweep, tol, format)?;
            emit(&common, out)
        }
        Command::Curve(common) => {
            let (config, tol, mut format) = load(&common)?;
            if common.format.is_none() {
                format = Format::Csv;
            }
            let out = commands::cmd_curve(&config, tol, format)?;
            emit(&common, out)
        }
        Command::Simulate { common, paths_out } => {
            let (config, tol, _) = load(&common)?;
            let seed = common.seed.unwrap_or(config.simulation.seed);
            let (out, paths_csv) = commands::cmd_simulate(&config, tol, seed)?;
            if let Some(path) = &paths_out {
                std::fs::write(path, paths_csv)
                    .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
            }
            emit(&common, out)
        }
    }
}

fn parse_grid(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Input(format!("bad grid value {s:?}: {e}")))
        })
        .collect()
}
