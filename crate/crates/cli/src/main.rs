//! `logibranch`: bifurcation toolkit front end. Subcommands cover principal
//! eigenvalues, single solves, fibering analysis, branch tracing, diagram
//! merging, lambda-sweep asymptotics, and shooting-based reference results.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{CliError, CliResult, RunConfig};

#[derive(Parser)]
#[command(name = "logibranch", version, about = "steady-state branch analysis for a logistic problem with sublinear boundary harvesting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand; any flag overrides the config file.
#[derive(Args)]
struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Domain, e.g. `interval:0,3.14159` or `rect:0,1,0,1`.
    #[arg(long)]
    domain: Option<String>,
    /// Mesh cells per axis.
    #[arg(long)]
    n: Option<usize>,
    /// Superlinear interior exponent (> 1).
    #[arg(long)]
    p: Option<f64>,
    /// Sublinear boundary exponent (in (0, 1)).
    #[arg(long)]
    q: Option<f64>,
    /// Harvesting effort.
    #[arg(long)]
    lambda: Option<f64>,
    /// Boundary regularization parameter.
    #[arg(long)]
    eps: Option<f64>,
    /// RNG seed for multistart sampling.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn build(&self) -> CliResult<RunConfig> {
        let mut cfg = RunConfig::load(self.config.as_deref())?;
        if let Some(v) = &self.domain {
            cfg.set("domain", v);
        }
        if let Some(v) = self.n {
            cfg.set("n", &v.to_string());
        }
        if let Some(v) = self.p {
            cfg.set("p", &v.to_string());
        }
        if let Some(v) = self.q {
            cfg.set("q", &v.to_string());
        }
        if let Some(v) = self.lambda {
            cfg.set("lambda", &v.to_string());
        }
        if let Some(v) = self.eps {
            cfg.set("eps", &v.to_string());
        }
        if let Some(v) = self.seed {
            cfg.set("seed", &v.to_string());
        }
        cfg.set_if_absent("seed", "0");
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Principal eigenvalues and the auxiliary eigencurve table.
    Eig {
        #[command(flatten)]
        common: Common,
        /// Fail (exit 4) when sigma1 is undefined instead of omitting it.
        #[arg(long)]
        sigma1: bool,
    },
    /// One solve: Newton, monotone iteration, or Nehari minimization.
    Solve {
        #[command(flatten)]
        common: Common,
        /// newton | subsuper | nehari+ | nehari-
        #[arg(long)]
        route: Option<String>,
        /// Initial iterate: `const:<c>` or `file:<path>` (newton route).
        #[arg(long)]
        guess: Option<String>,
        /// Residual tolerance.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Fibering analysis of a stored field, as JSON.
    Fibering {
        #[command(flatten)]
        common: Common,
        /// Solution CSV holding the field to analyze.
        #[arg(long)]
        field: PathBuf,
    },
    /// Trace a solution branch (regularized when eps > 0).
    Continue {
        #[command(flatten)]
        common: Common,
        /// Arclength step.
        #[arg(long)]
        step: Option<f64>,
        /// Stop the plain branch at this lambda.
        #[arg(long)]
        max_lambda: Option<f64>,
        /// Trace the full two-chart continuum skeleton.
        #[arg(long)]
        continuum: bool,
        /// Regularization schedule for the continuum, e.g. `1e-3,1e-2,1e-1`.
        #[arg(long)]
        eps_schedule: Option<String>,
    },
    /// Merge branch CSVs into one plot-ready file.
    Diagram {
        /// Branch CSVs produced by `continue`.
        #[arg(long, value_delimiter = ',', required = true)]
        inputs: Vec<PathBuf>,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Lambda-sweep studies with fitted diagnostics.
    Asympt {
        #[command(flatten)]
        common: Common,
        /// lower-branch | dirichlet-limit
        #[arg(long)]
        mode: Option<String>,
        /// Strictly increasing lambda grid, e.g. `1e-4,1e-3,1e-2`.
        #[arg(long)]
        lambdas: Option<String>,
    },
    /// Shooting-based reference results for interval domains.
    Oracle {
        #[command(flatten)]
        common: Common,
        /// count | fold | limit-profile | eigen
        #[arg(long, default_value = "count")]
        what: String,
        /// Scan resolution for the shooting sweep.
        #[arg(long)]
        scan_points: Option<usize>,
    },
}

fn init_thread_pool() -> CliResult<()> {
    if let Ok(raw) = std::env::var("LOGIBRANCH_THREADS") {
        let k: usize = raw.parse().map_err(|_| {
            CliError::Config(format!("LOGIBRANCH_THREADS=`{raw}` is not an integer"))
        })?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool setup failed: {e}")))?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> CliResult<()> {
    init_thread_pool()?;
    match cli.command {
        Command::Eig { common, sigma1 } => {
            let cfg = common.build()?;
            commands::run_eig(&cfg, common.out.as_deref(), sigma1)
        }
        Command::Solve {
            common,
            route,
            guess,
            tol,
        } => {
            let mut cfg = common.build()?;
            if let Some(v) = route {
                cfg.set("route", &v);
            }
            if let Some(v) = guess {
                cfg.set("guess", &v);
            }
            if let Some(v) = tol {
                cfg.set("tol", &v.to_string());
            }
            commands::run_solve(&cfg, common.out.as_deref())
        }
        Command::Fibering { common, field } => {
            let cfg = common.build()?;
            commands::run_fibering(&cfg, &field, common.out.as_deref())
        }
        Command::Continue {
            common,
            step,
            max_lambda,
            continuum,
            eps_schedule,
        } => {
            let mut cfg = common.build()?;
            if let Some(v) = step {
                cfg.set("step", &v.to_string());
            }
            if let Some(v) = max_lambda {
                cfg.set("max_lambda", &v.to_string());
            }
            if let Some(v) = eps_schedule {
                cfg.set("eps_schedule", &v);
            }
            commands::run_continue(&cfg, common.out.as_deref(), continuum)
        }
        Command::Diagram { inputs, out } => commands::run_diagram(&inputs, out.as_deref()),
        Command::Asympt {
            common,
            mode,
            lambdas,
        } => {
            let mut cfg = common.build()?;
            if let Some(v) = mode {
                cfg.set("mode", &v);
            }
            if let Some(v) = lambdas {
                cfg.set("lambdas", &v);
            }
            commands::run_asympt(&cfg, common.out.as_deref())
        }
        Command::Oracle {
            common,
            what,
            scan_points,
        } => {
            let mut cfg = common.build()?;
            if let Some(v) = scan_points {
                cfg.set("scan_points", &v.to_string());
            }
            commands::run_oracle(&cfg, common.out.as_deref(), &what)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("logibranch: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
