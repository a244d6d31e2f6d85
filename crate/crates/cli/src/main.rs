// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::Failure;

/// Critical fluid model of a processor-sharing queue.
#[derive(Parser, Debug)]
#[command(name = "fluidps", version, about)]
#[command(after_help = "Any long flag can also be set from a `--config FILE` of `key = value` lines; flags win.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Service distribution spec, e.g. `exp:rate=1` or `pareto:xm=0.75,p=4`.
    #[arg(long, default_value = "exp:rate=1")]
    pub dist: String,
    /// Grid step in space and service level.
    #[arg(long, default_value_t = 0.01)]
    pub h: f64,
    /// Extent of the renewal and time-change tables.
    #[arg(long, default_value_t = 100.0)]
    pub umax: f64,
    /// Spatial extent of state measures.
    #[arg(long, default_value_t = 50.0)]
    pub xmax: f64,
    /// Output file (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct Init {
    /// Initial measure spec, e.g. `uniformdensity:a=0,b=2,mass=1`.
    #[arg(long, default_value = "scaledexcess:c=1")]
    pub init: String,
    /// Extend `T̄` linearly with slope `κ` beyond the table.
    #[arg(long)]
    pub extrapolate: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    Rho,
    Tv,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tabulate the renewal function of the excess law.
    Renewal {
        #[command(flatten)]
        common: Common,
        /// Times for a Blackwell discrepancy sweep (needs --sweep-out).
        #[arg(long)]
        t: Option<String>,
        #[arg(long)]
        sweep_out: Option<PathBuf>,
        /// Certificate threshold relative to `U_e(u_max)`.
        #[arg(long, default_value_t = 5e-3)]
        cert_tol: f64,
    },
    /// Solve the fluid model and report the trajectory.
    Solve {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        init: Init,
        /// Times as `a:step:b` or a comma list.
        #[arg(long, default_value = "0:1:10")]
        t: String,
        /// Per-time CDF dump.
        #[arg(long)]
        snapshots: Option<PathBuf>,
        /// Threshold on the dynamics residual, scaled by `1 + t`.
        #[arg(long, default_value_t = 1e-2)]
        tol: f64,
    },
    /// Check that scaled excess laws stay invariant.
    InvariantCheck {
        #[command(flatten)]
        common: Common,
        /// Scale factors.
        #[arg(long, default_value = "0.5,1,2")]
        c: String,
        #[arg(long, default_value = "0:1:20")]
        t: String,
        /// Threshold on the Prohorov distance to the initial state.
        #[arg(long, default_value_t = 0.02)]
        tol: f64,
    },
    /// Distances to the limit state over time.
    Converge {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        init: Init,
        #[arg(long, default_value = "0:5:50")]
        t: String,
        /// Threshold on certified error bars.
        #[arg(long, default_value_t = 0.05)]
        max_error: f64,
    },
    /// Fit a power-law decay rate and check the fitted bound.
    Rates {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        init: Init,
        #[arg(long, value_enum, default_value_t = Metric::Rho)]
        metric: Metric,
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
        /// Moment-ball radius.
        #[arg(long, default_value_t = 4.0)]
        m: f64,
        #[arg(long, default_value = "50,60,75,100,125,150,200,250,300,400,500")]
        t: String,
        /// Fitting window `lo,hi`.
        #[arg(long, default_value = "50,500")]
        window: String,
        #[arg(long, default_value_t = 0.05)]
        max_error: f64,
    },
    /// Stationarity gap of the time change over levels `r`.
    Gap {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        init: Init,
        #[arg(long, default_value = "0:0.5:10")]
        r: String,
    },
    /// Simulate the scaled queue and compare with the fluid solution.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        init: Init,
        /// Scale parameter.
        #[arg(long, default_value_t = 100.0)]
        scale: f64,
        /// Seeds, comma separated.
        #[arg(long, default_value = "1")]
        seeds: String,
        #[arg(long, default_value = "0:0.5:2")]
        t: String,
        /// Per-snapshot CDF dump.
        #[arg(long)]
        snapshots: Option<PathBuf>,
    },
    /// Run the full acceptance suite.
    Selftest {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

fn configure_threads() -> Result<(), Failure> {
    if let Ok(v) = std::env::var("FLUIDPS_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| Failure::Validation(format!("FLUIDPS_THREADS = `{v}` is not a positive integer")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Validation(e.to_string()))?;
    }
    Ok(())
}

fn run(argv: Vec<String>) -> Result<(), Failure> {
    let argv = config::merge_config(argv).map_err(Failure::Validation)?;
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return Ok(());
        }
        Err(e) => return Err(Failure::Validation(e.to_string().trim_end().to_string())),
    };
    configure_threads()?;
    match cli.command {
        Command::Renewal {
            common,
            t,
            sweep_out,
            cert_tol,
        } => commands::renewal(&common, t.as_deref(), sweep_out.as_deref(), cert_tol),
        Command::Solve {
            common,
            init,
            t,
            snapshots,
            tol,
        } => commands::solve(&common, &init, &t, snapshots.as_deref(), tol),
        Command::InvariantCheck { common, c, t, tol } => commands::invariant_check(&common, &c, &t, tol),
        Command::Converge {
            common,
            init,
            t,
            max_error,
        } => commands::converge(&common, &init, &t, max_error),
        Command::Rates {
            common,
            init,
            metric,
            eps,
            m,
            t,
            window,
            max_error,
        } => commands::rates(&common, &init, metric, eps, m, &t, &window, max_error),
        Command::Gap { common, init, r } => commands::gap(&common, &init, &r),
        Command::Simulate {
            common,
            init,
            scale,
            seeds,
            t,
            snapshots,
        } => commands::simulate(&common, &init, scale, &seeds, &t, snapshots.as_deref()),
        Command::Selftest { out, format } => commands::selftest(out.as_deref(), format),
    }
}

fn main() -> ExitCode {
    match run(std::env::args().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("fluidps: {f}");
            ExitCode::from(f.code())
        }
    }
}
