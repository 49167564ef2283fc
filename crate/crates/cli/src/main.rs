use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use conic_duality_cli::{
    cmd_duality, cmd_no_arbitrage, cmd_paper_example, cmd_validate, init_threads, DualityOptions,
    Tolerances,
};

/// Portfolio optimization under proportional transaction costs on scenario
/// trees, with numerical duality checks.
#[derive(Parser)]
#[command(name = "conic-duality", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a config file and list every violated invariant.
    Validate { config: PathBuf },
    /// Search for a consistent pricing process or an arbitrage.
    NoArbitrage {
        config: PathBuf,
        #[command(flatten)]
        tol: TolArgs,
    },
    /// Run primal and dual scalarizations over a weight grid.
    Duality {
        config: PathBuf,
        /// Grid points per simplex edge; 1 gives the centroid weight.
        #[arg(long)]
        grid: Option<usize>,
        /// Also draw the upper image and cones (two assets only).
        #[arg(long)]
        svg: bool,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[command(flatten)]
        tol: TolArgs,
    },
    /// Print the two-asset ternary example config as JSON.
    PaperExample {
        #[arg(long)]
        grid: Option<usize>,
    },
}

#[derive(Args)]
struct TolArgs {
    #[arg(long)]
    tol_lp: Option<f64>,
    #[arg(long)]
    tol_pg: Option<f64>,
    /// Strict-positivity margin for the pricing certificate.
    #[arg(long)]
    tol_strict: Option<f64>,
    #[arg(long)]
    tol_cone: Option<f64>,
}

impl From<TolArgs> for Tolerances {
    fn from(t: TolArgs) -> Self {
        Tolerances {
            lp: t.tol_lp,
            pg: t.tol_pg,
            strict: t.tol_strict,
            cone: t.tol_cone,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    init_threads();
    let mut out = io::stdout().lock();
    let code = match cli.command {
        Command::Validate { config } => cmd_validate(&config, &mut out),
        Command::NoArbitrage { config, tol } => cmd_no_arbitrage(&config, &tol.into(), &mut out),
        Command::Duality {
            config,
            grid,
            svg,
            out: out_dir,
            tol,
        } => {
            let opts = DualityOptions {
                grid,
                svg,
                out_dir,
                tolerances: tol.into(),
            };
            cmd_duality(&config, &opts, &mut out)
        }
        Command::PaperExample { grid } => cmd_paper_example(grid, &mut out),
    };
    ExitCode::from(code as u8)
}
