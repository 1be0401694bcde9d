//! `hypflow`: check decorated meshes, evaluate curvature, and solve for
//! prescribed α-curvature by flows or by Newton's method.

mod commands;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hypflow_core::fixture::FixtureKind;
use hypflow_core::flows::FlowKind;

use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(name = "hypflow", version, about = "Discrete conformal metrics on decorated hyperbolic surfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate a mesh file: admissibility, separation, Delaunay status, χ.
    Check {
        mesh: PathBuf,
    },
    /// Print per-vertex h, K and R_α as CSV.
    Curvature {
        mesh: PathBuf,
        /// Curvature exponent; defaults to the file's alpha, then 0.
        #[arg(long, allow_hyphen_values = true)]
        alpha: Option<f64>,
        /// Write the table here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the α-Ricci or α-Calabi flow with surgery.
    Flow {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value_t = Kind::Ricci)]
        kind: Kind,
        /// Initial step size.
        #[arg(long, default_value_t = 0.05)]
        dt: f64,
        /// Use the initial step size throughout instead of adapting it.
        #[arg(long)]
        fixed_step: bool,
        /// Flip log as JSON lines; defaults to the trace path with extension `flips.jsonl`.
        #[arg(long)]
        flip_log: Option<PathBuf>,
        /// Keep the initial triangulation fixed.
        #[arg(long)]
        no_surgery: bool,
    },
    /// Maximize the potential W_α by Newton's method.
    Solve {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Generate a seeded random weighted Delaunay mesh.
    Fixture {
        #[arg(value_parser = parse_kind)]
        kind: FixtureKind,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Store this alpha in the file.
        #[arg(long, allow_hyphen_values = true)]
        alpha: Option<f64>,
        /// Store this target curvature (scalar or per-vertex file) in the file.
        #[arg(long, allow_hyphen_values = true)]
        target: Option<String>,
        /// Write the mesh here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Options shared by `flow` and `solve`. With several meshes the output
/// paths name directories, and each run writes `<stem>.json`, `<stem>.csv`
/// and `<stem>.flips.jsonl` there.
#[derive(Args, Debug, Clone)]
struct RunArgs {
    #[arg(required = true)]
    meshes: Vec<PathBuf>,
    /// Curvature exponent; defaults to the file's alpha.
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    /// Target curvature: a number, or a file of per-vertex values. Defaults to the file's target.
    #[arg(long, allow_hyphen_values = true)]
    target: Option<String>,
    /// Stop once the sup-norm residual is below this.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    max_steps: Option<usize>,
    /// Final mesh.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Trace (flow) or iteration log (solve) as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Number of meshes processed in parallel.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Kind {
    Ricci,
    Calabi,
}

impl From<Kind> for FlowKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Ricci => FlowKind::Ricci,
            Kind::Calabi => FlowKind::Calabi,
        }
    }
}

fn parse_kind(s: &str) -> Result<FixtureKind, String> {
    s.parse()
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Check { mesh } => commands::check(&mesh),
        Command::Curvature { mesh, alpha, out } => commands::curvature(&mesh, alpha, out.as_deref()),
        Command::Flow {
            run,
            kind,
            dt,
            fixed_step,
            flip_log,
            no_surgery,
        } => commands::flow(
            &run,
            &commands::FlowOptions {
                kind: kind.into(),
                dt,
                adaptive: !fixed_step,
                flip_log,
                surgery: !no_surgery,
            },
        ),
        Command::Solve { run } => commands::solve(&run),
        Command::Fixture {
            kind,
            seed,
            alpha,
            target,
            out,
        } => commands::fixture(kind, seed, alpha, target.as_deref(), out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(error::EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hypflow: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
