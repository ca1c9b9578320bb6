use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use eqvi_cli::commands::{run, Command, Common};

#[derive(Parser)]
#[command(
    name = "eqvi",
    version,
    about = "Solve, certify and control evolution quasi-variational inequalities"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve one instance; writes solution.csv, xi.csv and report.json.
    Solve(Flags),
    /// Compute the a priori certificate; writes certificate.json.
    Certify(Flags),
    /// Multi-start exploration of the solution set; writes clusters.json.
    Probe(Flags),
    /// Parameter identification; writes control_history.csv and best_triple.json.
    Control(Flags),
    /// Cross-check the solvers against the brute-force oracles.
    OracleCheck(Flags),
}

#[derive(Args)]
struct Flags {
    /// Instance configuration (oracle-check: file or directory of toys).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Validate the declared constants against the operators first.
    #[arg(long)]
    strict: bool,
    /// Solve even when the smallness condition fails.
    #[arg(long)]
    force: bool,
    /// Number of probe starts.
    #[arg(long)]
    starts: Option<usize>,
    /// Grid resolution per control dimension.
    #[arg(long)]
    grid_res: Option<usize>,
    /// Outer fixed-point tolerance.
    #[arg(long)]
    tol: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, f) = match cli.command {
        Cmd::Solve(f) => (Command::Solve, f),
        Cmd::Certify(f) => (Command::Certify, f),
        Cmd::Probe(f) => (Command::Probe, f),
        Cmd::Control(f) => (Command::Control, f),
        Cmd::OracleCheck(f) => (Command::OracleCheck, f),
    };
    let common = Common {
        config: f.config,
        out: f.out,
        seed: f.seed,
        strict: f.strict,
        force: f.force,
        starts: f.starts,
        grid_res: f.grid_res,
        tol: f.tol,
    };
    let outcome = run(cmd, &common);
    for line in &outcome.lines {
        if outcome.code == 0 {
            println!("{line}");
        } else {
            eprintln!("{line}");
        }
    }
    ExitCode::from(outcome.code as u8)
}
