//! `roe` — reproducible experiments on finite windows of coarse spaces.
//!
//! Every subcommand runs a fully seeded, deterministic pipeline and
//! leaves a canonical-JSON report behind; the process exit code mirrors
//! the report verdict (0 ok, 1 violation, 2 inconclusive, 64 usage).

mod classify_cmd;
mod contract_cmd;
mod obstruct_cmd;
mod op_cmd;
mod space_cmd;
mod util;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use roe_core::config::Tolerances;
use roe_core::report::{emit_report, report_dir, Report, EXIT_USAGE};

use util::CliError;

#[derive(Parser)]
#[command(
    name = "roe",
    version,
    about = "Finite-window workbench for uniform Roe algebras"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Seed for every randomized internal (report bytes depend only on
    /// the full flag set, this seed included).
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Override the linear-system residual tolerance.
    #[arg(long, global = true)]
    tol_residual: Option<f64>,
    /// Override the eigensolver convergence tolerance.
    #[arg(long, global = true)]
    tol_eigen: Option<f64>,
    /// Override the norm comparison tolerance.
    #[arg(long, global = true)]
    tol_norm: Option<f64>,
    /// Override the numerical rank cutoff.
    #[arg(long, global = true)]
    tol_rank: Option<f64>,
    /// Report location (default: $REPORT_DIR/<command>.json).
    #[arg(long, global = true)]
    report: Option<PathBuf>,
}

impl GlobalArgs {
    fn tolerances(&self) -> Tolerances {
        let mut tol = Tolerances::default();
        if let Some(v) = self.tol_residual {
            tol.residual = v;
        }
        if let Some(v) = self.tol_eigen {
            tol.eigen = v;
        }
        if let Some(v) = self.tol_norm {
            tol.norm = v;
        }
        if let Some(v) = self.tol_rank {
            tol.rank = v;
        }
        tol
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate or validate space windows.
    #[command(subcommand)]
    Space(space_cmd::SpaceCmd),
    /// Generate and check band operators.
    #[command(subcommand)]
    Op(op_cmd::OpCmd),
    /// Covers, partitions, Følner searches, paradoxical decompositions.
    #[command(subcommand)]
    Classify(classify_cmd::ClassifyCmd),
    /// Contract an invertible vertex family to the identity, certified.
    Contract(contract_cmd::ContractArgs),
    /// Index, winding, and trace obstructions.
    #[command(subcommand)]
    Obstruct(obstruct_cmd::ObstructCmd),
}

impl Command {
    /// Slug used for the default report filename.
    fn slug(&self) -> String {
        match self {
            Command::Space(c) => format!("space-{}", c.slug()),
            Command::Op(c) => format!("op-{}", c.slug()),
            Command::Classify(c) => format!("classify-{}", c.slug()),
            Command::Contract(_) => "contract".into(),
            Command::Obstruct(c) => format!("obstruct-{}", c.slug()),
        }
    }
}

fn run(cli: &Cli) -> Result<Report, CliError> {
    let tol = cli.global.tolerances();
    let seed = cli.global.seed;
    match &cli.command {
        Command::Space(cmd) => space_cmd::run(cmd, seed),
        Command::Op(cmd) => op_cmd::run(cmd, &tol, seed),
        Command::Classify(cmd) => classify_cmd::run(cmd, seed),
        Command::Contract(args) => contract_cmd::run(args, &tol, seed),
        Command::Obstruct(cmd) => obstruct_cmd::run(cmd, &tol, seed),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let report_path = cli
        .global
        .report
        .clone()
        .unwrap_or_else(|| report_dir().join(format!("{}.json", cli.command.slug())));
    match run(&cli) {
        Ok(report) => {
            if let Err(e) = emit_report(&report, &report_path) {
                eprintln!("error: could not write report: {e}");
                std::process::exit(2);
            }
            println!("{} -> {}", report.verdict, report_path.display());
            std::process::exit(report.verdict.exit_code());
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            std::process::exit(EXIT_USAGE);
        }
        Err(CliError::Failed(msg)) => {
            eprintln!("error: {msg}");
            std::process::exit(2);
        }
    }
}
