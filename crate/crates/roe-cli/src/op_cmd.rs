//! `roe op` — generate band operators on a window and check their
//! propagation and retraction behavior.

use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Subcommand, ValueEnum};
use roe_core::config::Tolerances;
use roe_core::operator::{
    random_band, random_band_unitary, shift_operator, unitary_retraction, SparseOperator,
};
use roe_core::rational::Dist;
use roe_core::report::{emit_report, Report, Verdict};

use crate::util::{load_operator, load_window, parse_dist, CliError};

#[derive(Subcommand)]
pub enum OpCmd {
    /// Generate an operator on a window and write it as JSON.
    Gen(GenArgs),
    /// Check algebraic laws on seeded random operators.
    Check(CheckArgs),
    /// Walk the straight-line retraction of an invertible operator onto
    /// its unitary part.
    Retract(RetractArgs),
}

impl OpCmd {
    pub fn slug(&self) -> &'static str {
        match self {
            OpCmd::Gen(_) => "gen",
            OpCmd::Check(_) => "check",
            OpCmd::Retract(_) => "retract",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OpKind {
    /// Shift along the window's label order by ⌊prop⌋ positions.
    Shift,
    /// Random entries on the band d(row, col) <= prop.
    BandRandom,
    /// Exactly unitary band operator (commuting Givens rotations).
    UnitaryBand,
}

#[derive(Args, serde::Serialize)]
pub struct GenArgs {
    /// Window file the operator lives on.
    #[arg(long)]
    pub space: PathBuf,
    #[arg(long, value_enum)]
    pub kind: OpKind,
    /// Requested propagation (integer, a/b, or decimal).
    #[arg(long, default_value = "1")]
    pub prop: String,
    /// Where to write the operator JSON.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, serde::Serialize)]
pub struct CheckArgs {
    /// Window file to generate test operators on.
    #[arg(long)]
    pub space: PathBuf,
    /// Check propagation subadditivity under composition.
    #[arg(long)]
    pub subadditivity: bool,
    /// Number of seeded random pairs.
    #[arg(long, default_value_t = 200)]
    pub pairs: u64,
    /// Band radius of the test operators.
    #[arg(long, default_value = "3")]
    pub prop: String,
}

#[derive(Args, serde::Serialize)]
pub struct RetractArgs {
    /// Window file the operator lives on.
    #[arg(long)]
    pub space: PathBuf,
    /// Operator file to retract.
    #[arg(long)]
    pub op: PathBuf,
    /// Endpoint of the retraction parameter (1 reaches the unitary part).
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    /// Number of parameter samples on [0, t].
    #[arg(long, default_value_t = 11)]
    pub samples: usize,
}

pub fn run(cmd: &OpCmd, tol: &Tolerances, seed: u64) -> Result<Report, CliError> {
    match cmd {
        OpCmd::Gen(args) => gen(args, tol, seed),
        OpCmd::Check(args) => check(args, seed),
        OpCmd::Retract(args) => retract(args, tol, seed),
    }
}

fn gen(args: &GenArgs, tol: &Tolerances, seed: u64) -> Result<Report, CliError> {
    let window = load_window(&args.space)?;
    let prop = parse_dist(&args.prop)?;
    if prop < Dist::ZERO {
        return Err(CliError::usage("--prop must be nonnegative"));
    }
    let op = match args.kind {
        OpKind::Shift => {
            let step = prop.floor_int().max(1) as usize;
            if step >= window.n() {
                return Err(CliError::usage(
                    "shift step is at least the window size; nothing would remain",
                ));
            }
            let pairs = (0..window.n() - step).map(|i| (i, i + step));
            shift_operator(Arc::clone(&window), pairs)
                .map_err(|e| CliError::failed(e.to_string()))?
        }
        OpKind::BandRandom => random_band(Arc::clone(&window), prop, seed),
        OpKind::UnitaryBand => random_band_unitary(Arc::clone(&window), prop, seed),
    };
    emit_report(&op, &args.out).map_err(|e| CliError::failed(format!("cannot write operator: {e}")))?;

    let mut report = Report::new("op gen", serde_json::json!({"args": args, "seed": seed}));
    let observed = op.propagation();
    // A shift along label order can jump farther than the requested band
    // on windows whose consecutive labels are far apart; report it rather
    // than silently delivering a wider operator.
    report.check(
        "propagation_at_most_requested",
        if observed <= prop {
            Verdict::Ok
        } else {
            Verdict::Violation
        },
    );
    if args.kind == OpKind::UnitaryBand {
        let defect = op
            .unitarity_defect(tol, seed)
            .map_err(|e| CliError::failed(e.to_string()))?;
        report.check(
            "unitary",
            if defect <= tol.residual {
                Verdict::Ok
            } else {
                Verdict::Violation
            },
        );
        report
            .witness("unitarity_defect", defect)
            .map_err(|e| CliError::failed(e.to_string()))?;
    }
    report
        .witness(
            "operator",
            serde_json::json!({
                "out": args.out.display().to_string(),
                "entries": op.support_len(),
                "propagation": observed.to_string(),
                "requested": prop.to_string(),
            }),
        )
        .map_err(|e| CliError::failed(e.to_string()))?;
    report.timing("entries", op.support_len() as u64);
    Ok(report)
}

fn check(args: &CheckArgs, seed: u64) -> Result<Report, CliError> {
    if !args.subadditivity {
        return Err(CliError::usage(
            "nothing to check; pass --subadditivity",
        ));
    }
    if args.pairs == 0 {
        return Err(CliError::usage("--pairs must be at least 1"));
    }
    let window = load_window(&args.space)?;
    let prop = parse_dist(&args.prop)?;
    let mut report = Report::new("op check", serde_json::json!({"args": args, "seed": seed}));
    let mut failures = Vec::new();
    let mut max_ratio = Dist::ZERO;
    for k in 0..args.pairs {
        let f = random_band(Arc::clone(&window), prop, seed.wrapping_add(2 * k));
        let g = random_band(Arc::clone(&window), prop, seed.wrapping_add(2 * k + 1));
        let fg = f.compose(&g).map_err(|e| CliError::failed(e.to_string()))?;
        let bound = f.propagation() + g.propagation();
        let observed = fg.propagation();
        max_ratio = max_ratio.max(observed);
        if observed > bound {
            failures.push(serde_json::json!({
                "pair": k,
                "observed": observed.to_string(),
                "bound": bound.to_string(),
            }));
        }
    }
    report.check(
        "propagation_subadditive",
        if failures.is_empty() {
            Verdict::Ok
        } else {
            Verdict::Violation
        },
    );
    report
        .witness(
            "subadditivity",
            serde_json::json!({
                "pairs": args.pairs,
                "max_composed_propagation": max_ratio.to_string(),
                "failures": failures,
            }),
        )
        .map_err(|e| CliError::failed(e.to_string()))?;
    report.timing("pairs", args.pairs);
    Ok(report)
}

fn retract(args: &RetractArgs, tol: &Tolerances, seed: u64) -> Result<Report, CliError> {
    if args.samples < 2 {
        return Err(CliError::usage("--samples must be at least 2"));
    }
    if !(0.0..=1.0).contains(&args.t) {
        return Err(CliError::usage("--t must lie in [0, 1]"));
    }
    let window = load_window(&args.space)?;
    let op = load_operator(&args.op, &window)?;
    let mut report = Report::new("op retract", serde_json::json!({"args": args, "seed": seed}));

    let start_sigma = op.sigma_min(tol, seed);
    if start_sigma <= tol.rank {
        // A singular operator has no retraction onto a unitary at all.
        report.check("invertible_along_path", Verdict::Violation);
        report
            .witness(
                "singular_input",
                serde_json::json!({"sigma_min": start_sigma}),
            )
            .map_err(|e| CliError::failed(e.to_string()))?;
        return Ok(report);
    }

    let mut min_sigma = f64::INFINITY;
    let mut endpoint: Option<SparseOperator> = None;
    for k in 0..args.samples {
        let t = args.t * k as f64 / (args.samples - 1) as f64;
        let sample =
            unitary_retraction(&op, t, tol).map_err(|e| CliError::failed(e.to_string()))?;
        min_sigma = min_sigma.min(sample.sigma_min(tol, seed));
        if k + 1 == args.samples {
            endpoint = Some(sample);
        }
    }
    let endpoint = endpoint.expect("samples >= 2");
    report.check(
        "invertible_along_path",
        if min_sigma > tol.rank {
            Verdict::Ok
        } else {
            Verdict::Violation
        },
    );
    let mut endpoint_defect = 0.0;
    if args.t == 1.0 {
        endpoint_defect = endpoint
            .unitarity_defect(tol, seed)
            .map_err(|e| CliError::failed(e.to_string()))?;
        report.check(
            "endpoint_unitary",
            if endpoint_defect <= tol.residual {
                Verdict::Ok
            } else {
                Verdict::Violation
            },
        );
    }
    report
        .witness(
            "retraction",
            serde_json::json!({
                "min_sigma": min_sigma,
                "start_sigma": start_sigma,
                "endpoint_unitarity_defect": endpoint_defect,
                "samples": args.samples,
            }),
        )
        .map_err(|e| CliError::failed(e.to_string()))?;
    report.timing("samples", args.samples as u64);
    Ok(report)
}
