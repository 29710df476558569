//! `roe space` — generate windows of the built-in spaces and validate the
//! metric axioms on window files.

use std::path::PathBuf;

use clap::{Args, Subcommand, ValueEnum};
use roe_core::report::{emit_report, Report, Verdict};
use roe_core::space::{validate_metric, SpaceSpec, Window, WindowExtent};

use crate::util::{parse_dist, CliError};

#[derive(Subcommand)]
pub enum SpaceCmd {
    /// Realize a finite window of a built-in space and write it as JSON.
    Gen(GenArgs),
    /// Check the metric axioms on a window file.
    Validate(ValidateArgs),
}

impl SpaceCmd {
    pub fn slug(&self) -> &'static str {
        match self {
            SpaceCmd::Gen(_) => "gen",
            SpaceCmd::Validate(_) => "validate",
        }
    }
}

/// The space kinds constructible from flags alone (explicit finite spaces
/// carry a distance matrix and are loaded from files instead).
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpaceKind {
    IntegerLine,
    IntegerLattice,
    ExponentialBlocks,
    FiberedLine,
    BoundedInfinite,
    DisjointPower,
    SparseAugmented,
}

#[derive(Args, serde::Serialize)]
pub struct GenArgs {
    /// Which space to realize.
    #[arg(long, value_enum)]
    pub spec: SpaceKind,
    /// Half-width of line-like coordinates (points with |x| <= n).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<i64>,
    /// Lattice dimension.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim: Option<u32>,
    /// Highest fiber level to include.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fibers: Option<i64>,
    /// Highest block index to include (blocks -b..=b).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blocks: Option<i64>,
    /// Point count for spaces realized as an initial segment.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub count: Option<i64>,
    /// Number of tail points for the sparse augmentation.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail: Option<i64>,
    /// Common diameter for the bounded space (integer, a/b, or decimal).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diameter: Option<String>,
    /// Number of copies for the disjoint power.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub copies: Option<u32>,
    /// Tail spacing for the sparse augmentation.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spacing: Option<i64>,
    /// Base space for disjoint powers and sparse augmentations.
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base: Option<SpaceKind>,
    /// Where to write the window JSON.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, serde::Serialize)]
pub struct ValidateArgs {
    /// Window file to check.
    pub file: PathBuf,
}

/// Build the symbolic spec from flags; composite kinds get a simple base.
fn build_spec(args: &GenArgs, kind: SpaceKind) -> Result<SpaceSpec, CliError> {
    Ok(match kind {
        SpaceKind::IntegerLine => SpaceSpec::IntegerLine,
        SpaceKind::IntegerLattice => SpaceSpec::IntegerLattice {
            dim: args
                .dim
                .ok_or_else(|| CliError::usage("--dim is required for integer-lattice"))?,
        },
        SpaceKind::ExponentialBlocks => SpaceSpec::ExponentialBlocks,
        SpaceKind::FiberedLine => SpaceSpec::FiberedLine,
        SpaceKind::BoundedInfinite => {
            let text = args.diameter.as_deref().unwrap_or("1");
            SpaceSpec::BoundedInfinite {
                diameter: parse_dist(text)?,
            }
        }
        SpaceKind::DisjointPower | SpaceKind::SparseAugmented => {
            let base_kind = args.base.unwrap_or(SpaceKind::IntegerLine);
            if matches!(
                base_kind,
                SpaceKind::DisjointPower | SpaceKind::SparseAugmented
            ) {
                return Err(CliError::usage(
                    "--base must be a non-composite space kind",
                ));
            }
            let base = Box::new(build_spec(args, base_kind)?);
            match kind {
                SpaceKind::DisjointPower => SpaceSpec::DisjointPower {
                    base,
                    copies: args.copies.unwrap_or(2),
                },
                _ => SpaceSpec::SparseAugmented {
                    base,
                    spacing: args.spacing.unwrap_or(10),
                },
            }
        }
    })
}

fn extent(args: &GenArgs) -> WindowExtent {
    WindowExtent {
        half_width: args.n,
        levels: args.fibers,
        blocks: args.blocks,
        count: args.count,
        tail_count: args.tail,
    }
}

pub fn run(cmd: &SpaceCmd, seed: u64) -> Result<Report, CliError> {
    match cmd {
        SpaceCmd::Gen(args) => gen(args, seed),
        SpaceCmd::Validate(args) => validate(args, seed),
    }
}

fn gen(args: &GenArgs, seed: u64) -> Result<Report, CliError> {
    let spec = build_spec(args, args.spec)?;
    let window = Window::realize(&spec, &extent(args))
        .map_err(|e| CliError::usage(format!("cannot realize window: {e}")))?;
    emit_report(&window, &args.out)
        .map_err(|e| CliError::failed(format!("cannot write window: {e}")))?;

    let mut report = Report::new(
        "space gen",
        serde_json::json!({"args": args, "seed": seed}),
    );
    let metric = validate_metric(&window);
    report.check(
        "metric_axioms",
        if metric.is_metric() {
            Verdict::Ok
        } else {
            Verdict::Violation
        },
    );
    report
        .witness(
            "window",
            serde_json::json!({
                "kind": window.spec().kind_name(),
                "points": window.n(),
                "out": args.out.display().to_string(),
            }),
        )
        .map_err(|e| CliError::failed(e.to_string()))?;
    if !metric.is_metric() {
        report
            .witness("metric_violations", &metric.violations)
            .map_err(|e| CliError::failed(e.to_string()))?;
    }
    report.timing("points", window.n() as u64);
    Ok(report)
}

fn validate(args: &ValidateArgs, seed: u64) -> Result<Report, CliError> {
    let mut report = Report::new(
        "space validate",
        serde_json::json!({"args": args, "seed": seed}),
    );
    let text = std::fs::read_to_string(&args.file)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", args.file.display())))?;
    // A file that does not even parse as a window is itself the violation
    // this command exists to find, so it gets a verdict, not a usage error.
    let window: Window = match serde_json::from_str(&text) {
        Ok(w) => w,
        Err(e) => {
            report.check("parses", Verdict::Violation);
            report
                .witness("parse_error", e.to_string())
                .map_err(|e| CliError::failed(e.to_string()))?;
            return Ok(report);
        }
    };
    report.check("parses", Verdict::Ok);
    let metric = validate_metric(&window);
    report.check(
        "metric_axioms",
        if metric.is_metric() {
            Verdict::Ok
        } else {
            Verdict::Violation
        },
    );
    if !metric.is_metric() {
        report
            .witness("metric_violations", &metric.violations)
            .map_err(|e| CliError::failed(e.to_string()))?;
    }
    report
        .witness(
            "window",
            serde_json::json!({
                "kind": window.spec().kind_name(),
                "points": window.n(),
            }),
        )
        .map_err(|e| CliError::failed(e.to_string()))?;
    report.timing("points", window.n() as u64);
    Ok(report)
}
