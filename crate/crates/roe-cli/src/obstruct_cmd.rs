//! `roe obstruct` — compute the window-stable obstructions: corner Fredholm
//! indices of shifts, determinant winding of operator loops, and trace
//! means over growing small-boundary families.

use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Subcommand, ValueEnum};
use roe_core::config::Tolerances;
use roe_core::obstruction::{
    corner_index, det_winding, shift_from_bijection, trace_mean, ObstructionError,
};
use roe_core::operator::SparseOperator;
use roe_core::partition::exponential_block_of;
use roe_core::rational::Dist;
use roe_core::report::{Report, Verdict};
use roe_core::space::{Label, PointId, SpaceSpec, Window, WindowExtent};

use crate::util::{load_json, load_operator, load_window, rebase, CliError};

#[derive(Subcommand)]
pub enum ObstructCmd {
    /// Corner Fredholm index of a shift over the nonnegative half-line,
    /// stabilized across window sizes.
    Index(IndexArgs),
    /// Determinant winding of a closed loop of invertible operators.
    Winding(WindingArgs),
    /// Trace means over a growing family of small-boundary sets.
    Trace(TraceArgs),
}

impl ObstructCmd {
    pub fn slug(&self) -> &'static str {
        match self {
            ObstructCmd::Index(_) => "index",
            ObstructCmd::Winding(_) => "winding",
            ObstructCmd::Trace(_) => "trace",
        }
    }
}

#[derive(Args, serde::Serialize)]
pub struct IndexArgs {
    /// Ambient space; only the integer line ("z-line") is supported.
    #[arg(long, default_value = "z-line")]
    pub space: String,
    /// Subset carrying the corner; only "nonneg" is supported.
    #[arg(long, default_value = "nonneg")]
    pub split: String,
    /// The shift: "identity", "shift+k", or "shift-k".
    #[arg(long, default_value = "shift+1")]
    pub alpha: String,
    /// Comma-separated window half-widths to stabilize across.
    #[arg(long, default_value = "64,128")]
    pub windows: String,
}

#[derive(Args, serde::Serialize)]
pub struct WindingArgs {
    /// JSON array of operators sampling the loop (first = last).
    #[arg(long = "loop")]
    pub loop_file: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceFamily {
    /// Coordinate boxes |x_i| <= L.
    Boxes,
    /// Whole blocks -L..=L of the exponential block space.
    BlockIntervals,
    /// Balls of radius L around the anchor.
    Balls,
}

#[derive(Args, serde::Serialize)]
pub struct TraceArgs {
    /// Window file the operator lives on.
    #[arg(long)]
    pub space: PathBuf,
    /// Operator whose diagonal is averaged.
    #[arg(long)]
    pub op: PathBuf,
    /// Growing family of averaging sets (intersected with the window).
    #[arg(long, value_enum)]
    pub folner: TraceFamily,
    /// Largest family parameter.
    #[arg(long, default_value_t = 8)]
    pub budget: i64,
}

pub fn run(cmd: &ObstructCmd, tol: &Tolerances, seed: u64) -> Result<Report, CliError> {
    match cmd {
        ObstructCmd::Index(args) => index(args, tol, seed),
        ObstructCmd::Winding(args) => winding(args, tol, seed),
        ObstructCmd::Trace(args) => trace(args, tol, seed),
    }
}

enum Alpha {
    Identity,
    Shift(i64),
}

fn parse_alpha(text: &str) -> Result<Alpha, CliError> {
    if text == "identity" {
        return Ok(Alpha::Identity);
    }
    if let Some(rest) = text.strip_prefix("shift") {
        if let Ok(k) = rest.parse::<i64>() {
            if k != 0 {
                return Ok(Alpha::Shift(k));
            }
        }
    }
    Err(CliError::usage(format!(
        "bad --alpha {text:?}: expected identity, shift+k, or shift-k"
    )))
}

fn index(args: &IndexArgs, tol: &Tolerances, seed: u64) -> Result<Report, CliError> {
    if !matches!(args.space.as_str(), "z-line" | "integer-line") {
        return Err(CliError::usage(
            "only the integer line (--space z-line) is supported",
        ));
    }
    if args.split != "nonneg" {
        return Err(CliError::usage("only --split nonneg is supported"));
    }
    let alpha = parse_alpha(&args.alpha)?;
    let half_widths = args
        .windows
        .split(',')
        .map(|w| {
            w.trim()
                .parse::<i64>()
                .ok()
                .filter(|&h| h > 0)
                .ok_or_else(|| CliError::usage(format!("bad half-width {w:?}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if half_widths.is_empty() {
        return Err(CliError::usage("--windows must name at least one width"));
    }

    let mut report = Report::new(
        "obstruct index",
        serde_json::json!({"args": args, "seed": seed}),
    );
    let mut indices = Vec::new();
    let mut per_window = Vec::new();
    for &h in &half_widths {
        let window = Arc::new(
            Window::realize(
                &SpaceSpec::IntegerLine,
                &WindowExtent {
                    half_width: Some(h),
                    ..WindowExtent::default()
                },
            )
            .map_err(|e| CliError::usage(e.to_string()))?,
        );
        let op = match alpha {
            Alpha::Identity => SparseOperator::identity(Arc::clone(&window)),
            Alpha::Shift(k) => {
                let pairs: Vec<(Label, Label)> = (-h..=h)
                    .filter(|i| (-h..=h).contains(&(i + k)))
                    .map(|i| (Label::Int(i), Label::Int(i + k)))
                    .collect();
                shift_from_bijection(Arc::clone(&window), &pairs, Dist::integer(k.abs()))
                    .map_err(|e| CliError::failed(e.to_string()))?
            }
        };
        let subset: Vec<PointId> = (0..=h)
            .map(|i| window.id(&Label::Int(i)).expect("label was realized"))
            .collect();
        let index_report =
            corner_index(&op, &subset, tol).map_err(|e| CliError::failed(e.to_string()))?;
        indices.push(index_report.index);
        per_window.push(serde_json::json!({
            "half_width": h,
            "report": index_report,
        }));
    }
    report.timing("windows", half_widths.len() as u64);
    report
        .witness("per_window", per_window)
        .map_err(|e| CliError::failed(e.to_string()))?;
    let stabilized = indices.windows(2).all(|w| w[0] == w[1]);
    // A single window cannot show stability; two or more agreeing windows
    // can.  Disagreement is not a violation of anything — the windows were
    // simply too small to pin the ambient index down.
    report.check(
        "index_stabilized",
        if half_widths.len() < 2 || !stabilized {
            Verdict::Inconclusive
        } else {
            Verdict::Ok
        },
    );
    if stabilized && half_widths.len() >= 2 {
        report
            .witness("index", indices[0])
            .map_err(|e| CliError::failed(e.to_string()))?;
    }
    Ok(report)
}

fn winding(args: &WindingArgs, tol: &Tolerances, seed: u64) -> Result<Report, CliError> {
    let samples: Vec<SparseOperator> = load_json(&args.loop_file)?;
    if samples.is_empty() {
        return Err(CliError::usage("the loop file contains no operators"));
    }
    let window = Arc::clone(samples[0].window());
    let samples = samples
        .into_iter()
        .map(|s| rebase(s, &window, &args.loop_file))
        .collect::<Result<Vec<_>, _>>()?;
    let mut report = Report::new(
        "obstruct winding",
        serde_json::json!({"args": args, "seed": seed}),
    );
    report.timing("samples", samples.len() as u64);
    match det_winding(&samples, tol, seed) {
        Ok(w) => {
            report.check("loop_stays_invertible", Verdict::Ok);
            report.check("winding_integral", Verdict::Ok);
            report
                .witness("winding", &w)
                .map_err(|e| CliError::failed(e.to_string()))?;
        }
        Err(e @ (ObstructionError::LoopNotClosed { .. } | ObstructionError::StepTooLarge { .. })) => {
            report.check("loop_stays_invertible", Verdict::Violation);
            report
                .witness("reason", e.to_string())
                .map_err(|e| CliError::failed(e.to_string()))?;
        }
        Err(e @ ObstructionError::WindingNotInteger { .. }) => {
            // The sampling was too coarse to trust the accumulated
            // argument; finer sampling might still decide it.
            report.check("winding_integral", Verdict::Inconclusive);
            report
                .witness("reason", e.to_string())
                .map_err(|e| CliError::failed(e.to_string()))?;
        }
        Err(ObstructionError::BadParams(msg)) => return Err(CliError::usage(msg)),
        Err(e) => return Err(CliError::failed(e.to_string())),
    }
    Ok(report)
}

/// Window points belonging to the family member with parameter `l`.
fn family_set(
    window: &Window,
    family: TraceFamily,
    l: i64,
) -> Result<Vec<PointId>, CliError> {
    match family {
        TraceFamily::Boxes => (0..window.n())
            .map(|p| {
                let inside = match window.label(p) {
                    Label::Int(x) => x.abs() <= l,
                    Label::Tuple(v) => v.iter().all(|x| x.abs() <= l),
                    _ => {
                        return Err(CliError::usage(
                            "the box family applies to line and lattice windows",
                        ))
                    }
                };
                Ok(inside.then_some(p))
            })
            .filter_map(Result::transpose)
            .collect(),
        TraceFamily::BlockIntervals => {
            if !matches!(window.spec(), SpaceSpec::ExponentialBlocks) {
                return Err(CliError::usage(
                    "the block family applies to exponential block windows",
                ));
            }
            Ok((0..window.n())
                .filter(|&p| match window.label(p) {
                    Label::Int(x) => exponential_block_of(*x).abs() <= l,
                    _ => false,
                })
                .collect())
        }
        TraceFamily::Balls => {
            let anchor = window.id(&window.spec().anchor()).ok_or_else(|| {
                CliError::usage("the window does not contain the space's anchor point")
            })?;
            Ok((0..window.n())
                .filter(|&p| window.dist(anchor, p) <= Dist::integer(l))
                .collect())
        }
    }
}

fn trace(args: &TraceArgs, tol: &Tolerances, seed: u64) -> Result<Report, CliError> {
    if args.budget < 2 {
        return Err(CliError::usage(
            "--budget must be at least 2 to observe convergence",
        ));
    }
    let window = load_window(&args.space)?;
    let op = load_operator(&args.op, &window)?;
    let mut report = Report::new(
        "obstruct trace",
        serde_json::json!({"args": args, "seed": seed}),
    );
    let mut estimates = Vec::new();
    let mut values = Vec::new();
    for l in 1..=args.budget {
        let set = family_set(&window, args.folner, l)?;
        if set.is_empty() {
            continue;
        }
        let tau = trace_mean(&op, &set).map_err(|e| CliError::failed(e.to_string()))?;
        estimates.push(serde_json::json!({
            "parameter": l,
            "set_size": set.len(),
            "re": tau.re,
            "im": tau.im,
        }));
        values.push(tau);
    }
    if values.len() < 2 {
        return Err(CliError::usage(
            "fewer than two family members meet the window; enlarge the window or budget",
        ));
    }
    let last_delta = (values[values.len() - 1] - values[values.len() - 2]).norm();
    report.check(
        "trace_converged",
        if last_delta <= tol.norm {
            Verdict::Ok
        } else {
            Verdict::Inconclusive
        },
    );
    report
        .witness(
            "trace",
            serde_json::json!({
                "estimates": estimates,
                "estimate_re": values[values.len() - 1].re,
                "estimate_im": values[values.len() - 1].im,
                "last_delta": last_delta,
            }),
        )
        .map_err(|e| CliError::failed(e.to_string()))?;
    report.timing("family_members", values.len() as u64);
    Ok(report)
}
