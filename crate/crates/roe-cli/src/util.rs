//! Shared plumbing for subcommand handlers: input loading and error → exit
//! code mapping.

use std::path::Path;
use std::sync::Arc;

use roe_core::operator::SparseOperator;
use roe_core::rational::Dist;
use roe_core::space::Window;

/// Handler-level failure, split by exit code:
/// `Usage` → 64 (bad flags or unreadable inputs), `Failed` → 2 (the
/// computation itself could not run to a verdict).
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failed(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn failed(msg: impl Into<String>) -> Self {
        CliError::Failed(msg.into())
    }
}

/// Read a JSON file into any deserializable value, mapping both I/O and
/// parse failures to usage errors that name the file.
pub fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("cannot parse {}: {e}", path.display())))
}

/// Load a window description produced by `roe space gen`.
pub fn load_window(path: &Path) -> Result<Arc<Window>, CliError> {
    let window: Window = load_json(path)?;
    Ok(Arc::new(window))
}

/// Load a single operator and rebase it onto `window` so that operators
/// from different files compose without pointer-identity surprises.
pub fn load_operator(path: &Path, window: &Arc<Window>) -> Result<SparseOperator, CliError> {
    let op: SparseOperator = load_json(path)?;
    rebase(op, window, path)
}

/// Rebase `op` onto the shared `window`, insisting the point sets agree.
pub fn rebase(
    op: SparseOperator,
    window: &Arc<Window>,
    origin: &Path,
) -> Result<SparseOperator, CliError> {
    if op.window().points() != window.points() {
        return Err(CliError::usage(format!(
            "operator {} lives on a different window than the given space",
            origin.display()
        )));
    }
    let entries: Vec<_> = op
        .support()
        .map(|(&(r, c), &v)| (r, c, v))
        .collect();
    SparseOperator::from_entries(Arc::clone(window), entries)
        .map_err(|e| CliError::usage(format!("operator {}: {e}", origin.display())))
}

/// Parse an exact distance from a flag value (integer, fraction `a/b`, or
/// short decimal such as `0.2`).
pub fn parse_dist(text: &str) -> Result<Dist, CliError> {
    text.parse::<Dist>()
        .map_err(|e| CliError::usage(format!("bad distance {text:?}: {e}")))
}
