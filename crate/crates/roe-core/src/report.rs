//! Byte-reproducible JSON artifacts.
//!
//! Every command of the workbench ends in a [`Report`] written through
//! [`emit_report`].  The writer produces *canonical* JSON — object keys
//! sorted, floats in scientific notation with 17 significant digits,
//! `-0.0` folded into `0.0`, no insignificant whitespace — so that two
//! runs with the same seeded configuration produce byte-identical files
//! that can be diffed or hashed in CI.
//!
//! Canonical reports contain no `null`: absent data is an empty object,
//! array, or an explicit flag.  Since `serde_json` serializes NaN and
//! infinities as `null`, this rule doubles as the non-finite-number
//! guard — a computation that produced a NaN fails the write instead of
//! silently emitting an unparseable or misleading value.
//!
//! Writes are atomic (temp file in the target directory, then rename),
//! so a crashed run never leaves a truncated artifact behind.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

/// Version stamp embedded in every report.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ReportError {
    /// A `null` in the value tree: either a genuinely absent field or a
    /// non-finite float, neither of which has a canonical form.
    #[error("no canonical form for null at {path} (non-finite floats serialize as null)")]
    NonCanonical { path: String },
    #[error("non-finite number {value} at {path}")]
    NonFinite { path: String, value: f64 },
    #[error("i/o error writing report: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

/// The three-way outcome every pipeline maps onto.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    /// All checks passed.
    Ok,
    /// A checked property failed; witnesses identify where.
    Violation,
    /// The evidence does not decide the question either way.
    Inconclusive,
}

impl Verdict {
    /// Process exit code for this verdict (usage errors use 64).
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Ok => 0,
            Verdict::Violation => 1,
            Verdict::Inconclusive => 2,
        }
    }

    /// Combine with another verdict, keeping the worse of the two
    /// (`Violation` dominates `Inconclusive` dominates `Ok`).
    pub fn and(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (Violation, _) | (_, Violation) => Violation,
            (Inconclusive, _) | (_, Inconclusive) => Inconclusive,
            _ => Ok,
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Ok => "ok",
            Verdict::Violation => "violation",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// Exit code reserved for malformed invocations.
pub const EXIT_USAGE: i32 = 64;

/// The artifact a command run leaves behind.
///
/// `timings` holds deterministic work counts (samples evaluated,
/// iterations run) rather than wall-clock durations, so that reports
/// stay byte-identical across machines and runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    /// The subcommand that produced this report.
    pub command: String,
    /// Echo of the fully-resolved run configuration (seed included).
    pub inputs: Value,
    /// Overall verdict; the worst of `checks`.
    pub verdict: Verdict,
    /// Named sub-verdicts, one per property checked.
    pub checks: BTreeMap<String, Verdict>,
    /// Evidence: certificates for `ok`, counterexamples for the rest.
    pub witnesses: Value,
    /// Deterministic work counts per stage.
    pub timings: BTreeMap<String, u64>,
}

impl Report {
    pub fn new(command: impl Into<String>, inputs: Value) -> Self {
        Report {
            schema_version: SCHEMA_VERSION,
            command: command.into(),
            inputs,
            verdict: Verdict::Ok,
            checks: BTreeMap::new(),
            witnesses: Value::Object(serde_json::Map::new()),
            timings: BTreeMap::new(),
        }
    }

    /// Record a named check, folding it into the overall verdict.
    pub fn check(&mut self, name: impl Into<String>, verdict: Verdict) {
        self.verdict = self.verdict.and(verdict);
        self.checks.insert(name.into(), verdict);
    }

    /// Attach a witness object under `name`.
    pub fn witness(
        &mut self,
        name: impl Into<String>,
        value: impl Serialize,
    ) -> Result<(), ReportError> {
        let v = serde_json::to_value(value)?;
        if let Value::Object(map) = &mut self.witnesses {
            map.insert(name.into(), v);
        }
        Ok(())
    }

    pub fn timing(&mut self, name: impl Into<String>, work: u64) {
        self.timings.insert(name.into(), work);
    }
}

/// Directory reports default to: `REPORT_DIR` if set, else the current
/// working directory.
pub fn report_dir() -> PathBuf {
    std::env::var_os("REPORT_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."))
}

/// Render a serializable value as canonical JSON.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String, ReportError> {
    let v = serde_json::to_value(value)?;
    let mut out = String::new();
    write_value(&v, &mut String::from("$"), &mut out)?;
    out.push('\n');
    Ok(out)
}

/// Write `report` to `path` as canonical JSON, atomically.
pub fn emit_report<T: Serialize>(report: &T, path: &Path) -> Result<(), ReportError> {
    let text = canonical_json(report)?;
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, text.as_bytes())?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn write_value(v: &Value, path: &mut String, out: &mut String) -> Result<(), ReportError> {
    match v {
        Value::Null => {
            return Err(ReportError::NonCanonical { path: path.clone() });
        }
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                let _ = write!(out, "{i}");
            } else if let Some(u) = n.as_u64() {
                let _ = write!(out, "{u}");
            } else {
                // serde_json numbers are finite by construction; the
                // guard is kept for defence in depth.
                let f = n.as_f64().unwrap_or(f64::NAN);
                out.push_str(&format_float(f, path)?);
            }
        }
        Value::String(s) => {
            // serde_json's string escaping is deterministic.
            let _ = write!(out, "{}", Value::String(s.clone()));
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                let mark = path.len();
                let _ = write!(path, "[{i}]");
                write_value(item, path, out)?;
                path.truncate(mark);
            }
            out.push(']');
        }
        Value::Object(map) => {
            // serde_json's map is key-sorted already (preserve_order is
            // off); sort defensively so canonical form never depends on
            // the feature set.
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, key) in keys.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{}", Value::String((*key).clone()));
                out.push(':');
                let mark = path.len();
                let _ = write!(path, ".{key}");
                write_value(&map[key.as_str()], path, out)?;
                path.truncate(mark);
            }
            out.push('}');
        }
    }
    Ok(())
}

/// Scientific notation with 17 significant digits; `-0.0` becomes `0.0`.
fn format_float(f: f64, path: &str) -> Result<String, ReportError> {
    if !f.is_finite() {
        return Err(ReportError::NonFinite {
            path: path.to_owned(),
            value: f,
        });
    }
    let f = if f == 0.0 { 0.0 } else { f };
    Ok(format!("{f:.16e}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn canonical_form_sorts_keys_and_pins_floats() {
        let v = json!({
            "zeta": [1, 2.5, true, "x\"y"],
            "alpha": {"b": 1.0, "a": -0.0},
        });
        let text = canonical_json(&v).unwrap();
        assert_eq!(
            text,
            concat!(
                "{\"alpha\":{\"a\":0.0000000000000000e0,",
                "\"b\":1.0000000000000000e0},",
                "\"zeta\":[1,2.5000000000000000e0,true,\"x\\\"y\"]}\n"
            )
        );
        // Canonical output is itself valid JSON.
        let back: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back["zeta"][0], json!(1));
    }

    #[test]
    fn non_finite_and_null_are_rejected_with_a_path() {
        let v = json!({"sigma": f64::NAN});
        let err = canonical_json(&v).unwrap_err();
        match err {
            ReportError::NonCanonical { path } => assert_eq!(path, "$.sigma"),
            other => panic!("unexpected error {other:?}"),
        }
        let v = json!({"outer": [1, {"inner": null}]});
        let err = canonical_json(&v).unwrap_err();
        match err {
            ReportError::NonCanonical { path } => {
                assert_eq!(path, "$.outer[1].inner");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn verdicts_map_to_exit_codes_and_combine() {
        assert_eq!(Verdict::Ok.exit_code(), 0);
        assert_eq!(Verdict::Violation.exit_code(), 1);
        assert_eq!(Verdict::Inconclusive.exit_code(), 2);
        assert_eq!(Verdict::Ok.and(Verdict::Inconclusive), Verdict::Inconclusive);
        assert_eq!(Verdict::Inconclusive.and(Verdict::Violation), Verdict::Violation);
        assert_eq!(serde_json::to_string(&Verdict::Ok).unwrap(), "\"ok\"");
        assert_eq!(
            serde_json::to_string(&Verdict::Violation).unwrap(),
            "\"violation\""
        );
    }

    #[test]
    fn reports_accumulate_checks_and_write_atomically() {
        let mut report = Report::new("demo", json!({"seed": 7}));
        report.check("bounds", Verdict::Ok);
        report.check("ratio", Verdict::Violation);
        report.witness("ratio", json!({"observed": 0.25})).unwrap();
        report.timing("samples", 45);
        assert_eq!(report.verdict, Verdict::Violation);

        let dir = std::env::temp_dir().join(format!("roe-report-{}", std::process::id()));
        let path = dir.join("demo.json");
        emit_report(&report, &path).unwrap();
        let first = fs::read(&path).unwrap();
        emit_report(&report, &path).unwrap();
        let second = fs::read(&path).unwrap();
        assert_eq!(first, second, "writes are byte-identical");
        let parsed: Report = serde_json::from_slice(&first).unwrap();
        assert_eq!(parsed.verdict, Verdict::Violation);
        assert_eq!(parsed.schema_version, SCHEMA_VERSION);
        assert!(!dir.join("demo.json.tmp").exists(), "temp file renamed away");
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn large_reports_round_trip() {
        let big: Vec<f64> = (0..20_000).map(|i| i as f64 * 0.5).collect();
        let mut report = Report::new("big", json!({}));
        report.witness("samples", &big).unwrap();
        let dir = std::env::temp_dir().join(format!("roe-report-big-{}", std::process::id()));
        let path = dir.join("big.json");
        emit_report(&report, &path).unwrap();
        let parsed: Report = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(parsed.witnesses["samples"].as_array().unwrap().len(), 20_000);
        fs::remove_dir_all(&dir).unwrap();
    }
}
