//! Command-line front end for `dyuch`. [`run`] parses arguments, executes one
//! verification command and returns the process exit code:
//!
//! * `0`: every check passed,
//! * `1`: a check failed; the JSON report lists the violating witnesses,
//! * `2`: usage, parse or IO error, reported as one line on stderr.
//!
//! Each run prints a short human summary to stdout, followed by the JSON
//! report unless `--report PATH` redirects it to a file.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Parser;
use serde::Serialize;
use serde_json::Value;

mod commands;

pub use commands::Cli;

/// Depth cap used when `DYUCH_MAX_DEPTH` is unset.
pub const DEFAULT_MAX_DEPTH: u32 = dyuch::extremal::DEFAULT_MAX_DEPTH;
pub const MAX_DEPTH_VAR: &str = "DYUCH_MAX_DEPTH";
/// At most this many violations are listed; the summary keeps the count.
pub const MAX_REPORTED: usize = 100;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(PathBuf, std::io::Error),
    Core(dyuch::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Io(p, e) => write!(f, "{}: {e}", p.display()),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<dyuch::Error> for CliError {
    fn from(e: dyuch::Error) -> Self {
        CliError::Core(e)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Settings shared by every command after defaults are applied.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: &'static str,
    pub seed: u64,
    pub samples: usize,
    pub tolerance: f64,
    pub depth: u32,
    pub step: f64,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(command: &'static str, seed: u64, tolerance: f64) -> Self {
        RunConfig {
            command,
            seed,
            samples: 1,
            tolerance,
            depth: 0,
            step: 0.0,
            out: None,
        }
    }

    pub fn validate(&self, max_depth: u32) -> CliResult<()> {
        if !(self.tolerance > 0.0) || !self.tolerance.is_finite() {
            return Err(CliError::Usage(format!("--tolerance must be positive, got {}", self.tolerance)));
        }
        if self.depth % 2 == 1 {
            return Err(CliError::Usage(format!("--depth {} is odd; depths must be even", self.depth)));
        }
        if self.depth > max_depth {
            return Err(CliError::Usage(format!(
                "--depth {} exceeds the cap {max_depth} (set {MAX_DEPTH_VAR} to raise it)",
                self.depth
            )));
        }
        if self.samples < 1 {
            return Err(CliError::Usage("--samples must be at least 1".into()));
        }
        if self.step < 0.0 || !self.step.is_finite() {
            return Err(CliError::Usage(format!("--step must be positive, got {}", self.step)));
        }
        Ok(())
    }
}

/// Reads the depth cap from `DYUCH_MAX_DEPTH`.
pub fn max_depth_from_env() -> CliResult<u32> {
    match std::env::var(MAX_DEPTH_VAR) {
        Err(std::env::VarError::NotPresent) => Ok(DEFAULT_MAX_DEPTH),
        Err(e) => Err(CliError::Usage(format!("{MAX_DEPTH_VAR}: {e}"))),
        Ok(s) => s
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{MAX_DEPTH_VAR}={s:?} is not a nonnegative integer"))),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub command: String,
    pub seed: u64,
    pub tolerance: f64,
    pub pass: bool,
    pub violations: Vec<Value>,
    pub summary: Value,
}

fn to_value(v: &impl Serialize) -> CliResult<Value> {
    serde_json::to_value(v).map_err(|e| CliError::Core(e.into()))
}

impl Report {
    pub fn new<V: Serialize>(cfg: &RunConfig, violations: &[V], summary: impl Serialize) -> CliResult<Self> {
        let mut summary = to_value(&summary)?;
        if let Value::Object(m) = &mut summary {
            m.insert("violation_count".into(), violations.len().into());
        }
        Ok(Report {
            command: cfg.command.to_string(),
            seed: cfg.seed,
            tolerance: cfg.tolerance,
            pass: violations.is_empty(),
            violations: violations.iter().take(MAX_REPORTED).map(to_value).collect::<CliResult<_>>()?,
            summary,
        })
    }
}

/// Result of a command: the report plus human-readable lines.
pub struct Outcome {
    pub report: Report,
    pub lines: Vec<String>,
    pub report_path: Option<PathBuf>,
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: malformed JSON: {e}", path.display())))
}

pub fn write_json(path: &Path, v: &impl Serialize) -> CliResult<()> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::Core(e.into()))?;
    s.push('\n');
    std::fs::write(path, s).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> CliResult<()> {
    let io = |e: csv::Error| CliError::Io(path.to_path_buf(), std::io::Error::other(e));
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(io)?;
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.serialize(r).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Io(path.to_path_buf(), e))
}

/// Runs one command and returns its exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return 0;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            let _ = writeln!(err, "dyuch: {}", first.trim_start_matches("error: "));
            return 2;
        }
    };
    match cli.execute() {
        Ok(o) => emit(o, out, err),
        Err(CliError::Core(dyuch::Error::TheoremViolation(msg))) => {
            // findings raised inside the library still produce a report
            let cfg = cli.config();
            let report = Report {
                command: cfg.command.to_string(),
                seed: cfg.seed,
                tolerance: cfg.tolerance,
                pass: false,
                violations: vec![Value::String(msg.clone())],
                summary: serde_json::json!({ "violation_count": 1 }),
            };
            let lines = vec![format!("{}: FAIL {msg}", cfg.command)];
            emit(Outcome { report, lines, report_path: cli.report_path() }, out, err)
        }
        Err(e) => {
            let _ = writeln!(err, "dyuch {}: {e}", cli.config().command);
            2
        }
    }
}

fn emit(o: Outcome, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    for l in &o.lines {
        let _ = writeln!(out, "{l}");
    }
    let code = if o.report.pass { 0 } else { 1 };
    match &o.report_path {
        Some(p) => {
            if let Err(e) = write_json(p, &o.report) {
                let _ = writeln!(err, "dyuch {}: {e}", o.report.command);
                return 2;
            }
        }
        None => match serde_json::to_string(&o.report) {
            Ok(s) => {
                let _ = writeln!(out, "{s}");
            }
            Err(e) => {
                let _ = writeln!(err, "dyuch {}: {e}", o.report.command);
                return 2;
            }
        },
    }
    code
}
