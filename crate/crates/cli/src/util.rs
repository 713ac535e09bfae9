//! Shared CLI plumbing: error-to-exit-code mapping, flag parsing, config
//! merging, and output helpers.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use voxdiff::volume::{Mask, Volume};
use voxdiff::Error;

/// CLI failure classes, each with its own exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or flag values (64).
    Usage(String),
    /// File or validation problems (65).
    Data(String),
    /// The budget cannot be met (2).
    Infeasible(String),
    /// A demo tolerance check failed (1).
    Tolerance(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Tolerance(_) => 1,
            CliError::Infeasible(_) => 2,
            CliError::Usage(_) => 64,
            CliError::Data(_) => 65,
        }
    }

    pub fn message(&self) -> String {
        match self {
            CliError::Usage(m) => format!("usage error: {m}"),
            CliError::Data(m) => format!("data error: {m}"),
            CliError::Infeasible(m) => m.clone(),
            CliError::Tolerance(m) => format!("tolerance failure: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::BudgetInfeasible { t_max, min_step } => CliError::Infeasible(format!(
                "budget infeasible: at most {t_max:.2} steps affordable but the smallest \
                 trained step count is {min_step}; increase the budget, reduce the window \
                 overlap, or use a larger window"
            )),
            Error::InfeasibleAtMinimumOverlap { p_min } => CliError::Infeasible(format!(
                "budget infeasible even at the minimum overlap {p_min}; increase the budget \
                 or use fewer/larger windows"
            )),
            other => CliError::Data(other.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Parse "x,y,z" into three positive integers.
pub fn parse_triple(text: &str, flag: &str) -> CliResult<[usize; 3]> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 3 {
        return Err(CliError::Usage(format!(
            "--{flag} expects three comma-separated integers, got {text:?}"
        )));
    }
    let mut out = [0usize; 3];
    for (i, p) in parts.iter().enumerate() {
        out[i] = p
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("--{flag}: {p:?} is not a positive integer")))?;
        if out[i] == 0 {
            return Err(CliError::Usage(format!(
                "--{flag}: components must be positive"
            )));
        }
    }
    Ok(out)
}

/// Parse a comma-separated step list into a StepSet.
pub fn parse_steps(text: &str) -> CliResult<voxdiff::schedule::StepSet> {
    let values: Result<Vec<usize>, _> = text.split(',').map(|p| p.trim().parse()).collect();
    let values =
        values.map_err(|_| CliError::Usage(format!("--step-set: bad integer in {text:?}")))?;
    voxdiff::schedule::StepSet::new(values).map_err(|e| CliError::Usage(format!("--step-set: {e}")))
}

/// Load a JSON config file for flag defaults.
pub fn load_config<T: DeserializeOwned + Default>(path: &Option<PathBuf>) -> CliResult<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Data(format!("cannot read config {}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Data(format!("bad config {}: {e}", p.display())))
        }
    }
}

/// A required value resolved from flag, then config, in that order.
pub fn require<T>(flag: Option<T>, config: Option<T>, name: &str) -> CliResult<T> {
    flag.or(config)
        .ok_or_else(|| CliError::Usage(format!("missing required --{name}")))
}

pub fn read_volume(path: &Path) -> CliResult<Volume> {
    voxdiff::io::read_volume(path).map_err(CliError::from)
}

pub fn write_volume(v: &Volume, path: &Path) -> CliResult<()> {
    voxdiff::io::write_volume(v, path).map_err(CliError::from)
}

/// Load a volume and binarize it (nonzero = set).
pub fn read_mask(path: &Path) -> CliResult<Mask> {
    let v = read_volume(path)?;
    Ok(Mask::from_volume(&v, |x| x != 0.0))
}

/// Pretty JSON to stdout, or to a file when `output` is given.
pub fn emit_json<T: Serialize>(value: &T, output: &Option<PathBuf>) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Data(format!("serialization failed: {e}")))?;
    match output {
        None => {
            println!("{text}");
            Ok(())
        }
        Some(path) => std::fs::write(path, text.as_bytes())
            .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display()))),
    }
}
