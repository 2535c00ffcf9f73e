//! Configuration, dataset ingestion, report files and the command runner.

mod commands;
mod config;
mod dataset;
mod report;

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub use commands::{run_command, FitCurve, FitResult};
pub use config::{Command, RunConfig};
pub use dataset::{load_dataset, write_observations, Dataset, DatasetSpec, WeightKind};
pub use report::{read_run_record, write_report, write_run_record, RunRecord, RunResult};

/// Shortest text that round-trips through `f64` parsing: 17 significant
/// digits in scientific notation.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Package version with the build's `git describe`, when one was available.
pub fn version_string() -> String {
    match option_env!("ISAMP_GIT_DESCRIBE") {
        Some(g) if !g.is_empty() => format!("{} ({g})", env!("CARGO_PKG_VERSION")),
        _ => format!("v{}", env!("CARGO_PKG_VERSION")),
    }
}
