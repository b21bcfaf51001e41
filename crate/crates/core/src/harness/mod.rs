//! File formats, the telemetry line codec and the command implementations
//! behind the `circumsense` binary.
//!
//! Every text format starts with a `# <kind> format_version=<n>` line.
//! Outputs are written to a temporary sibling and renamed into place; a
//! command that fails part way removes whatever it already wrote.

pub mod calibration_io;
pub mod commands;
pub mod frame;
pub mod scenario_file;
pub mod trace;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::lumen_sim::SimError;
use crate::optical_model::OpticalError;
use crate::ring_mapping::MapError;
use crate::signal_pipeline::SignalError;

pub use calibration_io::{parse_calibration_csv, read_calibration_file, write_calibration_file, CalibrationRecord};
pub use frame::{decode_frame, encode_frame, read_frames, write_frames, FrameError, FrameKind, StreamFrame};
pub use scenario_file::{load_scenario, ScenarioFile};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{context} line {line}: {message}")]
    Parse { context: String, line: usize, message: String },
    #[error("{0}")]
    Format(String),
    #[error("{0}: no data rows")]
    Empty(String),
    #[error("unknown channel {channel} at line {line}: scenario has {units} units")]
    UnknownChannel { channel: u8, line: usize, units: usize },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Optical(#[from] OpticalError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Map(#[from] MapError),
}

impl HarnessError {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        HarnessError::Io { path: path.to_path_buf(), source }
    }

    pub(crate) fn parse(context: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        HarnessError::Parse { context: context.into(), line, message: message.into() }
    }
}

pub fn version_header(kind: &str) -> String {
    format!("# {kind} format_version={FORMAT_VERSION}")
}

/// Check the leading version line of a `kind` document.
pub(crate) fn check_header(kind: &str, context: &str, first_line: Option<&str>) -> Result<(), HarnessError> {
    let line = first_line.ok_or_else(|| HarnessError::Empty(context.to_string()))?;
    let rest = line
        .trim()
        .strip_prefix('#')
        .map(str::trim)
        .and_then(|r| r.strip_prefix(kind))
        .map(str::trim)
        .and_then(|r| r.strip_prefix("format_version="))
        .ok_or_else(|| HarnessError::parse(context, 1, format!("expected `{}`", version_header(kind))))?;
    match rest.parse::<u32>() {
        Ok(FORMAT_VERSION) => Ok(()),
        Ok(v) => Err(HarnessError::parse(context, 1, format!("unsupported format version {v}"))),
        Err(_) => Err(HarnessError::parse(context, 1, format!("bad format version `{rest}`"))),
    }
}

pub(crate) fn read_text(path: &Path) -> Result<String, HarnessError> {
    fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))
}

fn temp_sibling(path: &Path) -> PathBuf {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!(".{name}.tmp{}", std::process::id()))
}

/// Write `contents` to `path` through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), HarnessError> {
    let tmp = temp_sibling(path);
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(HarnessError::io(path, e));
    }
    Ok(())
}

/// Write several outputs; on failure remove the ones already written.
pub fn write_all_atomic(outputs: &[(&Path, Vec<u8>)]) -> Result<(), HarnessError> {
    for (i, (path, bytes)) in outputs.iter().enumerate() {
        if let Err(e) = write_atomic(path, bytes) {
            for (done, _) in &outputs[..i] {
                let _ = fs::remove_file(done);
            }
            return Err(e);
        }
    }
    Ok(())
}
