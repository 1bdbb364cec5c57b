//! Report emission: pretty JSON to stdout and files under the out dir.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::scenario::{validation, AppError};

pub fn ensure_dir(dir: &Path) -> Result<(), AppError> {
    fs::create_dir_all(dir).map_err(|e| {
        validation(format!(
            "cannot create output directory {}: {e}",
            dir.display()
        ))
    })
}

pub fn write_json(dir: &Path, name: &str, value: &Value) -> Result<PathBuf, AppError> {
    let path = dir.join(name);
    let text = format!(
        "{}\n",
        serde_json::to_string_pretty(value).expect("serializable")
    );
    fs::write(&path, text)
        .map_err(|e| validation(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

pub fn write_text(dir: &Path, name: &str, text: &str) -> Result<PathBuf, AppError> {
    let path = dir.join(name);
    fs::write(&path, text)
        .map_err(|e| validation(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

pub fn print_json(value: &Value) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("serializable")
    );
}

/// Formats an optional value for a CSV cell; absent values stay empty.
pub fn csv_opt(value: Option<f64>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}
