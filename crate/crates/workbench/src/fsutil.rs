use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Result, WorkbenchError};

/// Writes through a temporary file in the same directory and renames it into
/// place, so readers never observe a partial document.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| WorkbenchError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| WorkbenchError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| WorkbenchError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| WorkbenchError::io(path, e))?;
    tmp.persist(path).map_err(|e| WorkbenchError::io(path, e.error))?;
    Ok(())
}

pub fn to_pretty_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("document serializes");
    text.push('\n');
    text
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, to_pretty_json(value).as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| WorkbenchError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| WorkbenchError::Syntax {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}
