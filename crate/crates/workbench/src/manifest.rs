//! Per-run manifests. The digest covers the command, its configuration and
//! the bytes of every input, so equal digests mean equal outputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, WorkbenchError};
use crate::fsutil::write_json;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_digest: String,
    pub config: serde_json::Value,
    /// Input path → sha256 of its contents.
    pub inputs: BTreeMap<String, String>,
    /// Output role → path.
    pub outputs: BTreeMap<String, String>,
    pub seed: u64,
    pub started_at: String,
    pub finished_at: String,
}

/// Collects inputs and outputs while a command runs.
pub struct ManifestBuilder {
    command: String,
    config: serde_json::Value,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
    seed: u64,
    started: DateTime<Utc>,
}

fn hex_sha256(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn display(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

impl ManifestBuilder {
    pub fn new(command: &str, config: serde_json::Value, seed: u64) -> Self {
        Self {
            command: command.to_string(),
            config,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            seed,
            started: Utc::now(),
        }
    }

    pub fn input_bytes(&mut self, name: &str, bytes: &[u8]) {
        self.inputs.insert(name.to_string(), hex_sha256(bytes));
    }

    pub fn input_file(&mut self, path: &Path) -> Result<()> {
        let bytes = fs::read(path).map_err(|e| WorkbenchError::io(path, e))?;
        self.input_bytes(&display(path), &bytes);
        Ok(())
    }

    /// Hashes every `.json` file under `dir`, in path order.
    pub fn input_dir(&mut self, dir: &Path) -> Result<()> {
        let mut files = Vec::new();
        collect_json(dir, &mut files)?;
        files.sort();
        for f in files {
            self.input_file(&f)?;
        }
        Ok(())
    }

    pub fn output(&mut self, role: &str, path: &Path) {
        self.outputs.insert(role.to_string(), display(path));
    }

    pub fn digest(&self) -> String {
        let mut material = serde_json::to_string(&(&self.command, &self.config, self.seed)).expect("config serializes");
        for (name, hash) in &self.inputs {
            material.push('\n');
            material.push_str(name);
            material.push(' ');
            material.push_str(hash);
        }
        hex_sha256(material.as_bytes())
    }

    pub fn finish(self) -> RunManifest {
        let ts = |t: DateTime<Utc>| t.to_rfc3339_opts(SecondsFormat::Millis, true);
        RunManifest {
            config_digest: self.digest(),
            command: self.command,
            config: self.config,
            inputs: self.inputs,
            outputs: self.outputs,
            seed: self.seed,
            started_at: ts(self.started),
            finished_at: ts(Utc::now()),
        }
    }

    pub fn write(self, path: &Path) -> Result<RunManifest> {
        let m = self.finish();
        write_json(path, &m)?;
        Ok(m)
    }
}

fn collect_json(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in fs::read_dir(dir).map_err(|e| WorkbenchError::io(dir, e))? {
        let path = entry.map_err(|e| WorkbenchError::io(dir, e))?.path();
        if path.is_dir() {
            collect_json(&path, out)?;
        } else if path.extension().is_some_and(|x| x == "json") {
            out.push(path);
        }
    }
    Ok(())
}
