//! The on-disk trace corpus: `<root>/<source>/<trace_id>.json`.

use std::fs;
use std::path::{Path, PathBuf};

use rhirl_core::trace::{Trace, TraceSource};

use crate::error::{Result, WorkbenchError};
use crate::fsutil::{read_json, write_json};

#[derive(Clone, Debug)]
pub struct TraceStore {
    root: PathBuf,
}

/// Trace ids become file names, so they are limited to a safe alphabet.
pub fn is_valid_trace_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 128
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

impl TraceStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_for(&self, source: TraceSource, trace_id: &str) -> PathBuf {
        self.root.join(source.as_str()).join(format!("{trace_id}.json"))
    }

    pub fn save(&self, trace: &Trace) -> Result<PathBuf> {
        if !is_valid_trace_id(&trace.trace_id) {
            return Err(WorkbenchError::Invalid(format!("unusable trace id {:?}", trace.trace_id)));
        }
        let path = self.path_for(trace.source, &trace.trace_id);
        write_json(&path, trace)?;
        Ok(path)
    }

    pub fn load(&self, source: TraceSource, trace_id: &str) -> Result<Trace> {
        read_json(&self.path_for(source, trace_id))
    }

    /// Every trace in the corpus, ordered by source then id. The root must
    /// exist; missing source directories are simply empty.
    pub fn load_all(&self) -> Result<Vec<Trace>> {
        if !self.root.is_dir() {
            return Err(WorkbenchError::io(
                &self.root,
                std::io::Error::new(std::io::ErrorKind::NotFound, "trace directory not found"),
            ));
        }
        let mut traces = Vec::new();
        for source in TraceSource::ALL {
            let dir = self.root.join(source.as_str());
            if !dir.is_dir() {
                continue;
            }
            let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
                .map_err(|e| WorkbenchError::io(&dir, e))?
                .filter_map(|entry| entry.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .collect();
            paths.sort();
            for p in paths {
                let trace: Trace = read_json(&p)?;
                if trace.source != source {
                    return Err(WorkbenchError::Invalid(format!(
                        "{}: source {:?} filed under {:?}",
                        p.display(),
                        trace.source.as_str(),
                        source.as_str()
                    )));
                }
                traces.push(trace);
            }
        }
        Ok(traces)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_ids() {
        assert!(is_valid_trace_id("expert-4-001"));
        assert!(is_valid_trace_id("0b6f.x_y"));
        assert!(!is_valid_trace_id(""));
        assert!(!is_valid_trace_id("../etc"));
        assert!(!is_valid_trace_id("a/b"));
        assert!(!is_valid_trace_id(".hidden"));
    }
}
