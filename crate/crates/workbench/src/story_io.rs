//! Reading and writing story documents.

use std::fs;
use std::path::Path;

use rhirl_core::{StoryDocument, WorldSpec};

use crate::error::{Result, WorkbenchError};

/// The story shipped with the workbench, used when no `--story` is given.
pub const BUNDLED_STORY: &str = include_str!("../stories/crane_hill.json");
pub const BUNDLED_STORY_NAME: &str = "<bundled:crane_hill>";

pub fn bundled_world() -> WorldSpec {
    parse_world(BUNDLED_STORY, Path::new(BUNDLED_STORY_NAME)).expect("bundled story is valid")
}

/// Parses and validates a story. `origin` only labels errors.
pub fn parse_world(text: &str, origin: &Path) -> Result<WorldSpec> {
    let document: StoryDocument = serde_json::from_str(text).map_err(|e| WorkbenchError::Syntax {
        path: origin.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    WorldSpec::from_document(document).map_err(|source| WorkbenchError::Story {
        path: origin.to_path_buf(),
        source,
    })
}

pub fn load_world(path: &Path) -> Result<WorldSpec> {
    let text = fs::read_to_string(path).map_err(|e| WorkbenchError::io(path, e))?;
    parse_world(&text, path)
}

/// `Some(path)` loads a file, `None` the bundled story.
pub fn world_or_bundled(path: Option<&Path>) -> Result<WorldSpec> {
    match path {
        Some(p) => load_world(p),
        None => Ok(bundled_world()),
    }
}

pub fn story_to_json(world: &WorldSpec) -> String {
    let mut text = serde_json::to_string_pretty(world.document()).expect("story serializes");
    text.push('\n');
    text
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_story_loads() {
        let w = bundled_world();
        assert_eq!(w.endings().len(), 2);
        assert_eq!(w.objects().len(), 12);
    }

    #[test]
    fn syntax_error_has_position() {
        let err = parse_world("{\n  \"schema_version\": \"1\",\n  oops\n}", Path::new("x.json")).unwrap_err();
        match err {
            WorkbenchError::Syntax { line, column, .. } => {
                assert_eq!(line, 3);
                assert_eq!(column, 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn round_trip_keeps_fingerprint() {
        let w = bundled_world();
        let back = parse_world(&story_to_json(&w), Path::new("rt.json")).unwrap();
        assert_eq!(back.fingerprint(), w.fingerprint());
    }
}
