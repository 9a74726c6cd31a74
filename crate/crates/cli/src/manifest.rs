//! Training and test manifests.
//!
//! A manifest is a JSON list of `{ "name", "files", "important" }` records.
//! File paths are resolved against the manifest's own directory so a corpus
//! can be moved as a unit.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub files: Vec<PathBuf>,
    /// 1-based partial action positions; ignored by `eval`.
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub important: BTreeSet<usize>,
}

pub fn load(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
    let mut entries: Vec<ManifestEntry> =
        serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    for e in &mut entries {
        for f in &mut e.files {
            if f.is_relative() {
                *f = base.join(&*f);
            }
        }
    }
    Ok(entries)
}

pub fn save(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let mut text = serde_json::to_string_pretty(entries)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing manifest {}", path.display()))
}
