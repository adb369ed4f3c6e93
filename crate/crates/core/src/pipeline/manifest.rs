//! JSON-lines dataset manifests.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

/// One training utterance: audio file, language tag, phoneme symbols and an
/// optional alignment file (uniform fallback when absent).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub audio: PathBuf,
    pub lang: String,
    pub phonemes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alignment: Option<PathBuf>,
}

/// Load and validate a manifest. Relative paths are resolved against the
/// manifest's directory; ids must be unique; referenced files must exist.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Manifest(format!("cannot read {}: {e}", path.display())))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut seen = BTreeSet::new();
    let mut entries = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut entry: ManifestEntry = serde_json::from_str(line).map_err(|e| {
            Error::Manifest(format!(
                "{}:{}: malformed manifest line: {e}",
                path.display(),
                lineno + 1
            ))
        })?;
        if !seen.insert(entry.id.clone()) {
            return Err(Error::Manifest(format!(
                "{}:{}: duplicate id '{}'",
                path.display(),
                lineno + 1,
                entry.id
            )));
        }
        if entry.audio.is_relative() {
            entry.audio = base.join(&entry.audio);
        }
        if !entry.audio.exists() {
            return Err(Error::Manifest(format!(
                "{}:{}: audio file {} does not exist",
                path.display(),
                lineno + 1,
                entry.audio.display()
            )));
        }
        if let Some(a) = &entry.alignment {
            let resolved = if a.is_relative() { base.join(a) } else { a.clone() };
            if !resolved.exists() {
                return Err(Error::Manifest(format!(
                    "{}:{}: alignment file {} does not exist",
                    path.display(),
                    lineno + 1,
                    resolved.display()
                )));
            }
            entry.alignment = Some(resolved);
        }
        if entry.phonemes.is_empty() {
            return Err(Error::Manifest(format!(
                "{}:{}: utterance '{}' has no phonemes",
                path.display(),
                lineno + 1,
                entry.id
            )));
        }
        entries.push(entry);
    }
    Ok(entries)
}
