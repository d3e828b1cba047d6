//! File helpers: atomic writes and name-paired corpus directories.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use tempfile::NamedTempFile;

use crate::CliError;

pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// Writes through a temporary file in the destination directory, then renames.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(contents)
        .map_err(|e| CliError::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

/// Regular, non-hidden files of a directory keyed by file name.
fn list_files(dir: &Path) -> Result<BTreeMap<String, PathBuf>, CliError> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))? {
        let entry = entry.map_err(|e| CliError::io(dir, e))?;
        let path = entry.path();
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.starts_with('.') || !path.is_file() {
            continue;
        }
        out.insert(name, path);
    }
    Ok(out)
}

/// A prediction and ground-truth file that share a name.
#[derive(Debug, Clone)]
pub struct FilePair {
    pub name: String,
    pub pred: PathBuf,
    pub gt: PathBuf,
}

/// Pairs the two directories by file name, sorted by name. Any file without a
/// partner is an error that lists all of them.
pub fn pair_dirs(pred_dir: &Path, gt_dir: &Path) -> Result<Vec<FilePair>, CliError> {
    let preds = list_files(pred_dir)?;
    let gts = list_files(gt_dir)?;
    let mut unpaired: Vec<String> = Vec::new();
    unpaired.extend(
        preds
            .iter()
            .filter(|(n, _)| !gts.contains_key(*n))
            .map(|(_, p)| p.display().to_string()),
    );
    unpaired.extend(
        gts.iter()
            .filter(|(n, _)| !preds.contains_key(*n))
            .map(|(_, p)| p.display().to_string()),
    );
    if !unpaired.is_empty() {
        return Err(CliError::Unpaired(unpaired));
    }
    Ok(preds
        .into_iter()
        .map(|(name, pred)| {
            let gt = gts[&name].clone();
            FilePair { name, pred, gt }
        })
        .collect())
}
