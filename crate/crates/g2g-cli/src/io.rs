//! File helpers: SMILES line reading and atomic output.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::CliError;

/// Reads one SMILES per line. Anything after the first whitespace is a
/// comment; blank lines and `#` lines are skipped.
pub fn read_smiles_lines(path: &Path) -> Result<Vec<String>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {}", path.display(), e)))?;
    Ok(text
        .lines()
        .filter_map(|l| {
            let tok = l.split_whitespace().next()?;
            if tok.starts_with('#') {
                None
            } else {
                Some(tok.to_string())
            }
        })
        .collect())
}

/// Writes via a temp file in the same directory and renames into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)
                .map_err(|e| CliError::Data(format!("cannot create {}: {}", dir.display(), e)))?;
        }
    }
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)
            .map_err(|e| CliError::Data(format!("cannot write {}: {}", tmp.display(), e)))?;
        f.write_all(contents)
            .and_then(|_| f.flush())
            .map_err(|e| CliError::Data(format!("cannot write {}: {}", tmp.display(), e)))?;
    }
    fs::rename(&tmp, path)
        .map_err(|e| CliError::Data(format!("cannot rename into {}: {}", path.display(), e)))
}
