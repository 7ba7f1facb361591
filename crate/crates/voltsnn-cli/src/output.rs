//! Output files: provenance headers and atomic writes.

use std::fs;
use std::path::Path;

use voltsnn::Result;

/// Comment line embedded at the top of every CSV output.
pub fn provenance_line(config_sha256: &str, seed: u64) -> String {
    format!("# config_sha256={config_sha256} seed={seed}\n")
}

/// Writes to a sibling temp file, then renames into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}
