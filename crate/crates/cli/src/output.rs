//! Atomic file output.

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};

use crate::pipeline::Artifact;

/// Writes `contents` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("temporary file in {}", dir.display()))?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("renaming onto {}", path.display()))?;
    Ok(())
}

pub fn write_all(dir: &Path, artifacts: &[Artifact]) -> Result<()> {
    for a in artifacts {
        write_atomic(&dir.join(&a.name), &a.contents)?;
    }
    Ok(())
}
