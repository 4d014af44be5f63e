// SPDX-License-Identifier: MIT OR Apache-2.0

//! Small file helpers. All writers go through [`write_atomic`] so a rerun
//! either fully replaces an output or leaves the previous one in place.

use std::io::Write;
use std::path::Path;

use crate::error::{PaccsError, Result};

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)
        .map_err(|e| PaccsError::io(format!("creating {}", dir.display()), e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .map_err(|e| PaccsError::io(format!("temp file in {}", dir.display()), e))?;
    tmp.write_all(bytes)
        .map_err(|e| PaccsError::io(format!("writing {}", path.display()), e))?;
    tmp.persist(path)
        .map_err(|e| PaccsError::io(format!("renaming into {}", path.display()), e.error))?;
    Ok(())
}

pub fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| PaccsError::io(format!("reading {}", path.display()), e))
}

/// Render a float for CSV/JSON text outputs. Shortest round-trip form, so
/// identical values always produce identical bytes.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        // folds -0.0 into 0
        "0".to_string()
    } else {
        format!("{x}")
    }
}
