use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::failure::Failure;
use crate::OUT_DIR_ENV;

const FALLBACK_OUT_DIR: &str = "cdmdc-out";

/// Explicit flag, then the configured directory, then the environment
/// default, then `./cdmdc-out`.
pub fn resolve_out_dir(explicit: Option<&Path>, configured: Option<&Path>) -> PathBuf {
    explicit
        .or(configured)
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(FALLBACK_OUT_DIR))
}

pub fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure {
        code: crate::EXIT_IO,
        message: format!("cannot create output directory {}: {e}", dir.display()),
    })
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Failure {
        code: crate::EXIT_IO,
        message: format!("cannot write {}: {e}", path.display()),
    })
}
