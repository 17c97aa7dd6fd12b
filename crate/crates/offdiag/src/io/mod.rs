//! File formats: matrices, key=value configs, CSV tables, run manifests.
//!
//! Everything here is plain text and language-agnostic:
//!
//! - matrices: a `p n` header line followed by p rows of n decimal values,
//!   `#` comments allowed ([`matrix`]);
//! - configs: flat `key = value` lines with dotted keys for grouping
//!   ([`config`]);
//! - tables: comma-separated values with a header row ([`table`]);
//! - manifests: run provenance with SHA-256 digests of every output file
//!   ([`manifest`]).
//!
//! All floating-point output uses 17-significant-digit scientific notation
//! so that values round-trip bit-for-bit, and all writers go through a
//! write-to-temp-then-rename step so no output file is ever left partially
//! written.

pub mod config;
pub mod manifest;
pub mod matrix;
pub mod table;

pub use config::KeyValueFile;
pub use manifest::{sha256_file, RunManifest};
pub use matrix::{read_data_matrix, read_symmetric_matrix, write_data_matrix, write_symmetric_matrix};
pub use table::{fmt_f64, read_csv, write_csv};

use crate::Result;
use std::path::Path;

/// Write `content` to `path` atomically: the bytes land in `path.tmp` first
/// and are renamed into place only once fully flushed.
pub fn write_atomic(path: &Path, content: &str) -> Result<()> {
    let tmp = match path.file_name() {
        Some(name) => {
            let mut n = name.to_os_string();
            n.push(".tmp");
            path.with_file_name(n)
        }
        None => {
            return Err(crate::Error::domain(format!(
                "cannot write to directory-like path {}",
                path.display()
            )))
        }
    };
    std::fs::write(&tmp, content)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}
