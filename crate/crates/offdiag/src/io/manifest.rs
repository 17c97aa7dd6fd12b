//! Run manifests: provenance for a batch of output files.
//!
//! A manifest records the tool version, the resolved configuration, the
//! master seed, start/end timestamps, and a SHA-256 digest for every output
//! file. Re-running a deterministic experiment must reproduce the digests
//! exactly (timestamps live only here, never inside the data files, so the
//! data files stay byte-comparable across runs).
//!
//! Format: the same `key = value` lines as configs, with the repeatable
//! `output = <name> sha256 <hex>` binding listed once per file.

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::{Error, Result};

use super::write_atomic;

/// Provenance record for one run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunManifest {
    pub tool_version: String,
    pub master_seed: u64,
    pub started_unix: u64,
    pub finished_unix: u64,
    /// Resolved configuration, echoed as ordered key/value pairs.
    pub config_echo: Vec<(String, String)>,
    /// (file name, sha256 hex digest) for every output file.
    pub outputs: Vec<(String, String)>,
}

/// Seconds since the Unix epoch.
pub fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Hex SHA-256 digest of a file's bytes.
pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    let digest = hasher.finalize();
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

impl RunManifest {
    pub fn new(master_seed: u64, config_echo: Vec<(String, String)>) -> Self {
        RunManifest {
            tool_version: crate::VERSION.to_string(),
            master_seed,
            started_unix: unix_now(),
            finished_unix: 0,
            config_echo,
            outputs: Vec::new(),
        }
    }

    /// Digest `dir/name` and record it.
    pub fn record_output(&mut self, dir: &Path, name: &str) -> Result<()> {
        let digest = sha256_file(&dir.join(name))?;
        self.outputs.push((name.to_string(), digest));
        Ok(())
    }

    /// Stamp the end time and write `dir/manifest.txt`.
    pub fn finalize(mut self, dir: &Path) -> Result<()> {
        self.finished_unix = unix_now();
        let mut out = String::new();
        out.push_str(&format!("tool_version = {}\n", self.tool_version));
        out.push_str(&format!("master_seed = {}\n", self.master_seed));
        out.push_str(&format!("started_unix = {}\n", self.started_unix));
        out.push_str(&format!("finished_unix = {}\n", self.finished_unix));
        for (k, v) in &self.config_echo {
            out.push_str(&format!("config.{k} = {v}\n"));
        }
        for (name, digest) in &self.outputs {
            out.push_str(&format!("output = {name} sha256 {digest}\n"));
        }
        write_atomic(&dir.join("manifest.txt"), &out)
    }

    /// Parse `dir/manifest.txt`.
    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join("manifest.txt");
        let text = std::fs::read_to_string(&path)?;
        let mut m = RunManifest {
            tool_version: String::new(),
            master_seed: 0,
            started_unix: 0,
            finished_unix: 0,
            config_echo: Vec::new(),
            outputs: Vec::new(),
        };
        let mut seen_seed = false;
        for (idx, line) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::parse_at(lineno, format!("expected `key = value`, got {line:?}")));
            };
            let (key, value) = (key.trim(), value.trim());
            match key {
                "tool_version" => m.tool_version = value.to_string(),
                "master_seed" => {
                    m.master_seed = value.parse().map_err(|_| {
                        Error::parse_at(lineno, format!("invalid master_seed {value:?}"))
                    })?;
                    seen_seed = true;
                }
                "started_unix" => {
                    m.started_unix = value.parse().map_err(|_| {
                        Error::parse_at(lineno, format!("invalid started_unix {value:?}"))
                    })?
                }
                "finished_unix" => {
                    m.finished_unix = value.parse().map_err(|_| {
                        Error::parse_at(lineno, format!("invalid finished_unix {value:?}"))
                    })?
                }
                "output" => {
                    let parts: Vec<&str> = value.split_whitespace().collect();
                    if parts.len() != 3 || parts[1] != "sha256" {
                        return Err(Error::parse_at(
                            lineno,
                            format!("expected `output = NAME sha256 HEX`, got {value:?}"),
                        ));
                    }
                    m.outputs.push((parts[0].to_string(), parts[2].to_string()));
                }
                k if k.starts_with("config.") => {
                    m.config_echo
                        .push((k["config.".len()..].to_string(), value.to_string()));
                }
                other => {
                    return Err(Error::parse_at(lineno, format!("unknown manifest key {other:?}")));
                }
            }
        }
        if m.tool_version.is_empty() || !seen_seed {
            return Err(Error::parse(
                "manifest missing tool_version or master_seed".to_string(),
            ));
        }
        Ok(m)
    }

    /// Recompute each output's digest; returns (name, matches) per file.
    pub fn verify(&self, dir: &Path) -> Result<Vec<(String, bool)>> {
        let mut out = Vec::new();
        for (name, recorded) in &self.outputs {
            let actual = sha256_file(&dir.join(name))?;
            out.push((name.clone(), actual == *recorded));
        }
        Ok(out)
    }
}
