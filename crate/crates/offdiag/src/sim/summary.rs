//! Experiment summaries.
//!
//! A run produces a list of named metrics, each optionally carrying the
//! limit-theory target it should approach and the acceptance band around
//! that target. The CSV rendering is part of the determinism contract:
//! identical configs (including the master seed) must produce byte-identical
//! `summary.csv` files regardless of worker count, so the CSV carries no
//! timestamps and no runtimes — wall-clock data lives in the run manifest
//! only.

use std::path::Path;

use crate::io::{fmt_f64, write_csv};
use crate::Result;

use super::config::Functional;

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

/// One named scalar result, with an optional target value and band.
#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    /// The limit-theory prediction, when there is one.
    pub target: Option<f64>,
    /// Half-width of the acceptance band around `target`.
    pub band: Option<f64>,
}

impl Metric {
    pub fn plain(name: impl Into<String>, value: f64) -> Self {
        Metric {
            name: name.into(),
            value,
            target: None,
            band: None,
        }
    }

    pub fn with_target(name: impl Into<String>, value: f64, target: f64, band: f64) -> Self {
        Metric {
            name: name.into(),
            value,
            target: Some(target),
            band: Some(band),
        }
    }

    /// |value − target| ≤ band; vacuously true without a target.
    pub fn within_band(&self) -> bool {
        match (self.target, self.band) {
            (Some(t), Some(b)) => (self.value - t).abs() <= b,
            _ => true,
        }
    }
}

// ---------------------------------------------------------------------------
// Summary
// ---------------------------------------------------------------------------

/// The full result of one experiment run.
#[derive(Debug, Clone)]
pub struct MCSummary {
    pub functional: Functional,
    pub family: String,
    pub p: usize,
    pub n: usize,
    pub replicates: usize,
    pub master_seed: u64,
    pub metrics: Vec<Metric>,
    pub warnings: Vec<String>,
    /// Wall-clock seconds; reported on stderr and in the manifest, never in
    /// the CSV.
    pub runtime_seconds: f64,
    pub version: String,
}

impl MCSummary {
    pub fn metric(&self, name: &str) -> Option<&Metric> {
        self.metrics.iter().find(|m| m.name == name)
    }

    /// Panicking lookup for test code and the acceptance suite.
    pub fn expect_metric(&self, name: &str) -> &Metric {
        self.metric(name).unwrap_or_else(|| {
            panic!(
                "metric {name:?} missing; have {:?}",
                self.metrics.iter().map(|m| &m.name).collect::<Vec<_>>()
            )
        })
    }

    /// Header and rows for `summary.csv`. Deterministic: metric order is
    /// the order the runner emitted, floats use the round-trip format, and
    /// absent target/band render as empty fields.
    pub fn csv_rows(&self) -> (Vec<&'static str>, Vec<Vec<String>>) {
        let header = vec!["metric", "value", "target", "band"];
        let rows = self
            .metrics
            .iter()
            .map(|m| {
                vec![
                    m.name.clone(),
                    fmt_f64(m.value),
                    m.target.map(fmt_f64).unwrap_or_default(),
                    m.band.map(fmt_f64).unwrap_or_default(),
                ]
            })
            .collect();
        (header, rows)
    }

    /// Write `summary.csv` atomically.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let (header, rows) = self.csv_rows();
        write_csv(path, &header, &rows)
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
