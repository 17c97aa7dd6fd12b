//! Hard-threshold covariance/correlation estimators and their consistency
//! metric.
//!
//! The threshold level is t_n(C) = C·√(log p / n). The estimators keep an
//! entry only when it strictly exceeds its level:
//!
//! - covariance: Ŝ_ij = S_ij·1(|S_ij| > n·t_n) (diagonal included — S_ii
//!   survives whenever it clears the same bar),
//! - correlation: R̂_ij = R_ij·1(|R_ij| > t_n).
//!
//! When t_n ≥ 1 the correlation rule zeroes even the unit diagonal; the
//! implementation follows the formula literally and flags the outcome as
//! degenerate instead of quietly preserving the diagonal.
//!
//! Consistency is measured in the operator norm at the √(n/p) rate:
//! √(n/p)·‖n^{−1}Ŝ − I‖ and √(n/p)·‖R̂ − I‖, both of which tend to zero
//! for independent unit-variance coordinates when C is large enough (the
//! CLI default C = 2.5 sits above the C > 2 requirement).

use crate::kernels::{operator_norm_default, SymmetricMatrix};
use crate::{EntryMode, Error, Result};

// ---------------------------------------------------------------------------
// Threshold specification
// ---------------------------------------------------------------------------

/// Threshold parameters: the constant C and the shape (n, p), with the
/// derived level t_n = C·√(log p / n) > 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdSpec {
    c: f64,
    n: usize,
    p: usize,
    t_n: f64,
}

impl ThresholdSpec {
    /// Requires C > 0, n ≥ 1, and p ≥ 2 (log p must be positive for
    /// t_n > 0).
    pub fn new(c: f64, n: usize, p: usize) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::domain(format!(
                "threshold constant must be finite and > 0, got {c}"
            )));
        }
        if n == 0 {
            return Err(Error::domain("threshold needs n ≥ 1".to_string()));
        }
        if p < 2 {
            return Err(Error::domain(format!(
                "threshold needs p ≥ 2 so that log p > 0, got {p}"
            )));
        }
        let t_n = c * ((p as f64).ln() / n as f64).sqrt();
        Ok(ThresholdSpec { c, n, p, t_n })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// The level t_n = C·√(log p / n).
    pub fn t_n(&self) -> f64 {
        self.t_n
    }

    fn check_shape(&self, m: &SymmetricMatrix) -> Result<()> {
        if m.p() != self.p {
            return Err(Error::domain(format!(
                "threshold spec is for p = {}, matrix has p = {}",
                self.p,
                m.p()
            )));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Estimators
// ---------------------------------------------------------------------------

fn hard_threshold(m: &SymmetricMatrix, level: f64) -> SymmetricMatrix {
    let p = m.p();
    let mut out = SymmetricMatrix::zeros(p);
    for i in 0..p {
        for j in i..p {
            let v = m.get(i, j);
            if v.abs() > level {
                out.set_sym(i, j, v);
            }
        }
    }
    out
}

/// Ŝ: zero every Gram entry with |S_ij| ≤ n·t_n (strict-inequality keep
/// rule, applied to the diagonal too).
pub fn threshold_cov(s: &SymmetricMatrix, spec: &ThresholdSpec) -> Result<SymmetricMatrix> {
    spec.check_shape(s)?;
    Ok(hard_threshold(s, spec.n as f64 * spec.t_n))
}

/// Outcome of correlation thresholding. `degenerate_threshold` is set when
/// t_n ≥ 1, in which case the formula zeroes everything including the unit
/// diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrThresholdOutcome {
    pub estimate: SymmetricMatrix,
    pub degenerate_threshold: bool,
}

/// R̂: zero every correlation entry with |R_ij| ≤ t_n.
pub fn threshold_corr(r: &SymmetricMatrix, spec: &ThresholdSpec) -> Result<CorrThresholdOutcome> {
    spec.check_shape(r)?;
    Ok(CorrThresholdOutcome {
        estimate: hard_threshold(r, spec.t_n),
        degenerate_threshold: spec.t_n >= 1.0,
    })
}

// ---------------------------------------------------------------------------
// Consistency metric
// ---------------------------------------------------------------------------

/// √(n/p)·‖n^{−1}Ŝ − I‖ (covariance) or √(n/p)·‖R̂ − I‖ (correlation),
/// with ‖·‖ the operator norm. Small values mean the estimate is close to
/// the identity at the rate the limit theory predicts.
pub fn consistency_metric(est: &SymmetricMatrix, kind: EntryMode, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("consistency metric needs n ≥ 1".to_string()));
    }
    let p = est.p();
    let mut dev = SymmetricMatrix::zeros(p);
    let scale = match kind {
        EntryMode::Covariance => 1.0 / n as f64,
        EntryMode::Correlation => 1.0,
    };
    for i in 0..p {
        for j in i..p {
            let v = est.get(i, j) * scale - if i == j { 1.0 } else { 0.0 };
            dev.set_sym(i, j, v);
        }
    }
    let norm = operator_norm_default(&dev)?;
    Ok((n as f64 / p as f64).sqrt() * norm)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
