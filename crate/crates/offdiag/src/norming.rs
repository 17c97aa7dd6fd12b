//! Normalizing constants and limit laws for maxima of standardized entries.
//!
//! Everything downstream centers and scales extremes with the same sequence:
//! for a family of `count` asymptotically standard-normal quantities, the
//! constant
//!
//! ```text
//! d(count) = √(2·log count) − (log log count + log 4π) / (2·√(2·log count))
//! ```
//!
//! satisfies `count · Φ̄(d(count)) → 1`, where Φ̄ is the standard normal upper
//! tail. Off-diagonal extremes use the pair count p(p−1)/2, m-tuple extremes
//! use the binomial count C(p, m), and diagonal extremes use the coordinate
//! count p. The module also provides the Gumbel law Λ(x) = exp(−e^{−x}), the
//! quantile of the maximum-entry test's limit law, and the exponential mean
//! measure e^{−a} − e^{−b} of the limiting Poisson point process.
//!
//! Accuracy notes for [`normal_upper_tail`]: relative error is ≤ 1e−12 for
//! |x| ≤ 8 and ≤ 1e−8 while the result stays a normal f64 (|x| ≲ 37.6).
//! Beyond x ≈ 38.6 the true tail is smaller than the smallest subnormal and
//! the function returns exactly 0; between those points results are subnormal
//! and carry reduced relative precision. This is an IEEE-754 range limit, not
//! an algorithmic one.

use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Standard normal upper tail
// ---------------------------------------------------------------------------

/// Standard normal upper tail Φ̄(x) = P(N(0,1) > x).
///
/// Evaluated in erfc style, never as `1 − cdf(x)`: a positive-term confluent
/// series below the crossover and a Lentz-evaluated continued fraction for
/// the Mills ratio above it, so the relative error stays bounded far into the
/// tail. Total on all of ℝ: `±∞` map to 0 and 1, NaN propagates.
pub fn normal_upper_tail(x: f64) -> f64 {
    if !x.is_finite() {
        return if x.is_nan() {
            x
        } else if x > 0.0 {
            0.0
        } else {
            1.0
        };
    }
    if x < 0.0 {
        // Reflection: Φ̄(x) = 1 − Φ̄(−x); no cancellation since Φ̄(−x) ≤ 1/2.
        return 1.0 - normal_upper_tail(-x);
    }
    let z = x * std::f64::consts::FRAC_1_SQRT_2;
    if x <= 2.0 {
        0.5 * (1.0 - erf_series(z))
    } else {
        // Φ̄(x) = e^{−x²/2} / (√(2π)·R(z)·…)  via  erfc(z) = e^{−z²}/(√π·K(z)).
        let t = 0.5 * x * x;
        0.5 * (-t).exp() / (std::f64::consts::PI.sqrt() * erfc_cf_denominator(z))
    }
}

/// erf(z) for 0 ≤ z ≤ √2 through the positive-term confluent series
/// erf(z) = (2/√π)·e^{−z²}·Σ_{k≥0} 2^k z^{2k+1}/(2k+1)!!.
///
/// All terms are positive, so there is no alternating-series cancellation;
/// the only subtraction happens in the caller (1 − erf), which loses at most
/// a factor ~22 in relative precision at the crossover.
fn erf_series(z: f64) -> f64 {
    let zz = z * z;
    let mut term = z;
    let mut sum = z;
    let mut k = 0u32;
    while k < 200 {
        k += 1;
        term *= 2.0 * zz / (2.0 * f64::from(k) + 1.0);
        let next = sum + term;
        if next == sum {
            break;
        }
        sum = next;
    }
    std::f64::consts::FRAC_2_SQRT_PI * (-zz).exp() * sum
}

/// Continued-fraction denominator K(z) = z + (1/2)/(z + 1/(z + (3/2)/(…)))
/// with erfc(z) = e^{−z²}/(√π·K(z)), evaluated by the modified Lentz scheme.
/// Converges quickly for z ≥ √2 (the series handles everything below).
fn erfc_cf_denominator(z: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = z;
    let mut c = z;
    let mut d = 0.0_f64;
    for n in 1..=300u32 {
        let a = 0.5 * f64::from(n);
        d = z + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = z + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-17 {
            break;
        }
    }
    f
}

// ---------------------------------------------------------------------------
// Normalizing constants
// ---------------------------------------------------------------------------

/// A normalizing constant together with the count it calibrates.
///
/// `value` is d(count) as in the module docs; the defining property
/// `count · Φ̄(value) → 1` holds logarithmically slowly in `count`, which is
/// why downstream tolerances are wide.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormingSchedule {
    count: u64,
    value: f64,
}

impl NormingSchedule {
    /// Constant for a raw count of standardized quantities. Rejects
    /// `count < 2` (the iterated logarithm is undefined below that).
    pub fn for_count(count: u64) -> Result<Self> {
        if count < 2 {
            return Err(Error::domain(format!(
                "norming constant needs count ≥ 2, got {count}"
            )));
        }
        let log = (count as f64).ln();
        let scale = (2.0 * log).sqrt();
        let value = scale - (log.ln() + (4.0 * std::f64::consts::PI).ln()) / (2.0 * scale);
        Ok(NormingSchedule { count, value })
    }

    /// Constant for the p(p−1)/2 off-diagonal pairs of a p×p symmetric
    /// matrix. Rejects p < 3 (fewer than 2 pairs).
    pub fn for_pairs(p: u64) -> Result<Self> {
        if p < 3 {
            return Err(Error::domain(format!(
                "pair norming constant needs p ≥ 3, got {p}"
            )));
        }
        Self::for_count(p * (p - 1) / 2)
    }

    /// Constant for the C(p, m) strictly increasing m-tuples of coordinates.
    /// Rejects m = 0, m > p, counts below 2, and binomials beyond u64 range.
    pub fn for_tuples(p: u64, m: u64) -> Result<Self> {
        Self::for_count(binomial(p, m)?)
    }

    /// The calibrated count.
    pub fn count(&self) -> u64 {
        self.count
    }

    /// The constant d(count).
    pub fn value(&self) -> f64 {
        self.value
    }
}

/// d(count) as a bare value; see [`NormingSchedule::for_count`].
pub fn norming_constant(count: u64) -> Result<f64> {
    Ok(NormingSchedule::for_count(count)?.value())
}

/// d(p(p−1)/2) as a bare value; see [`NormingSchedule::for_pairs`].
pub fn pair_norming_constant(p: u64) -> Result<f64> {
    Ok(NormingSchedule::for_pairs(p)?.value())
}

/// d(C(p, m)) as a bare value; see [`NormingSchedule::for_tuples`].
pub fn tuple_norming_constant(p: u64, m: u64) -> Result<f64> {
    Ok(NormingSchedule::for_tuples(p, m)?.value())
}

/// Exact binomial coefficient C(p, m) in u64, with overflow detection.
pub fn binomial(p: u64, m: u64) -> Result<u64> {
    if m == 0 || m > p {
        return Err(Error::domain(format!(
            "binomial count needs 1 ≤ m ≤ p, got p = {p}, m = {m}"
        )));
    }
    let m = m.min(p - m);
    let mut c: u128 = 1;
    for i in 1..=m {
        c = c
            .checked_mul(u128::from(p - m + i))
            .ok_or_else(|| Error::domain(format!("binomial C({p}, {m}) overflows")))?;
        // Exact: after this division c equals C(p − m + i, i).
        c /= u128::from(i);
    }
    u64::try_from(c).map_err(|_| Error::domain(format!("binomial C({p}, {m}) exceeds u64 range")))
}

// ---------------------------------------------------------------------------
// Gumbel law
// ---------------------------------------------------------------------------

/// The standard Gumbel law Λ(x) = exp(−e^{−x}), the one-point limit of all
/// normalized maxima in this crate.
#[derive(Debug, Clone, Copy, Default)]
pub struct Gumbel;

impl Gumbel {
    /// Distribution function Λ(x) = exp(−e^{−x}).
    pub fn cdf(self, x: f64) -> f64 {
        (-(-x).exp()).exp()
    }

    /// Quantile Λ^{−1}(u) = −log(−log u) for u in the open interval (0, 1).
    pub fn quantile(self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::domain(format!(
                "Gumbel quantile needs u in (0, 1), got {u}"
            )));
        }
        Ok(-(-u.ln()).ln())
    }

    /// Exact sampler via −log E with E standard exponential (always finite,
    /// no endpoint fuss from uniform draws).
    pub fn sample<R: rand::Rng + ?Sized>(self, rng: &mut R) -> f64 {
        let e: f64 = rng.sample(rand_distr::Exp1);
        -e.ln()
    }

    /// Mean of the law (the Euler–Mascheroni constant).
    pub const MEAN: f64 = 0.577_215_664_901_532_9;
}

// ---------------------------------------------------------------------------
// Maximum-entry test quantile
// ---------------------------------------------------------------------------

/// (1 − α)-quantile of the limit law G(x) = exp(−e^{−x/2}/√(8π)) of the
/// centered maximum-entry statistic n·W² − 4·log p + log log p:
///
/// ```text
/// q(α) = −log(8π) − 2·log log (1 − α)^{−1},      α ∈ (0, 1).
/// ```
///
/// The associated test rejects when the statistic reaches the quantile, so
/// its asymptotic size is exactly α.
pub fn jiang_quantile(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!(
            "test level must lie in (0, 1), got {alpha}"
        )));
    }
    let log_log = (1.0 / (1.0 - alpha)).ln().ln();
    Ok(-(8.0 * std::f64::consts::PI).ln() - 2.0 * log_log)
}

// ---------------------------------------------------------------------------
// Mean measure
// ---------------------------------------------------------------------------

/// Mean measure μ(a, b] = e^{−a} − e^{−b} of the limiting Poisson point
/// process on half-open windows. `b = +∞` is allowed (e^{−∞} = 0), `a` must
/// be finite and strictly below `b`.
pub fn mean_measure(a: f64, b: f64) -> Result<f64> {
    if !a.is_finite() {
        return Err(Error::domain(format!(
            "window lower endpoint must be finite, got {a}"
        )));
    }
    if b.is_nan() || a >= b {
        return Err(Error::domain(format!(
            "window needs a < b, got a = {a}, b = {b}"
        )));
    }
    Ok((-a).exp() - (-b).exp())
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
