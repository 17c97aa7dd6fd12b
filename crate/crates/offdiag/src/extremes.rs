//! Test statistics on extreme off-diagonal entries and their limit laws.
//!
//! Three families of independence tests live here:
//!
//! - the pairwise-maximum test: statistic n·W² − 4 log p + log log p with
//!   W the largest absolute normalized off-diagonal entry, compared against
//!   the (1−α)-quantile of the limit law exp(−e^{−x/2}/√(8π));
//! - spacing statistics of the k largest entries S_(1) ≥ … ≥ S_(k):
//!   range d̃·(S_(1)−S_(k))/√n, largest adjacent gap, and the sum of
//!   squared gaps d̃²/n·Σ(S_(i)−S_(i+1))² — all centering-free, so they are
//!   invariant under shifting every entry by a constant;
//! - a multivariate region test: the normalized top-k vector is checked
//!   against an axis-aligned rectangle calibrated to hold the limit vector
//!   with probability 1−α.
//!
//! The joint limit of the normalized top-k vector is (−log Γ_1, …, −log Γ_k)
//! with Γ_i = E_1 + ⋯ + E_i a standard exponential random walk. Spacing
//! limits are log-ratios of consecutive Γ's; by the Rényi representation
//! these equal the log-ratios of uniform order statistics in law, and at
//! k = 2 the range limit is exactly Exp(1). Quantiles of the spacing limits
//! are seeded Monte Carlo estimates, cached per (kind, α, count, seed).
//!
//! The two threshold families must never be mixed: the pairwise-maximum
//! quantile belongs to the exp(−e^{−x/2}/√(8π)) law and the spacing
//! quantiles to the log-ratio laws above.

use std::collections::HashMap;
use std::sync::{LazyLock, RwLock};

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Exp1};

use crate::kernels::OrderStats;
use crate::norming::{self, Gumbel};
use crate::{EntryMode, Error, Result};

// ---------------------------------------------------------------------------
// Test decisions
// ---------------------------------------------------------------------------

/// Outcome of a one-sided right-tail test: reject ⇔ statistic ≥ threshold
/// (closed rejection region, so a statistic exactly on the boundary rejects).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestDecision {
    pub statistic: f64,
    pub threshold: f64,
    pub alpha: f64,
    pub reject: bool,
}

/// Assemble a decision under the closed right-tail convention.
pub fn decide_right_tail(statistic: f64, threshold: f64, alpha: f64) -> TestDecision {
    TestDecision {
        statistic,
        threshold,
        alpha,
        reject: statistic >= threshold,
    }
}

// ---------------------------------------------------------------------------
// Pairwise-maximum (Jiang) test
// ---------------------------------------------------------------------------

/// The centered maximum statistic n·maxabs² − 4 log p + log log p.
///
/// `maxabs` is max|S_ij|/n over i < j in covariance mode, or max|R_ij| in
/// correlation mode (where it must lie in [0, 1]). Requires p ≥ 3 so the
/// log log p centering term is positive.
pub fn jiang_statistic(maxabs: f64, n: usize, p: usize, mode: EntryMode) -> Result<f64> {
    if p < 3 {
        return Err(Error::domain(format!(
            "maximum statistic needs p ≥ 3, got {p}"
        )));
    }
    if n == 0 {
        return Err(Error::domain("maximum statistic needs n ≥ 1".to_string()));
    }
    if !(maxabs.is_finite() && maxabs >= 0.0) {
        return Err(Error::domain(format!(
            "maxabs must be finite and ≥ 0, got {maxabs}"
        )));
    }
    if mode == EntryMode::Correlation && maxabs > 1.0 {
        return Err(Error::domain(format!(
            "correlation maxabs must lie in [0, 1], got {maxabs}"
        )));
    }
    let p = p as f64;
    Ok(n as f64 * maxabs * maxabs - 4.0 * p.ln() + p.ln().ln())
}

/// Decide the pairwise-maximum test at level α: reject ⇔ statistic ≥ q_α
/// with q_α = [`norming::jiang_quantile`].
pub fn jiang_test(statistic: f64, alpha: f64) -> Result<TestDecision> {
    let threshold = norming::jiang_quantile(alpha)?;
    Ok(decide_right_tail(statistic, threshold, alpha))
}

// ---------------------------------------------------------------------------
// Spacing statistics
// ---------------------------------------------------------------------------

/// Which spacing functional of the top-k entries to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpacingFamily {
    /// d̃·(S_(1) − S_(k))/√n.
    Range,
    /// d̃·max_i (S_(i) − S_(i+1))/√n.
    MaxGap,
    /// d̃²/n · Σ_i (S_(i) − S_(i+1))².
    SumSqGap,
}

impl SpacingFamily {
    /// Serialization token.
    pub fn token(self) -> &'static str {
        match self {
            SpacingFamily::Range => "range",
            SpacingFamily::MaxGap => "max_gap",
            SpacingFamily::SumSqGap => "sum_sq_gap",
        }
    }

    pub const ALL: [SpacingFamily; 3] =
        [SpacingFamily::Range, SpacingFamily::MaxGap, SpacingFamily::SumSqGap];
}

impl std::str::FromStr for SpacingFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "range" | "t1" => Ok(SpacingFamily::Range),
            "max_gap" | "t2" => Ok(SpacingFamily::MaxGap),
            "sum_sq_gap" | "t3" => Ok(SpacingFamily::SumSqGap),
            other => Err(Error::parse(format!(
                "unknown spacing family {other:?} (expected range, max_gap, or sum_sq_gap)"
            ))),
        }
    }
}

/// A spacing statistic: the functional family plus the order-statistic
/// depth k ≥ 2 it acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SpacingKind {
    family: SpacingFamily,
    k: usize,
}

impl SpacingKind {
    pub fn new(family: SpacingFamily, k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::domain(format!(
                "spacing statistics need k ≥ 2, got {k}"
            )));
        }
        Ok(SpacingKind { family, k })
    }

    pub fn family(self) -> SpacingFamily {
        self.family
    }

    pub fn k(self) -> usize {
        self.k
    }
}

/// One scaled spacing d̃·(a − b)/√n. Every statistic is assembled from this
/// single expression so that the k = 2 identities (range = max gap,
/// sum of squares = range²) hold bit-for-bit.
#[inline]
fn scaled_gap(a: f64, b: f64, dt: f64, sqrt_n: f64) -> f64 {
    dt * (a - b) / sqrt_n
}

fn spacing_from_values(values: &[f64], dt: f64, sqrt_n: f64, family: SpacingFamily) -> f64 {
    let k = values.len();
    match family {
        SpacingFamily::Range => scaled_gap(values[0], values[k - 1], dt, sqrt_n),
        SpacingFamily::MaxGap => (0..k - 1)
            .map(|i| scaled_gap(values[i], values[i + 1], dt, sqrt_n))
            .fold(f64::NEG_INFINITY, f64::max),
        SpacingFamily::SumSqGap => (0..k - 1)
            .map(|i| {
                let g = scaled_gap(values[i], values[i + 1], dt, sqrt_n);
                g * g
            })
            .sum(),
    }
}

/// Spacing statistic of the k largest off-diagonal entries.
///
/// `top` must be the descending order statistics (as produced by
/// [`crate::kernels::offdiag_extremes`]) holding at least `kind.k()` values;
/// only the first k are used. Requires p ≥ 3 for the pair norming constant.
pub fn spacing_statistic(top: &OrderStats, n: usize, p: usize, kind: SpacingKind) -> Result<f64> {
    if top.items().len() < kind.k() {
        return Err(Error::domain(format!(
            "spacing statistic needs {} order statistics, only {} available",
            kind.k(),
            top.items().len()
        )));
    }
    if n == 0 {
        return Err(Error::domain("spacing statistic needs n ≥ 1".to_string()));
    }
    let dt = norming::pair_norming_constant(p as u64)?;
    let values: Vec<f64> = top.items()[..kind.k()].iter().map(|e| e.value).collect();
    if values.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::domain(
            "top order statistics must be descending".to_string(),
        ));
    }
    Ok(spacing_from_values(&values, dt, (n as f64).sqrt(), kind.family()))
}

// ---------------------------------------------------------------------------
// Limit-law sampling
// ---------------------------------------------------------------------------

/// One draw of the limiting top-k vector (−log Γ_1, …, −log Γ_k); strictly
/// decreasing almost surely.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitLawSample {
    pub values: Vec<f64>,
}

/// Fill `buf` with one draw of (−log Γ_1, …, −log Γ_k).
fn draw_limit_values(rng: &mut ChaCha12Rng, buf: &mut [f64]) {
    let mut gamma = 0.0f64;
    for v in buf.iter_mut() {
        let e: f64 = Exp1.sample(rng);
        gamma += e;
        *v = -gamma.ln();
    }
}

/// `count` iid draws of the limiting top-k vector, deterministic given the
/// seed (and independent of how the caller later consumes them).
pub fn sample_limit_vector(k: usize, count: usize, seed: u64) -> Result<Vec<LimitLawSample>> {
    if k == 0 || count == 0 {
        return Err(Error::domain(format!(
            "limit sampling needs k ≥ 1 and count ≥ 1, got k = {k}, count = {count}"
        )));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut buf = vec![0.0; k];
    for _ in 0..count {
        draw_limit_values(&mut rng, &mut buf);
        out.push(LimitLawSample { values: buf.clone() });
    }
    Ok(out)
}

/// Cache of Monte Carlo spacing quantiles. Entries are deterministic
/// functions of their key, so concurrent initialization is harmless: racing
/// writers insert the same value.
static QUANTILE_CACHE: LazyLock<RwLock<HashMap<(SpacingFamily, usize, u64, usize, u64), f64>>> =
    LazyLock::new(|| RwLock::new(HashMap::new()));

/// Minimum Monte Carlo size accepted for limit quantiles.
pub const MIN_QUANTILE_MC: usize = 10_000;

/// Empirical (1−α)-quantile with linear interpolation between adjacent
/// order statistics. `sorted` must be ascending.
pub(crate) fn empirical_quantile(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty() && (0.0..=1.0).contains(&q));
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    if i + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    let frac = pos - i as f64;
    sorted[i] + frac * (sorted[i + 1] - sorted[i])
}

/// The (1−α)-quantile of the spacing-limit law, estimated from `mc_count`
/// seeded draws of the limit vector and cached per (kind, α, mc_count, seed).
///
/// Rejects mc_count below [`MIN_QUANTILE_MC`] (the estimate would be too
/// noisy to serve as a test threshold).
pub fn spacing_limit_quantile(
    kind: SpacingKind,
    alpha: f64,
    mc_count: usize,
    seed: u64,
) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    if mc_count < MIN_QUANTILE_MC {
        return Err(Error::domain(format!(
            "quantile Monte Carlo needs at least {MIN_QUANTILE_MC} draws, got {mc_count}"
        )));
    }
    let key = (kind.family(), kind.k(), alpha.to_bits(), mc_count, seed);
    if let Some(&v) = QUANTILE_CACHE.read().expect("cache lock").get(&key) {
        return Ok(v);
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut buf = vec![0.0; kind.k()];
    let mut stats = Vec::with_capacity(mc_count);
    for _ in 0..mc_count {
        draw_limit_values(&mut rng, &mut buf);
        // The limit vector is already normalized: unit scaling.
        stats.push(spacing_from_values(&buf, 1.0, 1.0, kind.family()));
    }
    stats.sort_by(|a, b| a.partial_cmp(b).expect("finite spacing draws"));
    let q = empirical_quantile(&stats, 1.0 - alpha);
    QUANTILE_CACHE.write().expect("cache lock").insert(key, q);
    Ok(q)
}

/// Spacing test at level α: statistic from the data, threshold from the
/// seeded limit-quantile table.
pub fn spacing_test(
    top: &OrderStats,
    n: usize,
    p: usize,
    kind: SpacingKind,
    alpha: f64,
    mc_count: usize,
    seed: u64,
) -> Result<TestDecision> {
    let statistic = spacing_statistic(top, n, p, kind)?;
    let threshold = spacing_limit_quantile(kind, alpha, mc_count, seed)?;
    Ok(decide_right_tail(statistic, threshold, alpha))
}

// ---------------------------------------------------------------------------
// Region test
// ---------------------------------------------------------------------------

/// An axis-aligned closed rectangle in R^k used as the acceptance region of
/// the multivariate top-k test.
#[derive(Debug, Clone, PartialEq)]
pub struct RectangularRegion {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl RectangularRegion {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::domain(
                "region needs matching non-empty lower/upper bounds".to_string(),
            ));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::domain(
                "region needs lower ≤ upper in every coordinate".to_string(),
            ));
        }
        Ok(RectangularRegion { lower, upper })
    }

    /// The whole of R^k (never rejects).
    pub fn full_space(k: usize) -> Self {
        RectangularRegion {
            lower: vec![f64::NEG_INFINITY; k],
            upper: vec![f64::INFINITY; k],
        }
    }

    /// An empty region (always rejects): a degenerate rectangle containing
    /// no finite point.
    pub fn empty(k: usize) -> Self {
        RectangularRegion {
            lower: vec![f64::INFINITY; k],
            upper: vec![f64::INFINITY; k],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Closed membership test.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *v >= *l && *v <= *u)
    }
}

/// A calibrated region together with its calibration metadata (echoed into
/// output files so thresholds are reproducible).
#[derive(Debug, Clone, PartialEq)]
pub struct CalibratedRegion {
    pub region: RectangularRegion,
    pub achieved_coverage: f64,
    pub k: usize,
    pub alpha: f64,
    pub mc_count: usize,
    pub seed: u64,
}

/// Target slack for the achieved coverage of the calibrated region.
pub const REGION_COVERAGE_SLACK: f64 = 0.002;

/// Build the default acceptance rectangle for the top-k limit vector at
/// level α.
///
/// Per-coordinate bands come from the Bonferroni-split marginal quantiles
/// (α/(2k) in each tail); those bands are conservative, so their half-widths
/// are then shrunk by a common factor found by bisection until the joint
/// Monte Carlo coverage sits within 1−α ± [`REGION_COVERAGE_SLACK`]. The
/// calibration sample is seeded and the achieved coverage is reported.
pub fn calibrated_region(
    k: usize,
    alpha: f64,
    mc_count: usize,
    seed: u64,
) -> Result<CalibratedRegion> {
    if k == 0 {
        return Err(Error::domain("region calibration needs k ≥ 1".to_string()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    if mc_count < MIN_QUANTILE_MC {
        return Err(Error::domain(format!(
            "region calibration needs at least {MIN_QUANTILE_MC} draws, got {mc_count}"
        )));
    }

    // Calibration sample, stored column-wise for the per-coordinate bands.
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut buf = vec![0.0; k];
    let mut draws: Vec<f64> = Vec::with_capacity(k * mc_count);
    for _ in 0..mc_count {
        draw_limit_values(&mut rng, &mut buf);
        draws.extend_from_slice(&buf);
    }
    let mut center = vec![0.0; k];
    let mut half = vec![0.0; k];
    let split = alpha / (2.0 * k as f64);
    let mut col = vec![0.0; mc_count];
    for i in 0..k {
        for (r, c) in col.iter_mut().enumerate() {
            *c = draws[r * k + i];
        }
        col.sort_by(|a, b| a.partial_cmp(b).expect("finite draws"));
        let lo = empirical_quantile(&col, split);
        let hi = empirical_quantile(&col, 1.0 - split);
        center[i] = 0.5 * (lo + hi);
        half[i] = 0.5 * (hi - lo);
    }

    let coverage = |scale: f64| -> f64 {
        let mut inside = 0usize;
        for r in 0..mc_count {
            let x = &draws[r * k..(r + 1) * k];
            if x
                .iter()
                .enumerate()
                .all(|(i, v)| (v - center[i]).abs() <= scale * half[i])
            {
                inside += 1;
            }
        }
        inside as f64 / mc_count as f64
    };

    let target = 1.0 - alpha;
    // Bonferroni bands are conservative, so scale 1 should over-cover;
    // expand the bracket outward if Monte Carlo noise says otherwise.
    let mut hi_scale = 1.0;
    let mut iterations = 0usize;
    while coverage(hi_scale) < target {
        hi_scale *= 1.5;
        iterations += 1;
        if iterations > 40 {
            return Err(Error::NoConvergence {
                iterations,
                last_estimate: coverage(hi_scale),
            });
        }
    }
    let mut lo_scale = hi_scale / 2.0;
    while coverage(lo_scale) >= target {
        lo_scale /= 2.0;
        iterations += 1;
        if iterations > 80 {
            return Err(Error::NoConvergence {
                iterations,
                last_estimate: coverage(lo_scale),
            });
        }
    }
    let mut achieved = coverage(hi_scale);
    let mut best = hi_scale;
    for _ in 0..60 {
        if (achieved - target).abs() <= REGION_COVERAGE_SLACK {
            break;
        }
        let mid = 0.5 * (lo_scale + hi_scale);
        let c = coverage(mid);
        if c >= target {
            hi_scale = mid;
            best = mid;
            achieved = c;
        } else {
            lo_scale = mid;
        }
    }
    if (achieved - target).abs() > REGION_COVERAGE_SLACK {
        return Err(Error::NoConvergence {
            iterations: 60,
            last_estimate: achieved,
        });
    }

    let lower: Vec<f64> = (0..k).map(|i| center[i] - best * half[i]).collect();
    let upper: Vec<f64> = (0..k).map(|i| center[i] + best * half[i]).collect();
    Ok(CalibratedRegion {
        region: RectangularRegion::new(lower, upper)?,
        achieved_coverage: achieved,
        k,
        alpha,
        mc_count,
        seed,
    })
}

/// Region test: reject ⇔ the observed normalized top-k vector falls outside
/// the acceptance region. The decision's statistic is the outside-indicator
/// (0 or 1) with threshold 1, keeping the closed-rejection convention.
pub fn region_test(observed: &[f64], region: &RectangularRegion, alpha: f64) -> Result<TestDecision> {
    if observed.len() != region.dim() {
        return Err(Error::domain(format!(
            "observed vector has dimension {}, region has {}",
            observed.len(),
            region.dim()
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let outside = !region.contains(observed);
    Ok(decide_right_tail(f64::from(u8::from(outside)), 1.0, alpha))
}

/// Convenience: the Gumbel law of the first limit coordinate (used by
/// diagnostics that compare the empirical top-1 law against its limit).
pub fn limit_first_coordinate_law() -> Gumbel {
    Gumbel
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
