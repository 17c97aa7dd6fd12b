//! Per-functional Monte Carlo runners.
//!
//! Every runner follows the same pattern: replicate r gets its own RNG
//! stream from the master seed, replicates are mapped in parallel with an
//! index-preserving collect, and metrics are aggregated sequentially in
//! replicate order. Counts accumulate as integers (exact in any order);
//! everything float-valued is reduced in a fixed order — together this
//! makes summaries bit-identical for any worker count.
//!
//! Metric names are stable identifiers: window metrics embed the window
//! label (`count_mean(0..inf]`), grid metrics embed the grid point
//! (`joint_cdf(0;1)`, `tail_prob(y=0.5)`), rate metrics embed the level
//! (`jiang_rate_cov(alpha=0.05)`).

use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::extremes::{
    calibrated_region, empirical_quantile, jiang_statistic, jiang_test, region_test,
    sample_limit_vector, spacing_limit_quantile, spacing_statistic, spacing_test, SpacingFamily,
    SpacingKind,
};
use crate::kernels::{
    correlation, diagonal_points_from, gram, heavy_tail_diagonal_points_from, offdiag_extremes,
    offdiag_points, squared_offdiag_points, SymmetricMatrix,
};
use crate::norming::{mean_measure, norming_constant, normal_upper_tail, pair_norming_constant, Gumbel};
use crate::thresholding::{consistency_metric, threshold_corr, threshold_cov, ThresholdSpec};
use crate::{EntryMode, Error, Result};

use super::config::{ExperimentConfig, Functional, Window, LD_RATIO_CHUNK};
use super::dist::{a_quantile, sample_matrix_with};
use super::ks::ks_statistic;
use super::rng::replicate_rng;
use super::summary::{MCSummary, Metric};

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

/// Fixed level grid for the size study of the maximum-entry test.
pub const TEST_ALPHA_GRID: [f64; 3] = [0.01, 0.05, 0.10];
/// Fresh-draw count for the region self-calibration rate.
pub const REGION_SELF_DRAWS: usize = 10_000;
/// Seed salt separating the self-calibration draws from the calibration
/// draws (golden-ratio increment, full 64-bit mixing).
pub const REGION_FRESH_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// Map `count` replicate bodies over a pool of `workers` threads. Stream i
/// of the master seed drives body i; the output vector is in index order
/// whatever the schedule. The first replicate error (in index order) wins.
fn map_replicates<T, F>(workers: usize, count: usize, master_seed: u64, body: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut ChaCha12Rng) -> Result<T> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Resource(format!("could not build a {workers}-thread pool: {e}")))?;
    let results: Vec<Result<T>> = pool.install(|| {
        (0..count as u64)
            .into_par_iter()
            .map(|r| {
                let mut rng = replicate_rng(master_seed, r);
                body(&mut rng)
            })
            .collect()
    });
    results.into_iter().collect()
}

fn sorted(mut xs: Vec<f64>) -> Vec<f64> {
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite statistics"));
    xs
}

fn median(xs: Vec<f64>) -> f64 {
    let s = sorted(xs);
    empirical_quantile(&s, 0.5)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn exp1_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        -(-x).exp_m1()
    }
}

fn count_in(windows: &[Window], values: impl Iterator<Item = f64>, counts: &mut [u64]) {
    for v in values {
        for (wi, w) in windows.iter().enumerate() {
            if w.contains(v) {
                counts[wi] += 1;
            }
        }
    }
}

/// Mean window counts across replicates (integer sums, then one division).
fn mean_counts(per_rep: &[Vec<u64>], windows: usize, reps: usize) -> Vec<f64> {
    (0..windows)
        .map(|wi| {
            let total: u64 = per_rep.iter().map(|c| c[wi]).sum();
            total as f64 / reps as f64
        })
        .collect()
}

/// Normalized maximum and minimum statistics of the off-diagonal gram
/// entries: d̃·(S_max/√n − d̃) and d̃·(S_min/√n + d̃). The first converges
/// to the Gumbel law Λ; the second to the law with cdf 1 − Λ(−y).
pub(crate) fn normalized_max_min(s: &SymmetricMatrix, n: usize) -> Result<(f64, f64)> {
    let ex = offdiag_extremes(s, 1)?;
    let dt = pair_norming_constant(s.p() as u64)?;
    let sqn = (n as f64).sqrt();
    let top = ex.top.items()[0].value;
    let bot = ex.bottom.items()[0].value;
    Ok((dt * (top / sqn - dt), dt * (bot / sqn + dt)))
}

// ---------------------------------------------------------------------------
// Point-cloud window counts
// ---------------------------------------------------------------------------

fn run_point_counts(cfg: &ExperimentConfig) -> Result<(Vec<Metric>, Vec<String>)> {
    let band = match cfg.functional {
        Functional::Squares => 0.2,
        _ => 0.15,
    };
    let per_rep = map_replicates(cfg.workers, cfg.replicates, cfg.master_seed, |rng| {
        let x = sample_matrix_with(&cfg.spec, cfg.p, cfg.n, rng)?;
        let s = gram(&x);
        let points = match cfg.functional {
            Functional::PpCounts => offdiag_points(&s, cfg.n)?,
            Functional::Squares => squared_offdiag_points(&s, cfg.n)?,
            Functional::CorrVariants => corr_offdiag_points_of(&s, cfg.n)?,
            other => {
                return Err(Error::domain(format!(
                    "point-count runner got functional {}",
                    other.token()
                )))
            }
        };
        let mut counts = vec![0u64; cfg.windows.len()];
        count_in(&cfg.windows, points.iter().map(|pt| pt.value), &mut counts);
        Ok(counts)
    })?;
    let means = mean_counts(&per_rep, cfg.windows.len(), cfg.replicates);
    let mut metrics = Vec::new();
    for (w, m) in cfg.windows.iter().zip(means) {
        let target = mean_measure(w.lo(), w.hi())?;
        metrics.push(Metric::with_target(
            format!("count_mean{}", w.label()),
            m,
            target,
            band,
        ));
    }
    Ok((metrics, Vec::new()))
}

fn corr_offdiag_points_of(s: &SymmetricMatrix, n: usize) -> Result<Vec<crate::kernels::NormedPoint>> {
    let r = correlation(s)?;
    crate::kernels::corr_offdiag_points(&r, n)
}

// ---------------------------------------------------------------------------
// Maximum-entry suite
// ---------------------------------------------------------------------------

struct MaxRep {
    max_stat: f64,
    min_stat: f64,
    max_stat_corr: f64,
    spacing_t1: f64,
    growth_top: f64,
    growth_bottom: f64,
    sq_counts: Vec<u64>,
}

fn run_max_suite(cfg: &ExperimentConfig) -> Result<(Vec<Metric>, Vec<String>)> {
    let kind = SpacingKind::new(SpacingFamily::Range, 2)?;
    let per_rep = map_replicates(cfg.workers, cfg.replicates, cfg.master_seed, |rng| {
        let x = sample_matrix_with(&cfg.spec, cfg.p, cfg.n, rng)?;
        let s = gram(&x);
        let ex = offdiag_extremes(&s, cfg.k)?;
        let dt = pair_norming_constant(cfg.p as u64)?;
        let sqn = (cfg.n as f64).sqrt();
        let top1 = ex.top.items()[0].value;
        let bot1 = ex.bottom.items()[0].value;
        let r = correlation(&s)?;
        let rex = offdiag_extremes(&r, 1)?;
        let growth_scale = (cfg.n as f64 * (cfg.p as f64).ln()).sqrt();
        let mut sq_counts = vec![0u64; cfg.windows.len()];
        let sq_points = squared_offdiag_points(&s, cfg.n)?;
        count_in(&cfg.windows, sq_points.iter().map(|pt| pt.value), &mut sq_counts);
        Ok(MaxRep {
            max_stat: dt * (top1 / sqn - dt),
            min_stat: dt * (bot1 / sqn + dt),
            max_stat_corr: dt * (sqn * rex.top.items()[0].value - dt),
            spacing_t1: spacing_statistic(&ex.top, cfg.n, cfg.p, kind)?,
            growth_top: top1 / growth_scale,
            growth_bottom: bot1 / growth_scale,
            sq_counts,
        })
    })?;
    let reps = cfg.replicates;
    let mut metrics = Vec::new();

    let max_sorted = sorted(per_rep.iter().map(|r| r.max_stat).collect());
    metrics.push(Metric::with_target(
        "ks_max_cov",
        ks_statistic(&max_sorted, |x| Gumbel.cdf(x)),
        0.0,
        0.10,
    ));
    let corr_sorted = sorted(per_rep.iter().map(|r| r.max_stat_corr).collect());
    metrics.push(Metric::with_target(
        "ks_max_corr",
        ks_statistic(&corr_sorted, |x| Gumbel.cdf(x)),
        0.0,
        0.10,
    ));
    metrics.push(Metric::with_target(
        "median_growth_top",
        median(per_rep.iter().map(|r| r.growth_top).collect()),
        2.0,
        0.25,
    ));
    metrics.push(Metric::with_target(
        "median_growth_bottom",
        median(per_rep.iter().map(|r| r.growth_bottom).collect()),
        -2.0,
        0.25,
    ));
    metrics.extend(joint_cell_metrics(
        &per_rep.iter().map(|r| (r.max_stat, r.min_stat)).collect::<Vec<_>>(),
        &cfg.grid,
    ));
    let sq_counts: Vec<Vec<u64>> = per_rep.iter().map(|r| r.sq_counts.clone()).collect();
    for (w, m) in cfg
        .windows
        .iter()
        .zip(mean_counts(&sq_counts, cfg.windows.len(), reps))
    {
        metrics.push(Metric::with_target(
            format!("sq_count_mean{}", w.label()),
            m,
            mean_measure(w.lo(), w.hi())?,
            0.2,
        ));
    }
    let spacing_sorted = sorted(per_rep.iter().map(|r| r.spacing_t1).collect());
    metrics.push(Metric::with_target(
        "ks_spacing_range2",
        ks_statistic(&spacing_sorted, exp1_cdf),
        0.0,
        0.12,
    ));
    Ok((metrics, Vec::new()))
}

/// Empirical joint cdf cells of (max-stat, min-stat) against the product
/// limit Λ(x)·(1 − Λ(−y)) — the two extremes decouple in the limit.
fn joint_cell_metrics(pairs: &[(f64, f64)], grid: &[f64]) -> Vec<Metric> {
    let reps = pairs.len() as f64;
    let mut out = Vec::new();
    for &x in grid {
        for &y in grid {
            let hits = pairs
                .iter()
                .filter(|(mx, mn)| *mx <= x && *mn <= y)
                .count();
            let target = Gumbel.cdf(x) * (1.0 - Gumbel.cdf(-y));
            out.push(Metric::with_target(
                format!("joint_cdf({x};{y})"),
                hits as f64 / reps,
                target,
                0.07,
            ));
        }
    }
    out
}

fn run_joint(cfg: &ExperimentConfig) -> Result<(Vec<Metric>, Vec<String>)> {
    let per_rep = map_replicates(cfg.workers, cfg.replicates, cfg.master_seed, |rng| {
        let x = sample_matrix_with(&cfg.spec, cfg.p, cfg.n, rng)?;
        let s = gram(&x);
        normalized_max_min(&s, cfg.n)
    })?;
    let mut metrics = Vec::new();
    let max_sorted = sorted(per_rep.iter().map(|r| r.0).collect());
    metrics.push(Metric::with_target(
        "ks_max_cov",
        ks_statistic(&max_sorted, |x| Gumbel.cdf(x)),
        0.0,
        0.10,
    ));
    metrics.extend(joint_cell_metrics(&per_rep, &cfg.grid));
    Ok((metrics, Vec::new()))
}

fn run_rate_check(cfg: &ExperimentConfig) -> Result<(Vec<Metric>, Vec<String>)> {
    let per_rep = map_replicates(cfg.workers, cfg.replicates, cfg.master_seed, |rng| {
        let x = sample_matrix_with(&cfg.spec, cfg.p, cfg.n, rng)?;
        let s = gram(&x);
        let ex = offdiag_extremes(&s, 1)?;
        let growth_scale = (cfg.n as f64 * (cfg.p as f64).ln()).sqrt();
        Ok((
            ex.top.items()[0].value / growth_scale,
            ex.bottom.items()[0].value / growth_scale,
        ))
    })?;
    let metrics = vec![
        Metric::with_target(
            "median_growth_top",
            median(per_rep.iter().map(|r| r.0).collect()),
            2.0,
            0.25,
        ),
        Metric::with_target(
            "median_growth_bottom",
            median(per_rep.iter().map(|r| r.1).collect()),
            -2.0,
            0.25,
        ),
    ];
    Ok((metrics, Vec::new()))
}

// ---------------------------------------------------------------------------
// Random-walk row sums
// ---------------------------------------------------------------------------

fn run_random_walk(cfg: &ExperimentConfig) -> Result<(Vec<Metric>, Vec<String>)> {
    let d = norming_constant(cfg.p as u64)?;
    let sampler = cfg.spec.sampler()?;
    let per_rep = map_replicates(cfg.workers, cfg.replicates, cfg.master_seed, |rng| {
        let sqn = (cfg.n as f64).sqrt();
        let mut counts = vec![0u64; cfg.windows.len()];
        let mut max_point = f64::NEG_INFINITY;
        for _ in 0..cfg.p {
            let mut acc = 0.0;
            for _ in 0..cfg.n {
                acc += sampler.sample(rng);
            }
            let v = d * (acc / sqn - d);
            if v > max_point {
                max_point = v;
            }
            for (wi, w) in cfg.windows.iter().enumerate() {
                if w.contains(v) {
                    counts[wi] += 1;
                }
            }
        }
        Ok((counts, max_point))
    })?;
    let counts: Vec<Vec<u64>> = per_rep.iter().map(|r| r.0.clone()).collect();
    let means = mean_counts(&counts, cfg.windows.len(), cfg.replicates);
    let gaussian_exact = cfg.spec == super::dist::DistributionSpec::Gaussian;
    let mut metrics = Vec::new();
    for (w, m) in cfg.windows.iter().zip(means) {
        let metric = if gaussian_exact {
            // Each normalized row sum is exactly N(0, 1): the window count
            // is Binomial(p, q) with q known in closed form, so the target
            // is exact and the band is three binomial standard errors.
            let upper = if w.hi().is_finite() {
                normal_upper_tail(d + w.hi() / d)
            } else {
                0.0
            };
            let q = normal_upper_tail(d + w.lo() / d) - upper;
            let target = cfg.p as f64 * q;
            let se = (cfg.p as f64 * q * (1.0 - q) / cfg.replicates as f64).sqrt();
            Metric::with_target(format!("count_mean{}", w.label()), m, target, 3.0 * se)
        } else {
            Metric::with_target(
                format!("count_mean{}", w.label()),
                m,
                mean_measure(w.lo(), w.hi())?,
                0.2,
            )
        };
        metrics.push(metric);
    }
    let max_sorted = sorted(per_rep.iter().map(|r| r.1).collect());
    metrics.push(Metric::with_target(
        "ks_max",
        ks_statistic(&max_sorted, |x| Gumbel.cdf(x)),
        0.0,
        0.10,
    ));
    Ok((metrics, Vec::new()))
}

// ---------------------------------------------------------------------------
// Diagonal functionals
// ---------------------------------------------------------------------------

fn sample_diagonal(
    cfg: &ExperimentConfig,
    rng: &mut ChaCha12Rng,
    sampler: &super::dist::FamilySampler,
) -> Vec<f64> {
    let mut diag = vec![0.0; cfg.p];
    for slot in diag.iter_mut() {
        let mut acc = 0.0;
        for _ in 0..cfg.n {
            let x = sampler.sample(rng);
            acc += x * x;
        }
        *slot = acc;
    }
    diag
}

fn run_diag_gumbel(cfg: &ExperimentConfig) -> Result<(Vec<Metric>, Vec<String>)> {
    let var_x2 = cfg.spec.var_x_squared();
    let sampler = cfg.spec.sampler()?;
    let per_rep = map_replicates(cfg.workers, cfg.replicates, cfg.master_seed, |rng| {
        let diag = sample_diagonal(cfg, rng, &sampler);
        let points = diagonal_points_from(&diag, cfg.n, var_x2)?;
        let mut counts = vec![0u64; cfg.windows.len()];
        count_in(&cfg.windows, points.iter().map(|pt| pt.value), &mut counts);
        let max_point = points
            .iter()
            .map(|pt| pt.value)
            .fold(f64::NEG_INFINITY, f64::max);
        Ok((counts, max_point))
    })?;
    let mut metrics = Vec::new();
    let max_sorted = sorted(per_rep.iter().map(|r| r.1).collect());
    metrics.push(Metric::with_target(
        "ks_diag_max",
        ks_statistic(&max_sorted, |x| Gumbel.cdf(x)),
        0.0,
        0.10,
    ));
    let counts: Vec<Vec<u64>> = per_rep.iter().map(|r| r.0.clone()).collect();
    for (w, m) in cfg
        .windows
        .iter()
        .zip(mean_counts(&counts, cfg.windows.len(), cfg.replicates))
    {
        metrics.push(Metric::with_target(
            format!("count_mean{}", w.label()),
            m,
            mean_measure(w.lo(), w.hi())?,
            0.15,
        ));
    }
    Ok((metrics, Vec::new()))
}

fn run_diag_frechet(cfg: &ExperimentConfig) -> Result<(Vec<Metric>, Vec<String>)> {
    let tail = cfg.spec.abs_tail().ok_or_else(|| {
        Error::domain("diag_frechet needs a power-law family".to_string())
    })?;
    let a_np = a_quantile(&cfg.spec, (cfg.n * cfg.p) as u64)?;
    let sampler = cfg.spec.sampler()?;
    let per_rep = map_replicates(cfg.workers, cfg.replicates, cfg.master_seed, |rng| {
        let diag = sample_diagonal(cfg, rng, &sampler);
        let points = heavy_tail_diagonal_points_from(&diag, cfg.n, a_np)?;
        Ok(points
            .iter()
            .map(|pt| pt.value)
            .fold(f64::NEG_INFINITY, f64::max))
    })?;
    let half_alpha = tail.alpha / 2.0;
    let frechet_cdf = move |x: f64| {
        if x <= 0.0 {
            0.0
        } else {
            (-x.powf(-half_alpha)).exp()
        }
    };
    let max_sorted = sorted(per_rep);
    let metrics = vec![
        Metric::with_target("ks_frechet", ks_statistic(&max_sorted, frechet_cdf), 0.0, 0.15),
        Metric::plain("a_np", a_np),
    ];
    Ok((metrics, Vec::new()))
}

// ---------------------------------------------------------------------------
// Tail-probability ratios
// ---------------------------------------------------------------------------

fn run_ld_ratio(cfg: &ExperimentConfig) -> Result<(Vec<Metric>, Vec<String>)> {
    // `replicates` counts draws here; draws are grouped into fixed-size
    // chunks and chunk i consumes stream i, so the schedule cannot shift
    // which draw sees which random bits.
    let total = cfg.replicates;
    let chunks = total.div_ceil(LD_RATIO_CHUNK);
    let sampler = cfg.spec.sampler()?;
    let y_grid = cfg.y_grid.clone();
    let per_chunk = map_replicates_indexed(cfg.workers, chunks, cfg.master_seed, |ci, rng| {
        let start = ci * LD_RATIO_CHUNK;
        let draws = LD_RATIO_CHUNK.min(total - start);
        let sqn = (cfg.n as f64).sqrt();
        let mut counts = vec![0u64; y_grid.len()];
        for _ in 0..draws {
            let mut acc = 0.0;
            for _ in 0..cfg.n {
                acc += sampler.sample(rng);
            }
            let v = acc / sqn;
            for (yi, y) in y_grid.iter().enumerate() {
                if v > *y {
                    counts[yi] += 1;
                }
            }
        }
        Ok(counts)
    })?;
    let mut metrics = Vec::new();
    for (yi, y) in cfg.y_grid.iter().enumerate() {
        let hits: u64 = per_chunk.iter().map(|c| c[yi]).sum();
        let emp = hits as f64 / total as f64;
        let q = normal_upper_tail(*y);
        let se = (q * (1.0 - q) / total as f64).sqrt();
        metrics.push(Metric::with_target(
            format!("tail_prob(y={y})"),
            emp,
            q,
            3.0 * se,
        ));
        metrics.push(Metric::with_target(
            format!("tail_ratio(y={y})"),
            emp / q,
            1.0,
            3.0 * se / q,
        ));
    }
    Ok((metrics, Vec::new()))
}

/// Like [`map_replicates`] but the body also receives its index (used when
/// the work per stream depends on the position, e.g. a ragged final chunk).
fn map_replicates_indexed<T, F>(
    workers: usize,
    count: usize,
    master_seed: u64,
    body: F,
) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &mut ChaCha12Rng) -> Result<T> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Resource(format!("could not build a {workers}-thread pool: {e}")))?;
    let results: Vec<Result<T>> = pool.install(|| {
        (0..count as u64)
            .into_par_iter()
            .map(|r| {
                let mut rng = replicate_rng(master_seed, r);
                body(r as usize, &mut rng)
            })
            .collect()
    });
    results.into_iter().collect()
}

// ---------------------------------------------------------------------------
// Test size under the null
// ---------------------------------------------------------------------------

struct TestRep {
    jiang_cov: [bool; 3],
    jiang_corr: [bool; 3],
    spacing: [bool; 3],
    region: bool,
}

fn run_test_size(cfg: &ExperimentConfig) -> Result<(Vec<Metric>, Vec<String>)> {
    // Warm the spacing-quantile cache and calibrate the region once, before
    // the replicate loop; both are seeded by the master seed.
    let mut spacing_thresholds = Vec::new();
    for family in SpacingFamily::ALL {
        let kind = SpacingKind::new(family, cfg.k)?;
        let q = spacing_limit_quantile(kind, cfg.alpha, cfg.mc_count, cfg.master_seed)?;
        spacing_thresholds.push((family, q));
    }
    let cal = calibrated_region(cfg.k, cfg.alpha, cfg.mc_count, cfg.master_seed)?;

    let per_rep = map_replicates(cfg.workers, cfg.replicates, cfg.master_seed, |rng| {
        let x = sample_matrix_with(&cfg.spec, cfg.p, cfg.n, rng)?;
        let s = gram(&x);
        let r = correlation(&s)?;
        let sex = offdiag_extremes(&s, cfg.k)?;
        let rex = offdiag_extremes(&r, 1)?;
        let n_f = cfg.n as f64;
        let maxabs_cov = sex.top.items()[0]
            .value
            .abs()
            .max(sex.bottom.items()[0].value.abs())
            / n_f;
        // |ρ̂| ≤ 1 by Cauchy–Schwarz; the division can overshoot by an ulp.
        let maxabs_corr = rex.top.items()[0]
            .value
            .abs()
            .max(rex.bottom.items()[0].value.abs())
            .min(1.0);
        let mut jiang_cov = [false; 3];
        let mut jiang_corr = [false; 3];
        for (ai, alpha) in TEST_ALPHA_GRID.into_iter().enumerate() {
            let stat = jiang_statistic(maxabs_cov, cfg.n, cfg.p, EntryMode::Covariance)?;
            jiang_cov[ai] = jiang_test(stat, alpha)?.reject;
            let stat = jiang_statistic(maxabs_corr, cfg.n, cfg.p, EntryMode::Correlation)?;
            jiang_corr[ai] = jiang_test(stat, alpha)?.reject;
        }
        let mut spacing = [false; 3];
        for (fi, family) in SpacingFamily::ALL.into_iter().enumerate() {
            let kind = SpacingKind::new(family, cfg.k)?;
            spacing[fi] = spacing_test(
                &sex.top,
                cfg.n,
                cfg.p,
                kind,
                cfg.alpha,
                cfg.mc_count,
                cfg.master_seed,
            )?
            .reject;
        }
        let dt = pair_norming_constant(cfg.p as u64)?;
        let sqn = n_f.sqrt();
        let observed: Vec<f64> = sex.top.values()[..cfg.k]
            .iter()
            .map(|v| dt * (v / sqn - dt))
            .collect();
        let region = region_test(&observed, &cal.region, cfg.alpha)?.reject;
        Ok(TestRep {
            jiang_cov,
            jiang_corr,
            spacing,
            region,
        })
    })?;

    let reps = cfg.replicates as f64;
    let rate = |hits: usize| hits as f64 / reps;
    // Band: three binomial standard errors at the nominal level, plus a
    // fixed 0.02 allowance for finite-sample level distortion.
    let band_for = |alpha: f64| 0.02 + 3.0 * (alpha * (1.0 - alpha) / reps).sqrt();

    let mut metrics = Vec::new();
    for (ai, alpha) in TEST_ALPHA_GRID.into_iter().enumerate() {
        metrics.push(Metric::with_target(
            format!("jiang_rate_cov(alpha={alpha})"),
            rate(per_rep.iter().filter(|r| r.jiang_cov[ai]).count()),
            alpha,
            band_for(alpha),
        ));
        metrics.push(Metric::with_target(
            format!("jiang_rate_corr(alpha={alpha})"),
            rate(per_rep.iter().filter(|r| r.jiang_corr[ai]).count()),
            alpha,
            band_for(alpha),
        ));
    }
    for (fi, (family, threshold)) in spacing_thresholds.iter().enumerate() {
        metrics.push(Metric::with_target(
            format!("spacing_rate_{}", family.token()),
            rate(per_rep.iter().filter(|r| r.spacing[fi]).count()),
            cfg.alpha,
            band_for(cfg.alpha),
        ));
        metrics.push(Metric::plain(
            format!("spacing_threshold_{}", family.token()),
            *threshold,
        ));
    }
    metrics.push(Metric::with_target(
        "region_data_rate",
        rate(per_rep.iter().filter(|r| r.region).count()),
        cfg.alpha,
        band_for(cfg.alpha),
    ));
    metrics.push(Metric::with_target(
        "region_achieved_coverage",
        cal.achieved_coverage,
        1.0 - cfg.alpha,
        crate::extremes::REGION_COVERAGE_SLACK,
    ));

    // Self-calibration: the region must reject fresh draws of the limit law
    // itself at rate α. Fresh seed, disjoint from the calibration draws.
    let fresh = sample_limit_vector(cfg.k, REGION_SELF_DRAWS, cfg.master_seed ^ REGION_FRESH_SALT)?;
    let self_rejects = fresh
        .iter()
        .filter(|draw| !cal.region.contains(&draw.values))
        .count();
    metrics.push(Metric::with_target(
        "region_self_rate",
        self_rejects as f64 / REGION_SELF_DRAWS as f64,
        cfg.alpha,
        0.015,
    ));
    Ok((metrics, Vec::new()))
}

// ---------------------------------------------------------------------------
// Threshold consistency
// ---------------------------------------------------------------------------

fn run_threshold_consistency(cfg: &ExperimentConfig) -> Result<(Vec<Metric>, Vec<String>)> {
    let tspec = ThresholdSpec::new(cfg.c, cfg.n, cfg.p)?;
    let per_rep = map_replicates(cfg.workers, cfg.replicates, cfg.master_seed, |rng| {
        let x = sample_matrix_with(&cfg.spec, cfg.p, cfg.n, rng)?;
        let s = gram(&x);
        let r = correlation(&s)?;
        let cov_est = threshold_cov(&s, &tspec)?;
        let corr_out = threshold_corr(&r, &tspec)?;
        let m_cov = consistency_metric(&cov_est, EntryMode::Covariance, cfg.n)?;
        let m_corr = consistency_metric(&corr_out.estimate, EntryMode::Correlation, cfg.n)?;
        Ok((m_cov, m_corr, corr_out.degenerate_threshold))
    })?;
    let cov: Vec<f64> = per_rep.iter().map(|r| r.0).collect();
    let corr: Vec<f64> = per_rep.iter().map(|r| r.1).collect();
    let degenerate = per_rep.iter().filter(|r| r.2).count();
    let metrics = vec![
        Metric::with_target("median_consistency_corr", median(corr.clone()), 0.0, 0.5),
        Metric::with_target("median_consistency_cov", median(cov.clone()), 0.0, 0.5),
        Metric::plain("mean_consistency_corr", mean(&corr)),
        Metric::plain("mean_consistency_cov", mean(&cov)),
        Metric::plain("t_n", tspec.t_n()),
        Metric::plain(
            "degenerate_rate",
            degenerate as f64 / cfg.replicates as f64,
        ),
    ];
    let mut warnings = Vec::new();
    if degenerate > 0 {
        warnings.push(format!(
            "{degenerate} of {} replicates hit the degenerate correlation \
             threshold t_n ≥ 1",
            cfg.replicates
        ));
    }
    Ok((metrics, warnings))
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

/// Run one experiment to completion and return its summary.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<MCSummary> {
    cfg.validate()?;
    let start = std::time::Instant::now();
    let (metrics, extra_warnings) = match cfg.functional {
        Functional::PpCounts | Functional::Squares | Functional::CorrVariants => {
            run_point_counts(cfg)?
        }
        Functional::MaxGumbel => run_max_suite(cfg)?,
        Functional::JointMaxMin => run_joint(cfg)?,
        Functional::RateCheck => run_rate_check(cfg)?,
        Functional::RandomWalk => run_random_walk(cfg)?,
        Functional::DiagGumbel => run_diag_gumbel(cfg)?,
        Functional::DiagFrechet => run_diag_frechet(cfg)?,
        Functional::LdRatio => run_ld_ratio(cfg)?,
        Functional::TestSize => run_test_size(cfg)?,
        Functional::ThresholdConsistency => run_threshold_consistency(cfg)?,
    };
    let mut warnings = cfg.warnings();
    warnings.extend(extra_warnings);
    Ok(MCSummary {
        functional: cfg.functional,
        family: cfg.spec.token(),
        p: cfg.p,
        n: cfg.n,
        replicates: cfg.replicates,
        master_seed: cfg.master_seed,
        metrics,
        warnings,
        runtime_seconds: start.elapsed().as_secs_f64(),
        version: crate::VERSION.to_string(),
    })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::KeyValueFile;

    fn cfg_from(text: &str) -> ExperimentConfig {
        let kv = KeyValueFile::parse(text).unwrap();
        let cfg = ExperimentConfig::from_kv(&kv).unwrap();
        kv.finish().unwrap();
        cfg.validate().unwrap();
        cfg
    }

    fn small(functional: &str, extra: &str) -> ExperimentConfig {
        cfg_from(&format!(
            "functional = {functional}\nfamily = gaussian\np = 8\nn = 40\n\
             replicates = 60\nseed = 424242\n{extra}"
        ))
    }

    fn assert_same_metrics(a: &MCSummary, b: &MCSummary) {
        assert_eq!(a.metrics.len(), b.metrics.len());
        for (ma, mb) in a.metrics.iter().zip(&b.metrics) {
            assert_eq!(ma.name, mb.name);
            assert_eq!(
                ma.value.to_bits(),
                mb.value.to_bits(),
                "metric {} differs: {} vs {}",
                ma.name,
                ma.value,
                mb.value
            );
        }
    }

    #[test]
    fn summaries_are_bitwise_identical_across_worker_counts() {
        let mut cfg = small("pp_counts", "windows = 0..1, 1..inf\n");
        let one = run_experiment(&cfg).unwrap();
        cfg.workers = 3;
        let three = run_experiment(&cfg).unwrap();
        assert_same_metrics(&one, &three);
    }

    #[test]
    fn rerun_with_same_seed_is_bitwise_identical() {
        let cfg = small("max_gumbel", "");
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_same_metrics(&a, &b);
    }

    #[test]
    fn window_counts_are_additive_across_a_partition() {
        // (0, 1] and (1, ∞] partition (0, ∞]: the count means must add up
        // exactly (integer sums divided by the same replicate count).
        let cfg = small("pp_counts", "windows = 0..1, 1..inf, 0..inf\n");
        let s = run_experiment(&cfg).unwrap();
        let lo = s.expect_metric("count_mean(0..1]").value;
        let hi = s.expect_metric("count_mean(1..inf]").value;
        let all = s.expect_metric("count_mean(0..inf]").value;
        assert!(
            (lo + hi - all).abs() < 1e-12,
            "windows not additive: {lo} + {hi} vs {all}"
        );
    }

    #[test]
    fn rademacher_correlation_cloud_equals_covariance_cloud() {
        // ±1 entries give unit sample variances, so R = S/n and the two
        // point clouds coincide replicate by replicate.
        let text = "family = rademacher\np = 8\nn = 40\nreplicates = 60\nseed = 7\n\
                    windows = 0..1, 1..inf\n";
        let cov = run_experiment(&cfg_from(&format!("functional = pp_counts\n{text}"))).unwrap();
        let corr =
            run_experiment(&cfg_from(&format!("functional = corr_variants\n{text}"))).unwrap();
        for (a, b) in cov.metrics.iter().zip(&corr.metrics) {
            assert_eq!(a.value.to_bits(), b.value.to_bits(), "{} differs", a.name);
        }
    }

    #[test]
    fn min_statistic_is_negated_max_statistic_of_negated_matrix() {
        let x = crate::sim::sample_matrix(
            &super::super::dist::DistributionSpec::Gaussian,
            6,
            30,
            99,
        )
        .unwrap();
        let s = gram(&x);
        let p = s.p();
        let mut neg = SymmetricMatrix::zeros(p);
        for i in 0..p {
            for j in i..p {
                neg.set_sym(i, j, -s.get(i, j));
            }
        }
        let (max_s, min_s) = normalized_max_min(&s, 30).unwrap();
        let (max_neg, _) = normalized_max_min(&neg, 30).unwrap();
        assert_eq!(min_s.to_bits(), (-max_neg).to_bits());
        assert!(max_s >= min_s);
    }

    #[test]
    fn random_walk_gaussian_counts_sit_inside_exact_binomial_bands() {
        let cfg = cfg_from(
            "functional = random_walk\nfamily = gaussian\np = 400\nn = 1\n\
             replicates = 300\nseed = 11\nwindows = 0..inf, 1..inf\n",
        );
        let s = run_experiment(&cfg).unwrap();
        for name in ["count_mean(0..inf]", "count_mean(1..inf]"] {
            let m = s.expect_metric(name);
            assert!(
                m.within_band(),
                "{name}: {} vs {} ± {}",
                m.value,
                m.target.unwrap(),
                m.band.unwrap()
            );
        }
    }

    #[test]
    fn ld_ratio_handles_ragged_final_chunk_and_y_zero_is_a_fair_coin() {
        let cfg = cfg_from(
            "functional = ld_ratio\nfamily = uniform_scaled\np = 2\nn = 4\n\
             replicates = 5000\nseed = 5\ny_grid = 0, 1\n",
        );
        let s = run_experiment(&cfg).unwrap();
        let half = s.expect_metric("tail_prob(y=0)");
        assert_eq!(half.target.unwrap(), 0.5);
        assert!(half.within_band(), "{}", half.value);
        let ratio = s.expect_metric("tail_ratio(y=1)");
        assert!(ratio.value > 0.0);
    }

    #[test]
    fn test_size_rates_are_monotone_in_alpha_and_lie_in_unit_interval() {
        let cfg = cfg_from(
            "functional = test_size\nfamily = gaussian\np = 10\nn = 60\n\
             replicates = 40\nseed = 1234\nmc_count = 10000\n",
        );
        let s = run_experiment(&cfg).unwrap();
        let grab = |name: &str| s.expect_metric(name).value;
        let r01 = grab("jiang_rate_cov(alpha=0.01)");
        let r05 = grab("jiang_rate_cov(alpha=0.05)");
        let r10 = grab("jiang_rate_cov(alpha=0.1)");
        assert!(r01 <= r05 && r05 <= r10, "{r01} {r05} {r10}");
        for m in &s.metrics {
            if m.name.contains("rate") {
                assert!((0.0..=1.0).contains(&m.value), "{}: {}", m.name, m.value);
            }
        }
        assert!(s.expect_metric("region_achieved_coverage").within_band());
    }

    #[test]
    fn threshold_runner_reports_medians_and_degeneracy() {
        let cfg = cfg_from(
            "functional = threshold_consistency\nfamily = gaussian\np = 12\nn = 50\n\
             replicates = 20\nseed = 77\nc = 2.5\n",
        );
        let s = run_experiment(&cfg).unwrap();
        assert!(s.expect_metric("median_consistency_corr").value >= 0.0);
        assert!(s.expect_metric("median_consistency_cov").value >= 0.0);
        let t_n = s.expect_metric("t_n").value;
        assert!((t_n - 2.5 * (12.0f64.ln() / 50.0).sqrt()).abs() < 1e-15);
        assert_eq!(s.expect_metric("degenerate_rate").value, 0.0);
    }

    #[test]
    fn diag_frechet_reports_scaling_quantile() {
        let cfg = cfg_from(
            "functional = diag_frechet\nfamily = sym_pareto(3)\np = 20\nn = 30\n\
             replicates = 30\nseed = 9\n",
        );
        let s = run_experiment(&cfg).unwrap();
        let a = s.expect_metric("a_np").value;
        let expect = a_quantile(
            &super::super::dist::DistributionSpec::sym_pareto(3.0).unwrap(),
            600,
        )
        .unwrap();
        assert_eq!(a.to_bits(), expect.to_bits());
    }

    #[test]
    fn joint_cells_use_product_limit_targets() {
        let cfg = small("joint_max_min", "grid = 0, 1\n");
        let s = run_experiment(&cfg).unwrap();
        let m = s.expect_metric("joint_cdf(0;1)");
        let expect = Gumbel.cdf(0.0) * (1.0 - Gumbel.cdf(-1.0));
        assert!((m.target.unwrap() - expect).abs() < 1e-15);
        assert_eq!(s.metrics.iter().filter(|m| m.name.starts_with("joint_cdf")).count(), 4);
    }

    #[test]
    fn degenerate_diag_config_is_refused_before_sampling() {
        // student_t(3.5) has infinite Var(X²) (fourth moment diverges for
        // ν ≤ 4): diag_gumbel must refuse at validation time.
        let kv = KeyValueFile::parse(
            "functional = diag_gumbel\nfamily = student_t(3.5)\np = 8\nn = 40\n\
             replicates = 10\nseed = 3\n",
        )
        .unwrap();
        let cfg = ExperimentConfig::from_kv(&kv).unwrap();
        kv.finish().unwrap();
        assert!(run_experiment(&cfg).is_err());
    }

    #[test]
    fn summary_carries_config_identity_and_version() {
        let cfg = small("rate_check", "");
        let s = run_experiment(&cfg).unwrap();
        assert_eq!(s.functional, Functional::RateCheck);
        assert_eq!(s.family, "gaussian");
        assert_eq!((s.p, s.n, s.replicates, s.master_seed), (8, 40, 60, 424242));
        assert_eq!(s.version, crate::VERSION);
        assert!(s.runtime_seconds >= 0.0);
    }
}
