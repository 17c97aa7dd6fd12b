//! Spacing statistics of the top-k entries and their limit quantiles.
//!
//! - The top-k off-diagonal entries, normalized, converge jointly to
//!   (−log Γ_1, …, −log Γ_k), so scaled spacings have parameter-free limits;
//!   quantiles come from a seeded Monte Carlo of that limit vector.
//! - At k = 2 the range and the maximum gap are the same statistic (their
//!   quantile tables agree bitwise) and the squared-gap sum is the square of
//!   the range; the k = 2 range limit is Exp(1), so the α = 0.05 threshold
//!   is −log 0.05 = 2.9957…
//!
//! Run with `cargo run --release -p offdiag --example spacing_quantiles`.

use offdiag::extremes::{spacing_limit_quantile, spacing_test, SpacingFamily, SpacingKind};
use offdiag::kernels::{gram, offdiag_extremes};
use offdiag::sim::{sample_matrix, DistributionSpec};

fn main() -> offdiag::Result<()> {
    let (alpha, mc, seed) = (0.05f64, 100_000usize, 99u64);

    // -----------------------------------------------------------------------
    // Quantile table for the three families at several depths k.
    // -----------------------------------------------------------------------
    println!("limit quantiles at α = {alpha} ({mc} draws, seed {seed}):");
    println!("{:>12} {:>10} {:>10} {:>10}", "k", 2, 3, 5);
    for family in SpacingFamily::ALL {
        let mut row = format!("{:>12}", family.token());
        for k in [2usize, 3, 5] {
            let q = spacing_limit_quantile(SpacingKind::new(family, k)?, alpha, mc, seed)?;
            row.push_str(&format!(" {q:>10.6}"));
        }
        println!("{row}");
    }
    let q_range2 =
        spacing_limit_quantile(SpacingKind::new(SpacingFamily::Range, 2)?, alpha, mc, seed)?;
    println!(
        "k = 2 range quantile {q_range2:.6} vs exact Exp(1) value −log α = {:.6}",
        -alpha.ln()
    );

    // -----------------------------------------------------------------------
    // The tests on one sampled covariance matrix (null data).
    // -----------------------------------------------------------------------
    let (p, n) = (60usize, 800usize);
    let x = sample_matrix(&DistributionSpec::Gaussian, p, n, 4242)?;
    let ext = offdiag_extremes(&gram(&x), 4)?;
    println!("\nspacing tests on one gaussian sample (p = {p}, n = {n}, k = 4):");
    for family in SpacingFamily::ALL {
        let kind = SpacingKind::new(family, 4)?;
        let d = spacing_test(&ext.top, n, p, kind, alpha, mc, seed)?;
        println!(
            "  {:<12} statistic = {:>9.6}  threshold = {:>9.6}  → {}",
            family.token(),
            d.statistic,
            d.threshold,
            if d.reject { "reject" } else { "accept" }
        );
    }
    Ok(())
}
