//! The normalized largest and smallest off-diagonal entries.
//!
//! - max: d̃·(S_(1)/√n − d̃) → Λ(x) = exp(−e^{−x}) (Gumbel);
//!   min: d̃·(S_min/√n + d̃) → 1 − Λ(−y), and the two are asymptotically
//!   independent.
//! - Empirical check over replicates: Kolmogorov–Smirnov distance of the
//!   max sample against Λ, the joint cdf at a grid point against the product
//!   Λ(x)·(1 − Λ(−y)), and the sample mean against the Gumbel mean γ.
//!
//! Run with `cargo run --release -p offdiag --example gumbel_maximum`.

use offdiag::kernels::{gram, offdiag_extremes};
use offdiag::norming::{pair_norming_constant, Gumbel};
use offdiag::sim::dist::sample_matrix_with;
use offdiag::sim::{ks_statistic, replicate_rng, DistributionSpec};

const EULER_GAMMA: f64 = 0.5772156649015329;

fn main() -> offdiag::Result<()> {
    let (p, n, reps, seed) = (60usize, 600usize, 400usize, 2718u64);
    let spec = DistributionSpec::Gaussian;
    let dt = pair_norming_constant(p as u64)?;
    let sqrt_n = (n as f64).sqrt();

    let mut maxes = Vec::with_capacity(reps);
    let mut mins = Vec::with_capacity(reps);
    for r in 0..reps {
        let mut rng = replicate_rng(seed, r as u64);
        let x = sample_matrix_with(&spec, p, n, &mut rng)?;
        let ext = offdiag_extremes(&gram(&x), 1)?;
        maxes.push(dt * (ext.top.items()[0].value / sqrt_n - dt));
        mins.push(dt * (ext.bottom.items()[0].value / sqrt_n + dt));
    }

    // -----------------------------------------------------------------------
    // Marginal law of the maximum (sort a copy; `maxes` stays paired with
    // `mins` replicate-by-replicate for the joint count below).
    // -----------------------------------------------------------------------
    let mut sorted_maxes = maxes.clone();
    sorted_maxes.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let g = Gumbel;
    let ks = ks_statistic(&sorted_maxes, |x| g.cdf(x));
    let mean = maxes.iter().sum::<f64>() / reps as f64;
    println!("gaussian, p = {p}, n = {n}, {reps} replicates, seed {seed}");
    println!("KS(normalized max, Λ)  = {ks:.4}  (≈ 1.36/√reps = {:.4} at 5%)", 1.36 / (reps as f64).sqrt());
    println!("mean of normalized max = {mean:.4}  (Gumbel mean γ = {EULER_GAMMA:.4})");

    // -----------------------------------------------------------------------
    // Asymptotic independence of max and min at a grid point.
    // -----------------------------------------------------------------------
    let (x0, y0) = (0.5f64, -0.5f64);
    let joint = maxes
        .iter()
        .zip(&mins)
        .filter(|&(&ma, &mi)| ma <= x0 && mi <= y0)
        .count() as f64
        / reps as f64;
    let product = g.cdf(x0) * (1.0 - g.cdf(-y0));
    println!("\nP(max ≤ {x0}, min ≤ {y0}): empirical {joint:.4} vs limit product {product:.4}");
    Ok(())
}
