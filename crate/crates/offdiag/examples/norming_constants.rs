//! Normalizing constants and their calibration.
//!
//! - d(count) = √(2 log count) − (log log count + log 4π)/(2√(2 log count))
//!   is tuned so that count·Φ̄(d) → 1 as the count grows.
//! - Off-diagonal clouds use count = p(p−1)/2 (pairs); m-tuple functionals
//!   use count = C(p, m); the diagonal uses count = p.
//! - The maximum-entry test threshold has the closed form
//!   q_α = −log 8π − 2·log log (1−α)⁻¹.
//!
//! Run with `cargo run --release -p offdiag --example norming_constants`.

use offdiag::norming::{
    jiang_quantile, normal_upper_tail, norming_constant, pair_norming_constant,
    tuple_norming_constant, Gumbel,
};

fn main() -> offdiag::Result<()> {
    // -----------------------------------------------------------------------
    // Calibration: count · Φ̄(d(count)) approaches 1 from below.
    // -----------------------------------------------------------------------
    println!("{:>12}  {:>12}  {:>16}", "count", "d(count)", "count·Φ̄(d)");
    for exp in [2u32, 3, 4, 5, 6, 7, 8] {
        let count = 10u64.pow(exp);
        let d = norming_constant(count)?;
        let product = count as f64 * normal_upper_tail(d);
        println!("{count:>12}  {d:>12.6}  {product:>16.10}");
    }

    // -----------------------------------------------------------------------
    // Schedules: pairs and m-tuples at p = 100.
    // -----------------------------------------------------------------------
    let p = 100u64;
    println!();
    println!("p = {p}: pair constant d̃ = {:.12}", pair_norming_constant(p)?);
    for m in [2u64, 3, 4] {
        println!(
            "         m = {m} tuple constant = {:.12}",
            tuple_norming_constant(p, m)?
        );
    }

    // -----------------------------------------------------------------------
    // The Gumbel limit law Λ(x) = exp(−e^{−x}) and the max-entry threshold.
    // -----------------------------------------------------------------------
    println!();
    let g = Gumbel;
    for alpha in [0.10, 0.05, 0.01] {
        println!(
            "α = {alpha:>4}: Gumbel quantile = {:>9.6}, max-entry threshold q_α = {:>9.6}",
            g.quantile(1.0 - alpha)?,
            jiang_quantile(alpha)?
        );
    }
    println!();
    println!("Λ(0) = {:.12} (= e^{{−1}})", g.cdf(0.0));
    Ok(())
}
