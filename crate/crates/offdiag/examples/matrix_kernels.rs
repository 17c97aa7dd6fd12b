//! Matrix kernels on a small sampled data set.
//!
//! - Builds the Gram matrix S = X Xᵀ (n times the sample covariance) and the
//!   correlation matrix R from a p × n data matrix.
//! - Extracts the bounded top-k/bottom-k off-diagonal entries with their
//!   index pairs.
//! - Compares the power-iteration operator norm with the largest |entry| and
//!   shows a cubic tensor entry Σ_t x_{it} x_{jt} x_{kt}.
//!
//! Run with `cargo run --release -p offdiag --example matrix_kernels`.

use offdiag::kernels::{
    correlation, gram, offdiag_extremes, operator_norm_default, tensor_entry,
};
use offdiag::sim::{sample_matrix, DistributionSpec};

fn main() -> offdiag::Result<()> {
    let (p, n, seed) = (8usize, 40usize, 7u64);
    let x = sample_matrix(&DistributionSpec::Gaussian, p, n, seed)?;
    let s = gram(&x);
    let r = correlation(&s)?;

    // -----------------------------------------------------------------------
    // Entry views.
    // -----------------------------------------------------------------------
    println!("p = {p}, n = {n}, gaussian entries, seed {seed}");
    println!("S_00 = {:.6} (≈ n = {n})", s.get(0, 0));
    println!("S_01 = {:.6}, R_01 = {:.6}", s.get(0, 1), r.get(0, 1));
    println!(
        "tensor entry (0,1,2) = {:.6}",
        tensor_entry(&x, &[0, 1, 2])?
    );

    // -----------------------------------------------------------------------
    // Top-3 and bottom-3 off-diagonal entries of S.
    // -----------------------------------------------------------------------
    let ext = offdiag_extremes(&s, 3)?;
    println!("\ntop 3 off-diagonal entries of S:");
    for sp in ext.top.items() {
        println!("  S_{{{},{}}} = {:>10.6}", sp.i, sp.j, sp.value);
    }
    println!("bottom 3 off-diagonal entries of S:");
    for sp in ext.bottom.items() {
        println!("  S_{{{},{}}} = {:>10.6}", sp.i, sp.j, sp.value);
    }

    // -----------------------------------------------------------------------
    // Operator norm of the correlation deviation R − I.
    // -----------------------------------------------------------------------
    let mut dev = r.clone();
    for i in 0..p {
        dev.set_sym(i, i, dev.get(i, i) - 1.0);
    }
    println!(
        "\n‖R − I‖_op = {:.6} (max |off-diag entry| = {:.6}; the norm dominates it)",
        operator_norm_default(&dev)?,
        dev.max_abs_offdiag()
    );
    Ok(())
}
