//! Row-sum (random-walk endpoint) extremes through the experiment engine.
//!
//! - With p walkers taking n steps each, the normalized endpoint cloud
//!   {d·(S_i/√n − d)} (d for count p) obeys the same Poisson/Gumbel limit as
//!   the off-diagonal entries — without ever forming a matrix.
//! - For gaussian steps the endpoint law is exactly normal at every n, so
//!   the expected window count p·Φ̄(d + lo/d) is exact and the engine
//!   reports a binomial-width band around it.
//!
//! Run with `cargo run --release -p offdiag --example random_walk_extremes`.

use offdiag::sim::config::{DEFAULT_MC_COUNT, DEFAULT_MEMORY_CAP_MB, DEFAULT_THRESHOLD_C};
use offdiag::sim::{run_experiment, DistributionSpec, ExperimentConfig, Functional, Window};

fn main() -> offdiag::Result<()> {
    let cfg = ExperimentConfig {
        functional: Functional::RandomWalk,
        spec: DistributionSpec::Gaussian,
        p: 2000,
        n: 16,
        replicates: 400,
        master_seed: 925,
        workers: 1,
        windows: vec![Window::new(0.0, f64::INFINITY)?, Window::new(1.0, f64::INFINITY)?],
        k: 2,
        alpha: 0.05,
        c: DEFAULT_THRESHOLD_C,
        y_grid: Vec::new(),
        grid: Vec::new(),
        mc_count: DEFAULT_MC_COUNT,
        memory_cap_mb: DEFAULT_MEMORY_CAP_MB,
    };
    cfg.validate()?;

    let summary = run_experiment(&cfg)?;
    println!(
        "{} / {} / p = {}, n = {}, {} replicates, seed {}",
        summary.functional.token(),
        summary.family,
        summary.p,
        summary.n,
        summary.replicates,
        summary.master_seed
    );
    for m in &summary.metrics {
        match (m.target, m.band) {
            (Some(t), Some(b)) => {
                let ok = if m.within_band() { "inside" } else { "OUTSIDE" };
                println!("  {:<24} {:>10.6}  target {t:.6} ± {b:.6}  [{ok}]", m.name, m.value);
            }
            _ => println!("  {:<24} {:>10.6}", m.name, m.value),
        }
    }
    Ok(())
}
