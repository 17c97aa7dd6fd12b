//! Two-sided Kolmogorov–Smirnov statistic.

/// Sup-distance between the empirical cdf of an ascending-sorted sample and
/// a reference cdf:
///
/// D = max_i max( (i+1)/m − F(x_i), F(x_i) − i/m ).
///
/// Panics on an empty sample; debug builds also verify the sort order.
pub fn ks_statistic(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    assert!(!sorted.is_empty(), "KS statistic needs a non-empty sample");
    debug_assert!(
        sorted.windows(2).all(|w| w[0] <= w[1]),
        "KS statistic needs an ascending-sorted sample"
    );
    let m = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / m - f).max(f - i as f64 / m);
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn single_sample_at_the_median_scores_half() {
        assert_eq!(ks_statistic(&[0.0], |_| 0.5), 0.5);
    }

    #[test]
    fn quantile_grid_scores_half_spacing() {
        // x_i at cdf value (i + 0.5)/m: both one-sided gaps equal 0.5/m.
        let m = 40usize;
        let sample: Vec<f64> = (0..m).map(|i| (i as f64 + 0.5) / m as f64).collect();
        let d = ks_statistic(&sample, |x| x);
        assert!((d - 0.5 / m as f64).abs() < 1e-15, "{d}");
    }

    #[test]
    fn uniform_draws_against_identity_cdf_are_close() {
        let mut rng = ChaCha12Rng::seed_from_u64(2718);
        let mut xs: Vec<f64> = (0..100_000).map(|_| rng.random::<f64>()).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let d = ks_statistic(&xs, |x| x.clamp(0.0, 1.0));
        assert!(d < 0.01, "KS = {d}");
    }

    #[test]
    fn perfect_fit_scores_exactly_the_discretization_floor() {
        // The empirical cdf of m points can never be closer than 0.5/m.
        let m = 1000usize;
        let sample: Vec<f64> = (0..m).map(|i| (i as f64 + 0.5) / m as f64).collect();
        let d = ks_statistic(&sample, |x| x);
        assert!(d >= 0.5 / m as f64 - 1e-12);
    }

    #[test]
    #[should_panic]
    fn empty_sample_panics() {
        ks_statistic(&[], |x| x);
    }
}
