//! Entry-law families, analytically standardized.
//!
//! Every family has exact mean 0 and variance 1 by closed-form scaling —
//! never by empirical standardization, which would contaminate the limit
//! theorems under test. The families and their scalings:
//!
//! - `gaussian`: standard normal;
//! - `rademacher`: ±1 with probability 1/2 (the unique family with
//!   Var(X²) = 0, since X² ≡ 1);
//! - `uniform_scaled`: uniform on [−√3, √3];
//! - `student_t(ν)`, ν > 2: Student t scaled by √((ν−2)/ν);
//! - `sym_pareto(α)`, α > 2: ±σ_α·U^{−1/α} with σ_α = √((α−2)/α), so
//!   P(|X| > x) = (x/σ_α)^{−α} for x ≥ σ_α — exact power-law tails;
//! - `laplace_scaled`: Laplace with scale 1/√2, sampled as the difference
//!   of two exponentials (no inverse-cdf edge cases).
//!
//! Each family carries its analytic Var(X²) (possibly infinite) and a
//! moment-class tag used for regime warnings: sub-Gaussian tails,
//! exponential tails, polynomial moments below some s, or regular variation
//! with index α. The heavy-tail scaling quantile a_k solves
//! k·P(|X| > a_k) = 1 in closed form for the power-law family.

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Exp1, StandardNormal, StudentT};

use crate::kernels::DataMatrix;
use crate::{Error, Result};

const SQRT_3: f64 = 1.732_050_807_568_877_2;
const LAPLACE_B: f64 = std::f64::consts::FRAC_1_SQRT_2;

// ---------------------------------------------------------------------------
// Specification
// ---------------------------------------------------------------------------

/// A standardized entry law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistributionSpec {
    Gaussian,
    Rademacher,
    UniformScaled,
    StudentT { nu: f64 },
    SymPareto { alpha: f64 },
    LaplaceScaled,
}

/// Tail/moment regime of a family, used for growth-rate warnings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MomentClass {
    /// Tails at least as light as a Gaussian's.
    SubGaussian,
    /// Exponential tails (all polynomial moments, no squared-exponential).
    Exponential,
    /// Finite absolute moments strictly below order `s` only.
    Polynomial { s: f64 },
    /// Power-law tails with index `alpha` (finite moments below `alpha`).
    RegularlyVarying { alpha: f64 },
}

impl DistributionSpec {
    /// Student t with ν > 2 degrees of freedom, scaled to unit variance.
    pub fn student_t(nu: f64) -> Result<Self> {
        if !(nu.is_finite() && nu > 2.0) {
            return Err(Error::domain(format!(
                "student_t needs ν > 2 for a finite variance, got {nu}"
            )));
        }
        Ok(DistributionSpec::StudentT { nu })
    }

    /// Symmetrized Pareto with tail index α > 2, scaled to unit variance.
    pub fn sym_pareto(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 2.0) {
            return Err(Error::domain(format!(
                "sym_pareto needs α > 2 for a finite variance, got {alpha}"
            )));
        }
        Ok(DistributionSpec::SymPareto { alpha })
    }

    /// Config token, e.g. `gaussian` or `student_t(5)`.
    pub fn token(&self) -> String {
        match self {
            DistributionSpec::Gaussian => "gaussian".to_string(),
            DistributionSpec::Rademacher => "rademacher".to_string(),
            DistributionSpec::UniformScaled => "uniform_scaled".to_string(),
            DistributionSpec::StudentT { nu } => format!("student_t({nu})"),
            DistributionSpec::SymPareto { alpha } => format!("sym_pareto({alpha})"),
            DistributionSpec::LaplaceScaled => "laplace_scaled".to_string(),
        }
    }

    /// Analytic Var(X²); zero only for the two-point family, infinite when
    /// the fourth moment diverges.
    pub fn var_x_squared(&self) -> f64 {
        match self {
            DistributionSpec::Gaussian => 2.0,
            DistributionSpec::Rademacher => 0.0,
            // E X⁴ = 9/5 for uniform on [−√3, √3].
            DistributionSpec::UniformScaled => 0.8,
            DistributionSpec::StudentT { nu } => {
                if *nu > 4.0 {
                    3.0 * (nu - 2.0) / (nu - 4.0) - 1.0
                } else {
                    f64::INFINITY
                }
            }
            DistributionSpec::SymPareto { alpha } => {
                if *alpha > 4.0 {
                    let a = *alpha;
                    (a - 2.0) * (a - 2.0) / (a * (a - 4.0)) - 1.0
                } else {
                    f64::INFINITY
                }
            }
            // E X⁴ = 24 b⁴ with b = 1/√2.
            DistributionSpec::LaplaceScaled => 5.0,
        }
    }

    pub fn moment_class(&self) -> MomentClass {
        match self {
            DistributionSpec::Gaussian
            | DistributionSpec::Rademacher
            | DistributionSpec::UniformScaled => MomentClass::SubGaussian,
            DistributionSpec::LaplaceScaled => MomentClass::Exponential,
            DistributionSpec::StudentT { nu } => MomentClass::Polynomial { s: *nu },
            DistributionSpec::SymPareto { alpha } => {
                MomentClass::RegularlyVarying { alpha: *alpha }
            }
        }
    }

    /// The exact |X|-tail of the power-law family; `None` for light tails.
    pub fn abs_tail(&self) -> Option<ParetoTail> {
        match self {
            DistributionSpec::SymPareto { alpha } => Some(ParetoTail {
                alpha: *alpha,
                scale: ((alpha - 2.0) / alpha).sqrt(),
            }),
            _ => None,
        }
    }

    /// Warn when (p, n) sit outside the growth regime the limit theory
    /// assumes for this family's moments. Desk-scale shapes often violate
    /// these; the run proceeds and the warning is recorded in the summary.
    pub fn growth_warning(&self, p: usize, n: usize) -> Option<String> {
        let (pf, nf) = (p as f64, n as f64);
        match self.moment_class() {
            MomentClass::Polynomial { s } | MomentClass::RegularlyVarying { alpha: s } => {
                let cap = nf.powf((s - 2.0) / 4.0);
                if pf > cap {
                    return Some(format!(
                        "p = {p} exceeds the moment-growth cap n^((s-2)/4) ≈ {cap:.1} \
                         for s = {s}; asymptotic approximations may be poor"
                    ));
                }
            }
            MomentClass::SubGaussian | MomentClass::Exponential => {
                if pf.ln() >= nf.cbrt() {
                    return Some(format!(
                        "log p = {:.2} reaches n^(1/3) = {:.2}; dimension growth is \
                         outside the light-tail regime",
                        pf.ln(),
                        nf.cbrt()
                    ));
                }
            }
        }
        None
    }

    /// A reusable sampler (constructed once per replicate, not per draw).
    pub fn sampler(&self) -> Result<FamilySampler> {
        let inner = match self {
            DistributionSpec::Gaussian => SamplerImpl::Gaussian,
            DistributionSpec::Rademacher => SamplerImpl::Rademacher,
            DistributionSpec::UniformScaled => SamplerImpl::Uniform,
            DistributionSpec::StudentT { nu } => SamplerImpl::StudentT {
                t: StudentT::new(*nu).map_err(|e| {
                    Error::domain(format!("student_t(ν = {nu}) sampler: {e}"))
                })?,
                scale: ((nu - 2.0) / nu).sqrt(),
            },
            DistributionSpec::SymPareto { alpha } => SamplerImpl::SymPareto {
                neg_inv_alpha: -1.0 / alpha,
                sigma: ((alpha - 2.0) / alpha).sqrt(),
            },
            DistributionSpec::LaplaceScaled => SamplerImpl::Laplace,
        };
        Ok(FamilySampler { inner })
    }
}

impl std::str::FromStr for DistributionSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "gaussian" => return Ok(DistributionSpec::Gaussian),
            "rademacher" => return Ok(DistributionSpec::Rademacher),
            "uniform_scaled" => return Ok(DistributionSpec::UniformScaled),
            "laplace_scaled" => return Ok(DistributionSpec::LaplaceScaled),
            _ => {}
        }
        let parse_arg = |prefix: &str| -> Option<Result<f64>> {
            let rest = s.strip_prefix(prefix)?.strip_prefix('(')?.strip_suffix(')')?;
            Some(rest.trim().parse::<f64>().map_err(|_| {
                Error::parse(format!("invalid parameter {rest:?} in family {s:?}"))
            }))
        };
        if let Some(nu) = parse_arg("student_t") {
            return DistributionSpec::student_t(nu?);
        }
        if let Some(alpha) = parse_arg("sym_pareto") {
            return DistributionSpec::sym_pareto(alpha?);
        }
        Err(Error::parse(format!(
            "unknown family {s:?} (expected gaussian, rademacher, uniform_scaled, \
             student_t(ν), sym_pareto(α), or laplace_scaled)"
        )))
    }
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

/// Prepared sampler for one family.
pub struct FamilySampler {
    inner: SamplerImpl,
}

enum SamplerImpl {
    Gaussian,
    Rademacher,
    Uniform,
    StudentT { t: StudentT<f64>, scale: f64 },
    SymPareto { neg_inv_alpha: f64, sigma: f64 },
    Laplace,
}

impl FamilySampler {
    #[inline]
    pub fn sample(&self, rng: &mut ChaCha12Rng) -> f64 {
        match &self.inner {
            SamplerImpl::Gaussian => rng.sample(StandardNormal),
            SamplerImpl::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            SamplerImpl::Uniform => SQRT_3 * (2.0 * rng.random::<f64>() - 1.0),
            SamplerImpl::StudentT { t, scale } => scale * t.sample(rng),
            SamplerImpl::SymPareto { neg_inv_alpha, sigma } => {
                // Fixed draw order (sign, then magnitude) for determinism.
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                let u = 1.0 - rng.random::<f64>(); // (0, 1]
                sign * sigma * u.powf(*neg_inv_alpha)
            }
            SamplerImpl::Laplace => {
                // b·(E₁ − E₂) is Laplace(b): symmetric, no log-of-zero edge.
                let e1: f64 = Exp1.sample(rng);
                let e2: f64 = Exp1.sample(rng);
                LAPLACE_B * (e1 - e2)
            }
        }
    }

    /// Fill a buffer in order (the engine's documented row-major fill).
    pub fn fill(&self, rng: &mut ChaCha12Rng, buf: &mut [f64]) {
        for v in buf.iter_mut() {
            *v = self.sample(rng);
        }
    }
}

/// A p × n matrix of iid draws, filled row-major from the given stream.
pub fn sample_matrix_with(
    spec: &DistributionSpec,
    p: usize,
    n: usize,
    rng: &mut ChaCha12Rng,
) -> Result<DataMatrix> {
    let sampler = spec.sampler()?;
    let mut data = vec![0.0; p.checked_mul(n).ok_or_else(|| {
        Error::domain(format!("p·n overflows: {p}·{n}"))
    })?];
    sampler.fill(rng, &mut data);
    DataMatrix::new(p, n, data)
}

/// A p × n matrix of iid draws from a fresh generator seeded by `seed`;
/// bit-identical for identical (spec, p, n, seed).
pub fn sample_matrix(spec: &DistributionSpec, p: usize, n: usize, seed: u64) -> Result<DataMatrix> {
    use rand::SeedableRng;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    sample_matrix_with(spec, p, n, &mut rng)
}

// ---------------------------------------------------------------------------
// Heavy-tail scaling quantile
// ---------------------------------------------------------------------------

/// An exact power-law tail P(|X| > x) = (x/scale)^{−α} for x ≥ scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParetoTail {
    pub alpha: f64,
    pub scale: f64,
}

impl ParetoTail {
    /// The scaling quantile a_k solving k·P(|X| > a_k) = 1: closed form
    /// scale·k^{1/α}. At k = 1 the exceedance probability is 1, so a_1 is
    /// the lower endpoint of the tail — the essential infimum `scale`.
    pub fn quantile(&self, k: u64) -> Result<f64> {
        if k == 0 {
            return Err(Error::domain("tail quantile needs k ≥ 1".to_string()));
        }
        Ok(self.scale * (k as f64).powf(1.0 / self.alpha))
    }

    /// P(|X| > x).
    pub fn survival(&self, x: f64) -> f64 {
        if x <= self.scale {
            1.0
        } else {
            (x / self.scale).powf(-self.alpha)
        }
    }
}

/// The scaling quantile a_k for a family with power-law tails; rejects
/// families without a regularly-varying tag.
pub fn a_quantile(spec: &DistributionSpec, k: u64) -> Result<f64> {
    match spec.abs_tail() {
        Some(tail) => tail.quantile(k),
        None => Err(Error::domain(format!(
            "family {} has no regularly-varying tail; a_k is undefined",
            spec.token()
        ))),
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn draws(spec: &DistributionSpec, count: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let sampler = spec.sampler().unwrap();
        (0..count).map(|_| sampler.sample(&mut rng)).collect()
    }

    fn mean_and_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        (mean, var)
    }

    const ALL_LIGHT: [DistributionSpec; 4] = [
        DistributionSpec::Gaussian,
        DistributionSpec::Rademacher,
        DistributionSpec::UniformScaled,
        DistributionSpec::LaplaceScaled,
    ];

    // -- sampling -------------------------------------------------------------

    #[test]
    fn rademacher_draws_are_signs() {
        for x in draws(&DistributionSpec::Rademacher, 10_000, 1) {
            assert!(x == 1.0 || x == -1.0);
        }
    }

    #[test]
    fn uniform_draws_stay_in_their_support() {
        for x in draws(&DistributionSpec::UniformScaled, 10_000, 2) {
            assert!(x.abs() <= SQRT_3);
        }
    }

    #[test]
    fn pareto_magnitudes_respect_the_essential_infimum() {
        let spec = DistributionSpec::sym_pareto(3.0).unwrap();
        let sigma = spec.abs_tail().unwrap().scale;
        for x in draws(&spec, 10_000, 3) {
            assert!(x.abs() >= sigma - 1e-15, "{x} vs {sigma}");
        }
    }

    #[test]
    fn sample_matrix_is_seed_deterministic() {
        let spec = DistributionSpec::student_t(5.0).unwrap();
        let a = sample_matrix(&spec, 4, 7, 99).unwrap();
        let b = sample_matrix(&spec, 4, 7, 99).unwrap();
        assert_eq!(a, b);
        let c = sample_matrix(&spec, 4, 7, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn gaussian_moments_sit_in_their_clt_bands() {
        let xs = draws(&DistributionSpec::Gaussian, 1_000_000, 7);
        let (mean, var) = mean_and_var(&xs);
        assert!(mean.abs() < 0.004, "mean {mean}");
        assert!((var - 1.0).abs() < 0.006, "var {var}");
    }

    #[test]
    fn every_family_is_standardized() {
        // Finite-fourth-moment families: tight bands at 10^6 draws.
        let specs = [
            DistributionSpec::Gaussian,
            DistributionSpec::Rademacher,
            DistributionSpec::UniformScaled,
            DistributionSpec::LaplaceScaled,
            DistributionSpec::student_t(5.0).unwrap(),
            DistributionSpec::sym_pareto(5.0).unwrap(),
        ];
        for (i, spec) in specs.iter().enumerate() {
            let xs = draws(spec, 1_000_000, 40 + i as u64);
            let (mean, var) = mean_and_var(&xs);
            assert!(mean.abs() < 0.01, "{}: mean {mean}", spec.token());
            assert!((var - 1.0).abs() < 0.02, "{}: var {var}", spec.token());
        }
        // Infinite fourth moment: the mean still obeys the CLT.
        let heavy = DistributionSpec::sym_pareto(3.0).unwrap();
        let (mean, _) = mean_and_var(&draws(&heavy, 1_000_000, 77));
        assert!(mean.abs() < 0.01, "heavy mean {mean}");
    }

    #[test]
    fn laplace_tail_matches_the_closed_form() {
        // P(|X| > 2) = e^{−2√2} for scale 1/√2.
        let xs = draws(&DistributionSpec::LaplaceScaled, 200_000, 11);
        let emp = xs.iter().filter(|x| x.abs() > 2.0).count() as f64 / xs.len() as f64;
        let want = (-2.0 / LAPLACE_B).exp();
        assert!((emp - want).abs() < 0.003, "{emp} vs {want}");
    }

    // -- analytic moments -----------------------------------------------------

    #[test]
    fn var_x_squared_matches_frozen_closed_forms() {
        assert_eq!(DistributionSpec::Gaussian.var_x_squared(), 2.0);
        assert_eq!(DistributionSpec::Rademacher.var_x_squared(), 0.0);
        assert!((DistributionSpec::UniformScaled.var_x_squared() - 0.8).abs() < 1e-15);
        assert_eq!(DistributionSpec::LaplaceScaled.var_x_squared(), 5.0);
        assert_eq!(
            DistributionSpec::student_t(5.0).unwrap().var_x_squared(),
            8.0
        );
        assert!(
            (DistributionSpec::sym_pareto(5.0).unwrap().var_x_squared() - 0.8).abs() < 1e-15
        );
        assert_eq!(
            DistributionSpec::student_t(4.0).unwrap().var_x_squared(),
            f64::INFINITY
        );
        assert_eq!(
            DistributionSpec::sym_pareto(3.0).unwrap().var_x_squared(),
            f64::INFINITY
        );
    }

    #[test]
    fn var_x_squared_is_zero_only_for_rademacher() {
        for spec in ALL_LIGHT {
            assert_eq!(
                spec.var_x_squared() == 0.0,
                spec == DistributionSpec::Rademacher
            );
        }
    }

    #[test]
    fn empirical_var_x_squared_tracks_the_analytic_value() {
        let cases = [
            (DistributionSpec::Gaussian, 0.1),
            (DistributionSpec::UniformScaled, 0.05),
            (DistributionSpec::LaplaceScaled, 0.5),
        ];
        for (spec, band) in cases {
            let xs = draws(&spec, 1_000_000, 21);
            let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
            let (_, var) = mean_and_var(&sq);
            let want = spec.var_x_squared();
            assert!(
                (var - want).abs() < band,
                "{}: Var(X²) {var} vs {want}",
                spec.token()
            );
        }
    }

    // -- classes, tokens, validation ------------------------------------------

    #[test]
    fn moment_classes_follow_the_family() {
        assert_eq!(
            DistributionSpec::Gaussian.moment_class(),
            MomentClass::SubGaussian
        );
        assert_eq!(
            DistributionSpec::LaplaceScaled.moment_class(),
            MomentClass::Exponential
        );
        assert_eq!(
            DistributionSpec::student_t(6.5).unwrap().moment_class(),
            MomentClass::Polynomial { s: 6.5 }
        );
        assert_eq!(
            DistributionSpec::sym_pareto(3.0).unwrap().moment_class(),
            MomentClass::RegularlyVarying { alpha: 3.0 }
        );
    }

    #[test]
    fn tokens_round_trip() {
        let specs = [
            DistributionSpec::Gaussian,
            DistributionSpec::Rademacher,
            DistributionSpec::UniformScaled,
            DistributionSpec::LaplaceScaled,
            DistributionSpec::student_t(4.5).unwrap(),
            DistributionSpec::sym_pareto(3.0).unwrap(),
        ];
        for spec in specs {
            let back: DistributionSpec = spec.token().parse().unwrap();
            assert_eq!(back, spec);
        }
        assert!("student_t".parse::<DistributionSpec>().is_err());
        assert!("student_t(2)".parse::<DistributionSpec>().is_err());
        assert!("sym_pareto(1.5)".parse::<DistributionSpec>().is_err());
        assert!("cauchy".parse::<DistributionSpec>().is_err());
    }

    #[test]
    fn constructors_reject_undefined_variances() {
        assert!(DistributionSpec::student_t(2.0).is_err());
        assert!(DistributionSpec::student_t(f64::NAN).is_err());
        assert!(DistributionSpec::sym_pareto(2.0).is_err());
        assert!(DistributionSpec::sym_pareto(f64::INFINITY).is_err());
    }

    #[test]
    fn growth_warnings_fire_exactly_outside_the_regime() {
        // s = 6: cap is n ⟹ p = n+1 warns, p = n does not (cap n^(4/4)).
        let t6 = DistributionSpec::student_t(6.0).unwrap();
        assert!(t6.growth_warning(101, 100).is_some());
        assert!(t6.growth_warning(100, 100).is_none());
        // Light tails: log p vs n^(1/3); n = 1000 has cube root 10, so
        // p = e^10 ≈ 22026 is the boundary.
        assert!(DistributionSpec::Gaussian.growth_warning(23_000, 1000).is_some());
        assert!(DistributionSpec::Gaussian.growth_warning(20_000, 1000).is_none());
    }

    // -- heavy-tail quantile --------------------------------------------------

    #[test]
    fn pure_pareto_quantile_matches_the_analytic_inversion() {
        // Unit-scale tail x^{−α}: a_1000 = 1000^{1/3} = 10 at α = 3.
        let tail = ParetoTail { alpha: 3.0, scale: 1.0 };
        assert!((tail.quantile(1000).unwrap() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn k_equal_one_returns_the_essential_infimum() {
        let tail = ParetoTail { alpha: 3.0, scale: 0.25 };
        assert_eq!(tail.quantile(1).unwrap(), 0.25);
        assert!(tail.quantile(0).is_err());
    }

    #[test]
    fn a_quantile_requires_a_power_law_family() {
        assert!(a_quantile(&DistributionSpec::Gaussian, 100).is_err());
        assert!(a_quantile(&DistributionSpec::LaplaceScaled, 100).is_err());
        let spec = DistributionSpec::sym_pareto(3.0).unwrap();
        let sigma = ((3.0 - 2.0) / 3.0f64).sqrt();
        let got = a_quantile(&spec, 1000).unwrap();
        assert!((got - sigma * 10.0).abs() < 1e-12);
    }

    #[test]
    fn closed_form_quantile_agrees_with_bracketed_root_finding() {
        // Independent oracle: bisect k·survival(x) = 1 on [scale, scale·k].
        let spec = DistributionSpec::sym_pareto(3.5).unwrap();
        let tail = spec.abs_tail().unwrap();
        for k in [2u64, 10, 1_000, 123_457] {
            let kf = k as f64;
            let (mut lo, mut hi) = (tail.scale, tail.scale * kf);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if kf * tail.survival(mid) >= 1.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let oracle = 0.5 * (lo + hi);
            let got = tail.quantile(k).unwrap();
            assert!(
                (got - oracle).abs() <= 1e-10 * oracle,
                "k = {k}: {got} vs {oracle}"
            );
        }
    }

    #[test]
    fn survival_is_one_below_the_scale() {
        let tail = ParetoTail { alpha: 3.0, scale: 2.0 };
        assert_eq!(tail.survival(1.0), 1.0);
        assert_eq!(tail.survival(2.0), 1.0);
        assert!((tail.survival(4.0) - 0.125).abs() < 1e-15);
    }
}
