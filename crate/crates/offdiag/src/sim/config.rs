//! Experiment configuration.
//!
//! A config names a functional (which limit theorem to probe), an entry-law
//! family, the shape (p, n), the replicate count, and a mandatory master
//! seed — seeds are never auto-generated, the whole verification suite
//! depends on reproducibility. Optional keys carry functional-specific
//! parameters (windows, order-statistic depth k, test level α, threshold
//! constant C, grids, limit-table Monte Carlo size) and the resource knobs
//! (workers, memory cap).
//!
//! Validation is strict and happens before any allocation: impossible
//! shapes, degenerate family/functional combinations and memory-budget
//! violations are hard errors; growth-regime mismatches (desk-scale p and n
//! never reach the asymptotic regime) are warnings recorded in the summary.

use std::path::Path;

use crate::extremes::MIN_QUANTILE_MC;
use crate::io::KeyValueFile;
use crate::{Error, Result};

use super::dist::DistributionSpec;

// ---------------------------------------------------------------------------
// Functionals
// ---------------------------------------------------------------------------

/// Which experiment to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Functional {
    /// Window counts of the off-diagonal covariance point cloud vs the
    /// limit mean measure.
    PpCounts,
    /// The extremes suite on one shared run: Gumbel KS for the covariance
    /// and correlation maxima, growth-rate medians, joint max/min cells,
    /// squared-point counts, and the k = 2 spacing law.
    MaxGumbel,
    /// Joint max/min cell probabilities only.
    JointMaxMin,
    /// Window counts of the squared off-diagonal cloud.
    Squares,
    /// Gumbel KS for the normalized diagonal (needs finite Var(X²) > 0).
    DiagGumbel,
    /// Fréchet KS for the heavy-tail diagonal maximum (needs power-law
    /// tails).
    DiagFrechet,
    /// Window counts and maximum for p independent normalized row sums.
    RandomWalk,
    /// Window counts of the correlation point cloud.
    CorrVariants,
    /// Tail-probability ratios of a normalized sum against the normal tail
    /// on a y-grid.
    LdRatio,
    /// Growth-rate medians of the extreme entries at √(n log p) scale.
    RateCheck,
    /// Rejection rates of the independence tests under the null.
    TestSize,
    /// Median operator-norm consistency of the threshold estimators.
    ThresholdConsistency,
}

impl Functional {
    pub fn token(self) -> &'static str {
        match self {
            Functional::PpCounts => "pp_counts",
            Functional::MaxGumbel => "max_gumbel",
            Functional::JointMaxMin => "joint_max_min",
            Functional::Squares => "squares",
            Functional::DiagGumbel => "diag_gumbel",
            Functional::DiagFrechet => "diag_frechet",
            Functional::RandomWalk => "random_walk",
            Functional::CorrVariants => "corr_variants",
            Functional::LdRatio => "ld_ratio",
            Functional::RateCheck => "rate_check",
            Functional::TestSize => "test_size",
            Functional::ThresholdConsistency => "threshold_consistency",
        }
    }

    pub const ALL: [Functional; 12] = [
        Functional::PpCounts,
        Functional::MaxGumbel,
        Functional::JointMaxMin,
        Functional::Squares,
        Functional::DiagGumbel,
        Functional::DiagFrechet,
        Functional::RandomWalk,
        Functional::CorrVariants,
        Functional::LdRatio,
        Functional::RateCheck,
        Functional::TestSize,
        Functional::ThresholdConsistency,
    ];
}

impl std::str::FromStr for Functional {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Functional::ALL
            .into_iter()
            .find(|f| f.token() == s)
            .ok_or_else(|| Error::parse(format!("unknown functional {s:?}")))
    }
}

// ---------------------------------------------------------------------------
// Windows
// ---------------------------------------------------------------------------

/// A half-open counting window (lo, hi]. The lower endpoint must be finite
/// (the limit mean measure e^{−lo} − e^{−hi} diverges otherwise); the upper
/// endpoint may be +∞.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    lo: f64,
    hi: f64,
}

impl Window {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !lo.is_finite() {
            return Err(Error::domain(format!(
                "window lower endpoint must be finite, got {lo}"
            )));
        }
        if !(hi > lo) {
            return Err(Error::domain(format!(
                "window needs lo < hi, got ({lo}, {hi}]"
            )));
        }
        Ok(Window { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    /// Membership in (lo, hi].
    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        x > self.lo && x <= self.hi
    }

    /// Comma-free label used in metric names and file round-trips,
    /// e.g. `(0..inf]`.
    pub fn label(&self) -> String {
        format!("({}..{}]", self.lo, self.hi)
    }
}

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

/// Default limit-table Monte Carlo size.
pub const DEFAULT_MC_COUNT: usize = 200_000;
/// Default memory cap in MiB.
pub const DEFAULT_MEMORY_CAP_MB: usize = 2048;
/// Default threshold constant (the consistency corollary needs C > 2).
pub const DEFAULT_THRESHOLD_C: f64 = 2.5;
/// Draw-chunk size for the streaming tail-ratio functional; each chunk has
/// its own replicate stream.
pub const LD_RATIO_CHUNK: usize = 4096;

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub functional: Functional,
    pub spec: DistributionSpec,
    pub p: usize,
    pub n: usize,
    pub replicates: usize,
    pub master_seed: u64,
    pub workers: usize,
    pub windows: Vec<Window>,
    pub k: usize,
    pub alpha: f64,
    pub c: f64,
    pub y_grid: Vec<f64>,
    pub grid: Vec<f64>,
    pub mc_count: usize,
    pub memory_cap_mb: usize,
}

impl ExperimentConfig {
    /// Read the keys out of a parsed key=value file. Unknown-key detection
    /// is the caller's job (via [`KeyValueFile::finish`]) so that wrappers
    /// can consume extra keys of their own first.
    pub fn from_kv(kv: &KeyValueFile) -> Result<Self> {
        let functional: Functional = kv.require_str("functional")?.parse()?;
        let spec: DistributionSpec = kv.require_str("family")?.parse()?;
        let p = kv.require_usize("p")?;
        let n = kv.require_usize("n")?;
        let replicates = kv.require_usize("replicates")?;
        let master_seed = kv.require_u64("seed")?;
        let workers = kv.get_usize("workers")?.unwrap_or(1);
        let windows = match kv.get_window_list("windows")? {
            Some(list) => list
                .into_iter()
                .map(|(lo, hi)| Window::new(lo, hi))
                .collect::<Result<Vec<_>>>()?,
            None => vec![Window::new(0.0, f64::INFINITY).expect("default window")],
        };
        let cfg = ExperimentConfig {
            functional,
            spec,
            p,
            n,
            replicates,
            master_seed,
            workers,
            windows,
            k: kv.get_usize("k")?.unwrap_or(2),
            alpha: kv.get_f64("alpha")?.unwrap_or(0.05),
            c: kv.get_f64("c")?.unwrap_or(DEFAULT_THRESHOLD_C),
            y_grid: kv
                .get_f64_list("y_grid")?
                .unwrap_or_else(|| vec![0.0, 0.5, 1.0, 1.5, 2.0]),
            grid: kv.get_f64_list("grid")?.unwrap_or_else(|| vec![0.0, 1.0]),
            mc_count: kv.get_usize("mc_count")?.unwrap_or(DEFAULT_MC_COUNT),
            memory_cap_mb: kv.get_usize("memory_cap_mb")?.unwrap_or(DEFAULT_MEMORY_CAP_MB),
        };
        Ok(cfg)
    }

    /// Load, reject unknown keys, validate.
    pub fn load(path: &Path) -> Result<Self> {
        let kv = KeyValueFile::load(path)?;
        let cfg = Self::from_kv(&kv)?;
        kv.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn needs_pairs(&self) -> bool {
        matches!(
            self.functional,
            Functional::PpCounts
                | Functional::MaxGumbel
                | Functional::JointMaxMin
                | Functional::Squares
                | Functional::CorrVariants
                | Functional::RateCheck
                | Functional::TestSize
        )
    }

    /// Hard validation: impossible shapes, degenerate combinations, and the
    /// pre-allocation memory budget.
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::domain("replicates must be ≥ 1".to_string()));
        }
        if self.workers == 0 {
            return Err(Error::domain("workers must be ≥ 1".to_string()));
        }
        if self.n == 0 {
            return Err(Error::domain("n must be ≥ 1".to_string()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::domain(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(Error::domain(format!(
                "threshold constant must be finite and > 0, got {}",
                self.c
            )));
        }
        if self.needs_pairs() {
            if self.p < 3 {
                return Err(Error::domain(format!(
                    "functional {} needs p ≥ 3, got {}",
                    self.functional.token(),
                    self.p
                )));
            }
            let pairs = self.p * (self.p - 1) / 2;
            if self.k < 2 || self.k > pairs {
                return Err(Error::domain(format!(
                    "k must satisfy 2 ≤ k ≤ p(p−1)/2 = {pairs}, got {}",
                    self.k
                )));
            }
        } else if self.p < 2 {
            return Err(Error::domain(format!(
                "functional {} needs p ≥ 2, got {}",
                self.functional.token(),
                self.p
            )));
        }
        match self.functional {
            Functional::DiagGumbel => {
                let v = self.spec.var_x_squared();
                if v == 0.0 {
                    return Err(Error::domain(format!(
                        "diag_gumbel is degenerate for {}: Var(X²) = 0 makes every \
                         diagonal entry exactly n",
                        self.spec.token()
                    )));
                }
                if !v.is_finite() {
                    return Err(Error::domain(format!(
                        "diag_gumbel needs finite Var(X²); {} has an infinite fourth \
                         moment (use diag_frechet instead)",
                        self.spec.token()
                    )));
                }
            }
            Functional::DiagFrechet => {
                if self.spec.abs_tail().is_none() {
                    return Err(Error::domain(format!(
                        "diag_frechet needs power-law tails, {} has none",
                        self.spec.token()
                    )));
                }
            }
            Functional::LdRatio => {
                if self.y_grid.iter().any(|y| !(y.is_finite() && *y >= 0.0)) {
                    return Err(Error::domain(
                        "y_grid values must be finite and ≥ 0".to_string(),
                    ));
                }
            }
            Functional::TestSize => {
                if self.mc_count < MIN_QUANTILE_MC {
                    return Err(Error::domain(format!(
                        "test_size needs mc_count ≥ {MIN_QUANTILE_MC} for its \
                         calibrated thresholds, got {}",
                        self.mc_count
                    )));
                }
            }
            _ => {}
        }
        if self.grid.iter().any(|g| !g.is_finite()) {
            return Err(Error::domain("grid values must be finite".to_string()));
        }
        self.check_memory_budget()
    }

    /// Bytes of per-worker working set, by functional. Gram-based runs hold
    /// the data matrix plus two dense p × p matrices; the threshold runner
    /// holds two more; streaming runs hold O(p) or O(chunk).
    pub fn working_set_bytes(&self) -> u64 {
        let p = self.p as u64;
        let n = self.n as u64;
        let f64s = match self.functional {
            Functional::RandomWalk | Functional::DiagGumbel | Functional::DiagFrechet => p + 64,
            Functional::LdRatio => LD_RATIO_CHUNK as u64 + 64,
            Functional::ThresholdConsistency => p * n + 4 * p * p,
            _ => p * n + 2 * p * p,
        };
        f64s * 8
    }

    fn check_memory_budget(&self) -> Result<()> {
        let need = self.working_set_bytes().saturating_mul(self.workers as u64);
        let cap = (self.memory_cap_mb as u64).saturating_mul(1 << 20);
        if need > cap {
            return Err(Error::Resource(format!(
                "refusing to run: working set needs {} MiB across {} worker(s), \
                 memory cap is {} MiB (raise memory_cap_mb or lower workers/p/n)",
                need >> 20,
                self.workers,
                self.memory_cap_mb
            )));
        }
        Ok(())
    }

    /// Non-fatal regime notes recorded in the summary.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        // The (p, n) growth conditions govern off-diagonal functionals of
        // the Gram matrix. Row-sum functionals never form S, and the
        // heavy-tail diagonal limit tolerates polynomially growing p by
        // design, so the warning would be noise for those.
        let growth_sensitive = !matches!(
            self.functional,
            Functional::RandomWalk | Functional::LdRatio | Functional::DiagFrechet
        );
        if growth_sensitive {
            if let Some(w) = self.spec.growth_warning(self.p, self.n) {
                out.push(w);
            }
        }
        if self.functional == Functional::DiagFrechet {
            if let Some(tail) = self.spec.abs_tail() {
                if tail.alpha >= 4.0 {
                    out.push(format!(
                        "tail index α = {} is outside (2, 4); the diagonal limit is \
                         no longer the α/2-Fréchet",
                        tail.alpha
                    ));
                }
            }
        }
        if self.functional == Functional::LdRatio {
            for y in &self.y_grid {
                if *y > 3.0 {
                    out.push(format!(
                        "y = {y} is deep in the tail; plain Monte Carlo is noisy \
                         there (no importance sampling)"
                    ));
                    break;
                }
            }
        }
        if self.functional == Functional::ThresholdConsistency {
            let t_n = self.c * ((self.p as f64).ln() / self.n as f64).sqrt();
            if t_n >= 1.0 {
                out.push(format!(
                    "correlation threshold t_n = {t_n:.3} ≥ 1 zeroes everything \
                     including the diagonal"
                ));
            }
        }
        out
    }

    /// Ordered key/value echo of the resolved config (manifest material).
    pub fn echo(&self) -> Vec<(String, String)> {
        let windows = self
            .windows
            .iter()
            .map(|w| format!("{}..{}", w.lo(), w.hi()))
            .collect::<Vec<_>>()
            .join(", ");
        let join = |xs: &[f64]| {
            xs.iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        };
        vec![
            ("functional".to_string(), self.functional.token().to_string()),
            ("family".to_string(), self.spec.token()),
            ("p".to_string(), self.p.to_string()),
            ("n".to_string(), self.n.to_string()),
            ("replicates".to_string(), self.replicates.to_string()),
            ("seed".to_string(), self.master_seed.to_string()),
            ("workers".to_string(), self.workers.to_string()),
            ("windows".to_string(), windows),
            ("k".to_string(), self.k.to_string()),
            ("alpha".to_string(), self.alpha.to_string()),
            ("c".to_string(), self.c.to_string()),
            ("y_grid".to_string(), join(&self.y_grid)),
            ("grid".to_string(), join(&self.grid)),
            ("mc_count".to_string(), self.mc_count.to_string()),
            ("memory_cap_mb".to_string(), self.memory_cap_mb.to_string()),
        ]
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    fn base(extra: &str) -> String {
        format!(
            "functional = pp_counts\nfamily = gaussian\np = 10\nn = 100\n\
             replicates = 4\nseed = 1\n{extra}"
        )
    }

    fn parse(text: &str) -> Result<ExperimentConfig> {
        let kv = KeyValueFile::parse(text)?;
        let cfg = ExperimentConfig::from_kv(&kv)?;
        kv.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    #[test]
    fn minimal_config_gets_documented_defaults() {
        let cfg = parse(&base("")).unwrap();
        assert_eq!(cfg.workers, 1);
        assert_eq!(cfg.k, 2);
        assert_eq!(cfg.alpha, 0.05);
        assert_eq!(cfg.c, DEFAULT_THRESHOLD_C);
        assert_eq!(cfg.mc_count, DEFAULT_MC_COUNT);
        assert_eq!(cfg.windows.len(), 1);
        assert_eq!(cfg.windows[0].lo(), 0.0);
        assert_eq!(cfg.windows[0].hi(), f64::INFINITY);
    }

    #[test]
    fn seed_is_mandatory() {
        let text = "functional = pp_counts\nfamily = gaussian\np = 10\nn = 100\nreplicates = 4\n";
        assert!(matches!(parse(text), Err(Error::Parse { .. })));
    }

    #[test]
    fn unknown_keys_are_parse_errors() {
        let err = parse(&base("bogus_key = 3\n")).unwrap_err().to_string();
        assert!(err.contains("bogus_key"), "{err}");
    }

    #[test]
    fn windows_parse_and_validate() {
        let cfg = parse(&base("windows = 0..1, 1..inf, -0.5..0\n")).unwrap();
        assert_eq!(cfg.windows.len(), 3);
        assert!(cfg.windows[0].contains(1.0)); // closed right end
        assert!(!cfg.windows[0].contains(0.0)); // open left end
        assert!(parse(&base("windows = 1..0\n")).is_err());
        assert!(parse(&base("windows = -inf..0\n")).is_err());
    }

    #[test]
    fn functional_specific_shape_rules() {
        // Pair functionals need p ≥ 3.
        assert!(parse(&base("").replace("p = 10", "p = 2")).is_err());
        // Diagonal functionals accept p = 2.
        let diag = base("").replace("functional = pp_counts", "functional = diag_gumbel");
        assert!(parse(&diag.replace("p = 10", "p = 2")).is_ok());
        // k must fit the candidate count.
        assert!(parse(&base("k = 46\n")).is_err());
        assert!(parse(&base("k = 45\n")).is_ok());
        assert!(parse(&base("k = 1\n")).is_err());
    }

    #[test]
    fn diag_gumbel_refuses_degenerate_and_heavy_families() {
        let rad = base("")
            .replace("functional = pp_counts", "functional = diag_gumbel")
            .replace("family = gaussian", "family = rademacher");
        let err = parse(&rad).unwrap_err().to_string();
        assert!(err.contains("Var(X²) = 0"), "{err}");

        let heavy = base("")
            .replace("functional = pp_counts", "functional = diag_gumbel")
            .replace("family = gaussian", "family = sym_pareto(3)");
        let err = parse(&heavy).unwrap_err().to_string();
        assert!(err.contains("diag_frechet"), "{err}");
    }

    #[test]
    fn diag_frechet_requires_power_law_tails() {
        let light = base("").replace("functional = pp_counts", "functional = diag_frechet");
        assert!(parse(&light).is_err());
        let heavy = light.replace("family = gaussian", "family = sym_pareto(3)");
        assert!(parse(&heavy).is_ok());
    }

    #[test]
    fn memory_budget_refuses_before_running() {
        let err = parse(&base("memory_cap_mb = 0\n")).unwrap_err();
        assert!(matches!(err, Error::Resource(_)), "{err}");
        // Streaming functionals have tiny working sets: a big p passes
        // under a small cap where a gram-based functional would not.
        let walk = "functional = random_walk\nfamily = gaussian\np = 10000\nn = 1\n\
                    replicates = 4\nseed = 1\nmemory_cap_mb = 1\n";
        assert!(parse(walk).is_ok());
        let gram = "functional = pp_counts\nfamily = gaussian\np = 10000\nn = 1000\n\
                    replicates = 4\nseed = 1\nmemory_cap_mb = 1\n";
        assert!(matches!(parse(gram), Err(Error::Resource(_))));
    }

    #[test]
    fn growth_and_regime_warnings_are_collected() {
        let cfg = parse(
            &base("")
                .replace("family = gaussian", "family = student_t(6)")
                .replace("p = 10", "p = 200")
                .replace("n = 100", "n = 100"),
        )
        .unwrap();
        assert!(!cfg.warnings().is_empty());

        let quiet = parse(&base("")).unwrap();
        assert!(quiet.warnings().is_empty());
    }

    #[test]
    fn echo_round_trips_through_the_config_parser() {
        let cfg = parse(&base("windows = 0..inf, 1..2.5\nk = 3\nalpha = 0.1\n")).unwrap();
        let text: String = cfg
            .echo()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect();
        let back = parse(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn window_labels_are_comma_free() {
        let w = Window::new(0.0, f64::INFINITY).unwrap();
        assert_eq!(w.label(), "(0..inf]");
        let w2 = Window::new(-1.5, 2.0).unwrap();
        assert_eq!(w2.label(), "(-1.5..2]");
        assert!(!w2.label().contains(','));
    }
}
