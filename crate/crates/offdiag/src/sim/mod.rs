//! Seeded, parallel Monte Carlo engine.
//!
//! Submodules:
//!
//! - [`dist`]: entry-law samplers — six analytically standardized families
//!   (exact mean 0, variance 1) spanning sub-Gaussian through power-law
//!   tails, plus the heavy-tail scaling quantile a_k;
//! - [`rng`]: splittable replicate streams — replicate r draws from stream
//!   r of a counter-based generator seeded by the master seed, so results
//!   are bit-identical under any worker schedule;
//! - [`ks`]: the two-sided Kolmogorov–Smirnov statistic;
//! - [`config`]: experiment configuration (functional, family, shape,
//!   windows, seeds) with strict validation, growth-regime warnings, and a
//!   pre-allocation memory budget;
//! - [`summary`]: the metric table an experiment produces;
//! - [`experiments`]: the per-functional replicate runners.
//!
//! Determinism contract: an experiment re-run with the same configuration
//! (including the master seed) produces identical summaries for any worker
//! count; aggregation happens in replicate order over results collected
//! from an index-preserving parallel map.

pub mod config;
pub mod dist;
pub mod experiments;
pub mod ks;
pub mod rng;
pub mod summary;

pub use config::{ExperimentConfig, Functional, Window};
pub use dist::{a_quantile, sample_matrix, DistributionSpec, MomentClass, ParetoTail};
pub use experiments::run_experiment;
pub use ks::ks_statistic;
pub use rng::replicate_rng;
pub use summary::{MCSummary, Metric};
