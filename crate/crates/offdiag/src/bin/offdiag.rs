//! Command-line harness.
//!
//! Four subcommands:
//!
//! - `compute`: read a data matrix, write the Gram matrix, extremes tables,
//!   normalized point clouds, and threshold estimates;
//! - `test`: run an independence test (maximum-entry, spacing, or region)
//!   on a data matrix and write a decision report;
//! - `simulate`: run a configured Monte Carlo experiment and write its
//!   summary plus a digest manifest;
//! - `report`: verify a finished run directory against its manifest and
//!   print the summary.
//!
//! Output directory resolution: `--out`, else `$OFFDIAG_OUT`, else
//! `./offdiag_out`. Exit codes: 0 success, 2 usage, 3 parse error, 4 domain
//! error, 5 resource refusal, 6 non-convergence, 7 I/O error.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use offdiag::extremes::{
    calibrated_region, jiang_statistic, jiang_test, region_test, spacing_limit_quantile,
    spacing_statistic, SpacingFamily, SpacingKind, TestDecision,
};
use offdiag::io::{
    fmt_f64, read_csv, read_data_matrix, write_csv, write_symmetric_matrix, RunManifest,
};
use offdiag::kernels::{
    correlation, corr_offdiag_points, gram, offdiag_extremes, offdiag_points,
    squared_offdiag_points, NormedPoint, OrderStats, PointIndex, ScoredPair, SymmetricMatrix,
};
use offdiag::norming::pair_norming_constant;
use offdiag::sim::{run_experiment, ExperimentConfig};
use offdiag::thresholding::{consistency_metric, threshold_corr, threshold_cov, ThresholdSpec};
use offdiag::{EntryMode, Error, Result};

// ---------------------------------------------------------------------------
// Argument surface
// ---------------------------------------------------------------------------

#[derive(Parser)]
#[command(
    name = "offdiag",
    version,
    about = "Extreme-value functionals of high-dimensional sample covariance matrices"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute Gram/correlation matrices, extremes, point clouds and
    /// threshold estimates from a data matrix.
    Compute(ComputeArgs),
    /// Run an independence test on a data matrix.
    Test(TestArgs),
    /// Run a configured Monte Carlo experiment.
    Simulate(SimulateArgs),
    /// Verify a finished run directory against its manifest and print it.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    /// Work on the Gram matrix (covariance scale).
    Cov,
    /// Work on the correlation matrix.
    Corr,
}

impl From<ModeArg> for EntryMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Cov => EntryMode::Covariance,
            ModeArg::Corr => EntryMode::Correlation,
        }
    }
}

#[derive(Args)]
struct ComputeArgs {
    /// Input data matrix: header "p n", then p rows of n values.
    #[arg(long)]
    input: PathBuf,
    /// Output directory (default: $OFFDIAG_OUT, else ./offdiag_out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Entry mode for extremes, point clouds and thresholding.
    #[arg(long, value_enum, default_value = "cov")]
    mode: ModeArg,
    /// Depth of the top/bottom extremes tables.
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Threshold constant C in t_n = C·√(log p / n).
    #[arg(long = "C", default_value_t = 2.5)]
    c: f64,
    /// Insist on the normalized point clouds: error when p < 3 instead of
    /// skipping them.
    #[arg(long)]
    points: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum TestKind {
    /// Maximum-entry test with the closed-form limit threshold.
    Jiang,
    /// Spacing statistics of the top-k entries against simulated
    /// limit-law quantiles (one row per family).
    Spacing,
    /// Rectangular region test on the normalized top-k vector.
    Region,
}

#[derive(Args)]
struct TestArgs {
    /// Input data matrix: header "p n", then p rows of n values.
    #[arg(long)]
    input: PathBuf,
    /// Which test to run.
    #[arg(long, value_enum)]
    test: TestKind,
    /// Test level.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Order-statistic depth (spacing and region tests).
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Entry mode the statistic is computed from.
    #[arg(long, value_enum, default_value = "cov")]
    mode: ModeArg,
    /// Monte Carlo size of the simulated threshold tables.
    #[arg(long = "mc-count", default_value_t = 200_000)]
    mc_count: usize,
    /// Master seed for simulated thresholds; required by spacing and
    /// region (thresholds are never drawn from an unseeded source).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: $OFFDIAG_OUT, else ./offdiag_out).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Experiment config: key = value lines (see the config reference).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's worker count.
    #[arg(long)]
    workers: Option<usize>,
    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: $OFFDIAG_OUT, else ./offdiag_out).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// A run directory previously written by `simulate`.
    #[arg(long)]
    dir: PathBuf,
}

// ---------------------------------------------------------------------------
// Entry point and exit codes
// ---------------------------------------------------------------------------

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Compute(args) => cmd_compute(args),
        Command::Test(args) => cmd_test(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Report(args) => cmd_report(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(exit_code(&e));
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse { .. } => 3,
        Error::Domain(_) => 4,
        Error::Resource(_) => 5,
        Error::NoConvergence { .. } => 6,
        Error::Io(_) => 7,
    }
}

fn resolve_out(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("OFFDIAG_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("offdiag_out"))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// compute
// ---------------------------------------------------------------------------

fn extremes_rows(stats: &OrderStats) -> Vec<Vec<String>> {
    stats
        .items()
        .iter()
        .enumerate()
        .map(|(rank, item)| {
            vec![
                (rank + 1).to_string(),
                fmt_f64(item.value),
                item.i.to_string(),
                item.j.to_string(),
            ]
        })
        .collect()
}

fn point_rows(points: &[NormedPoint]) -> Vec<Vec<String>> {
    points
        .iter()
        .map(|pt| {
            let (i, j) = match pt.index {
                PointIndex::Pair(i, j) => (i.to_string(), j.to_string()),
                PointIndex::Coordinate(i) => (i.to_string(), String::new()),
            };
            vec![i, j, fmt_f64(pt.value)]
        })
        .collect()
}

fn cmd_compute(args: ComputeArgs) -> Result<()> {
    let dir = resolve_out(args.out);
    ensure_dir(&dir)?;
    let x = read_data_matrix(&args.input)?;
    let (p, n) = (x.p(), x.n());
    let s = gram(&x);
    write_symmetric_matrix(
        &dir.join("covariance.txt"),
        &s,
        "Gram matrix (n times the sample covariance)",
    )?;

    let mode: EntryMode = args.mode.into();
    let working: SymmetricMatrix = match mode {
        EntryMode::Covariance => s.clone(),
        EntryMode::Correlation => {
            let r = correlation(&s)?;
            write_symmetric_matrix(&dir.join("correlation.txt"), &r, "correlation matrix")?;
            r
        }
    };

    let ex = offdiag_extremes(&working, args.k)?;
    let header = ["rank", "value", "i", "j"];
    write_csv(&dir.join("extremes_top.csv"), &header, &extremes_rows(&ex.top))?;
    write_csv(
        &dir.join("extremes_bottom.csv"),
        &header,
        &extremes_rows(&ex.bottom),
    )?;

    // Normalized point clouds need the pair norming constant, hence p ≥ 3.
    if p >= 3 {
        let pheader = ["i", "j", "value"];
        match mode {
            EntryMode::Covariance => {
                write_csv(
                    &dir.join("points_offdiag.csv"),
                    &pheader,
                    &point_rows(&offdiag_points(&s, n)?),
                )?;
                write_csv(
                    &dir.join("points_squared.csv"),
                    &pheader,
                    &point_rows(&squared_offdiag_points(&s, n)?),
                )?;
            }
            EntryMode::Correlation => {
                write_csv(
                    &dir.join("points_corr.csv"),
                    &pheader,
                    &point_rows(&corr_offdiag_points(&working, n)?),
                )?;
            }
        }
    } else if args.points {
        return Err(Error::domain(format!(
            "normalized point clouds need p ≥ 3, got p = {p}"
        )));
    } else {
        eprintln!("note: skipping normalized point clouds (p = {p} < 3); pass --points to insist");
    }

    // Threshold estimates and summary statistics.
    let tspec = ThresholdSpec::new(args.c, n, p)?;
    let mut stats: Vec<Vec<String>> = vec![
        vec!["p".into(), p.to_string()],
        vec!["n".into(), n.to_string()],
        vec!["mode".into(), mode.token().to_string()],
        vec!["k".into(), args.k.to_string()],
        vec!["threshold_c".into(), fmt_f64(args.c)],
        vec!["t_n".into(), fmt_f64(tspec.t_n())],
    ];
    let maxabs_working = working.max_abs_offdiag();
    stats.push(vec!["maxabs_offdiag".into(), fmt_f64(maxabs_working)]);
    match mode {
        EntryMode::Covariance => {
            let est = threshold_cov(&s, &tspec)?;
            write_symmetric_matrix(
                &dir.join("threshold_cov.txt"),
                &est,
                "hard-thresholded Gram matrix (entries kept when |S_ij| > n t_n)",
            )?;
            stats.push(vec![
                "consistency_cov".into(),
                fmt_f64(consistency_metric(&est, EntryMode::Covariance, n)?),
            ]);
        }
        EntryMode::Correlation => {
            let out = threshold_corr(&working, &tspec)?;
            write_symmetric_matrix(
                &dir.join("threshold_corr.txt"),
                &out.estimate,
                "hard-thresholded correlation matrix (entries kept when |R_ij| > t_n)",
            )?;
            stats.push(vec![
                "consistency_corr".into(),
                fmt_f64(consistency_metric(&out.estimate, EntryMode::Correlation, n)?),
            ]);
            stats.push(vec![
                "degenerate_threshold".into(),
                u8::from(out.degenerate_threshold).to_string(),
            ]);
        }
    }
    if p >= 3 {
        let maxabs = match mode {
            EntryMode::Covariance => maxabs_working / n as f64,
            EntryMode::Correlation => maxabs_working.min(1.0),
        };
        stats.push(vec![
            "jiang_statistic".into(),
            fmt_f64(jiang_statistic(maxabs, n, p, mode)?),
        ]);
    }
    write_csv(&dir.join("stats.csv"), &["stat", "value"], &stats)?;
    println!("compute: outputs in {}", dir.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// test
// ---------------------------------------------------------------------------

/// The off-diagonal entries of the working matrix brought to Gram scale, so
/// one spacing/region pipeline serves both modes: correlation entries obey
/// √n·R ≈ S/√n, so n·R is the Gram-scale equivalent.
fn gram_scale_top(
    working: &SymmetricMatrix,
    mode: EntryMode,
    n: usize,
    k: usize,
) -> Result<OrderStats> {
    let ex = offdiag_extremes(working, k)?;
    match mode {
        EntryMode::Covariance => Ok(ex.top),
        EntryMode::Correlation => {
            let scaled: Vec<ScoredPair> = ex
                .top
                .items()
                .iter()
                .map(|it| ScoredPair {
                    value: it.value * n as f64,
                    i: it.i,
                    j: it.j,
                })
                .collect();
            OrderStats::from_sorted(scaled, true)
        }
    }
}

fn decision_row(
    name: &str,
    d: &TestDecision,
    mc_count: Option<usize>,
    seed: Option<u64>,
) -> Vec<String> {
    vec![
        name.to_string(),
        fmt_f64(d.statistic),
        fmt_f64(d.threshold),
        fmt_f64(d.alpha),
        if d.reject { "reject" } else { "accept" }.to_string(),
        mc_count.map(|m| m.to_string()).unwrap_or_default(),
        seed.map(|s| s.to_string()).unwrap_or_default(),
    ]
}

fn require_seed(seed: Option<u64>, what: &str) -> Result<u64> {
    seed.ok_or_else(|| {
        Error::domain(format!(
            "{what} thresholds are Monte Carlo calibrated; pass --seed (seeds are \
             mandatory, never auto-generated)"
        ))
    })
}

fn cmd_test(args: TestArgs) -> Result<()> {
    let dir = resolve_out(args.out);
    ensure_dir(&dir)?;
    let x = read_data_matrix(&args.input)?;
    let (p, n) = (x.p(), x.n());
    let s = gram(&x);
    let mode: EntryMode = args.mode.into();
    let working = match mode {
        EntryMode::Covariance => s,
        EntryMode::Correlation => correlation(&s)?,
    };

    let header = [
        "test",
        "statistic",
        "threshold",
        "alpha",
        "decision",
        "mc_count",
        "seed",
    ];
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut quantile_rows: Vec<Vec<String>> = Vec::new();

    match args.test {
        TestKind::Jiang => {
            let maxabs = match mode {
                EntryMode::Covariance => working.max_abs_offdiag() / n as f64,
                EntryMode::Correlation => working.max_abs_offdiag().min(1.0),
            };
            let stat = jiang_statistic(maxabs, n, p, mode)?;
            let d = jiang_test(stat, args.alpha)?;
            rows.push(decision_row(&format!("jiang_{}", mode.token()), &d, None, None));
        }
        TestKind::Spacing => {
            let seed = require_seed(args.seed, "spacing")?;
            let top = gram_scale_top(&working, mode, n, args.k)?;
            for family in SpacingFamily::ALL {
                let kind = SpacingKind::new(family, args.k)?;
                let statistic = spacing_statistic(&top, n, p, kind)?;
                let threshold = spacing_limit_quantile(kind, args.alpha, args.mc_count, seed)?;
                let d = offdiag::extremes::decide_right_tail(statistic, threshold, args.alpha);
                rows.push(decision_row(
                    &format!("spacing_{}", family.token()),
                    &d,
                    Some(args.mc_count),
                    Some(seed),
                ));
                quantile_rows.push(vec![
                    family.token().to_string(),
                    args.k.to_string(),
                    fmt_f64(args.alpha),
                    args.mc_count.to_string(),
                    seed.to_string(),
                    fmt_f64(threshold),
                ]);
            }
        }
        TestKind::Region => {
            let seed = require_seed(args.seed, "region")?;
            let top = gram_scale_top(&working, mode, n, args.k)?;
            let dt = pair_norming_constant(p as u64)?;
            let sqn = (n as f64).sqrt();
            let observed: Vec<f64> = top
                .items()
                .iter()
                .map(|it| dt * (it.value / sqn - dt))
                .collect();
            let cal = calibrated_region(args.k, args.alpha, args.mc_count, seed)?;
            let d = region_test(&observed, &cal.region, args.alpha)?;
            rows.push(decision_row("region", &d, Some(args.mc_count), Some(seed)));
            let mut region_rows = Vec::new();
            for (ci, (lo, hi)) in cal
                .region
                .lower()
                .iter()
                .zip(cal.region.upper())
                .enumerate()
            {
                region_rows.push(vec![ci.to_string(), fmt_f64(*lo), fmt_f64(*hi)]);
            }
            write_csv(
                &dir.join("region.csv"),
                &["coordinate", "lower", "upper"],
                &region_rows,
            )?;
            quantile_rows.push(vec![
                "region_coverage".to_string(),
                args.k.to_string(),
                fmt_f64(args.alpha),
                args.mc_count.to_string(),
                seed.to_string(),
                fmt_f64(cal.achieved_coverage),
            ]);
        }
    }

    write_csv(&dir.join("report.csv"), &header, &rows)?;
    if !quantile_rows.is_empty() {
        write_csv(
            &dir.join("quantiles.csv"),
            &["kind", "k", "alpha", "mc_count", "seed", "value"],
            &quantile_rows,
        )?;
    }
    // Human-readable echo of the decision rows.
    for row in &rows {
        println!(
            "{}: statistic {} vs threshold {} at alpha {} -> {}",
            row[0], row[1], row[2], row[3], row[4]
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    if let Some(s) = args.seed {
        cfg.master_seed = s;
    }
    cfg.validate()?;

    let dir = resolve_out(args.out);
    ensure_dir(&dir)?;
    let mut manifest = RunManifest::new(cfg.master_seed, cfg.echo());
    let summary = run_experiment(&cfg)?;

    summary.write_csv(&dir.join("summary.csv"))?;
    manifest.record_output(&dir, "summary.csv")?;
    if !summary.warnings.is_empty() {
        let text = summary
            .warnings
            .iter()
            .map(|w| format!("{w}\n"))
            .collect::<String>();
        offdiag::io::write_atomic(&dir.join("warnings.txt"), &text)?;
        manifest.record_output(&dir, "warnings.txt")?;
    }
    manifest.finalize(&dir)?;

    println!(
        "{} / {} / p = {}, n = {}, {} replicate(s), seed {}",
        summary.functional.token(),
        summary.family,
        summary.p,
        summary.n,
        summary.replicates,
        summary.master_seed
    );
    print_metric_table(&summary.metrics.iter().map(metric_cells).collect::<Vec<_>>());
    for w in &summary.warnings {
        eprintln!("warning: {w}");
    }
    eprintln!(
        "done in {:.2}s; outputs in {}",
        summary.runtime_seconds,
        dir.display()
    );
    Ok(())
}

fn metric_cells(m: &offdiag::sim::Metric) -> [String; 4] {
    [
        m.name.clone(),
        format!("{:.6}", m.value),
        m.target.map(|t| format!("{t:.6}")).unwrap_or_default(),
        m.band.map(|b| format!("±{b:.6}")).unwrap_or_default(),
    ]
}

fn print_metric_table(rows: &[[String; 4]]) {
    let headers = ["metric", "value", "target", "band"];
    let mut widths = headers.map(str::len);
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: [&str; 4]| {
        println!(
            "  {:<w0$}  {:>w1$}  {:>w2$}  {:>w3$}",
            cells[0],
            cells[1],
            cells[2],
            cells[3],
            w0 = widths[0],
            w1 = widths[1],
            w2 = widths[2],
            w3 = widths[3],
        );
    };
    line(headers);
    for row in rows {
        line([&row[0], &row[1], &row[2], &row[3]]);
    }
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

fn cmd_report(args: ReportArgs) -> Result<()> {
    let manifest = RunManifest::read(&args.dir)?;
    let checks = manifest.verify(&args.dir)?;
    let bad: Vec<&str> = checks
        .iter()
        .filter(|(_, ok)| !ok)
        .map(|(name, _)| name.as_str())
        .collect();
    if !bad.is_empty() {
        return Err(Error::domain(format!(
            "digest mismatch for {}; the run directory was modified after finalize",
            bad.join(", ")
        )));
    }
    println!(
        "run manifest: tool {} seed {} ({} output file(s), digests verified)",
        manifest.tool_version,
        manifest.master_seed,
        checks.len()
    );
    for (key, value) in &manifest.config_echo {
        println!("  config {key} = {value}");
    }
    let summary_path = args.dir.join("summary.csv");
    if summary_path.is_file() {
        let (_, rows) = read_csv(&summary_path)?;
        let cells: Vec<[String; 4]> = rows
            .into_iter()
            .map(|r| {
                let fmt = |s: &str| {
                    s.parse::<f64>()
                        .map(|v| format!("{v:.6}"))
                        .unwrap_or_else(|_| s.to_string())
                };
                [r[0].clone(), fmt(&r[1]), fmt(&r[2]), fmt(&r[3])]
            })
            .collect();
        print_metric_table(&cells);
    }
    Ok(())
}
