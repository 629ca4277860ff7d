//! Command implementations behind the `banditlab` binary.
//!
//! Three commands: `run` executes a configured experiment and writes
//! `report.json` / `summary.csv` / `cost_curve.csv`; `table` merges report
//! files into one results table; `prep` turns a ratings CSV into a feature
//! file. All file writes are atomic. Exit codes: 0 success, 2 config error,
//! 3 data error, 4 numeric failure.

use std::path::{Path, PathBuf};

use banditlab::config::ExperimentConfig;
use banditlab::dataprep::{self, FactorizeOptions};
use banditlab::harness::{run_experiment, ExperimentReport, ExperimentSetup};
use banditlab::output;
use banditlab::{Error, Result};

/// Environment variable controlling worker thread count (0 or unset: use
/// available parallelism).
pub const THREADS_ENV: &str = "BANDITLAB_THREADS";

/// Map an error onto the documented process exit code.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::InvalidParams(_) => 2,
        Error::Data { .. } | Error::Io(_) | Error::AssumptionViolated { .. } => 3,
        Error::Numeric(_) | Error::DegenerateDenominator => 4,
        Error::Trial { source, .. } => exit_code(source),
    }
}

fn threads_from_env() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(0),
        Ok(v) => v.trim().parse().map_err(|_| {
            Error::Config(format!(
                "{THREADS_ENV} must be a non-negative integer, got {v:?}"
            ))
        }),
    }
}

/// Run the experiment described by a config file. Returns the report and
/// the directory the artifacts were written to.
pub fn cmd_run(config_path: &Path) -> Result<(ExperimentReport, PathBuf)> {
    let cfg = ExperimentConfig::load(config_path)?;
    let base = config_path.parent().unwrap_or_else(|| Path::new("."));
    let built = cfg.build(base)?;
    let threads = threads_from_env()?;
    let setup = ExperimentSetup {
        env: &built.env,
        params: built.params,
        agent: built.agent,
        attacker: built.attacker,
        n_trials: built.n_trials,
        master_seed: built.master_seed,
        checkpoints: built.checkpoints,
        threads,
        record_rounds: built.record_rounds,
        dataset: built.dataset,
        alpha_source: built.alpha_source,
    };
    let report = run_experiment(&setup)?;
    let out_dir = built.out_dir;
    output::atomic_write(
        &out_dir.join("report.json"),
        output::report_json(&report)?.as_bytes(),
    )?;
    output::atomic_write(
        &out_dir.join("summary.csv"),
        output::summary_csv(&report).as_bytes(),
    )?;
    output::atomic_write(
        &out_dir.join("cost_curve.csv"),
        output::cost_curve_csv(&report).as_bytes(),
    )?;
    println!(
        "{} / {} on {}: mean target pulls {:.1} of {} rounds ({:.2}%), mean attack cost {:.1} [{} trials, alpha {:.4} ({})]",
        report.attacker,
        report.agent,
        report.dataset,
        report.target_pulls.mean,
        report.params.horizon,
        100.0 * report.target_pulls.mean / report.params.horizon as f64,
        report.attack_cost.mean,
        report.n_trials,
        report.params.alpha,
        report.alpha_source,
    );
    Ok((report, out_dir))
}

/// Collect every `report.json` under `dir` (recursively, sorted by path)
/// and emit the combined table CSV. Also writes `table.csv` into `dir`.
pub fn cmd_table(dir: &Path) -> Result<String> {
    let mut paths = Vec::new();
    collect_reports(dir, &mut paths)?;
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Data {
            line: None,
            msg: format!("no report.json found under {}", dir.display()),
        });
    }
    let mut reports = Vec::with_capacity(paths.len());
    for p in &paths {
        let text = std::fs::read_to_string(p)?;
        reports.push(output::report_from_json(&text)?);
    }
    let csv = output::table_csv(&reports)?;
    output::atomic_write(&dir.join("table.csv"), csv.as_bytes())?;
    print!("{csv}");
    Ok(csv)
}

fn collect_reports(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        let path = entry.path();
        if path.is_dir() {
            collect_reports(&path, out)?;
        } else if path.file_name().is_some_and(|n| n == "report.json") {
            out.push(path);
        }
    }
    Ok(())
}

/// Options for `prep`.
#[derive(Debug, Clone)]
pub struct PrepOptions {
    pub ratings: PathBuf,
    pub out: PathBuf,
    pub d: usize,
    pub reg: f64,
    pub iterations: usize,
    pub seed: u64,
    pub lo: f64,
    pub hi: f64,
    pub l_bound: f64,
    pub s_bound: f64,
    pub target_arm: Option<usize>,
    pub bias: Option<f64>,
}

impl PrepOptions {
    pub fn new(ratings: PathBuf, out: PathBuf) -> Self {
        PrepOptions {
            ratings,
            out,
            d: 6,
            reg: 0.1,
            iterations: 20,
            seed: 1,
            lo: 0.0,
            hi: 1.0,
            l_bound: std::f64::consts::SQRT_2,
            s_bound: std::f64::consts::SQRT_2,
            target_arm: None,
            bias: None,
        }
    }
}

/// Ingest, normalize, factorize, validate, and export a feature file.
pub fn cmd_prep(opts: &PrepOptions) -> Result<()> {
    let table = dataprep::ingest_ratings(&opts.ratings)?;
    let table = dataprep::normalize_ratings(&table, opts.lo, opts.hi)?;
    let f = FactorizeOptions {
        d: opts.d,
        reg: opts.reg,
        iterations: opts.iterations,
        seed: opts.seed,
        l_bound: opts.l_bound,
        s_bound: opts.s_bound,
        target_arm: opts.target_arm,
        bias: opts.bias,
    };
    let ff = dataprep::factorize(&table, &f)?;
    dataprep::export_features(&ff, &opts.out)?;
    println!(
        "wrote {}: {} users x {} items, d = {}, min mean {:.6}, alpha {:.6} (target arm {}), scales user {:.6} item {:.6}",
        opts.out.display(),
        ff.users.len(),
        ff.items.len(),
        ff.d,
        ff.meta.min_mean,
        ff.meta.alpha,
        ff.meta.target_arm,
        ff.meta.user_scale,
        ff.meta.item_scale,
    );
    Ok(())
}
