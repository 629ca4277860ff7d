//! Result serialization: CSV summaries, cost curves, combined tables, and
//! atomic file writes.
//!
//! Floats in CSV output are printed with 17 significant digits so a written
//! value parses back to the identical bit pattern.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::harness::ExperimentReport;
use crate::{Error, Result};

/// Shortest exact-replay float formatting used in CSV files: 17 significant
/// digits in scientific notation.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// One row per trial: seed, target pulls, attack cost, final pseudo-regret.
pub fn summary_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("seed,target_pulls,attack_cost,final_regret\n");
    for t in &report.trials {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            t.seed,
            t.target_pulls,
            t.attack_cost,
            fmt_f64(t.final_regret)
        );
    }
    out
}

/// Mean/std attack cost at each checkpoint.
pub fn cost_curve_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("t,mean_cost,std_cost\n");
    for p in &report.cost_curve {
        let _ = writeln!(
            out,
            "{},{},{}",
            p.t,
            fmt_f64(p.mean_cost),
            fmt_f64(p.std_cost)
        );
    }
    out
}

/// Pretty JSON for the full report.
pub fn report_json(report: &ExperimentReport) -> Result<String> {
    serde_json::to_string_pretty(report)
        .map_err(|e| Error::Numeric(format!("report serialization failed: {e}")))
}

pub fn report_from_json(text: &str) -> Result<ExperimentReport> {
    serde_json::from_str(text).map_err(|e| Error::Data {
        line: None,
        msg: format!("cannot parse report: {e}"),
    })
}

/// Combined table across reports: one row per (agent, attacker) pair, one
/// column per dataset, cells holding mean target pulls. Missing cells stay
/// empty. Fails if reports disagree on the horizon.
pub fn table_csv(reports: &[ExperimentReport]) -> Result<String> {
    if reports.is_empty() {
        return Err(Error::Data {
            line: None,
            msg: "no reports to tabulate".to_string(),
        });
    }
    let horizon = reports[0].params.horizon;
    for r in reports {
        if r.params.horizon != horizon {
            return Err(Error::Data {
                line: None,
                msg: format!(
                    "inconsistent horizons across reports: {} vs {horizon}",
                    r.params.horizon
                ),
            });
        }
    }
    let mut datasets: Vec<String> = reports.iter().map(|r| r.dataset.clone()).collect();
    datasets.sort();
    datasets.dedup();
    let mut cells: BTreeMap<(String, String), BTreeMap<String, f64>> = BTreeMap::new();
    for r in reports {
        cells
            .entry((r.agent.clone(), r.attacker.clone()))
            .or_default()
            .insert(r.dataset.clone(), r.target_pulls.mean);
    }
    let mut out = String::from("agent,attacker");
    for ds in &datasets {
        let _ = write!(out, ",{ds}");
    }
    out.push('\n');
    for ((agent, attacker), row) in &cells {
        let _ = write!(out, "{agent},{attacker}");
        for ds in &datasets {
            match row.get(ds) {
                Some(v) => {
                    let _ = write!(out, ",{}", fmt_f64(*v));
                }
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    Ok(out)
}

/// Write a file atomically: temp file in the same directory, then rename,
/// so partial runs never leave a plausible-looking artifact behind.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let tmp = path.with_extension(format!("tmp.{}", std::process::id()));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{CurvePoint, Moments, TrialResult};
    use crate::ModelParams;

    fn fake_report(dataset: &str, agent: &str, attacker: &str, mean: f64) -> ExperimentReport {
        ExperimentReport {
            agent: agent.to_string(),
            attacker: attacker.to_string(),
            dataset: dataset.to_string(),
            alpha_source: "fixed".to_string(),
            params: ModelParams::synthetic_defaults(1000),
            n_trials: 1,
            master_seed: 1,
            target_pulls: Moments { mean, std: 0.0 },
            attack_cost: Moments {
                mean: 3.0,
                std: 0.0,
            },
            final_regret: Moments {
                mean: 1.5,
                std: 0.0,
            },
            cost_curve: vec![CurvePoint {
                t: 1000,
                mean_cost: 3.0,
                std_cost: 0.0,
            }],
            trials: vec![TrialResult {
                seed: 7,
                target_pulls: mean as u64,
                attack_cost: 3,
                final_regret: 1.5,
                pull_counts: vec![0, mean as u64],
                cost_curve: vec![(1000, 3)],
                regret_curve: vec![(1000, 1.5)],
                degenerate_rounds: 0,
                rounds: None,
            }],
        }
    }

    #[test]
    fn float_formatting_round_trips_exactly() {
        for &x in &[0.1, 1.0 / 3.0, 981018.7, f64::MIN_POSITIVE, -2.5e300] {
            let s = fmt_f64(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{s}");
        }
    }

    #[test]
    fn summary_csv_shape() {
        let r = fake_report("synthetic", "linucb", "whitebox", 900.0);
        let csv = summary_csv(&r);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "seed,target_pulls,attack_cost,final_regret"
        );
        let row = lines.next().unwrap();
        assert!(row.starts_with("7,900,3,"));
        assert!(lines.next().is_none());
    }

    #[test]
    fn table_merges_datasets_and_leaves_gaps_empty() {
        let reports = vec![
            fake_report("synthetic", "linucb", "whitebox", 900.0),
            fake_report("jester", "linucb", "whitebox", 800.0),
            fake_report("synthetic", "lints", "none", 50.0),
        ];
        let csv = table_csv(&reports).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "agent,attacker,jester,synthetic");
        assert_eq!(lines.len(), 3);
        // lints/none has no jester cell -> empty field between the commas
        let lints_row = lines.iter().find(|l| l.starts_with("lints,none")).unwrap();
        assert!(lints_row.starts_with("lints,none,,"));
    }

    #[test]
    fn table_rejects_mixed_horizons() {
        let a = fake_report("synthetic", "linucb", "whitebox", 900.0);
        let mut b = fake_report("synthetic", "linucb", "none", 10.0);
        b.params.horizon = 77;
        assert!(table_csv(&[a, b]).is_err());
    }

    #[test]
    fn report_json_round_trip() {
        let r = fake_report("synthetic", "linucb", "whitebox", 900.0);
        let text = report_json(&r).unwrap();
        let back = report_from_json(&text).unwrap();
        assert_eq!(back.agent, "linucb");
        assert_eq!(back.trials.len(), 1);
        assert_eq!(back.target_pulls.mean, 900.0);
    }

    #[test]
    fn atomic_write_creates_parents_and_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/out.csv");
        atomic_write(&path, b"one").unwrap();
        atomic_write(&path, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "two");
        // no temp litter
        let entries: Vec<_> = std::fs::read_dir(path.parent().unwrap())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        assert_eq!(entries.len(), 1);
    }
}
