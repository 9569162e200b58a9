//! Sweep rows, aggregates and their CSV/JSON forms.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::RunSpec;
use crate::diagnostics::Verdict;
use crate::error::Result;
use crate::{BoundReport64, Instance64, IterateTrace64, NoiseStats64};

/// One line of `rows.csv`. Column order is the field order below.
///
/// Result columns are empty when the run failed; `error` then holds the
/// message. `bound_verdicts` lists every check as `name=verdict`, joined by `;`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub run: usize,
    pub n: usize,
    pub sigma: f64,
    /// A number or `inf`.
    pub alpha: String,
    pub seed: u64,
    pub delta_op: Option<f64>,
    pub delta_zstar_inf: Option<f64>,
    pub thm1_ok: Option<bool>,
    pub thm3_ok: Option<bool>,
    pub prop_ebcrit_ok: Option<bool>,
    pub iterations: Option<usize>,
    pub termination_reason: Option<String>,
    pub f_final: Option<f64>,
    pub d2_final: Option<f64>,
    pub dinf_final: Option<f64>,
    pub rho_final: Option<f64>,
    pub lambda_hat: Option<f64>,
    pub checks_failed: Option<usize>,
    pub bound_verdicts: String,
    pub error: String,
}

impl RunRow {
    pub fn from_run(
        run: usize,
        inst: &Instance64,
        noise: &NoiseStats64,
        trace: &IterateTrace64,
        report: &BoundReport64,
    ) -> Self {
        let last = trace.last();
        let flags = noise.assumptions;
        RunRow {
            run,
            n: inst.n,
            sigma: inst.sigma,
            alpha: trace.config.alpha.to_string(),
            seed: inst.seed,
            delta_op: Some(noise.delta_op),
            delta_zstar_inf: Some(noise.delta_zstar_inf),
            thm1_ok: Some(flags.thm1_ok),
            thm3_ok: Some(flags.thm3_ok),
            prop_ebcrit_ok: Some(flags.prop_ebcrit_ok),
            iterations: Some(trace.iterations),
            termination_reason: Some(trace.termination_reason.to_string()),
            f_final: Some(last.f),
            d2_final: Some(last.d2_to_truth),
            dinf_final: Some(last.dinf_to_truth),
            rho_final: Some(last.rho),
            lambda_hat: report.rate.map(|r| r.lambda_hat),
            checks_failed: Some(
                report
                    .checks
                    .iter()
                    .filter(|c| c.verdict == Verdict::Fail)
                    .count(),
            ),
            bound_verdicts: report.verdict_string(),
            error: String::new(),
        }
    }

    pub(super) fn failed(spec: &RunSpec, message: &str) -> Self {
        RunRow {
            run: spec.run,
            n: spec.n,
            sigma: spec.sigma,
            alpha: spec.alpha.to_string(),
            seed: spec.seed,
            delta_op: None,
            delta_zstar_inf: None,
            thm1_ok: None,
            thm3_ok: None,
            prop_ebcrit_ok: None,
            iterations: None,
            termination_reason: None,
            f_final: None,
            d2_final: None,
            dinf_final: None,
            rho_final: None,
            lambda_hat: None,
            checks_failed: None,
            bound_verdicts: String::new(),
            error: message.to_string(),
        }
    }

    /// Names of the checks this row marks as failed.
    pub fn failed_checks(&self) -> impl Iterator<Item = &str> {
        self.bound_verdicts
            .split(';')
            .filter_map(|kv| kv.split_once('='))
            .filter(|(_, v)| *v == Verdict::Fail.to_string())
            .map(|(k, _)| k)
    }
}

/// Wall-clock time of one run, kept out of `rows.csv` so that rows stay reproducible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunTiming {
    pub run: usize,
    pub seconds: f64,
}

pub fn write_rows_csv<W: Write>(rows: &[RunRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows_csv<R: Read>(input: R) -> Result<Vec<RunRow>> {
    let mut rd = csv::Reader::from_reader(input);
    let rows = rd
        .deserialize()
        .collect::<std::result::Result<Vec<RunRow>, _>>()?;
    Ok(rows)
}

/// Mean and median of the available values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub count: usize,
    pub mean: Option<f64>,
    pub median: Option<f64>,
}

impl Stat {
    fn of(values: impl Iterator<Item = f64>) -> Self {
        let mut v: Vec<f64> = values.collect();
        if v.is_empty() {
            return Stat {
                count: 0,
                mean: None,
                median: None,
            };
        }
        v.sort_by(f64::total_cmp);
        let m = v.len();
        let median = if m % 2 == 1 {
            v[m / 2]
        } else {
            0.5 * (v[m / 2 - 1] + v[m / 2])
        };
        Stat {
            count: m,
            mean: Some(v.iter().sum::<f64>() / m as f64),
            median: Some(median),
        }
    }
}

/// Statistics of all runs sharing `(n, σ, α)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub n: usize,
    pub sigma: f64,
    pub alpha: String,
    pub runs: usize,
    pub errors: usize,
    pub thm1_ok: usize,
    pub thm3_ok: usize,
    pub prop_ebcrit_ok: usize,
    /// Completed runs with at least one failed check.
    pub runs_with_failures: usize,
    pub iterations: Stat,
    pub d2_final: Stat,
    pub dinf_final: Stat,
    pub rho_final: Stat,
    pub lambda_hat: Stat,
    /// Failed-check counts by check name.
    pub violations: BTreeMap<String, usize>,
}

/// Contents of `aggregate.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub runs: usize,
    pub errors: usize,
    pub runs_with_failures: usize,
    /// In order of first appearance in the rows.
    pub groups: Vec<Aggregate>,
}

/// Groups rows by `(n, σ, α)`; depends on nothing but the rows and their order.
pub fn aggregate_rows(rows: &[RunRow]) -> Summary {
    let mut keys: Vec<(usize, u64, &str)> = Vec::new();
    let mut members: Vec<Vec<&RunRow>> = Vec::new();
    for r in rows {
        let key = (r.n, r.sigma.to_bits(), r.alpha.as_str());
        match keys.iter().position(|k| *k == key) {
            Some(i) => members[i].push(r),
            None => {
                keys.push(key);
                members.push(vec![r]);
            }
        }
    }
    let groups: Vec<Aggregate> = members
        .iter()
        .map(|rs| {
            let count =
                |f: fn(&RunRow) -> Option<bool>| rs.iter().filter(|r| f(r) == Some(true)).count();
            let mut violations = BTreeMap::new();
            for r in rs {
                for name in r.failed_checks() {
                    *violations.entry(name.to_string()).or_insert(0) += 1;
                }
            }
            Aggregate {
                n: rs[0].n,
                sigma: rs[0].sigma,
                alpha: rs[0].alpha.clone(),
                runs: rs.len(),
                errors: rs.iter().filter(|r| !r.error.is_empty()).count(),
                thm1_ok: count(|r| r.thm1_ok),
                thm3_ok: count(|r| r.thm3_ok),
                prop_ebcrit_ok: count(|r| r.prop_ebcrit_ok),
                runs_with_failures: rs
                    .iter()
                    .filter(|r| r.checks_failed.is_some_and(|c| c > 0))
                    .count(),
                iterations: Stat::of(rs.iter().filter_map(|r| r.iterations.map(|i| i as f64))),
                d2_final: Stat::of(rs.iter().filter_map(|r| r.d2_final)),
                dinf_final: Stat::of(rs.iter().filter_map(|r| r.dinf_final)),
                rho_final: Stat::of(rs.iter().filter_map(|r| r.rho_final)),
                lambda_hat: Stat::of(rs.iter().filter_map(|r| r.lambda_hat)),
                violations,
            }
        })
        .collect();
    Summary {
        runs: rows.len(),
        errors: groups.iter().map(|g| g.errors).sum(),
        runs_with_failures: groups.iter().map(|g| g.runs_with_failures).sum(),
        groups,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gpm::StepSize;

    fn row(run: usize, sigma: f64, d2: Option<f64>, verdicts: &str) -> RunRow {
        let spec = RunSpec {
            run,
            n: 10,
            sigma,
            alpha: StepSize::Finite(4.0),
            seed: run as u64,
        };
        let mut r = RunRow::failed(&spec, "");
        r.d2_final = d2;
        r.checks_failed = d2.map(|_| verdicts.matches("=FAIL").count());
        r.bound_verdicts = verdicts.into();
        r
    }

    #[test]
    fn stat_mean_and_median() {
        let s = Stat::of([3.0, 1.0, 2.0, 10.0].into_iter());
        assert_eq!((s.count, s.mean, s.median), (4, Some(4.0), Some(2.5)));
        let s = Stat::of([5.0, 1.0, 2.0].into_iter());
        assert_eq!(s.median, Some(2.0));
        assert_eq!(Stat::of(std::iter::empty()).mean, None);
    }

    #[test]
    fn grouping_and_violation_counts() {
        let rows = vec![
            row(0, 0.1, Some(1.0), "a=pass;b=FAIL"),
            row(1, 0.2, Some(2.0), "a=n/a;b=pass"),
            row(2, 0.1, Some(3.0), "a=FAIL;b=FAIL"),
            row(3, 0.1, None, ""),
        ];
        let s = aggregate_rows(&rows);
        assert_eq!(s.groups.len(), 2);
        let g = &s.groups[0];
        assert_eq!((g.sigma, g.runs, g.runs_with_failures), (0.1, 3, 2));
        assert_eq!(g.d2_final.mean, Some(2.0));
        assert_eq!(g.violations.get("b"), Some(&2));
        assert_eq!(g.violations.get("a"), Some(&1));
        assert_eq!(s.runs_with_failures, 2);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let mut rows = vec![
            row(0, 0.1, Some(1.0 / 3.0), "a=pass"),
            row(1, 0.3, None, ""),
        ];
        rows[1].error = "boom, with a comma".into();
        rows[0].lambda_hat = Some(std::f64::consts::PI * 1e-7);
        let mut buf = Vec::new();
        write_rows_csv(&rows, &mut buf).unwrap();
        let header = String::from_utf8(buf.clone()).unwrap();
        assert!(header.starts_with("run,n,sigma,alpha,seed,delta_op,"));
        let back = read_rows_csv(buf.as_slice()).unwrap();
        assert_eq!(back, rows);
    }
}
