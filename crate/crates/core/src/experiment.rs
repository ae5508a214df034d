//! Batch experiments: run the approximation and the exact solvers over many
//! generated instances and aggregate per-case statistics.
//!
//! Averages of sizes and times are over completed runs only. Ratios are
//! computed per instance and need the maximum to have completed.

use std::io::Write;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use thiserror::Error;

use crate::approx::{self, SchedulePolicy};
use crate::gen::{self, GenError, GenParams};
use crate::ids::ProjectId;
use crate::instance::Instance;
use crate::ip::{self, IpError, Sense, SolveOptions};
use crate::matching::{Matching, MatchingError};
use crate::oracle::{self, EnumerationBudget, OracleError};
use crate::stability::{first_blocking_pair_unchecked, BlockingPair};

pub const CSV_HEADER: [&str; 15] = [
    "case",
    "min_a_over_max",
    "pct_a_eq_max",
    "pct_a_ge_098max",
    "avg_a",
    "avg_min",
    "avg_max",
    "avg_a_over_max",
    "avg_min_over_max",
    "avg_time_a_ms",
    "avg_time_min_ms",
    "avg_time_max_ms",
    "done_a",
    "done_min",
    "done_max",
];

pub const INSTANCE_CSV_HEADER: [&str; 13] = [
    "case",
    "index",
    "seed",
    "method",
    "binaries",
    "a",
    "min",
    "max",
    "time_a_ms",
    "time_min_ms",
    "time_max_ms",
    "total_min_ms",
    "total_max_ms",
];

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("cannot start worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    /// Per-solver wall clock limit.
    pub timeout: Option<Duration>,
    pub threads: usize,
    /// Instances with at most this many students go to the enumeration oracle.
    pub oracle_max_students: usize,
    /// Larger instances go to branch and bound if the model is this small.
    pub max_binaries: usize,
    /// Where to write LP files for instances too big for either solver.
    pub lp_dir: Option<PathBuf>,
    pub schedule: SchedulePolicy,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            timeout: Some(Duration::from_secs(1800)),
            threads: 1,
            oracle_max_students: 12,
            max_binaries: 600,
            lp_dir: None,
            schedule: SchedulePolicy::Fifo,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExactMethod {
    Oracle,
    BranchAndBound,
    /// Too large; LP files may have been written instead.
    Skipped,
}

impl ExactMethod {
    fn label(self) -> &'static str {
        match self {
            ExactMethod::Oracle => "oracle",
            ExactMethod::BranchAndBound => "ip",
            ExactMethod::Skipped => "n/a",
        }
    }
}

/// Outcome of one exact solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExactRun {
    /// `None` when the solver timed out.
    pub size: Option<usize>,
    pub solve_ms: f64,
    /// Including model construction.
    pub total_ms: f64,
}

impl ExactRun {
    pub fn timed_out(&self) -> bool {
        self.size.is_none()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InstanceResult {
    pub index: u64,
    pub seed: u64,
    pub method: ExactMethod,
    pub binaries: usize,
    pub approx: usize,
    pub time_a_ms: f64,
    /// `None` when the method was skipped.
    pub min: Option<ExactRun>,
    pub max: Option<ExactRun>,
}

impl InstanceResult {
    pub fn min_size(&self) -> Option<usize> {
        self.min.and_then(|r| r.size)
    }

    pub fn max_size(&self) -> Option<usize> {
        self.max.and_then(|r| r.size)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CaseStats {
    pub label: String,
    pub min_a_over_max: Option<f64>,
    pub pct_a_eq_max: Option<f64>,
    pub pct_a_ge_098max: Option<f64>,
    pub avg_a: Option<f64>,
    pub avg_min: Option<f64>,
    pub avg_max: Option<f64>,
    pub avg_a_over_max: Option<f64>,
    pub avg_min_over_max: Option<f64>,
    pub avg_time_a_ms: Option<f64>,
    pub avg_time_min_ms: Option<f64>,
    pub avg_time_max_ms: Option<f64>,
    pub done_a: usize,
    pub done_min: usize,
    pub done_max: usize,
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn ratio(a: usize, max: usize) -> f64 {
    if max == 0 {
        1.0
    } else {
        a as f64 / max as f64
    }
}

impl CaseStats {
    /// `results` must be in index order for the averages to be reproducible
    /// to the last bit.
    pub fn aggregate(label: &str, results: &[InstanceResult]) -> Self {
        let with_max: Vec<(&InstanceResult, usize)> =
            results.iter().filter_map(|r| r.max_size().map(|m| (r, m))).collect();
        let a_ratios: Vec<f64> = with_max.iter().map(|&(r, m)| ratio(r.approx, m)).collect();
        let pct = |pred: &dyn Fn(&(&InstanceResult, usize)) -> bool| {
            (!with_max.is_empty())
                .then(|| 100.0 * with_max.iter().filter(|x| pred(x)).count() as f64 / with_max.len() as f64)
        };
        let sizes = |pick: fn(&InstanceResult) -> Option<ExactRun>| {
            results.iter().filter_map(move |r| pick(r).filter(|x| !x.timed_out()))
        };
        Self {
            label: label.to_owned(),
            min_a_over_max: a_ratios.iter().copied().reduce(f64::min),
            pct_a_eq_max: pct(&|&(r, m)| r.approx == m),
            // Compared in integers so that 0.98 rounding never decides the outcome.
            pct_a_ge_098max: pct(&|&(r, m)| 50 * r.approx >= 49 * m),
            avg_a: mean(results.iter().map(|r| r.approx as f64)),
            avg_min: mean(sizes(|r| r.min).filter_map(|x| x.size).map(|x| x as f64)),
            avg_max: mean(sizes(|r| r.max).filter_map(|x| x.size).map(|x| x as f64)),
            avg_a_over_max: mean(a_ratios.iter().copied()),
            avg_min_over_max: mean(
                with_max
                    .iter()
                    .filter_map(|&(r, m)| r.min_size().map(|lo| ratio(lo, m))),
            ),
            avg_time_a_ms: mean(results.iter().map(|r| r.time_a_ms)),
            avg_time_min_ms: mean(sizes(|r| r.min).map(|x| x.solve_ms)),
            avg_time_max_ms: mean(sizes(|r| r.max).map(|x| x.solve_ms)),
            done_a: results.len(),
            done_min: sizes(|r| r.min).count(),
            done_max: sizes(|r| r.max).count(),
        }
    }

    fn record(&self) -> Vec<String> {
        let f = |v: Option<f64>, digits: usize| match v {
            Some(v) => format!("{v:.digits$}"),
            None => "N/A".to_owned(),
        };
        vec![
            self.label.clone(),
            f(self.min_a_over_max, 4),
            f(self.pct_a_eq_max, 1),
            f(self.pct_a_ge_098max, 1),
            f(self.avg_a, 2),
            f(self.avg_min, 2),
            f(self.avg_max, 2),
            f(self.avg_a_over_max, 4),
            f(self.avg_min_over_max, 4),
            f(self.avg_time_a_ms, 3),
            f(self.avg_time_min_ms, 3),
            f(self.avg_time_max_ms, 3),
            self.done_a.to_string(),
            self.done_min.to_string(),
            self.done_max.to_string(),
        ]
    }
}

/// Writes the header and one row per case, sorted by label.
pub fn write_case_csv<W: Write>(out: W, cases: &[CaseStats]) -> Result<(), ExperimentError> {
    let mut sorted: Vec<&CaseStats> = cases.iter().collect();
    sorted.sort_by(|a, b| a.label.cmp(&b.label));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for case in sorted {
        w.write_record(case.record())?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_instance_csv<W: Write>(out: W, label: &str, results: &[InstanceResult]) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(INSTANCE_CSV_HEADER)?;
    let size = |r: Option<ExactRun>| match r.and_then(|r| r.size) {
        Some(s) => s.to_string(),
        None => "N/A".to_owned(),
    };
    let ms = |r: Option<ExactRun>, total: bool| match r.filter(|r| !r.timed_out()) {
        Some(r) => format!("{:.3}", if total { r.total_ms } else { r.solve_ms }),
        None => "N/A".to_owned(),
    };
    for r in results {
        w.write_record([
            label.to_owned(),
            r.index.to_string(),
            r.seed.to_string(),
            r.method.label().to_owned(),
            r.binaries.to_string(),
            r.approx.to_string(),
            size(r.min),
            size(r.max),
            format!("{:.3}", r.time_a_ms),
            ms(r.min, false),
            ms(r.max, false),
            ms(r.min, true),
            ms(r.max, true),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn millis(d: Duration) -> f64 {
    d.as_secs_f64() * 1000.0
}

fn exact_oracle(inst: &Instance, sense: Sense, timeout: Option<Duration>) -> ExactRun {
    let budget = EnumerationBudget {
        wall: timeout,
        ..EnumerationBudget::unlimited_size()
    };
    let start = Instant::now();
    let result = match sense {
        Sense::Maximize => oracle::max_stable(inst, &budget),
        Sense::Minimize => oracle::min_stable(inst, &budget),
    };
    let elapsed = millis(start.elapsed());
    ExactRun {
        size: result.ok().map(|m| m.size()),
        solve_ms: elapsed,
        total_ms: elapsed,
    }
}

/// Runs the approximation and both exact solvers on one instance.
pub fn evaluate(
    inst: &Instance,
    index: u64,
    seed: u64,
    options: &RunOptions,
) -> Result<InstanceResult, ExperimentError> {
    let start = Instant::now();
    let a = approx::approx_match(inst, options.schedule);
    let time_a_ms = millis(start.elapsed());
    let mut result = InstanceResult {
        index,
        seed,
        method: ExactMethod::Oracle,
        binaries: 0,
        approx: a.size(),
        time_a_ms,
        min: None,
        max: None,
    };
    if inst.n_students() <= options.oracle_max_students {
        result.max = Some(exact_oracle(inst, Sense::Maximize, options.timeout));
        result.min = Some(exact_oracle(inst, Sense::Minimize, options.timeout));
        return Ok(result);
    }
    let solve_options = SolveOptions {
        max_binaries: options.max_binaries,
        time_limit: options.timeout,
        incumbent: Some(a),
        ..SolveOptions::default()
    };
    let mut runs = Vec::new();
    for sense in [Sense::Maximize, Sense::Minimize] {
        let total = Instant::now();
        let model = ip::build_model(inst, sense);
        result.binaries = model.n_binaries();
        if model.n_binaries() > options.max_binaries {
            result.method = ExactMethod::Skipped;
            if let Some(dir) = &options.lp_dir {
                let name = format!(
                    "inst_{index}_{}.lp",
                    if sense == Sense::Maximize { "max" } else { "min" }
                );
                std::fs::write(dir.join(name), model.emit_lp())?;
            }
            continue;
        }
        result.method = ExactMethod::BranchAndBound;
        let solve = Instant::now();
        let outcome = ip::solve(inst, &model, &solve_options);
        let solve_ms = millis(solve.elapsed());
        let size = match outcome {
            Ok(o) => Some(o.matching.size()),
            Err(IpError::BudgetExhausted { .. }) => None,
            Err(e) => unreachable!("guarded above: {e}"),
        };
        runs.push(ExactRun {
            size,
            solve_ms,
            total_ms: millis(total.elapsed()),
        });
    }
    if let [max, min] = runs[..] {
        result.max = Some(max);
        result.min = Some(min);
    }
    Ok(result)
}

fn pool(threads: usize) -> Result<rayon::ThreadPool, ExperimentError> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build()?)
}

/// Generates `count` instances (instance `i` uses seed `master ^ i`) and
/// evaluates them in parallel. Results come back in index order.
pub fn run_case(
    label: &str,
    params: &GenParams,
    count: u64,
    master_seed: u64,
    options: &RunOptions,
) -> Result<(CaseStats, Vec<InstanceResult>), ExperimentError> {
    params.validate()?;
    let results = pool(options.threads)?.install(|| {
        (0..count)
            .into_par_iter()
            .map(|i| {
                let seed = gen::instance_seed(master_seed, i);
                let inst = gen::generate(&GenParams { seed, ..params.clone() })?;
                evaluate(&inst, i, seed, options)
            })
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok((CaseStats::aggregate(label, &results), results))
}

/// Like [`run_case`] on instances supplied by the caller.
pub fn run_instances(
    label: &str,
    instances: &[Instance],
    options: &RunOptions,
) -> Result<(CaseStats, Vec<InstanceResult>), ExperimentError> {
    let results = pool(options.threads)?.install(|| {
        instances
            .par_iter()
            .enumerate()
            .map(|(i, inst)| evaluate(inst, i as u64, 0, options))
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok((CaseStats::aggregate(label, &results), results))
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("capacity or acceptability broken: {0}")]
    Infeasible(MatchingError),
    #[error("unstable: {0}")]
    Unstable(BlockingPair),
    #[error("approximation {approx} is below two thirds of the maximum {max}")]
    Ratio { approx: usize, max: usize },
}

/// Checks a raw assignment as produced by some solver. `max` is the maximum
/// stable size if known.
pub fn check_assignment(
    inst: &Instance,
    assignment: &[Option<ProjectId>],
    max: Option<usize>,
) -> Result<(), Violation> {
    let m = Matching::from_assignment(inst, assignment.to_vec()).map_err(Violation::Infeasible)?;
    if let Some(bp) = first_blocking_pair_unchecked(inst, &m) {
        return Err(Violation::Unstable(bp));
    }
    match max {
        Some(max) if 3 * m.size() < 2 * max => Err(Violation::Ratio { approx: m.size(), max }),
        _ => Ok(()),
    }
}

#[derive(Clone, Debug)]
pub struct SweepFailure {
    pub index: u64,
    pub seed: u64,
    pub violation: Violation,
    /// The offending instance, serialised.
    pub instance: String,
}

#[derive(Clone, Debug, Default)]
pub struct SweepReport {
    pub checked: u64,
    /// How many instances also had their ratio checked against an exact maximum.
    pub exact_checked: u64,
    pub failures: Vec<SweepFailure>,
}

impl SweepReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Checks stability, feasibility and the 2/3 bound of the approximation on
/// generated instances. Small instances use the oracle, others branch and
/// bound when the model fits in `options.max_binaries`.
pub fn correctness_sweep(
    params: &GenParams,
    count: u64,
    master_seed: u64,
    options: &RunOptions,
) -> Result<SweepReport, ExperimentError> {
    params.validate()?;
    let outcomes = pool(options.threads)?.install(|| {
        (0..count)
            .into_par_iter()
            .map(|i| {
                let seed = gen::instance_seed(master_seed, i);
                let inst = gen::generate(&GenParams { seed, ..params.clone() })?;
                let a = approx::approx_match(&inst, options.schedule);
                let max = exact_max(&inst, &a, options);
                let failure = check_assignment(&inst, a.assignment(), max)
                    .err()
                    .map(|violation| SweepFailure {
                        index: i,
                        seed,
                        violation,
                        instance: inst.to_text(),
                    });
                Ok::<_, ExperimentError>((max.is_some(), failure))
            })
            .collect::<Result<Vec<_>, _>>()
    })?;
    let mut report = SweepReport {
        checked: count,
        ..SweepReport::default()
    };
    for (exact, failure) in outcomes {
        report.exact_checked += exact as u64;
        report.failures.extend(failure);
    }
    Ok(report)
}

fn exact_max(inst: &Instance, approx: &Matching, options: &RunOptions) -> Option<usize> {
    if inst.n_students() <= options.oracle_max_students {
        let budget = EnumerationBudget {
            wall: options.timeout,
            ..EnumerationBudget::unlimited_size()
        };
        return match oracle::max_stable(inst, &budget) {
            Ok(m) => Some(m.size()),
            Err(OracleError::BudgetExceeded { .. } | OracleError::TooLarge { .. }) => None,
        };
    }
    let solve_options = SolveOptions {
        max_binaries: options.max_binaries,
        time_limit: options.timeout,
        // An unstable approximation would be rejected as incumbent; the sweep
        // reports it separately.
        incumbent: Some(approx.clone()).filter(|m| first_blocking_pair_unchecked(inst, m).is_none()),
        ..SolveOptions::default()
    };
    ip::solve_instance(inst, Sense::Maximize, &solve_options)
        .ok()
        .map(|o| o.matching.size())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samples;

    fn result(approx: usize, min: Option<usize>, max: Option<usize>) -> InstanceResult {
        let run = |s| ExactRun {
            size: s,
            solve_ms: 1.0,
            total_ms: 2.0,
        };
        InstanceResult {
            index: 0,
            seed: 0,
            method: ExactMethod::Oracle,
            binaries: 0,
            approx,
            time_a_ms: 0.5,
            min: Some(run(min)),
            max: Some(run(max)),
        }
    }

    #[test]
    fn tight_case() {
        let (stats, results) = run_instances("tight", &[samples::tight()], &RunOptions::default()).unwrap();
        assert_eq!(results[0].approx, 2);
        assert_eq!(results[0].max_size(), Some(3));
        assert_eq!(stats.min_a_over_max, Some(2.0 / 3.0));
        let mut csv = Vec::new();
        write_case_csv(&mut csv, &[stats]).unwrap();
        let text = String::from_utf8(csv).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
        assert!(lines
            .next()
            .unwrap()
            .starts_with("tight,0.6667,0.0,0.0,2.00,2.00,3.00,0.6667,0.6667,"));
    }

    #[test]
    fn aggregation_skips_timeouts() {
        let rs = [
            result(10, Some(9), Some(10)),
            result(5, None, None),
            result(48, Some(40), Some(50)),
        ];
        let s = CaseStats::aggregate("x", &rs);
        assert_eq!((s.done_a, s.done_min, s.done_max), (3, 2, 2));
        assert_eq!(s.pct_a_eq_max, Some(50.0));
        assert_eq!(s.pct_a_ge_098max, Some(50.0));
        assert_eq!(s.min_a_over_max, Some(0.96));
        assert_eq!(s.avg_max, Some(30.0));
        assert_eq!(s.avg_a, Some(21.0));
        assert!(s.avg_min_over_max.unwrap() <= s.avg_a_over_max.unwrap());
    }

    #[test]
    fn empty_case_prints_na() {
        let s = CaseStats::aggregate("none", &[]);
        assert_eq!(s.record()[1], "N/A");
        assert_eq!(s.record()[12], "0");
    }

    #[test]
    fn rows_sorted_by_label() {
        let cases = [CaseStats::aggregate("b", &[]), CaseStats::aggregate("a", &[])];
        let mut csv = Vec::new();
        write_case_csv(&mut csv, &cases).unwrap();
        let text = String::from_utf8(csv).unwrap();
        let labels: Vec<_> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
        assert_eq!(labels, ["a", "b"]);
    }

    #[test]
    fn injected_faults_flagged() {
        let inst = samples::clone_trap();
        let p = ProjectId::from_number;
        // p2 has capacity 1 and lecturer l1 has capacity 1.
        let overfull = [Some(p(2)), Some(p(2))];
        assert!(matches!(
            check_assignment(&inst, &overfull, None),
            Err(Violation::Infeasible(_))
        ));
        let unstable = [Some(p(1)), Some(p(3))];
        match check_assignment(&inst, &unstable, None) {
            Err(Violation::Unstable(bp)) => assert_eq!(bp.to_string(), "block s2 p2 3bii"),
            other => panic!("{other:?}"),
        }
        let tight = samples::tight();
        let a = approx::approx_match(&tight, SchedulePolicy::Fifo);
        assert!(check_assignment(&tight, a.assignment(), Some(3)).is_ok());
        assert_eq!(
            check_assignment(&tight, a.assignment(), Some(4)),
            Err(Violation::Ratio { approx: 2, max: 4 })
        );
    }

    #[test]
    fn small_sweep_is_clean() {
        let params = GenParams {
            n1: 8,
            n2: 5,
            n3: 3,
            total_project_cap: 11,
            total_lecturer_cap: 10,
            l_min: 1,
            l_max: 3,
            t_s: 0.3,
            t_l: 0.3,
            popularity_ratio: 5.0,
            seed: 0,
        };
        let report = correctness_sweep(&params, 40, 7, &RunOptions::default()).unwrap();
        assert!(report.passed(), "{:?}", report.failures);
        assert_eq!(report.exact_checked, 40);
    }

    #[test]
    fn oversized_models_emit_lp() {
        let dir = std::env::temp_dir().join(format!("spast-lp-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let options = RunOptions {
            oracle_max_students: 0,
            max_binaries: 0,
            lp_dir: Some(dir.clone()),
            ..RunOptions::default()
        };
        let (stats, results) = run_instances("big", &[samples::tight()], &options).unwrap();
        assert_eq!(results[0].method, ExactMethod::Skipped);
        assert_eq!(stats.done_max, 0);
        assert!(dir.join("inst_0_max.lp").exists());
        assert!(dir.join("inst_0_min.lp").exists());
        std::fs::remove_dir_all(dir).unwrap();
    }
}
