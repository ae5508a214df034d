//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.

use std::ops::ControlFlow;
use std::time::{Duration, Instant};

use spast_core::approx::{self, ApproxOptions, SchedulePolicy};
use spast_core::experiment::{self, RunOptions};
use spast_core::gen::{self, GenParams};
use spast_core::hrt::{self, HrtInstance, HrtMatching};
use spast_core::ip::{self, Sense, SolveOptions};
use spast_core::oracle::{self, EnumerationBudget};
use spast_core::{find_blocking_pairs, is_stable, samples, satisfies_condition_star, HospitalId, Matching, ResidentId};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn pairs_of(m: &Matching) -> Vec<(u32, u32)> {
    m.pairs().map(|(s, p)| (s.number(), p.number())).collect()
}

/// Small instances with the SIZE family's proportions.
fn small_params(n1: usize, ties: f64, l_max: usize, seed: u64) -> GenParams {
    let n2 = (n1 * 3).div_ceil(5).max(2);
    GenParams {
        n1,
        n2,
        n3: (n1 * 2).div_ceil(5).max(1),
        total_project_cap: (n1 * 7).div_ceil(5) as u64,
        total_lecturer_cap: (n1 * 6).div_ceil(5) as u64,
        l_min: 1,
        l_max: l_max.min(n2),
        t_s: ties,
        t_l: ties,
        popularity_ratio: 5.0,
        seed,
    }
}

const TIGHT_TRACE: &str = "\
step 1 | s1 applies p3, accepted | p3 - -
step 2 | s2 applies p3, accepted | - p3 -
step 3 | s3 applies p3, rejected, p3 pref removed by s3 | - p3 -
step 4 | s3 applies p2, accepted | - p3 p2
step 5 | s1 applies p3, accepted, p3 pref removed by s2 | p3 - p2
step 6 | s2 moves to phase 2 | p3 - p2
step 7 | s2 applies p3, rejected, p3 pref removed by s2 | p3 - p2
step 8 | s2 moves to phase 3 | p3 - p2
";

fn tight_example() -> Outcome {
    let inst = samples::tight();
    let options = ApproxOptions {
        schedule: SchedulePolicy::Fifo,
        record_events: true,
        audit: false,
    };
    let start = Instant::now();
    let run = approx::run(&inst, &options);
    let elapsed = start.elapsed();
    ensure!(
        pairs_of(&run.matching) == [(1, 3), (3, 2)],
        "approx gave {:?}",
        pairs_of(&run.matching)
    );
    let trace = approx::render_trace(&inst, &run.events);
    ensure!(trace == TIGHT_TRACE, "trace differs:\n{trace}");
    let max = oracle::max_stable(&inst, &EnumerationBudget::default()).unwrap().size();
    let ip_max = ip::solve_instance(&inst, Sense::Maximize, &SolveOptions::default())
        .unwrap()
        .matching
        .size();
    ensure!(max == 3 && ip_max == 3, "max {max}, ip max {ip_max}");
    ensure!(
        3 * run.matching.size() == 2 * max,
        "ratio {}/{max}",
        run.matching.size()
    );
    ensure!(elapsed < Duration::from_millis(1), "took {elapsed:?}");
    Ok(format!("A = 2, Max = 3, 8-step trace identical, {elapsed:?}"))
}

const CLONE_TRAP_HRT: &str = "\
hrt 1
counts 3 3
hospital 1 cap 1 project 1 prefs 3 1
hospital 2 cap 1 project 2 prefs 3 2 1
hospital 3 cap 1 project 3 prefs 2
resident 1 student 1 prefs 1 2
resident 2 student 2 prefs 2 3
resident 3 dummy-of 1 prefs ( 1 2 )
";

fn counterexample() -> Outcome {
    let start = Instant::now();
    let inst = samples::clone_trap();
    let clone = hrt::clone_to_hrt(&inst);
    ensure!(
        clone == HrtInstance::parse(CLONE_TRAP_HRT).unwrap(),
        "clone differs:\n{}",
        clone.to_text()
    );
    let (r, h) = (ResidentId::from_number, HospitalId::from_number);
    let m = HrtMatching::from_pairs(&clone, [(r(1), h(1)), (r(2), h(3)), (r(3), h(2))]).unwrap();
    ensure!(hrt::hrt_is_stable(&clone, &m), "M' rejected");
    let back = hrt::pull_back(&inst, &clone, &m).unwrap();
    ensure!(
        pairs_of(&back) == [(1, 1), (2, 3)],
        "pull back gave {:?}",
        pairs_of(&back)
    );
    let blocking = find_blocking_pairs(&inst, &back).unwrap();
    let found: Vec<_> = blocking
        .iter()
        .map(|b| (b.student.number(), b.project.number()))
        .collect();
    ensure!(found == [(2, 2)], "blocking pairs {found:?}");
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_millis(1), "took {elapsed:?}");
    Ok(format!(
        "clone verbatim, M' stable, pull-back blocked by {}, {elapsed:?}",
        blocking[0]
    ))
}

fn correctness_sweep() -> Outcome {
    let start = Instant::now();
    let combos: Vec<(usize, f64)> = (4..=12).flat_map(|n1| [0.0, 0.2, 0.5].map(|t| (n1, t))).collect();
    let total = 1000u64;
    let (mut checked, mut exact) = (0, 0);
    for (i, &(n1, t)) in combos.iter().enumerate() {
        let count = total / combos.len() as u64 + u64::from((i as u64) < total % combos.len() as u64);
        let report = experiment::correctness_sweep(
            &small_params(n1, t, 4, 0),
            count,
            1000 * i as u64,
            &RunOptions::default(),
        )
        .map_err(|e| e.to_string())?;
        if let Some(f) = report.failures.first() {
            return Err(format!("n1 = {n1}, seed {}: {}\n{}", f.seed, f.violation, f.instance));
        }
        checked += report.checked;
        exact += report.exact_checked;
    }
    ensure!(checked == total && exact == total, "checked {checked}, exact {exact}");
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(120), "took {elapsed:?}");
    Ok(format!(
        "{checked} instances, all stable and within 2/3 of the oracle maximum, {elapsed:.1?}"
    ))
}

fn ip_equivalence() -> Outcome {
    let start = Instant::now();
    let budget = EnumerationBudget::default();
    let mut matchings = 0u64;
    let mut stable = 0u64;
    for i in 0..200u64 {
        let params = small_params(2 + (i % 5) as usize, [0.0, 0.3, 0.6][(i % 3) as usize], 3, i);
        let inst = gen::generate(&params).unwrap();
        let model = ip::build_model(&inst, Sense::Maximize);
        let mut mismatch = None;
        oracle::for_each_feasible(&inst, &budget, |m| {
            matchings += 1;
            let s = is_stable(&inst, m).unwrap();
            stable += s as u64;
            if model.check_feasible(m).feasible() != s || satisfies_condition_star(&inst, m).unwrap() != s {
                mismatch = Some(m.clone());
                return ControlFlow::Break(());
            }
            ControlFlow::Continue(())
        })
        .unwrap();
        if let Some(m) = mismatch {
            return Err(format!(
                "instance {i}: disagreement on {:?}\n{}",
                pairs_of(&m),
                inst.to_text()
            ));
        }
        for sense in [Sense::Maximize, Sense::Minimize] {
            let got = ip::solve_instance(&inst, sense, &SolveOptions::default())
                .unwrap()
                .matching
                .size();
            let want = match sense {
                Sense::Maximize => oracle::max_stable(&inst, &budget),
                Sense::Minimize => oracle::min_stable(&inst, &budget),
            }
            .unwrap()
            .size();
            ensure!(got == want, "instance {i} {sense:?}: ip {got}, oracle {want}");
        }
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(120), "took {elapsed:?}");
    Ok(format!(
        "200 instances, {matchings} feasible matchings ({stable} stable) agree, objectives match, {elapsed:.1?}"
    ))
}

fn no_ties_optimal() -> Outcome {
    let params = GenParams {
        n1: 50,
        n2: 40,
        n3: 20,
        total_project_cap: 70,
        total_lecturer_cap: 60,
        l_min: 3,
        l_max: 5,
        t_s: 0.0,
        t_l: 0.0,
        popularity_ratio: 5.0,
        seed: 0,
    };
    let options = RunOptions {
        max_binaries: usize::MAX,
        ..RunOptions::default()
    };
    let (stats, _) = experiment::run_case("TIES1-50", &params, 300, 5, &options).map_err(|e| e.to_string())?;
    ensure!(stats.done_max == 300, "only {} maxima", stats.done_max);
    ensure!(
        stats.pct_a_eq_max == Some(100.0),
        "A = Max on {:?}%",
        stats.pct_a_eq_max
    );
    Ok("300 instances, A = Max on 100.0%".into())
}

fn near_optimality() -> Outcome {
    let start = Instant::now();
    let (stats, _) = experiment::run_case("SIZE-30", &GenParams::size_shaped(30), 200, 6, &RunOptions::default())
        .map_err(|e| e.to_string())?;
    ensure!(stats.done_max == 200, "only {} maxima", stats.done_max);
    let (mean, min) = (stats.avg_a_over_max.unwrap(), stats.min_a_over_max.unwrap());
    let summary = format!(
        "mean A/Max {mean:.4}, minimum {min:.4}, A = Max on {:.1}%",
        stats.pct_a_eq_max.unwrap()
    );
    ensure!(mean >= 0.96 && min >= 0.85, "{summary}");
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(300), "took {elapsed:?}");
    Ok(format!("{summary}, {elapsed:.1?}"))
}

fn median(mut xs: Vec<Duration>) -> Duration {
    xs.sort();
    (xs[xs.len() / 2 - 1] + xs[xs.len() / 2]) / 2
}

fn linear_time() -> Outcome {
    let options = ApproxOptions {
        schedule: SchedulePolicy::Fifo,
        record_events: false,
        audit: false,
    };
    let mut medians = Vec::new();
    let mut pairs = Vec::new();
    let mut worst_applications = 0;
    for n1 in [2000, 8000] {
        let mut times = Vec::new();
        let mut m = 0;
        for i in 0..20 {
            let inst = gen::generate(&GenParams {
                seed: i,
                ..GenParams::size_shaped(n1)
            })
            .unwrap();
            m += inst.n_pairs();
            approx::run(&inst, &options);
            let start = Instant::now();
            let run = approx::run(&inst, &options);
            times.push(start.elapsed());
            worst_applications = worst_applications.max(run.stats.max_pair_applications);
        }
        medians.push(median(times));
        pairs.push(m / 20);
    }
    let factor = medians[1].as_secs_f64() / medians[0].as_secs_f64();
    let summary = format!(
        "median {:?} at m = {} vs {:?} at m = {}, factor {factor:.2}, at most {worst_applications} applications per pair",
        medians[0], pairs[0], medians[1], pairs[1]
    );
    ensure!(factor <= 6.0 && worst_applications <= 3, "{summary}");
    Ok(summary)
}

fn cloning_size_law() -> Outcome {
    let start = Instant::now();
    let budget = EnumerationBudget::default();
    let (mut spa, mut hrt_count) = (0, 0);
    for i in 0..200u64 {
        let params = small_params(2 + (i % 4) as usize, [0.0, 0.3, 0.6][(i % 3) as usize], 3, 7 * i + 1);
        let inst = gen::generate(&params).unwrap();
        let clone = hrt::clone_to_hrt(&inst);
        let dummies: usize = hrt::dummy_counts(&inst).iter().map(|&f| f as usize).sum();
        for m in oracle::enumerate_stable(&inst, &budget).unwrap() {
            spa += 1;
            let t = hrt::transport_matching(&inst, &clone, &m).map_err(|e| e.to_string())?;
            ensure!(
                hrt::hrt_is_stable(&clone, &t) && t.size() == m.size() + dummies,
                "instance {i}: transport of {:?} fails\n{}",
                pairs_of(&m),
                inst.to_text()
            );
        }
        let hrt_budget = EnumerationBudget {
            max_students: 16,
            ..EnumerationBudget::default()
        };
        for m in hrt::hrt_enumerate_stable(&clone, &hrt_budget).map_err(|e| e.to_string())? {
            hrt_count += 1;
            ensure!(
                clone.dummies().all(|r| m.hospital_of(r).is_some()),
                "instance {i}: stable clone matching leaves a dummy free\n{}",
                clone.to_text()
            );
        }
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(120), "took {elapsed:?}");
    Ok(format!(
        "200 instances, {spa} stable matchings transported, {hrt_count} clone matchings assign every dummy, {elapsed:.1?}"
    ))
}

/// Drops the timing columns.
fn size_columns(csv: &[u8]) -> Vec<Vec<String>> {
    String::from_utf8_lossy(csv)
        .lines()
        .map(|line| {
            line.split(',')
                .enumerate()
                .filter(|(i, _)| !(9..=11).contains(i))
                .map(|(_, f)| f.to_owned())
                .collect()
        })
        .collect()
}

fn determinism() -> Outcome {
    let params = GenParams::size_shaped(40);
    for i in 0..5 {
        let p = GenParams {
            seed: gen::instance_seed(99, i),
            ..params.clone()
        };
        let (a, b) = (gen::generate(&p).unwrap(), gen::generate(&p).unwrap());
        ensure!(a.to_text() == b.to_text(), "instance {i} differs");
        for schedule in [SchedulePolicy::Fifo, SchedulePolicy::Shuffled(i)] {
            let (x, y) = (approx::approx_match(&a, schedule), approx::approx_match(&b, schedule));
            ensure!(x.to_text() == y.to_text(), "matching {i} differs");
        }
        for sense in [Sense::Maximize, Sense::Minimize] {
            ensure!(
                ip::build_model(&a, sense).emit_lp() == ip::build_model(&b, sense).emit_lp(),
                "LP {i} differs"
            );
        }
        let exact = ip::solve_instance(&a, Sense::Maximize, &SolveOptions::default())
            .unwrap()
            .matching;
        let again = ip::solve_instance(&b, Sense::Maximize, &SolveOptions::default())
            .unwrap()
            .matching;
        ensure!(exact == again, "exact matching {i} differs");
    }
    let mut csvs = Vec::new();
    for threads in [1, 3] {
        let options = RunOptions {
            threads,
            ..RunOptions::default()
        };
        let small = GenParams::size_shaped(20);
        let (a, _) = experiment::run_case("S20", &small, 30, 3, &options).map_err(|e| e.to_string())?;
        let (b, _) =
            experiment::run_case("S10", &small_params(10, 0.3, 4, 0), 30, 3, &options).map_err(|e| e.to_string())?;
        let mut out = Vec::new();
        experiment::write_case_csv(&mut out, &[a, b]).map_err(|e| e.to_string())?;
        csvs.push(size_columns(&out));
    }
    ensure!(csvs[0] == csvs[1], "CSV size columns differ across thread counts");
    Ok("instances, matchings, LP files and CSV size columns identical across runs and thread counts".into())
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("tight example", tight_example),
        ("counterexample", counterexample),
        ("correctness sweep", correctness_sweep),
        ("IP equivalence", ip_equivalence),
        ("no-ties optimality", no_ties_optimal),
        ("near-optimality band", near_optimality),
        ("linear time", linear_time),
        ("cloning size law", cloning_size_law),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {} ({name}): PASS - {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} ({name}): FAIL - {detail}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
