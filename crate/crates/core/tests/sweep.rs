use spast_core::experiment::{correctness_sweep, RunOptions};
use spast_core::gen::GenParams;

#[test]
fn five_hundred_small_instances_have_no_violations() {
    for (chunk, ties) in [0.0, 0.25, 0.5, 0.75, 1.0].into_iter().enumerate() {
        let params = GenParams {
            n1: 10,
            n2: 6,
            n3: 4,
            total_project_cap: 14,
            total_lecturer_cap: 12,
            l_min: 1,
            l_max: 4,
            t_s: ties,
            t_l: ties,
            popularity_ratio: 5.0,
            seed: 0,
        };
        let report = correctness_sweep(&params, 100, 31 * chunk as u64, &RunOptions::default()).unwrap();
        assert_eq!(report.exact_checked, 100);
        if let Some(f) = report.failures.first() {
            panic!("seed {}: {}\n{}", f.seed, f.violation, f.instance);
        }
    }
}
