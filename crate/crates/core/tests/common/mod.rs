#![allow(dead_code)]

use proptest::collection::vec;
use proptest::prelude::*;
use spast_core::{Instance, LecturerId, Matching, PrefList, ProjectId, StudentId};

/// Raw choices an instance is built from; kept separate so shrinking works
/// on plain numbers.
#[derive(Clone, Debug)]
struct Raw {
    n2: usize,
    n3: usize,
    project_cap: Vec<u32>,
    project_lecturer: Vec<usize>,
    lecturer_cap: Vec<u32>,
    /// (project, tied with the previous entry)
    student_lists: Vec<Vec<(usize, bool)>>,
    /// Lecturer k ranks student i in bucket `keys[k][i]`; equal keys tie.
    keys: Vec<Vec<u8>>,
}

fn build(raw: Raw) -> Instance {
    let n1 = raw.student_lists.len();
    let student_prefs: Vec<PrefList<ProjectId>> = raw
        .student_lists
        .iter()
        .map(|entries| {
            let mut groups: Vec<Vec<ProjectId>> = Vec::new();
            let mut seen = vec![false; raw.n2];
            for &(p, tied) in entries {
                if std::mem::replace(&mut seen[p], true) {
                    continue;
                }
                match groups.last_mut() {
                    Some(g) if tied => g.push(ProjectId::from_index(p)),
                    _ => groups.push(vec![ProjectId::from_index(p)]),
                }
            }
            PrefList::from_groups(groups)
        })
        .collect();
    let lecturer_prefs = (0..raw.n3)
        .map(|k| {
            let mut buckets: Vec<Vec<StudentId>> = vec![Vec::new(); 4];
            for s in 0..n1 {
                let ranks_k = student_prefs[s]
                    .items()
                    .iter()
                    .any(|p| raw.project_lecturer[p.index()] == k);
                if ranks_k {
                    buckets[raw.keys[k][s] as usize].push(StudentId::from_index(s));
                }
            }
            PrefList::from_groups(buckets)
        })
        .collect();
    Instance::new(
        raw.project_cap,
        raw.project_lecturer.into_iter().map(LecturerId::from_index).collect(),
        raw.lecturer_cap,
        student_prefs,
        lecturer_prefs,
    )
    .expect("construction respects every invariant")
}

/// Random instances with up to `max_students` students, `max_projects`
/// projects and three lecturers, with ties on both sides.
pub fn arb_instance(max_students: usize, max_projects: usize) -> impl Strategy<Value = Instance> {
    (1..=max_students, 1..=max_projects)
        .prop_flat_map(|(n1, n2)| (Just(n1), Just(n2), 1..=n2.min(3)))
        .prop_flat_map(|(n1, n2, n3)| {
            (
                vec(1u32..=3, n2),
                vec(0..n3, n2),
                vec(1u32..=4, n3),
                vec(vec((0..n2, any::<bool>()), 0..=n2.min(4)), n1),
                vec(vec(0u8..4, n1), n3),
            )
                .prop_map(
                    move |(project_cap, project_lecturer, lecturer_cap, student_lists, keys)| Raw {
                        n2,
                        n3,
                        project_cap,
                        project_lecturer,
                        lecturer_cap,
                        student_lists,
                        keys,
                    },
                )
        })
        .prop_map(build)
}

/// An instance plus a capacity-feasible matching on it. The matching is
/// built greedily from random choices, skipping those that do not fit.
pub fn arb_instance_and_matching(
    max_students: usize,
    max_projects: usize,
) -> impl Strategy<Value = (Instance, Matching)> {
    arb_instance(max_students, max_projects).prop_flat_map(|inst| {
        let n1 = inst.n_students();
        (
            Just(inst),
            vec(any::<prop::sample::Index>(), n1),
            vec(any::<bool>(), n1),
        )
            .prop_map(|(inst, picks, skip)| {
                let mut m = Matching::empty(&inst);
                for s in inst.students() {
                    let prefs = inst.student_prefs(s).items();
                    if skip[s.index()] || prefs.is_empty() {
                        continue;
                    }
                    let _ = m.assign(&inst, s, *picks[s.index()].get(prefs));
                }
                (inst, m)
            })
    })
}
