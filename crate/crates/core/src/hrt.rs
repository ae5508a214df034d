//! Reduction to hospitals/residents with ties by cloning.
//!
//! Students become residents and projects become hospitals of the same
//! capacity. A hospital ranks the residents its project's lecturer ranks,
//! restricted to those ranking the hospital. Lecturer capacities are encoded
//! with dummy residents: lecturer l_k gets f_k = (sum of its project
//! capacities) - d_k of them, each tied first on every hospital of l_k and
//! ranking all of those hospitals in one tie. Every stable matching assigns
//! all dummies, so stable SPA-ST matchings carry over. The converse fails:
//! a stable matching of the clone can map back to an unstable matching.

use std::fmt::Write as _;
use std::ops::ControlFlow;

use thiserror::Error;

use crate::ids::{HospitalId, LecturerId, ProjectId, ResidentId, StudentId};
use crate::instance::{content_lines, expect_keyword, parse_groups, parse_number, write_groups, Instance, ParseError};
use crate::matching::{Matching, MatchingError};
use crate::oracle::{EnumerationBudget, OracleError};
use crate::prefs::PrefList;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Origin {
    Student(StudentId),
    /// The `ordinal`-th (0-based) dummy of a lecturer.
    Dummy {
        lecturer: LecturerId,
        ordinal: u32,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Resident {
    pub origin: Origin,
    pub prefs: PrefList<HospitalId>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Hospital {
    pub project: ProjectId,
    pub capacity: u32,
    pub prefs: PrefList<ResidentId>,
}

/// Residents r1..r_n1 are the students in order; dummies follow, grouped by
/// lecturer in ascending order. Hospital h_j is project p_j.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HrtInstance {
    pub residents: Vec<Resident>,
    pub hospitals: Vec<Hospital>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HrtError {
    #[error("matching covers {got} residents but the instance has {expected}")]
    WrongSize { expected: usize, got: usize },
    #[error("{hospital} is not acceptable to {resident}")]
    NotAcceptable { resident: ResidentId, hospital: HospitalId },
    #[error("{hospital} is over capacity")]
    OverCapacity { hospital: HospitalId },
    #[error("cannot place the dummies of {lecturer}: only {room} free places for {needed}")]
    DummyCompletion {
        lecturer: LecturerId,
        room: u32,
        needed: u32,
    },
    #[error(transparent)]
    Matching(#[from] MatchingError),
}

impl HrtInstance {
    pub fn n_residents(&self) -> usize {
        self.residents.len()
    }

    pub fn n_hospitals(&self) -> usize {
        self.hospitals.len()
    }

    pub fn dummies(&self) -> impl Iterator<Item = ResidentId> + '_ {
        self.residents
            .iter()
            .enumerate()
            .filter(|(_, r)| matches!(r.origin, Origin::Dummy { .. }))
            .map(|(i, _)| ResidentId::from_index(i))
    }

    fn hospital_rank(&self, h: HospitalId, r: ResidentId) -> Option<u32> {
        self.hospitals[h.index()].prefs.rank_of(r)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("hrt 1\n");
        let _ = writeln!(out, "counts {} {}", self.n_residents(), self.n_hospitals());
        for (j, h) in self.hospitals.iter().enumerate() {
            let _ = write!(
                out,
                "hospital {} cap {} project {} prefs",
                j + 1,
                h.capacity,
                h.project.number()
            );
            write_groups(&mut out, &h.prefs, |r| r.number());
            out.push('\n');
        }
        for (i, r) in self.residents.iter().enumerate() {
            let _ = match r.origin {
                Origin::Student(s) => write!(out, "resident {} student {} prefs", i + 1, s.number()),
                Origin::Dummy { lecturer, .. } => {
                    write!(out, "resident {} dummy-of {} prefs", i + 1, lecturer.number())
                }
            };
            write_groups(&mut out, &r.prefs, |h| h.number());
            out.push('\n');
        }
        out
    }

    /// Parses the text form written by [`HrtInstance::to_text`]. Dummy
    /// ordinals are recomputed from the order of appearance.
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut lines = content_lines(text);
        let (ln, header) = lines.next().ok_or_else(|| ParseError::syntax(1, "empty input"))?;
        if header != ["hrt", "1"] {
            return Err(ParseError::syntax(ln, "expected header `hrt 1`"));
        }
        let (ln, counts) = lines
            .next()
            .ok_or_else(|| ParseError::syntax(ln + 1, "missing counts line"))?;
        expect_keyword(counts.first(), "counts", ln)?;
        let nr = parse_number(counts.get(1), ln, "resident count")? as usize;
        let nh = parse_number(counts.get(2), ln, "hospital count")? as usize;
        let mut hospitals: Vec<Option<Hospital>> = vec![None; nh];
        let mut residents: Vec<Option<Resident>> = vec![None; nr];
        let mut dummy_count: Vec<u32> = Vec::new();
        for (ln, toks) in lines {
            let id = parse_number(toks.get(1), ln, "id")? as usize;
            let in_range = |n: usize| id >= 1 && id <= n;
            match toks[0].as_str() {
                "hospital" if in_range(nh) => {
                    expect_keyword(toks.get(2), "cap", ln)?;
                    let capacity = parse_number(toks.get(3), ln, "capacity")?;
                    expect_keyword(toks.get(4), "project", ln)?;
                    let project = parse_number(toks.get(5), ln, "project")?;
                    expect_keyword(toks.get(6), "prefs", ln)?;
                    let groups = parse_groups(&toks[7..], ln)?;
                    if project == 0 {
                        return Err(ParseError::syntax(ln, "ids are 1-based"));
                    }
                    hospitals[id - 1] = Some(Hospital {
                        project: ProjectId::from_number(project),
                        capacity,
                        prefs: PrefList::from_groups(
                            groups.into_iter().map(|g| g.into_iter().map(ResidentId::from_number)),
                        ),
                    });
                }
                "resident" if in_range(nr) => {
                    let origin = match toks.get(2).map(String::as_str) {
                        Some("student") => {
                            let s = parse_number(toks.get(3), ln, "student")?;
                            if s == 0 {
                                return Err(ParseError::syntax(ln, "ids are 1-based"));
                            }
                            Origin::Student(StudentId::from_number(s))
                        }
                        Some("dummy-of") => {
                            let k = parse_number(toks.get(3), ln, "lecturer")?;
                            if k == 0 {
                                return Err(ParseError::syntax(ln, "ids are 1-based"));
                            }
                            let k = k as usize - 1;
                            if dummy_count.len() <= k {
                                dummy_count.resize(k + 1, 0);
                            }
                            dummy_count[k] += 1;
                            Origin::Dummy {
                                lecturer: LecturerId::from_index(k),
                                ordinal: dummy_count[k] - 1,
                            }
                        }
                        _ => return Err(ParseError::syntax(ln, "expected `student` or `dummy-of`")),
                    };
                    expect_keyword(toks.get(4), "prefs", ln)?;
                    let groups = parse_groups(&toks[5..], ln)?;
                    residents[id - 1] = Some(Resident {
                        origin,
                        prefs: PrefList::from_groups(
                            groups.into_iter().map(|g| g.into_iter().map(HospitalId::from_number)),
                        ),
                    });
                }
                other => return Err(ParseError::syntax(ln, format!("bad record `{other} {id}`"))),
            }
        }
        let hospitals = hospitals
            .into_iter()
            .enumerate()
            .map(|(j, h)| h.ok_or_else(|| ParseError::syntax(0, format!("hospital {} missing", j + 1))))
            .collect::<Result<Vec<_>, _>>()?;
        let residents = residents
            .into_iter()
            .enumerate()
            .map(|(i, r)| r.ok_or_else(|| ParseError::syntax(0, format!("resident {} missing", i + 1))))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { residents, hospitals })
    }
}

/// Number of dummies needed for each lecturer: max(0, sum of c_j - d_k).
pub fn dummy_counts(inst: &Instance) -> Vec<u32> {
    inst.lecturers()
        .map(|l| {
            let total: u64 = inst
                .projects_of(l)
                .iter()
                .map(|&p| inst.project_capacity(p) as u64)
                .sum();
            total.saturating_sub(inst.lecturer_capacity(l) as u64) as u32
        })
        .collect()
}

pub fn clone_to_hrt(inst: &Instance) -> HrtInstance {
    let n1 = inst.n_students();
    let f = dummy_counts(inst);
    let mut residents: Vec<Resident> = inst
        .students()
        .map(|s| Resident {
            origin: Origin::Student(s),
            prefs: PrefList::from_groups(
                inst.student_prefs(s)
                    .groups()
                    .map(|g| g.iter().map(|p| HospitalId(p.0)).collect::<Vec<_>>()),
            ),
        })
        .collect();
    let mut dummies_of: Vec<Vec<ResidentId>> = vec![Vec::new(); inst.n_lecturers()];
    for l in inst.lecturers() {
        let tie: Vec<HospitalId> = inst.projects_of(l).iter().map(|p| HospitalId(p.0)).collect();
        for ordinal in 0..f[l.index()] {
            dummies_of[l.index()].push(ResidentId::from_index(residents.len()));
            residents.push(Resident {
                origin: Origin::Dummy { lecturer: l, ordinal },
                prefs: PrefList::from_groups([tie.clone()]),
            });
        }
    }
    debug_assert_eq!(residents.len(), n1 + f.iter().map(|&x| x as usize).sum::<usize>());

    let hospitals = inst
        .projects()
        .map(|p| {
            let l = inst.lecturer_of(p);
            let mut prefs = PrefList::from_groups([dummies_of[l.index()].clone()]);
            for group in inst.lecturer_prefs(l).groups() {
                prefs.push_group(
                    group
                        .iter()
                        .filter(|&&s| inst.is_acceptable(s, p))
                        .map(|s| ResidentId(s.0)),
                );
            }
            Hospital {
                project: p,
                capacity: inst.project_capacity(p),
                prefs,
            }
        })
        .collect();
    HrtInstance { residents, hospitals }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct HrtMatching {
    assignment: Vec<Option<HospitalId>>,
    load: Vec<u32>,
}

impl HrtMatching {
    pub fn empty(hrt: &HrtInstance) -> Self {
        Self {
            assignment: vec![None; hrt.n_residents()],
            load: vec![0; hrt.n_hospitals()],
        }
    }

    pub fn from_assignment(hrt: &HrtInstance, assignment: Vec<Option<HospitalId>>) -> Result<Self, HrtError> {
        if assignment.len() != hrt.n_residents() {
            return Err(HrtError::WrongSize {
                expected: hrt.n_residents(),
                got: assignment.len(),
            });
        }
        let mut m = Self::empty(hrt);
        for (i, h) in assignment.into_iter().enumerate() {
            if let Some(h) = h {
                m.assign(hrt, ResidentId::from_index(i), h)?;
            }
        }
        Ok(m)
    }

    pub fn from_pairs(
        hrt: &HrtInstance,
        pairs: impl IntoIterator<Item = (ResidentId, HospitalId)>,
    ) -> Result<Self, HrtError> {
        let mut m = Self::empty(hrt);
        for (r, h) in pairs {
            m.assign(hrt, r, h)?;
        }
        Ok(m)
    }

    pub fn assign(&mut self, hrt: &HrtInstance, r: ResidentId, h: HospitalId) -> Result<(), HrtError> {
        let acceptable = r.index() < hrt.n_residents()
            && self.assignment[r.index()].is_none()
            && hrt.residents[r.index()].prefs.contains(h);
        if !acceptable {
            return Err(HrtError::NotAcceptable {
                resident: r,
                hospital: h,
            });
        }
        if self.load[h.index()] >= hrt.hospitals[h.index()].capacity {
            return Err(HrtError::OverCapacity { hospital: h });
        }
        self.assignment[r.index()] = Some(h);
        self.load[h.index()] += 1;
        Ok(())
    }

    pub fn unassign(&mut self, r: ResidentId) -> Option<HospitalId> {
        let h = self.assignment[r.index()].take()?;
        self.load[h.index()] -= 1;
        Some(h)
    }

    pub fn hospital_of(&self, r: ResidentId) -> Option<HospitalId> {
        self.assignment[r.index()]
    }

    pub fn size(&self) -> usize {
        self.assignment.iter().flatten().count()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (ResidentId, HospitalId)> + '_ {
        self.assignment
            .iter()
            .enumerate()
            .filter_map(|(i, h)| h.map(|h| (ResidentId::from_index(i), h)))
    }
}

/// Weak stability: no resident that is unassigned or prefers `h` to its
/// hospital, with `h` undersubscribed or preferring the resident to one of
/// its assignees.
pub fn hrt_is_stable(hrt: &HrtInstance, m: &HrtMatching) -> bool {
    hrt_blocking_pair(hrt, m).is_none()
}

pub fn hrt_blocking_pair(hrt: &HrtInstance, m: &HrtMatching) -> Option<(ResidentId, HospitalId)> {
    let mut worst = vec![0u32; hrt.n_hospitals()];
    for (r, h) in m.pairs() {
        let rank = hrt.hospital_rank(h, r).expect("hospitals rank their assignees");
        worst[h.index()] = worst[h.index()].max(rank);
    }
    for (i, res) in hrt.residents.iter().enumerate() {
        let r = ResidentId::from_index(i);
        let current = m.hospital_of(r).and_then(|h| res.prefs.rank_of(h));
        for (h, rank) in res.prefs.ranked() {
            if current.is_some_and(|c| rank >= c) {
                continue;
            }
            let hosp = &hrt.hospitals[h.index()];
            let under = m.load[h.index()] < hosp.capacity;
            let their_rank = hosp.prefs.rank_of(r).expect("acceptability is mutual");
            if under || worst[h.index()] > their_rank {
                return Some((r, h));
            }
        }
    }
    None
}

/// Visits every stable matching of a small HRT instance. The budget's
/// student limit applies to residents.
pub fn hrt_for_each_stable(
    hrt: &HrtInstance,
    budget: &EnumerationBudget,
    mut visit: impl FnMut(&HrtMatching) -> ControlFlow<()>,
) -> Result<u64, OracleError> {
    if hrt.n_residents() > budget.max_students {
        return Err(OracleError::TooLarge {
            students: hrt.n_residents(),
            limit: budget.max_students,
        });
    }
    struct Dfs<'a, F> {
        hrt: &'a HrtInstance,
        m: HrtMatching,
        nodes: u64,
        found: u64,
        node_limit: Option<u64>,
        visit: F,
    }
    impl<F: FnMut(&HrtMatching) -> ControlFlow<()>> Dfs<'_, F> {
        fn run(&mut self, depth: usize) -> Result<(), bool> {
            self.nodes += 1;
            if self.node_limit.is_some_and(|n| self.nodes > n) {
                return Err(true);
            }
            if depth == self.hrt.n_residents() {
                if hrt_is_stable(self.hrt, &self.m) {
                    self.found += 1;
                    if (self.visit)(&self.m).is_break() {
                        return Err(false);
                    }
                }
                return Ok(());
            }
            let r = ResidentId::from_index(depth);
            if !self.doomed(depth) {
                self.run(depth + 1)?;
            }
            let mut options: Vec<HospitalId> = self.hrt.residents[depth].prefs.items().to_vec();
            options.sort_unstable();
            for h in options {
                if self.m.assign(self.hrt, r, h).is_ok() {
                    let res = if self.doomed(depth) {
                        Ok(())
                    } else {
                        self.run(depth + 1)
                    };
                    self.m.unassign(r);
                    res?;
                }
            }
            Ok(())
        }

        /// Residents up to `last` are decided. Hospitals never lose
        /// assignees further down, so a decided resident preferring a full
        /// hospital that prefers it to an assignee blocks every completion.
        fn doomed(&self, last: usize) -> bool {
            (0..=last).any(|i| {
                let res = &self.hrt.residents[i];
                let r = ResidentId::from_index(i);
                let current = self.m.hospital_of(r).and_then(|h| res.prefs.rank_of(h));
                res.prefs.ranked().any(|(h, rank)| {
                    let hosp = &self.hrt.hospitals[h.index()];
                    if current.is_some_and(|c| rank >= c) || self.m.load[h.index()] < hosp.capacity {
                        return false;
                    }
                    let mine = hosp.prefs.rank_of(r).expect("acceptability is mutual");
                    self.m
                        .pairs()
                        .any(|(u, g)| g == h && hosp.prefs.rank_of(u).is_some_and(|x| x > mine))
                })
            })
        }
    }
    let mut dfs = Dfs {
        hrt,
        m: HrtMatching::empty(hrt),
        nodes: 0,
        found: 0,
        node_limit: budget.node_limit,
        visit: &mut visit,
    };
    match dfs.run(0) {
        Ok(()) | Err(false) => Ok(dfs.found),
        Err(true) => Err(OracleError::BudgetExceeded {
            nodes: dfs.nodes,
            found: dfs.found,
        }),
    }
}

pub fn hrt_enumerate_stable(hrt: &HrtInstance, budget: &EnumerationBudget) -> Result<Vec<HrtMatching>, OracleError> {
    let mut out = Vec::new();
    hrt_for_each_stable(hrt, budget, |m| {
        out.push(m.clone());
        ControlFlow::Continue(())
    })?;
    Ok(out)
}

/// Maps a stable matching to the clone: real pairs carry over and each
/// lecturer's dummies fill the spare places of its hospitals, lecturers,
/// hospitals and dummies all taken in ascending order.
pub fn transport_matching(inst: &Instance, hrt: &HrtInstance, m: &Matching) -> Result<HrtMatching, HrtError> {
    m.check(inst)?;
    let mut out = HrtMatching::empty(hrt);
    for (s, p) in m.pairs() {
        out.assign(hrt, ResidentId(s.0), HospitalId(p.0))?;
    }
    let mut dummies: Vec<Vec<ResidentId>> = vec![Vec::new(); inst.n_lecturers()];
    for r in hrt.dummies() {
        if let Origin::Dummy { lecturer, .. } = hrt.residents[r.index()].origin {
            dummies[lecturer.index()].push(r);
        }
    }
    for l in inst.lecturers() {
        let needed = dummies[l.index()].len() as u32;
        let room: u32 = inst
            .projects_of(l)
            .iter()
            .map(|&p| inst.project_capacity(p) - m.project_load(p))
            .sum();
        if room < needed {
            return Err(HrtError::DummyCompletion {
                lecturer: l,
                room,
                needed,
            });
        }
        let mut queue = dummies[l.index()].iter();
        'fill: for &p in inst.projects_of(l) {
            let h = HospitalId(p.0);
            for _ in m.project_load(p)..inst.project_capacity(p) {
                let Some(&r) = queue.next() else { break 'fill };
                out.assign(hrt, r, h)?;
            }
        }
    }
    Ok(out)
}

/// Drops dummy assignments and maps the rest back to students and projects.
/// Fails if the result breaks a lecturer capacity, which cannot happen when
/// every dummy is assigned.
pub fn pull_back(inst: &Instance, hrt: &HrtInstance, m: &HrtMatching) -> Result<Matching, HrtError> {
    let mut out = Matching::empty(inst);
    for (r, h) in m.pairs() {
        if let Origin::Student(s) = hrt.residents[r.index()].origin {
            out.assign(inst, s, hrt.hospitals[h.index()].project)?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samples;
    use crate::stability::{find_blocking_pairs, BlockingKind};

    fn r(n: u32) -> ResidentId {
        ResidentId::from_number(n)
    }

    fn h(n: u32) -> HospitalId {
        HospitalId::from_number(n)
    }

    fn list<T: Copy + Eq>(groups: &[&[T]]) -> PrefList<T> {
        PrefList::from_groups(groups.iter().map(|g| g.iter().copied()))
    }

    #[test]
    fn clone_trap_clone() {
        let inst = samples::clone_trap();
        let hrt = clone_to_hrt(&inst);
        assert_eq!(hrt.n_residents(), 3);
        assert_eq!(hrt.residents[0].prefs, list(&[&[h(1)], &[h(2)]]));
        assert_eq!(hrt.residents[1].prefs, list(&[&[h(2)], &[h(3)]]));
        assert_eq!(hrt.residents[2].prefs, list(&[&[h(1), h(2)]]));
        assert_eq!(
            hrt.residents[2].origin,
            Origin::Dummy {
                lecturer: LecturerId(0),
                ordinal: 0
            }
        );
        assert_eq!(hrt.hospitals[0].prefs, list(&[&[r(3)], &[r(1)]]));
        assert_eq!(hrt.hospitals[1].prefs, list(&[&[r(3)], &[r(2)], &[r(1)]]));
        assert_eq!(hrt.hospitals[2].prefs, list(&[&[r(2)]]));
        assert!(hrt.hospitals.iter().all(|x| x.capacity == 1));
    }

    #[test]
    fn clone_trap_converse_fails() {
        let inst = samples::clone_trap();
        let hrt = clone_to_hrt(&inst);
        let m = HrtMatching::from_pairs(&hrt, [(r(1), h(1)), (r(2), h(3)), (r(3), h(2))]).unwrap();
        assert!(hrt_is_stable(&hrt, &m));
        let back = pull_back(&inst, &hrt, &m).unwrap();
        let pairs: Vec<_> = back.pairs().map(|(s, p)| (s.number(), p.number())).collect();
        assert_eq!(pairs, vec![(1, 1), (2, 3)]);
        let blocks = find_blocking_pairs(&inst, &back).unwrap();
        assert_eq!(blocks.len(), 1);
        assert_eq!((blocks[0].student.number(), blocks[0].project.number()), (2, 2));
        assert_eq!(blocks[0].kind, BlockingKind::Bii);
    }

    #[test]
    fn unassigned_dummy_blocks() {
        let inst = samples::clone_trap();
        let hrt = clone_to_hrt(&inst);
        let m = HrtMatching::from_pairs(&hrt, [(r(1), h(1)), (r(2), h(2))]).unwrap();
        assert_eq!(hrt_blocking_pair(&hrt, &m), Some((r(3), h(1))));
        // With r3 left out of the stable matching, h2 is undersubscribed.
        let m = HrtMatching::from_pairs(&hrt, [(r(1), h(1)), (r(2), h(3))]).unwrap();
        assert!(!hrt_is_stable(&hrt, &m));
        let mut fixed = m.clone();
        fixed.assign(&hrt, r(3), h(2)).unwrap();
        assert!(hrt_is_stable(&hrt, &fixed));
    }

    #[test]
    fn clone_trap_transport() {
        let inst = samples::clone_trap();
        let hrt = clone_to_hrt(&inst);
        let m = Matching::from_pairs(&inst, [(StudentId(1), ProjectId(1))]).unwrap();
        let t = transport_matching(&inst, &hrt, &m).unwrap();
        assert_eq!(t.pairs().collect::<Vec<_>>(), vec![(r(2), h(2)), (r(3), h(1))]);
        assert!(hrt_is_stable(&hrt, &t));
        assert_eq!(pull_back(&inst, &hrt, &t).unwrap(), m);
    }

    #[test]
    fn spare_capacity_clone_and_transport() {
        let inst = samples::spare_capacity();
        let hrt = clone_to_hrt(&inst);
        assert_eq!(dummy_counts(&inst), vec![2, 1]);
        assert_eq!(hrt.n_residents(), 7);
        assert_eq!(hrt.hospitals[0].prefs, list(&[&[r(5), r(6)], &[r(2)], &[r(4)]]));
        assert_eq!(hrt.hospitals[2].prefs, list(&[&[r(7)], &[r(4)], &[r(1), r(3)]]));
        assert_eq!(hrt.hospitals[3].prefs, list(&[&[r(7)], &[r(4)], &[r(2)]]));
        assert_eq!(hrt.residents[6].prefs, list(&[&[h(3), h(4)]]));
        let s = StudentId::from_number;
        let p = ProjectId::from_number;
        let m = Matching::from_pairs(&inst, [(s(1), p(3)), (s(2), p(1)), (s(3), p(3)), (s(4), p(2))]).unwrap();
        let t = transport_matching(&inst, &hrt, &m).unwrap();
        assert_eq!(t.size(), 7);
        assert!(hrt_is_stable(&hrt, &t));
    }

    #[test]
    fn text_round_trip() {
        let hrt = clone_to_hrt(&samples::spare_capacity());
        let text = hrt.to_text();
        assert!(text.contains("resident 5 dummy-of 1 prefs ( 1 2 )"));
        assert!(text.contains("hospital 3 cap 2 project 3 prefs 7 4 ( 1 3 )"));
        assert_eq!(HrtInstance::parse(&text).unwrap(), hrt);
    }

    #[test]
    fn no_dummies_when_lecturers_have_room() {
        let text = "spa-st 1\ncounts 1 1 1\nproject 1 lecturer 1 cap 1\n\
                    lecturer 1 cap 3 prefs 1\nstudent 1 prefs 1\n";
        let inst = Instance::parse(text).unwrap();
        let hrt = clone_to_hrt(&inst);
        assert_eq!(hrt.n_residents(), 1);
        let m = Matching::from_pairs(&inst, [(StudentId(0), ProjectId(0))]).unwrap();
        let t = transport_matching(&inst, &hrt, &m).unwrap();
        assert_eq!(t.size(), 1);
        assert!(hrt_is_stable(&hrt, &t));
    }

    #[test]
    fn dummy_only_matching_pulls_back_empty() {
        let inst = samples::clone_trap();
        let hrt = clone_to_hrt(&inst);
        let m = HrtMatching::from_pairs(&hrt, [(r(3), h(1))]).unwrap();
        assert_eq!(pull_back(&inst, &hrt, &m).unwrap().size(), 0);
    }

    #[test]
    fn enumeration_on_clone_trap() {
        let hrt = clone_to_hrt(&samples::clone_trap());
        let all = hrt_enumerate_stable(&hrt, &EnumerationBudget::default()).unwrap();
        assert!(all.len() >= 2);
        assert!(all.iter().all(|m| m.hospital_of(r(3)).is_some()));
    }
}
