//! Blocking pairs and the two equivalent stability tests.

use std::fmt;

use crate::ids::{ProjectId, StudentId};
use crate::instance::Instance;
use crate::matching::{Matching, MatchingError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BlockingKind {
    /// Project and lecturer both undersubscribed.
    A,
    /// Project undersubscribed, lecturer full, student already with this lecturer.
    Bi,
    /// Project undersubscribed, lecturer full and prefers the student to its worst assignee.
    Bii,
    /// Project full and its lecturer prefers the student to the project's worst assignee.
    C,
}

impl fmt::Display for BlockingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BlockingKind::A => "3a",
            BlockingKind::Bi => "3bi",
            BlockingKind::Bii => "3bii",
            BlockingKind::C => "3c",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlockingPair {
    pub student: StudentId,
    pub project: ProjectId,
    pub kind: BlockingKind,
}

impl fmt::Display for BlockingPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "block {} {} {}", self.student, self.project, self.kind)
    }
}

/// Worst (largest) lecturer rank among the assignees of each project and
/// each lecturer; 0 where there are none.
struct WorstRanks {
    project: Vec<u32>,
    lecturer: Vec<u32>,
}

impl WorstRanks {
    fn new(inst: &Instance, m: &Matching) -> Self {
        let mut w = WorstRanks {
            project: vec![0; inst.n_projects()],
            lecturer: vec![0; inst.n_lecturers()],
        };
        for (s, p) in m.pairs() {
            let pair = inst.pair(s, p).expect("matching pairs are acceptable");
            let r = pair.lecturer_rank;
            let wp = &mut w.project[p.index()];
            *wp = (*wp).max(r);
            let wl = &mut w.lecturer[pair.lecturer.index()];
            *wl = (*wl).max(r);
        }
        w
    }
}

fn scan(inst: &Instance, m: &Matching, mut visit: impl FnMut(BlockingPair) -> bool) {
    let worst = WorstRanks::new(inst, m);
    for s in inst.students() {
        let current = m.project_of(s);
        let current_rank = current.map(|p| inst.student_rank(s, p).expect("acceptable"));
        for pair in inst.pairs_of(s) {
            let p = pair.project;
            if current == Some(p) {
                continue;
            }
            if current_rank.is_some_and(|r| pair.student_rank >= r) {
                continue;
            }
            let l = pair.lecturer;
            let p_under = !m.project_full(inst, p);
            let l_under = !m.lecturer_full(inst, l);
            // "l prefers s to the worst student in X" needs some assignee of X
            // ranked strictly below s.
            let kind = if p_under && l_under {
                Some(BlockingKind::A)
            } else if p_under {
                if current.is_some_and(|q| inst.lecturer_of(q) == l) {
                    Some(BlockingKind::Bi)
                } else if worst.lecturer[l.index()] > pair.lecturer_rank {
                    Some(BlockingKind::Bii)
                } else {
                    None
                }
            } else if worst.project[p.index()] > pair.lecturer_rank {
                Some(BlockingKind::C)
            } else {
                None
            };
            if let Some(kind) = kind {
                let go_on = visit(BlockingPair {
                    student: s,
                    project: p,
                    kind,
                });
                if !go_on {
                    return;
                }
            }
        }
    }
}

/// Every blocking pair of `m`, ascending by student then in the student's
/// preference order.
pub fn find_blocking_pairs(inst: &Instance, m: &Matching) -> Result<Vec<BlockingPair>, MatchingError> {
    m.check(inst)?;
    let mut out = Vec::new();
    scan(inst, m, |b| {
        out.push(b);
        true
    });
    Ok(out)
}

pub fn first_blocking_pair(inst: &Instance, m: &Matching) -> Result<Option<BlockingPair>, MatchingError> {
    m.check(inst)?;
    Ok(first_blocking_pair_unchecked(inst, m))
}

/// Like [`first_blocking_pair`] but trusts that `m` belongs to `inst`.
pub(crate) fn first_blocking_pair_unchecked(inst: &Instance, m: &Matching) -> Option<BlockingPair> {
    let mut found = None;
    scan(inst, m, |b| {
        found = Some(b);
        false
    });
    found
}

pub fn is_stable(inst: &Instance, m: &Matching) -> Result<bool, MatchingError> {
    Ok(first_blocking_pair(inst, m)?.is_none())
}

/// The alternative characterisation: for every pair (s, p) that s would
/// rather have than its current state, either the lecturer is full with s
/// outside it and no assignee ranked below s, or the project is full with no
/// assignee ranked below s.
pub fn satisfies_condition_star(inst: &Instance, m: &Matching) -> Result<bool, MatchingError> {
    m.check(inst)?;
    for s in inst.students() {
        let current = m.project_of(s);
        let current_rank = current.and_then(|p| inst.student_rank(s, p));
        for pair in inst.pairs_of(s) {
            let wants = match current_rank {
                None => true,
                Some(r) => pair.student_rank < r,
            };
            if !wants {
                continue;
            }
            let l = pair.lecturer;
            let p = pair.project;
            let in_l = current.is_some_and(|q| inst.lecturer_of(q) == l);
            let ranked_no_worse =
                |u: StudentId| inst.lecturer_rank(l, u).expect("assignees are ranked") <= pair.lecturer_rank;
            let first = m.lecturer_full(inst, l)
                && !in_l
                && m.pairs()
                    .filter(|&(_, q)| inst.lecturer_of(q) == l)
                    .all(|(u, _)| ranked_no_worse(u));
            let second = || m.project_full(inst, p) && m.assignees(p).all(ranked_no_worse);
            if !(first || second()) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
