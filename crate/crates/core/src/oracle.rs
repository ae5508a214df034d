//! Exhaustive enumeration of stable matchings for small instances.
//!
//! Depth-first search over students in index order. Each student is tried
//! unassigned first and then on each acceptable project in ascending project
//! order, so complete matchings are visited in lexicographic order of their
//! assignment vectors (unassigned sorting before any project). Besides
//! capacity pruning, a branch is cut once some already-decided student forms
//! a pair that blocks every completion.

use std::ops::ControlFlow;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::ids::{ProjectId, StudentId};
use crate::instance::Instance;
use crate::matching::Matching;
use crate::stability::first_blocking_pair_unchecked;

#[derive(Clone, Debug)]
pub struct EnumerationBudget {
    /// Refuse instances with more students than this.
    pub max_students: usize,
    pub node_limit: Option<u64>,
    pub wall: Option<Duration>,
}

impl Default for EnumerationBudget {
    fn default() -> Self {
        Self {
            max_students: 12,
            node_limit: None,
            wall: None,
        }
    }
}

impl EnumerationBudget {
    pub fn unlimited_size() -> Self {
        Self {
            max_students: usize::MAX,
            ..Self::default()
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("{students} students exceeds the enumeration limit of {limit}")]
    TooLarge { students: usize, limit: usize },
    #[error("enumeration budget exhausted after {nodes} nodes ({found} matchings found so far)")]
    BudgetExceeded { nodes: u64, found: u64 },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub nodes: u64,
    pub found: u64,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Filter {
    Feasible,
    Stable,
}

/// Size bound applied during search; the callback tightens it.
#[derive(Clone, Copy)]
enum SizeBound {
    None,
    /// Only matchings strictly larger than this are wanted.
    Above(usize),
    /// Only matchings strictly smaller than this are wanted.
    Below(usize),
}

struct Search<'a, F> {
    inst: &'a Instance,
    budget: &'a EnumerationBudget,
    start: Instant,
    filter: Filter,
    bound: SizeBound,
    m: Matching,
    // Undecided students (index >= depth) that find each project / lecturer acceptable.
    project_potential: Vec<u32>,
    lecturer_potential: Vec<u32>,
    stats: SearchStats,
    visit: F,
}

enum Stop {
    Callback,
    Budget,
}

impl<F> Search<'_, F>
where
    F: FnMut(&Matching, &mut SizeBound) -> ControlFlow<()>,
{
    fn run(&mut self, depth: usize) -> Result<(), Stop> {
        self.stats.nodes += 1;
        if self.stats.nodes.is_multiple_of(4096)
            && (self.budget.node_limit.is_some_and(|n| self.stats.nodes > n)
                || self.budget.wall.is_some_and(|w| self.start.elapsed() > w))
        {
            return Err(Stop::Budget);
        }
        let undecided = self.inst.n_students() - depth;
        match self.bound {
            SizeBound::Above(b) if self.m.size() + undecided <= b => return Ok(()),
            SizeBound::Below(b) if self.m.size() >= b => return Ok(()),
            _ => {}
        }
        if self.filter == Filter::Stable && depth > 0 && self.doomed(depth) {
            return Ok(());
        }
        if depth == self.inst.n_students() {
            if self.filter == Filter::Stable && first_blocking_pair_unchecked(self.inst, &self.m).is_some() {
                return Ok(());
            }
            self.stats.found += 1;
            return match (self.visit)(&self.m, &mut self.bound) {
                ControlFlow::Continue(()) => Ok(()),
                ControlFlow::Break(()) => Err(Stop::Callback),
            };
        }

        let s = StudentId::from_index(depth);
        let inst = self.inst;
        for pair in inst.pairs_of(s) {
            self.project_potential[pair.project.index()] -= 1;
        }
        for l in distinct_lecturers(inst, s) {
            self.lecturer_potential[l.index()] -= 1;
        }

        let mut result = self.run(depth + 1);
        if result.is_ok() {
            let mut options: Vec<ProjectId> = inst.pairs_of(s).iter().map(|x| x.project).collect();
            options.sort_unstable();
            for p in options {
                if self.m.assign(inst, s, p).is_err() {
                    continue;
                }
                result = self.run(depth + 1);
                self.m.unassign(inst, s);
                if result.is_err() {
                    break;
                }
            }
        }

        for pair in inst.pairs_of(s) {
            self.project_potential[pair.project.index()] += 1;
        }
        for l in distinct_lecturers(inst, s) {
            self.lecturer_potential[l.index()] += 1;
        }
        result
    }

    /// Whether some decided student (index < `depth`) already forms a pair
    /// that blocks every completion. Decided assignments are permanent and
    /// loads only grow, so fullness and "some assignee ranked below s" persist,
    /// while undersubscription is certain once the undecided students cannot
    /// fill the gap.
    fn doomed(&self, depth: usize) -> bool {
        let inst = self.inst;
        let m = &self.m;
        let mut worst_p = vec![0u32; inst.n_projects()];
        let mut worst_l = vec![0u32; inst.n_lecturers()];
        for (u, q) in m.pairs() {
            let x = inst.pair(u, q).expect("acceptable");
            worst_p[q.index()] = worst_p[q.index()].max(x.lecturer_rank);
            worst_l[x.lecturer.index()] = worst_l[x.lecturer.index()].max(x.lecturer_rank);
        }
        for s in (0..depth).map(StudentId::from_index) {
            let current = m.project_of(s);
            let current_rank = current.and_then(|p| inst.student_rank(s, p));
            for pair in inst.pairs_of(s) {
                if current_rank.is_some_and(|r| pair.student_rank >= r) {
                    continue;
                }
                let p = pair.project;
                let l = pair.lecturer;
                let p_stays_under = m.project_load(p) + self.project_potential[p.index()] < inst.project_capacity(p);
                if p_stays_under {
                    let l_stays_under =
                        m.lecturer_load(l) + self.lecturer_potential[l.index()] < inst.lecturer_capacity(l);
                    if l_stays_under {
                        return true;
                    }
                    if m.lecturer_full(inst, l)
                        && (current.is_some_and(|q| inst.lecturer_of(q) == l)
                            || worst_l[l.index()] > pair.lecturer_rank)
                    {
                        return true;
                    }
                } else if m.project_full(inst, p) && worst_p[p.index()] > pair.lecturer_rank {
                    return true;
                }
            }
        }
        false
    }
}

fn distinct_lecturers(inst: &Instance, s: StudentId) -> Vec<crate::ids::LecturerId> {
    let mut ls: Vec<_> = inst.pairs_of(s).iter().map(|x| x.lecturer).collect();
    ls.sort_unstable();
    ls.dedup();
    ls
}

fn search<F>(
    inst: &Instance,
    budget: &EnumerationBudget,
    filter: Filter,
    bound: SizeBound,
    visit: F,
) -> Result<SearchStats, OracleError>
where
    F: FnMut(&Matching, &mut SizeBound) -> ControlFlow<()>,
{
    if inst.n_students() > budget.max_students {
        return Err(OracleError::TooLarge {
            students: inst.n_students(),
            limit: budget.max_students,
        });
    }
    let mut project_potential = vec![0; inst.n_projects()];
    let mut lecturer_potential = vec![0; inst.n_lecturers()];
    for s in inst.students() {
        for pair in inst.pairs_of(s) {
            project_potential[pair.project.index()] += 1;
        }
        for l in distinct_lecturers(inst, s) {
            lecturer_potential[l.index()] += 1;
        }
    }
    let mut st = Search {
        inst,
        budget,
        start: Instant::now(),
        filter,
        bound,
        m: Matching::empty(inst),
        project_potential,
        lecturer_potential,
        stats: SearchStats::default(),
        visit,
    };
    match st.run(0) {
        Ok(()) | Err(Stop::Callback) => Ok(st.stats),
        Err(Stop::Budget) => Err(OracleError::BudgetExceeded {
            nodes: st.stats.nodes,
            found: st.stats.found,
        }),
    }
}

/// Visits every capacity-feasible matching.
pub fn for_each_feasible(
    inst: &Instance,
    budget: &EnumerationBudget,
    mut visit: impl FnMut(&Matching) -> ControlFlow<()>,
) -> Result<SearchStats, OracleError> {
    search(inst, budget, Filter::Feasible, SizeBound::None, |m, _| visit(m))
}

/// Visits every stable matching, in lexicographic order.
pub fn for_each_stable(
    inst: &Instance,
    budget: &EnumerationBudget,
    mut visit: impl FnMut(&Matching) -> ControlFlow<()>,
) -> Result<SearchStats, OracleError> {
    search(inst, budget, Filter::Stable, SizeBound::None, |m, _| visit(m))
}

pub fn enumerate_stable(inst: &Instance, budget: &EnumerationBudget) -> Result<Vec<Matching>, OracleError> {
    let mut out = Vec::new();
    for_each_stable(inst, budget, |m| {
        out.push(m.clone());
        ControlFlow::Continue(())
    })?;
    Ok(out)
}

/// A maximum-size stable matching; among those of equal size, the
/// lexicographically smallest assignment vector.
pub fn max_stable(inst: &Instance, budget: &EnumerationBudget) -> Result<Matching, OracleError> {
    let mut best: Option<Matching> = None;
    search(inst, budget, Filter::Stable, SizeBound::None, |m, bound| {
        *bound = SizeBound::Above(m.size());
        best = Some(m.clone());
        ControlFlow::Continue(())
    })?;
    Ok(best.expect("some stable matching always exists"))
}

/// A minimum-size stable matching, ties broken as in [`max_stable`].
pub fn min_stable(inst: &Instance, budget: &EnumerationBudget) -> Result<Matching, OracleError> {
    let mut best: Option<Matching> = None;
    search(inst, budget, Filter::Stable, SizeBound::None, |m, bound| {
        *bound = SizeBound::Below(m.size());
        best = Some(m.clone());
        ControlFlow::Continue(())
    })?;
    Ok(best.expect("some stable matching always exists"))
}
