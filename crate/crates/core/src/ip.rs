//! Integer-programming formulation of maximum and minimum stable matchings.
//!
//! For every acceptable pair (s_i, p_j), with l_k offering p_j, there are
//! three binaries: x_i_j (s_i is assigned p_j), a_i_j (l_k is full of
//! students it ranks no worse than s_i, s_i not among them) and b_i_j (the
//! same for p_j alone). Rows:
//!
//! * `asg_i`: s_i holds at most one project;
//! * `pcap_j`, `lcap_k`: capacities;
//! * `stab5_i_j`: s_i holds something at least as good as p_j, or a_i_j or b_i_j;
//! * `stab6_i_j`: a_i_j forces d_k students ranked no worse than s_i (other
//!   than s_i) onto l_k's projects;
//! * `stab7_i_j`: b_i_j forces c_j students ranked no worse than s_i (other
//!   than s_i) onto p_j.
//!
//! The model can be written in LP format for an external solver, checked
//! against a candidate matching, or solved here by branch and bound.

use std::fmt::{self, Write as _};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::ids::{ProjectId, StudentId};
use crate::instance::{Instance, Pair};
use crate::matching::Matching;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Sense {
    #[default]
    Maximize,
    Minimize,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Maximize => "Maximize",
            Sense::Minimize => "Minimize",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    X(usize),
    Alpha(usize),
    Beta(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Row {
    pub name: String,
    pub terms: Vec<(i64, Var)>,
    pub relation: Relation,
    pub rhs: i64,
}

impl Row {
    fn holds(&self, value: impl Fn(Var) -> i64) -> bool {
        let lhs: i64 = self.terms.iter().map(|&(c, v)| c * value(v)).sum();
        match self.relation {
            Relation::Le => lhs <= self.rhs,
            Relation::Ge => lhs >= self.rhs,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IpError {
    #[error("model has {binaries} binaries, above the solver limit of {limit}")]
    TooLarge { binaries: usize, limit: usize },
    #[error("search budget exhausted after {nodes} nodes")]
    BudgetExhausted { nodes: u64, best: Option<Matching> },
    #[error("supplied incumbent is not a feasible solution")]
    BadIncumbent,
}

/// Values of all binaries, indexed by pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Solution {
    pub x: Vec<bool>,
    pub alpha: Vec<bool>,
    pub beta: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeasibilityReport {
    /// Names of violated rows; empty when feasible.
    pub violated: Vec<String>,
}

impl FeasibilityReport {
    pub fn feasible(&self) -> bool {
        self.violated.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct IpModel {
    sense: Sense,
    pairs: Vec<Pair>,
    pair_start: Vec<usize>,
    project_capacity: Vec<u32>,
    lecturer_capacity: Vec<u32>,
    rows: Vec<Row>,
}

fn var_name(pairs: &[Pair], v: Var) -> String {
    let (prefix, e) = match v {
        Var::X(e) => ("x", e),
        Var::Alpha(e) => ("a", e),
        Var::Beta(e) => ("b", e),
    };
    format!("{prefix}_{}_{}", pairs[e].student.number(), pairs[e].project.number())
}

pub fn build_model(inst: &Instance, sense: Sense) -> IpModel {
    let pairs = inst.pairs().to_vec();
    let mut pair_start: Vec<usize> = inst.students().map(|s| inst.pair_range(s).start).collect();
    pair_start.push(pairs.len());
    let name = |prefix: &str, e: usize| format!("{prefix}_{}_{}", pairs[e].student.number(), pairs[e].project.number());

    let mut rows = Vec::new();
    for s in inst.students() {
        let range = inst.pair_range(s);
        if range.is_empty() {
            continue;
        }
        rows.push(Row {
            name: format!("asg_{}", s.number()),
            terms: range.map(|e| (1, Var::X(e))).collect(),
            relation: Relation::Le,
            rhs: 1,
        });
    }
    let mut by_project: Vec<Vec<usize>> = vec![Vec::new(); inst.n_projects()];
    let mut by_lecturer: Vec<Vec<usize>> = vec![Vec::new(); inst.n_lecturers()];
    for (e, pair) in pairs.iter().enumerate() {
        by_project[pair.project.index()].push(e);
        by_lecturer[pair.lecturer.index()].push(e);
    }
    for p in inst.projects() {
        let es = &by_project[p.index()];
        if !es.is_empty() {
            rows.push(Row {
                name: format!("pcap_{}", p.number()),
                terms: es.iter().map(|&e| (1, Var::X(e))).collect(),
                relation: Relation::Le,
                rhs: inst.project_capacity(p) as i64,
            });
        }
    }
    for l in inst.lecturers() {
        let es = &by_lecturer[l.index()];
        if !es.is_empty() {
            rows.push(Row {
                name: format!("lcap_{}", l.number()),
                terms: es.iter().map(|&e| (1, Var::X(e))).collect(),
                relation: Relation::Le,
                rhs: inst.lecturer_capacity(l) as i64,
            });
        }
    }

    for (e, pair) in pairs.iter().enumerate() {
        let mut terms: Vec<(i64, Var)> = inst
            .pair_range(pair.student)
            .filter(|&r| pairs[r].student_rank <= pair.student_rank)
            .map(|r| (1, Var::X(r)))
            .collect();
        terms.push((1, Var::Alpha(e)));
        terms.push((1, Var::Beta(e)));
        rows.push(Row {
            name: name("stab5", e),
            terms,
            relation: Relation::Ge,
            rhs: 1,
        });
    }
    for (e, pair) in pairs.iter().enumerate() {
        let l = pair.lecturer;
        let mut terms = Vec::new();
        for (u, rank) in inst.lecturer_prefs(l).ranked() {
            if rank > pair.lecturer_rank {
                break;
            }
            if u == pair.student {
                continue;
            }
            for r in inst.pair_range(u) {
                if pairs[r].lecturer == l {
                    terms.push((1, Var::X(r)));
                }
            }
        }
        terms.push((-(inst.lecturer_capacity(l) as i64), Var::Alpha(e)));
        rows.push(Row {
            name: name("stab6", e),
            terms,
            relation: Relation::Ge,
            rhs: 0,
        });
    }
    for (e, pair) in pairs.iter().enumerate() {
        let mut terms = Vec::new();
        for (u, rank) in inst.lecturer_prefs(pair.lecturer).ranked() {
            if rank > pair.lecturer_rank {
                break;
            }
            if u == pair.student {
                continue;
            }
            if let Some(r) = inst.pair_index(u, pair.project) {
                terms.push((1, Var::X(r)));
            }
        }
        terms.push((-(inst.project_capacity(pair.project) as i64), Var::Beta(e)));
        rows.push(Row {
            name: name("stab7", e),
            terms,
            relation: Relation::Ge,
            rhs: 0,
        });
    }

    IpModel {
        sense,
        pairs,
        pair_start,
        project_capacity: inst.projects().map(|p| inst.project_capacity(p)).collect(),
        lecturer_capacity: inst.lecturers().map(|l| inst.lecturer_capacity(l)).collect(),
        rows,
    }
}

impl IpModel {
    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn n_binaries(&self) -> usize {
        3 * self.pairs.len()
    }

    pub fn var_name(&self, v: Var) -> String {
        var_name(&self.pairs, v)
    }

    fn student_pairs(&self, s: usize) -> std::ops::Range<usize> {
        self.pair_start[s]..self.pair_start[s + 1]
    }

    /// The solution encoding `m`: x from the assignment, and a/b set to 1
    /// exactly where their defining condition holds, which is the most
    /// permissive choice.
    pub fn derive_solution(&self, m: &Matching) -> Solution {
        let n = self.pairs.len();
        let x: Vec<bool> = self
            .pairs
            .iter()
            .map(|pair| m.project_of(pair.student) == Some(pair.project))
            .collect();
        let mut worst_p = vec![0u32; self.project_capacity.len()];
        let mut worst_l = vec![0u32; self.lecturer_capacity.len()];
        let mut load_p = vec![0u32; self.project_capacity.len()];
        let mut load_l = vec![0u32; self.lecturer_capacity.len()];
        for (e, pair) in self.pairs.iter().enumerate() {
            if x[e] {
                let (j, k) = (pair.project.index(), pair.lecturer.index());
                worst_p[j] = worst_p[j].max(pair.lecturer_rank);
                worst_l[k] = worst_l[k].max(pair.lecturer_rank);
                load_p[j] += 1;
                load_l[k] += 1;
            }
        }
        let mut alpha = vec![false; n];
        let mut beta = vec![false; n];
        for (e, pair) in self.pairs.iter().enumerate() {
            let (j, k) = (pair.project.index(), pair.lecturer.index());
            let in_l = m.project_of(pair.student).is_some_and(|q| {
                self.pairs[self.student_pairs(pair.student.index())]
                    .iter()
                    .any(|y| y.project == q && y.lecturer == pair.lecturer)
            });
            alpha[e] = !in_l && load_l[k] >= self.lecturer_capacity[k] && worst_l[k] <= pair.lecturer_rank;
            beta[e] = !x[e] && load_p[j] >= self.project_capacity[j] && worst_p[j] <= pair.lecturer_rank;
        }
        Solution { x, alpha, beta }
    }

    pub fn evaluate(&self, sol: &Solution) -> FeasibilityReport {
        let value = |v: Var| -> i64 {
            (match v {
                Var::X(e) => sol.x[e],
                Var::Alpha(e) => sol.alpha[e],
                Var::Beta(e) => sol.beta[e],
            }) as i64
        };
        FeasibilityReport {
            violated: self
                .rows
                .iter()
                .filter(|r| !r.holds(value))
                .map(|r| r.name.clone())
                .collect(),
        }
    }

    /// Checks a matching against every row. Assignments outside the model's
    /// acceptable pairs are reported as `accept_<i>_<j>`.
    pub fn check_feasible(&self, m: &Matching) -> FeasibilityReport {
        let mut report = self.evaluate(&self.derive_solution(m));
        for (s, p) in m.pairs() {
            let known = self.pairs[self.student_pairs(s.index())].iter().any(|y| y.project == p);
            if !known {
                report.violated.push(format!("accept_{}_{}", s.number(), p.number()));
            }
        }
        report
    }

    /// The model in CPLEX LP format.
    pub fn emit_lp(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.sense);
        let objective: Vec<(i64, Var)> = (0..self.pairs.len()).map(|e| (1, Var::X(e))).collect();
        if objective.is_empty() {
            out.push_str(" obj: 0\n");
        } else {
            write_expression(&mut out, " obj:", &objective, &self.pairs);
            out.push('\n');
        }
        out.push_str("Subject To\n");
        for row in &self.rows {
            write_expression(&mut out, &format!(" {}:", row.name), &row.terms, &self.pairs);
            let op = match row.relation {
                Relation::Le => "<=",
                Relation::Ge => ">=",
            };
            let _ = writeln!(out, " {op} {}", row.rhs);
        }
        out.push_str("Binary\n");
        let vars = (0..self.pairs.len())
            .map(Var::X)
            .chain((0..self.pairs.len()).map(Var::Alpha))
            .chain((0..self.pairs.len()).map(Var::Beta));
        let mut line = String::new();
        for v in vars {
            if line.len() > 70 {
                let _ = writeln!(out, "{line}");
                line.clear();
            }
            line.push(' ');
            line.push_str(&var_name(&self.pairs, v));
        }
        if !line.is_empty() {
            let _ = writeln!(out, "{line}");
        }
        out.push_str("End\n");
        out
    }
}

/// Writes `label t1 + t2 - 3 t3 ...`, wrapping long expressions onto
/// continuation lines (LP readers cap line length).
fn write_expression(out: &mut String, label: &str, terms: &[(i64, Var)], pairs: &[Pair]) {
    let mut line = label.to_owned();
    for (i, &(c, v)) in terms.iter().enumerate() {
        let name = var_name(pairs, v);
        let term = match (i, c) {
            (0, 1) => name,
            (0, -1) => format!("- {name}"),
            (0, c) => format!("{c} {name}"),
            (_, 1) => format!("+ {name}"),
            (_, -1) => format!("- {name}"),
            (_, c) if c < 0 => format!("- {} {name}", -c),
            (_, c) => format!("+ {c} {name}"),
        };
        if line.len() + term.len() > 100 {
            out.push_str(&line);
            out.push('\n');
            line = "  ".to_owned();
        }
        line.push(' ');
        line.push_str(&term);
    }
    out.push_str(&line);
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub max_binaries: usize,
    pub node_limit: Option<u64>,
    pub time_limit: Option<Duration>,
    /// A known feasible matching to start from.
    pub incumbent: Option<Matching>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_binaries: 600,
            node_limit: None,
            time_limit: None,
            incumbent: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub matching: Matching,
    pub nodes: u64,
}

/// Solves the model exactly. `inst` must be the instance the model was built from.
pub fn solve(inst: &Instance, model: &IpModel, options: &SolveOptions) -> Result<SolveOutcome, IpError> {
    if model.n_binaries() > options.max_binaries {
        return Err(IpError::TooLarge {
            binaries: model.n_binaries(),
            limit: options.max_binaries,
        });
    }
    if let Some(m) = &options.incumbent {
        if !model.check_feasible(m).feasible() {
            return Err(IpError::BadIncumbent);
        }
    }
    let mut search = BranchAndBound::new(inst, model, options);
    let finished = search.dfs();
    let best = search.best.take();
    if !finished {
        return Err(IpError::BudgetExhausted {
            nodes: search.nodes,
            best,
        });
    }
    Ok(SolveOutcome {
        matching: best.expect("the empty search space always contains a stable matching"),
        nodes: search.nodes,
    })
}

/// Convenience wrapper: build the model and solve it.
pub fn solve_instance(inst: &Instance, sense: Sense, options: &SolveOptions) -> Result<SolveOutcome, IpError> {
    solve(inst, &build_model(inst, sense), options)
}

#[derive(Clone, Copy)]
enum Change {
    Pair(u32),
    Bot(u32),
}

/// Depth-first search over each student's options (one of its pairs, or
/// nothing), with constraint propagation over the model's rows.
struct BranchAndBound<'a> {
    inst: &'a Instance,
    model: &'a IpModel,
    sense: Sense,
    alive: Vec<bool>,
    bot: Vec<bool>,
    alive_count: Vec<u32>,
    trail: Vec<Change>,
    // For each lecturer, its ranked students with their pairs in P_k; for
    // each pair, the index in that list of the last student ranked no worse.
    lect_students: Vec<Vec<(u32, Vec<u32>)>>,
    lect_le: Vec<u32>,
    // For each project, its pairs by lecturer rank; for each pair, the index
    // of the last pair in that list ranked no worse.
    proj_pairs: Vec<Vec<u32>>,
    proj_le: Vec<u32>,
    node_limit: Option<u64>,
    deadline: Option<Instant>,
    nodes: u64,
    best: Option<Matching>,
    best_size: Option<usize>,
}

impl<'a> BranchAndBound<'a> {
    fn new(inst: &'a Instance, model: &'a IpModel, options: &SolveOptions) -> Self {
        let pairs = inst.pairs();
        let mut lect_students = vec![Vec::new(); inst.n_lecturers()];
        let mut lect_le = vec![0u32; pairs.len()];
        for l in inst.lecturers() {
            let list: Vec<(StudentId, u32)> = inst.lecturer_prefs(l).ranked().collect();
            let mut entries = Vec::with_capacity(list.len());
            for (pos, &(u, rank)) in list.iter().enumerate() {
                let mine: Vec<u32> = inst
                    .pair_range(u)
                    .filter(|&e| pairs[e].lecturer == l)
                    .map(|e| e as u32)
                    .collect();
                let mut last = pos;
                while last + 1 < list.len() && list[last + 1].1 == rank {
                    last += 1;
                }
                for &e in &mine {
                    lect_le[e as usize] = last as u32;
                }
                entries.push((u.0, mine));
            }
            lect_students[l.index()] = entries;
        }
        let mut proj_pairs: Vec<Vec<u32>> = vec![Vec::new(); inst.n_projects()];
        for (e, pair) in pairs.iter().enumerate() {
            proj_pairs[pair.project.index()].push(e as u32);
        }
        let mut proj_le = vec![0u32; pairs.len()];
        for list in &mut proj_pairs {
            list.sort_by_key(|&e| (pairs[e as usize].lecturer_rank, e));
            for (pos, &e) in list.iter().enumerate() {
                let rank = pairs[e as usize].lecturer_rank;
                let mut last = pos;
                while last + 1 < list.len() && pairs[list[last + 1] as usize].lecturer_rank == rank {
                    last += 1;
                }
                proj_le[e as usize] = last as u32;
            }
        }
        let best_size = options.incumbent.as_ref().map(Matching::size);
        Self {
            inst,
            model,
            sense: model.sense,
            alive: vec![true; pairs.len()],
            bot: vec![true; inst.n_students()],
            alive_count: inst.students().map(|s| inst.pair_range(s).len() as u32).collect(),
            trail: Vec::new(),
            lect_students,
            lect_le,
            proj_pairs,
            proj_le,
            node_limit: options.node_limit,
            deadline: options.time_limit.map(|t| Instant::now() + t),
            nodes: 0,
            best: options.incumbent.clone(),
            best_size,
        }
    }

    fn kill_pair(&mut self, e: usize) -> bool {
        if !self.alive[e] {
            return false;
        }
        self.alive[e] = false;
        self.alive_count[self.inst.pairs()[e].student.index()] -= 1;
        self.trail.push(Change::Pair(e as u32));
        true
    }

    fn kill_bot(&mut self, s: usize) -> bool {
        if !self.bot[s] {
            return false;
        }
        self.bot[s] = false;
        self.trail.push(Change::Bot(s as u32));
        true
    }

    fn undo_to(&mut self, mark: usize) {
        while self.trail.len() > mark {
            match self.trail.pop().expect("non-empty") {
                Change::Pair(e) => {
                    self.alive[e as usize] = true;
                    self.alive_count[self.inst.pairs()[e as usize].student.index()] += 1;
                }
                Change::Bot(s) => self.bot[s as usize] = true,
            }
        }
    }

    /// The pair a student is fixed to, if decided and assigned.
    fn fixed_pair(&self, s: usize) -> Option<usize> {
        if self.bot[s] || self.alive_count[s] != 1 {
            return None;
        }
        self.inst.pair_range(StudentId::from_index(s)).find(|&e| self.alive[e])
    }

    fn decided(&self, s: usize) -> bool {
        self.alive_count[s] + self.bot[s] as u32 == 1
    }

    /// Runs all deductions to a fixpoint; false on contradiction.
    fn propagate(&mut self) -> bool {
        loop {
            let mut changed = false;
            match self.propagate_capacity() {
                None => return false,
                Some(c) => changed |= c,
            }
            match self.propagate_stability() {
                None => return false,
                Some(c) => changed |= c,
            }
            if !changed {
                return true;
            }
        }
    }

    fn propagate_capacity(&mut self) -> Option<bool> {
        let inst = self.inst;
        let n1 = inst.n_students();
        if (0..n1).any(|s| self.alive_count[s] == 0 && !self.bot[s]) {
            return None;
        }
        let mut fixed_p = vec![0u32; inst.n_projects()];
        let mut fixed_l = vec![0u32; inst.n_lecturers()];
        for s in 0..n1 {
            if let Some(e) = self.fixed_pair(s) {
                let pair = inst.pairs()[e];
                fixed_p[pair.project.index()] += 1;
                fixed_l[pair.lecturer.index()] += 1;
            }
        }
        let mut changed = false;
        for e in 0..inst.n_pairs() {
            if !self.alive[e] {
                continue;
            }
            let pair = inst.pairs()[e];
            let s = pair.student.index();
            if self.fixed_pair(s) == Some(e) {
                continue;
            }
            let p_full = fixed_p[pair.project.index()] >= inst.project_capacity(pair.project);
            let l_full = fixed_l[pair.lecturer.index()] >= inst.lecturer_capacity(pair.lecturer);
            if p_full || l_full {
                changed |= self.kill_pair(e);
                if self.alive_count[s] == 0 && !self.bot[s] {
                    return None;
                }
            }
        }
        for p in inst.projects() {
            if fixed_p[p.index()] > inst.project_capacity(p) {
                return None;
            }
        }
        for l in inst.lecturers() {
            if fixed_l[l.index()] > inst.lecturer_capacity(l) {
                return None;
            }
        }
        Some(changed)
    }

    fn has_alive_in(&self, pairs_in_pk: &[u32]) -> bool {
        pairs_in_pk.iter().any(|&e| self.alive[e as usize])
    }

    fn propagate_stability(&mut self) -> Option<bool> {
        let inst = self.inst;
        let pairs = inst.pairs();
        // Prefix counts of "could still be placed" along each lecturer list and project list.
        let lect_prefix: Vec<Vec<u32>> = self
            .lect_students
            .iter()
            .map(|list| {
                let mut acc = 0;
                list.iter()
                    .map(|(_, mine)| {
                        acc += self.has_alive_in(mine) as u32;
                        acc
                    })
                    .collect()
            })
            .collect();
        let proj_prefix: Vec<Vec<u32>> = self
            .proj_pairs
            .iter()
            .map(|list| {
                let mut acc = 0;
                list.iter()
                    .map(|&e| {
                        acc += self.alive[e as usize] as u32;
                        acc
                    })
                    .collect()
            })
            .collect();

        let mut changed = false;
        for e in 0..pairs.len() {
            let pair = pairs[e];
            let s = pair.student.index();
            let range = inst.pair_range(pair.student);
            let can_be_at_least_as_good = range
                .clone()
                .any(|r| self.alive[r] && pairs[r].student_rank <= pair.student_rank);
            if !can_be_at_least_as_good && !self.bot[s] && self.alive_count[s] == 0 {
                return None;
            }
            let must_be_at_least_as_good = !self.bot[s]
                && range
                    .clone()
                    .all(|r| !self.alive[r] || pairs[r].student_rank <= pair.student_rank);
            if must_be_at_least_as_good {
                continue;
            }

            let (j, k) = (pair.project.index(), pair.lecturer.index());
            let own_in_l = range
                .clone()
                .any(|r| self.alive[r] && pairs[r].lecturer == pair.lecturer) as u32;
            let alpha_count = lect_prefix[k][self.lect_le[e] as usize] - own_in_l;
            let beta_count = proj_prefix[j][self.proj_le[e] as usize] - self.alive[e] as u32;
            let alpha_ok = alpha_count >= inst.lecturer_capacity(pair.lecturer);
            let beta_ok = beta_count >= inst.project_capacity(pair.project);

            if !alpha_ok && !beta_ok {
                if !can_be_at_least_as_good {
                    return None;
                }
                changed |= self.kill_bot(s);
                for r in range.clone() {
                    if pairs[r].student_rank > pair.student_rank {
                        changed |= self.kill_pair(r);
                    }
                }
                continue;
            }
            if can_be_at_least_as_good {
                continue;
            }
            // s_i ends up worse than p_j: whichever of a/b is possible is required.
            if alpha_ok && !beta_ok {
                changed |= self.require_alpha(e)?;
            } else if beta_ok && !alpha_ok {
                changed |= self.require_beta(e)?;
            }
        }
        Some(changed)
    }

    /// l_k must end up full of students ranked no worse than s_i, s_i excluded.
    fn require_alpha(&mut self, e: usize) -> Option<bool> {
        let inst = self.inst;
        let pair = inst.pairs()[e];
        let k = pair.lecturer.index();
        let cutoff = self.lect_le[e] as usize;
        let mut changed = false;
        let list = std::mem::take(&mut self.lect_students[k]);
        let mut count = 0;
        for (pos, (u, mine)) in list.iter().enumerate() {
            if pos > cutoff || *u == pair.student.0 {
                for &r in mine {
                    changed |= self.kill_pair(r as usize);
                }
            } else if self.has_alive_in(mine) {
                count += 1;
            }
        }
        let capacity = inst.lecturer_capacity(pair.lecturer);
        if count < capacity {
            self.lect_students[k] = list;
            return None;
        }
        if count == capacity {
            for (pos, (u, mine)) in list.iter().enumerate() {
                if pos > cutoff || *u == pair.student.0 || !self.has_alive_in(mine) {
                    continue;
                }
                let u = *u as usize;
                changed |= self.kill_bot(u);
                for r in inst.pair_range(StudentId::from_index(u)) {
                    if inst.pairs()[r].lecturer != pair.lecturer {
                        changed |= self.kill_pair(r);
                    }
                }
            }
        }
        self.lect_students[k] = list;
        Some(changed)
    }

    /// p_j must end up full of students ranked no worse than s_i, s_i excluded.
    fn require_beta(&mut self, e: usize) -> Option<bool> {
        let inst = self.inst;
        let pair = inst.pairs()[e];
        let j = pair.project.index();
        let cutoff = self.proj_le[e] as usize;
        let mut changed = false;
        let list = std::mem::take(&mut self.proj_pairs[j]);
        let mut count = 0;
        for (pos, &r) in list.iter().enumerate() {
            if pos > cutoff || r as usize == e {
                changed |= self.kill_pair(r as usize);
            } else if self.alive[r as usize] {
                count += 1;
            }
        }
        let capacity = inst.project_capacity(pair.project);
        if count < capacity {
            self.proj_pairs[j] = list;
            return None;
        }
        if count == capacity {
            for (pos, &r) in list.iter().enumerate() {
                if pos > cutoff || r as usize == e || !self.alive[r as usize] {
                    continue;
                }
                let u = inst.pairs()[r as usize].student;
                changed |= self.kill_bot(u.index());
                for q in inst.pair_range(u) {
                    if q != r as usize {
                        changed |= self.kill_pair(q);
                    }
                }
            }
        }
        self.proj_pairs[j] = list;
        Some(changed)
    }

    /// Optimistic objective value of the current subtree.
    fn bound(&self) -> usize {
        let inst = self.inst;
        match self.sense {
            Sense::Minimize => (0..inst.n_students()).filter(|&s| !self.bot[s]).count(),
            Sense::Maximize => {
                let by_students = (0..inst.n_students()).filter(|&s| self.alive_count[s] > 0).count();
                let mut reach_p = vec![0u32; inst.n_projects()];
                for (e, pair) in inst.pairs().iter().enumerate() {
                    if self.alive[e] {
                        reach_p[pair.project.index()] += 1;
                    }
                }
                let by_capacity: u64 = inst
                    .lecturers()
                    .map(|l| {
                        let through_projects: u64 = inst
                            .projects_of(l)
                            .iter()
                            .map(|&p| reach_p[p.index()].min(inst.project_capacity(p)) as u64)
                            .sum();
                        through_projects.min(inst.lecturer_capacity(l) as u64)
                    })
                    .sum();
                by_students.min(by_capacity as usize)
            }
        }
    }

    fn can_improve(&self) -> bool {
        match (self.best_size, self.sense) {
            (None, _) => true,
            (Some(b), Sense::Maximize) => self.bound() > b,
            (Some(b), Sense::Minimize) => self.bound() < b,
        }
    }

    fn out_of_budget(&self) -> bool {
        self.node_limit.is_some_and(|n| self.nodes >= n)
            || (self.nodes.is_multiple_of(256) && self.deadline.is_some_and(|d| Instant::now() >= d))
    }

    /// Returns false if the budget ran out.
    fn dfs(&mut self) -> bool {
        self.nodes += 1;
        if self.out_of_budget() {
            return false;
        }
        let mark = self.trail.len();
        if !self.propagate() || !self.can_improve() {
            self.undo_to(mark);
            return true;
        }
        let n1 = self.inst.n_students();
        let branch = (0..n1)
            .filter(|&s| !self.decided(s))
            .min_by_key(|&s| (self.alive_count[s] + self.bot[s] as u32, s));
        let Some(s) = branch else {
            self.record_leaf();
            self.undo_to(mark);
            return true;
        };

        let sid = StudentId::from_index(s);
        let options: Vec<Option<usize>> = {
            let assigned = self.inst.pair_range(sid).filter(|&e| self.alive[e]).map(Some);
            let nothing = self.bot[s].then_some(None);
            match self.sense {
                Sense::Maximize => assigned.chain(nothing).collect(),
                Sense::Minimize => nothing.into_iter().chain(assigned).collect(),
            }
        };
        for option in options {
            let child = self.trail.len();
            match option {
                Some(e) => {
                    self.kill_bot(s);
                    for r in self.inst.pair_range(sid) {
                        if r != e {
                            self.kill_pair(r);
                        }
                    }
                }
                None => {
                    for r in self.inst.pair_range(sid) {
                        self.kill_pair(r);
                    }
                }
            }
            let finished = self.dfs();
            self.undo_to(child);
            if !finished {
                self.undo_to(mark);
                return false;
            }
        }
        self.undo_to(mark);
        true
    }

    fn record_leaf(&mut self) {
        let inst = self.inst;
        let assignment: Vec<Option<ProjectId>> = (0..inst.n_students())
            .map(|s| self.fixed_pair(s).map(|e| inst.pairs()[e].project))
            .collect();
        let m = Matching::from_assignment(inst, assignment).expect("propagation keeps capacities");
        let report = self.model.check_feasible(&m);
        assert!(
            report.feasible(),
            "search produced an infeasible leaf: {:?}",
            report.violated
        );
        let better = match (self.best_size, self.sense) {
            (None, _) => true,
            (Some(b), Sense::Maximize) => m.size() > b,
            (Some(b), Sense::Minimize) => m.size() < b,
        };
        if better {
            self.best_size = Some(m.size());
            self.best = Some(m);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samples;
    use crate::stability::is_stable;

    fn s(n: u32) -> StudentId {
        StudentId::from_number(n)
    }

    fn p(n: u32) -> ProjectId {
        ProjectId::from_number(n)
    }

    #[test]
    fn tight_model_shape() {
        let inst = samples::tight();
        let model = build_model(&inst, Sense::Maximize);
        assert_eq!(model.n_binaries(), 18);
        let count = |prefix: &str| model.rows().iter().filter(|r| r.name.starts_with(prefix)).count();
        assert_eq!((count("asg_"), count("pcap_"), count("lcap_")), (3, 3, 2));
        assert_eq!(count("stab"), 18);
        let lp = model.emit_lp();
        assert!(lp.starts_with("Maximize\n obj: x_1_3 + x_1_2 + x_2_3 + x_3_3 + x_3_2 + x_3_1\nSubject To\n"));
        assert!(lp.contains(" asg_1: x_1_3 + x_1_2 <= 1\n"));
        assert!(lp.contains(" pcap_1: x_3_1 <= 2\n"));
        assert!(lp.contains(" lcap_2: x_1_3 + x_2_3 + x_3_3 <= 1\n"));
        assert!(lp.contains(" stab5_1_2: x_1_3 + x_1_2 + a_1_2 + b_1_2 >= 1\n"));
        // l2 ranks s1 above s2 above s3.
        assert!(lp.contains(" stab6_3_3: x_1_3 + x_2_3 - a_3_3 >= 0\n"));
        assert!(lp.contains(" stab7_2_3: x_1_3 - b_2_3 >= 0\n"));
        assert!(lp.contains(" stab6_1_3: - a_1_3 >= 0\n"));
        assert!(lp.ends_with("Binary\n x_1_3 x_1_2 x_2_3 x_3_3 x_3_2 x_3_1 a_1_3 a_1_2 a_2_3 a_3_3 a_3_2 a_3_1\n b_1_3 b_1_2 b_2_3 b_3_3 b_3_2 b_3_1\nEnd\n"));
    }

    #[test]
    fn empty_instance_model() {
        let text = "spa-st 1\ncounts 1 1 1\nproject 1 lecturer 1 cap 1\nlecturer 1 cap 1 prefs -\nstudent 1 prefs -\n";
        let inst = Instance::parse(text).unwrap();
        let model = build_model(&inst, Sense::Maximize);
        assert_eq!(model.n_binaries(), 0);
        assert!(model.rows().is_empty());
        assert_eq!(model.emit_lp(), "Maximize\n obj: 0\nSubject To\nBinary\nEnd\n");
        let out = solve(&inst, &model, &SolveOptions::default()).unwrap();
        assert_eq!(out.matching.size(), 0);
    }

    #[test]
    fn clone_trap_has_no_variable_for_unranked_pair() {
        let inst = samples::clone_trap();
        let lp = build_model(&inst, Sense::Maximize).emit_lp();
        assert!(!lp.contains("x_2_1"));
        assert!(lp.contains("x_2_2"));
    }

    #[test]
    fn tight_feasibility() {
        let inst = samples::tight();
        let model = build_model(&inst, Sense::Maximize);
        let max = Matching::from_pairs(&inst, [(s(1), p(2)), (s(2), p(3)), (s(3), p(1))]).unwrap();
        assert!(model.check_feasible(&max).feasible());
        let empty = Matching::empty(&inst);
        let report = model.check_feasible(&empty);
        assert!(!report.feasible());
        assert!(report.violated.iter().all(|r| r.starts_with("stab5_")));
    }

    #[test]
    fn clone_trap_unstable_matching_violates_a_stability_row() {
        let inst = samples::clone_trap();
        let model = build_model(&inst, Sense::Maximize);
        let m = Matching::from_pairs(&inst, [(s(1), p(1)), (s(2), p(3))]).unwrap();
        assert_eq!(model.check_feasible(&m).violated, vec!["stab5_2_2".to_owned()]);
    }

    #[test]
    fn solver_finds_extremes() {
        let inst = samples::tight();
        let max = solve_instance(&inst, Sense::Maximize, &SolveOptions::default()).unwrap();
        assert_eq!(max.matching.size(), 3);
        assert!(is_stable(&inst, &max.matching).unwrap());
        let min = solve_instance(&inst, Sense::Minimize, &SolveOptions::default()).unwrap();
        assert_eq!(min.matching.size(), 2);
        assert!(is_stable(&inst, &min.matching).unwrap());
        let inst3 = samples::spare_capacity();
        let max = solve_instance(&inst3, Sense::Maximize, &SolveOptions::default()).unwrap();
        assert_eq!(max.matching.size(), 4);
    }

    #[test]
    fn size_guard() {
        let inst = samples::tight();
        let options = SolveOptions {
            max_binaries: 10,
            ..SolveOptions::default()
        };
        assert!(matches!(
            solve_instance(&inst, Sense::Maximize, &options),
            Err(IpError::TooLarge { binaries: 18, .. })
        ));
    }

    #[test]
    fn incumbent_must_be_feasible() {
        let inst = samples::tight();
        let options = SolveOptions {
            incumbent: Some(Matching::empty(&inst)),
            ..SolveOptions::default()
        };
        assert!(matches!(
            solve_instance(&inst, Sense::Maximize, &options),
            Err(IpError::BadIncumbent)
        ));
    }
}
