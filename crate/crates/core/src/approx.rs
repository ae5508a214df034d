//! Linear-time approximation of a maximum stable matching.
//!
//! Students apply to projects from the head tie of their lists. A student
//! exhausting its list once gets it back and moves to phase 2; exhausting it
//! again retires it (phase 3). Phase-2 students win rank ties on the lecturer
//! side, and while a student is in phase 1 a project tied with another still
//! fully available one is held only "precariously", so other applicants can
//! take it without penalising the holder. A final promotion pass moves
//! students to better projects of their own lecturer where capacity allows.
//!
//! All per-operation costs are amortised constant: list heads and the two
//! head-tie cursors only move rightwards within a phase, and the worst
//! assignee of a project or lecturer is found from a pointer to its worst
//! occupied tie.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ids::{LecturerId, ProjectId, StudentId};
use crate::instance::Instance;
use crate::matching::Matching;

const NONE: u32 = u32::MAX;

/// The order in which available students are taken from the queue.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SchedulePolicy {
    /// Students s1..sn in order; displaced students rejoin at the tail.
    #[default]
    Fifo,
    /// As `Fifo` but the initial order is a seeded random permutation.
    Shuffled(u64),
}

impl FromStr for SchedulePolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "fifo" {
            return Ok(SchedulePolicy::Fifo);
        }
        if let Some(seed) = s.strip_prefix("shuffled:") {
            return seed
                .parse()
                .map(SchedulePolicy::Shuffled)
                .map_err(|_| format!("bad seed in `{s}`"));
        }
        Err(format!("unknown schedule `{s}` (expected fifo or shuffled:<seed>)"))
    }
}

impl fmt::Display for SchedulePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchedulePolicy::Fifo => f.write_str("fifo"),
            SchedulePolicy::Shuffled(seed) => write!(f, "shuffled:{seed}"),
        }
    }
}

/// A student removed from its project to make room for an applicant.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Displacement {
    pub student: StudentId,
    pub project: ProjectId,
    /// Precarious holders keep the project on their list.
    pub precarious: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ApplicationOutcome {
    Accepted {
        displaced: Option<Displacement>,
    },
    /// The project was removed from the applicant's list.
    Rejected,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Event {
    Applied {
        student: StudentId,
        project: ProjectId,
        outcome: ApplicationOutcome,
    },
    PhaseChange {
        student: StudentId,
        phase: u8,
    },
    Promoted {
        student: StudentId,
        from: ProjectId,
        to: ProjectId,
    },
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Event::Applied {
                student,
                project,
                outcome,
            } => {
                write!(f, "{student} applies {project}, ")?;
                match outcome {
                    ApplicationOutcome::Accepted { displaced } => {
                        f.write_str("accepted")?;
                        if let Some(d) = displaced.filter(|d| !d.precarious) {
                            write!(f, ", {} pref removed by {}", d.project, d.student)?;
                        }
                        Ok(())
                    }
                    ApplicationOutcome::Rejected => {
                        write!(f, "rejected, {project} pref removed by {student}")
                    }
                }
            }
            Event::PhaseChange { student, phase } => write!(f, "{student} moves to phase {phase}"),
            Event::Promoted { student, from, to } => write!(f, "{student} promoted from {from} to {to}"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RunStats {
    pub applications: u64,
    /// Largest number of applications any student made to any one project.
    pub max_pair_applications: u8,
    pub promotions: u64,
    pub phase_changes: u64,
}

#[derive(Clone, Debug, Default)]
pub struct ApproxOptions {
    pub schedule: SchedulePolicy,
    pub record_events: bool,
    /// Recheck the internal invariants after every application (slow).
    pub audit: bool,
}

#[derive(Clone, Debug)]
pub struct ApproxRun {
    pub matching: Matching,
    pub events: Vec<Event>,
    pub stats: RunStats,
}

pub fn approx_match(inst: &Instance, schedule: SchedulePolicy) -> Matching {
    run(
        inst,
        &ApproxOptions {
            schedule,
            ..ApproxOptions::default()
        },
    )
    .matching
}

pub fn run(inst: &Instance, options: &ApproxOptions) -> ApproxRun {
    let mut state = AlgState::new(inst, options.schedule);
    if options.record_events {
        state.events = Some(Vec::new());
    }
    while let Some(s) = state.queue.pop_front() {
        let s = StudentId(s);
        while state.is_available(s) {
            state.apply(s);
            if options.audit {
                if let Err(e) = state.check_invariants() {
                    panic!("invariant broken after {s} applied: {e}");
                }
            }
        }
    }
    state.promote_students();
    ApproxRun {
        matching: state.matching(),
        events: state.events.take().unwrap_or_default(),
        stats: state.stats.clone(),
    }
}

/// Renders an event log as `step <n> | <action> | <assignment>` lines, the
/// assignment listing each student's project or `-` after the step.
pub fn render_trace(inst: &Instance, events: &[Event]) -> String {
    let mut assignment: Vec<Option<ProjectId>> = vec![None; inst.n_students()];
    let mut out = String::new();
    for (n, ev) in events.iter().enumerate() {
        match *ev {
            Event::Applied {
                student,
                project,
                outcome: ApplicationOutcome::Accepted { displaced },
            } => {
                if let Some(d) = displaced {
                    assignment[d.student.index()] = None;
                }
                assignment[student.index()] = Some(project);
            }
            Event::Promoted { student, to, .. } => assignment[student.index()] = Some(to),
            _ => {}
        }
        let cols: Vec<String> = assignment
            .iter()
            .map(|p| p.map_or_else(|| "-".to_owned(), |p| p.to_string()))
            .collect();
        out.push_str(&format!("step {} | {} | {}\n", n + 1, ev, cols.join(" ")));
    }
    out
}

/// Stable counting sort: indices of `keys` ordered by key, each key below `n_keys`.
fn bucket_order(keys: impl Iterator<Item = usize> + Clone, n_keys: usize) -> Vec<u32> {
    let mut start = vec![0u32; n_keys + 1];
    for k in keys.clone() {
        start[k + 1] += 1;
    }
    for k in 0..n_keys {
        start[k + 1] += start[k];
    }
    let mut out = vec![0u32; start[n_keys] as usize];
    for (i, k) in keys.enumerate() {
        out[start[k] as usize] = i as u32;
        start[k] += 1;
    }
    out
}

/// Assignees of each owner (project or lecturer) bucketed by the owner's
/// ranking ties, each tie holding separate phase-1 and phase-2 lists, plus a
/// pointer to the worst non-empty tie.
#[derive(Clone, Debug, Default)]
struct Tracker {
    owner_ties: Vec<u32>,
    slots: Vec<Slot>,
    ties: Vec<Tie>,
    last: Vec<u32>,
}

/// Phase-1 and phase-2 list heads of one tie, its number of assignees and
/// the rank it holds.
#[derive(Clone, Copy, Debug)]
struct Tie {
    heads: [u32; 2],
    count: u32,
    rank: u32,
}

/// One entry of an owner's ranking. `list` is 0 when unassigned, otherwise the
/// phase list it sits on.
#[derive(Clone, Copy, Debug)]
struct Slot {
    student: u32,
    tie: u32,
    next: u32,
    prev: u32,
    list: u8,
}

impl Tracker {
    fn with_capacity(owners: usize, slots: usize) -> Self {
        Self {
            owner_ties: Vec::with_capacity(owners + 1),
            slots: Vec::with_capacity(slots),
            ties: Vec::with_capacity(slots),
            last: Vec::with_capacity(owners),
        }
    }

    fn begin_owner(&mut self) {
        self.owner_ties.push(self.ties.len() as u32);
        self.last.push(NONE);
    }

    fn finish(&mut self) {
        self.owner_ties.push(self.ties.len() as u32);
    }

    /// Appends the next student of the owner being built, in ranking order.
    fn push(&mut self, student: u32, rank: u32) -> u32 {
        let owner_first_tie = *self.owner_ties.last().expect("begin_owner called") as usize;
        if self.ties.len() == owner_first_tie || self.ties.last().is_none_or(|t| t.rank != rank) {
            self.ties.push(Tie {
                heads: [NONE; 2],
                count: 0,
                rank,
            });
        }
        let slot = self.slots.len() as u32;
        self.slots.push(Slot {
            student,
            tie: self.ties.len() as u32 - 1,
            next: NONE,
            prev: NONE,
            list: 0,
        });
        slot
    }

    fn insert(&mut self, owner: usize, slot: u32, phase: u8) {
        let s = slot as usize;
        debug_assert_eq!(self.slots[s].list, 0);
        let t = self.slots[s].tie as usize;
        let which = (phase - 1) as usize;
        let head = self.ties[t].heads[which];
        self.slots[s].next = head;
        self.slots[s].prev = NONE;
        self.slots[s].list = phase;
        if head != NONE {
            self.slots[head as usize].prev = slot;
        }
        self.ties[t].heads[which] = slot;
        self.ties[t].count += 1;
        if self.last[owner] == NONE || self.last[owner] < t as u32 {
            self.last[owner] = t as u32;
        }
    }

    fn remove(&mut self, owner: usize, slot: u32) {
        let s = slot as usize;
        let Slot {
            tie, prev, next, list, ..
        } = self.slots[s];
        let which = (list - 1) as usize;
        let t = tie as usize;
        if prev == NONE {
            self.ties[t].heads[which] = next;
        } else {
            self.slots[prev as usize].next = next;
        }
        if next != NONE {
            self.slots[next as usize].prev = prev;
        }
        self.slots[s].list = 0;
        self.ties[t].count -= 1;
        if self.last[owner] == t as u32 {
            let first = self.owner_ties[owner];
            let mut l = t as u32;
            while self.ties[l as usize].count == 0 {
                if l == first {
                    l = NONE;
                    break;
                }
                l -= 1;
            }
            self.last[owner] = l;
        }
    }

    /// Worst-ranked assignee: phase 1 before phase 2, then lowest student index.
    fn worst(&self, owner: usize) -> Option<u32> {
        let t = self.last[owner];
        if t == NONE {
            return None;
        }
        let heads = self.ties[t as usize].heads;
        let mut slot = if heads[0] != NONE { heads[0] } else { heads[1] };
        let mut best = slot;
        while slot != NONE {
            if self.slots[slot as usize].student < self.slots[best as usize].student {
                best = slot;
            }
            slot = self.slots[slot as usize].next;
        }
        Some(best)
    }

    fn rank(&self, slot: u32) -> u32 {
        self.ties[self.slots[slot as usize].tie as usize].rank
    }

    fn count_assigned(&self, owner: usize) -> u32 {
        let (a, b) = (self.owner_ties[owner] as usize, self.owner_ties[owner + 1] as usize);
        self.ties[a..b].iter().map(|t| t.count).sum()
    }
}

/// Per-entry state: end of the entry's tie on the student's list, its slots on
/// the project and lecturer rankings, and deletion and application counts.
#[derive(Clone, Copy, Debug, Default)]
struct Entry {
    group_end: u32,
    proj_slot: u32,
    lect_slot: u32,
    deleted: bool,
    applications: u8,
}

/// Working state of one run.
pub struct AlgState<'a> {
    inst: &'a Instance,
    // Per student.
    phase: Vec<u8>,
    head: Vec<u32>,
    remaining: Vec<u32>,
    first: Vec<u32>,
    second: Vec<u32>,
    cursor_group: Vec<u32>,
    assigned: Vec<u32>,
    precarious: Vec<bool>,
    supporter: Vec<u32>,
    // Per entry (acceptable pair, indexed as in the instance's pair table).
    entries: Vec<Entry>,
    // Per project.
    proj_load: Vec<u32>,
    proj: Tracker,
    precarious_students: Vec<BTreeSet<u32>>,
    support_list: Vec<Vec<u32>>,
    fa_lost: Vec<bool>,
    // Per lecturer.
    lect_load: Vec<u32>,
    lect: Tracker,
    precarious_projects: Vec<BTreeSet<u32>>,
    queue: VecDeque<u32>,
    events: Option<Vec<Event>>,
    stats: RunStats,
}

impl<'a> AlgState<'a> {
    pub fn new(inst: &'a Instance, schedule: SchedulePolicy) -> Self {
        let n1 = inst.n_students();
        let n2 = inst.n_projects();
        let n3 = inst.n_lecturers();
        let m = inst.n_pairs();
        let pairs = inst.pairs();

        let mut entries = vec![Entry::default(); m];
        let mut head = vec![NONE; n1];
        let mut remaining = vec![0u32; n1];
        for s in inst.students() {
            let range = inst.pair_range(s);
            remaining[s.index()] = range.len() as u32;
            if !range.is_empty() {
                head[s.index()] = range.start as u32;
            }
            let mut e = range.end;
            while e > range.start {
                let end = e;
                let rank = pairs[e - 1].student_rank;
                while e > range.start && pairs[e - 1].student_rank == rank {
                    e -= 1;
                    entries[e].group_end = end as u32;
                }
            }
        }

        // Rankings of each lecturer and project: pairs sorted by lecturer and
        // lecturer rank, then by project. A student with several projects of
        // one lecturer takes a single lecturer slot.
        let mut lect_base = vec![0usize; n3 + 1];
        for l in inst.lecturers() {
            lect_base[l.index() + 1] = lect_base[l.index()] + inst.lecturer_prefs(l).len();
        }
        let by_lect = bucket_order(
            (0..m).map(|e| lect_base[pairs[e].lecturer.index()] + pairs[e].lecturer_rank as usize - 1),
            lect_base[n3],
        );
        let by_proj = bucket_order(by_lect.iter().map(|&e| pairs[e as usize].project.index()), n2);

        let mut lect = Tracker::with_capacity(n3, m);
        let mut next = by_lect.iter().copied().peekable();
        for l in inst.lecturers() {
            lect.begin_owner();
            let mut prev: Option<(StudentId, u32)> = None;
            while let Some(&e) = next.peek() {
                let pair = &pairs[e as usize];
                if pair.lecturer != l {
                    break;
                }
                next.next();
                let slot = match prev {
                    Some((s, slot)) if s == pair.student => slot,
                    _ => lect.push(pair.student.0, pair.lecturer_rank),
                };
                entries[e as usize].lect_slot = slot;
                prev = Some((pair.student, slot));
            }
        }
        lect.finish();

        let mut proj = Tracker::with_capacity(n2, m);
        let mut next = by_proj.into_iter().map(|i| by_lect[i as usize]).peekable();
        for j in 0..n2 {
            proj.begin_owner();
            while let Some(&e) = next.peek() {
                let pair = &pairs[e as usize];
                if pair.project.index() != j {
                    break;
                }
                next.next();
                entries[e as usize].proj_slot = proj.push(pair.student.0, pair.lecturer_rank);
            }
        }
        proj.finish();

        let mut order: Vec<u32> = (0..n1 as u32).filter(|&s| head[s as usize] != NONE).collect();
        if let SchedulePolicy::Shuffled(seed) = schedule {
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        }

        Self {
            inst,
            phase: vec![1; n1],
            head,
            remaining,
            first: vec![NONE; n1],
            second: vec![NONE; n1],
            cursor_group: vec![NONE; n1],
            assigned: vec![NONE; n1],
            precarious: vec![false; n1],
            supporter: vec![NONE; n1],
            entries,
            proj_load: vec![0; n2],
            proj,
            precarious_students: vec![BTreeSet::new(); n2],
            support_list: vec![Vec::new(); n2],
            fa_lost: vec![false; n2],
            lect_load: vec![0; n3],
            lect,
            precarious_projects: vec![BTreeSet::new(); n3],
            queue: order.into(),
            events: None,
            stats: RunStats::default(),
        }
    }

    pub fn phase(&self, s: StudentId) -> u8 {
        self.phase[s.index()]
    }

    pub fn is_available(&self, s: StudentId) -> bool {
        self.assigned[s.index()] == NONE && self.phase[s.index()] < 3 && self.head[s.index()] != NONE
    }

    pub fn project_of(&self, s: StudentId) -> Option<ProjectId> {
        let e = self.assigned[s.index()];
        (e != NONE).then(|| self.inst.pairs()[e as usize].project)
    }

    pub fn is_precarious(&self, s: StudentId) -> bool {
        self.precarious[s.index()]
    }

    pub fn stats(&self) -> &RunStats {
        &self.stats
    }

    /// Students currently waiting in the queue, front first.
    pub fn queued(&self) -> Vec<StudentId> {
        self.queue.iter().map(|&s| StudentId(s)).collect()
    }

    /// Current working list of `s` (entries not yet removed), in order.
    pub fn working_list(&self, s: StudentId) -> Vec<ProjectId> {
        self.inst
            .pair_range(s)
            .filter(|&e| !self.entries[e].deleted)
            .map(|e| self.inst.pairs()[e].project)
            .collect()
    }

    pub fn matching(&self) -> Matching {
        let assignment = (0..self.inst.n_students())
            .map(|i| self.project_of(StudentId::from_index(i)))
            .collect();
        Matching::from_assignment(self.inst, assignment).expect("algorithm keeps capacities")
    }

    pub fn events(&self) -> &[Event] {
        self.events.as_deref().unwrap_or(&[])
    }

    pub fn record_events(&mut self) {
        self.events.get_or_insert_with(Vec::new);
    }

    fn log(&mut self, ev: Event) {
        if let Some(events) = self.events.as_mut() {
            events.push(ev);
        }
    }

    fn project(&self, e: u32) -> ProjectId {
        self.inst.pairs()[e as usize].project
    }

    fn project_full(&self, p: ProjectId) -> bool {
        self.proj_load[p.index()] >= self.inst.project_capacity(p)
    }

    fn lecturer_full(&self, l: LecturerId) -> bool {
        self.lect_load[l.index()] >= self.inst.lecturer_capacity(l)
    }

    /// Both the project and its lecturer are undersubscribed.
    pub fn fully_available(&self, p: ProjectId) -> bool {
        !self.project_full(p) && !self.lecturer_full(self.inst.lecturer_of(p))
    }

    fn sync_cursors(&mut self, s: usize) {
        let h = self.head[s];
        let g = self.entries[h as usize].group_end;
        if self.cursor_group[s] != g {
            self.cursor_group[s] = g;
            self.first[s] = h;
            self.second[s] = h;
        }
    }

    /// The project `s` applies to next: the first fully available project of
    /// its head tie, or else the first project of the head tie.
    fn favourite(&mut self, s: usize) -> u32 {
        self.sync_cursors(s);
        let end = self.cursor_group[s];
        let mut e = self.first[s];
        while e < end {
            if !self.entries[e as usize].deleted && self.fully_available(self.project(e)) {
                self.first[s] = e;
                return e;
            }
            e += 1;
        }
        self.first[s] = end;
        self.head[s]
    }

    /// Another fully available project in the head tie of assigned `s`.
    fn find_support(&mut self, s: usize) -> Option<ProjectId> {
        let own = self.assigned[s];
        let end = self.entries[own as usize].group_end;
        let mut e = self.second[s];
        while e < end {
            if !self.entries[e as usize].deleted && e != own && self.fully_available(self.project(e)) {
                self.second[s] = e;
                return Some(self.project(e));
            }
            e += 1;
        }
        self.second[s] = end;
        None
    }

    fn add_pair(&mut self, s: usize, e: u32) {
        let pair = self.inst.pairs()[e as usize];
        let (p, l) = (pair.project.index(), pair.lecturer.index());
        self.assigned[s] = e;
        self.proj_load[p] += 1;
        self.lect_load[l] += 1;
        let phase = self.phase[s];
        self.proj.insert(p, self.entries[e as usize].proj_slot, phase);
        self.lect.insert(l, self.entries[e as usize].lect_slot, phase);
    }

    fn remove_pair(&mut self, s: usize) -> u32 {
        let e = self.assigned[s];
        let pair = self.inst.pairs()[e as usize];
        let (p, l) = (pair.project.index(), pair.lecturer.index());
        self.proj_load[p] -= 1;
        self.lect_load[l] -= 1;
        self.proj.remove(p, self.entries[e as usize].proj_slot);
        self.lect.remove(l, self.entries[e as usize].lect_slot);
        if self.precarious[s] {
            self.clear_precarious(s);
        }
        self.assigned[s] = NONE;
        e
    }

    fn mark_precarious(&mut self, s: usize, supporter: ProjectId) {
        let p = self.project(self.assigned[s]);
        self.precarious[s] = true;
        self.supporter[s] = supporter.0;
        self.support_list[supporter.index()].push(s as u32);
        self.precarious_students[p.index()].insert(s as u32);
        self.precarious_projects[self.inst.lecturer_of(p).index()].insert(p.0);
    }

    fn clear_precarious(&mut self, s: usize) {
        let p = self.project(self.assigned[s]);
        self.precarious[s] = false;
        self.supporter[s] = NONE;
        let set = &mut self.precarious_students[p.index()];
        set.remove(&(s as u32));
        if set.is_empty() {
            self.precarious_projects[self.inst.lecturer_of(p).index()].remove(&p.0);
        }
    }

    /// `q` stopped being fully available: find new supporters for the
    /// precarious students it backed.
    fn drain_supporters(&mut self, q: ProjectId) {
        self.fa_lost[q.index()] = true;
        let list = std::mem::take(&mut self.support_list[q.index()]);
        for u in list {
            let u = u as usize;
            if !self.precarious[u] || self.supporter[u] != q.0 {
                continue;
            }
            match self.find_support(u) {
                Some(q2) => {
                    self.supporter[u] = q2.0;
                    self.support_list[q2.index()].push(u as u32);
                }
                None => self.clear_precarious(u),
            }
        }
    }

    /// Lecturer-side comparison: rank first, then a phase-2 student beats a
    /// phase-1 one of equal rank.
    pub fn meta_prefers_lecturer(&self, l: LecturerId, a: StudentId, b: StudentId) -> bool {
        let ra = self.inst.lecturer_rank(l, a).expect("first student is ranked");
        let rb = self.inst.lecturer_rank(l, b).expect("second student is ranked");
        self.meta_prefers_ranks(ra, self.phase[a.index()], rb, self.phase[b.index()])
    }

    fn meta_prefers_ranks(&self, ra: u32, phase_a: u8, rb: u32, phase_b: u8) -> bool {
        ra < rb || (ra == rb && phase_a == 2 && phase_b != 2)
    }

    /// Student-side comparison: rank first, then a fully available project
    /// beats one that is not.
    pub fn meta_prefers_student(&self, s: StudentId, a: ProjectId, b: ProjectId) -> bool {
        let ra = self.inst.student_rank(s, a).expect("first project is ranked");
        let rb = self.inst.student_rank(s, b).expect("second project is ranked");
        ra < rb || (ra == rb && self.fully_available(a) && !self.fully_available(b))
    }

    /// An assignee of `l` of worst rank, phase-1 students first, then lowest index.
    pub fn worst_assignee(&self, l: LecturerId) -> Option<StudentId> {
        self.lect
            .worst(l.index())
            .map(|slot| StudentId(self.lect.slots[slot as usize].student))
    }

    pub fn worst_assignee_in_project(&self, p: ProjectId) -> Option<StudentId> {
        self.proj
            .worst(p.index())
            .map(|slot| StudentId(self.proj.slots[slot as usize].student))
    }

    /// Removes `p` from the working list of `s`. An emptied list is restored
    /// and the student moves to the next phase; the new phase is returned.
    pub fn remove_pref(&mut self, s: StudentId, p: ProjectId) -> Option<u8> {
        let e = self.inst.pair_index(s, p).expect("project is on the list");
        assert!(!self.entries[e].deleted, "{p} was already removed from {s}'s list");
        self.remove_entry(s.index(), e as u32)
    }

    fn remove_entry(&mut self, s: usize, e: u32) -> Option<u8> {
        self.entries[e as usize].deleted = true;
        self.remaining[s] -= 1;
        if self.remaining[s] == 0 {
            let range = self.inst.pair_range(StudentId::from_index(s));
            for x in range.clone() {
                self.entries[x].deleted = false;
            }
            self.remaining[s] = range.len() as u32;
            self.head[s] = range.start as u32;
            self.cursor_group[s] = NONE;
            self.phase[s] += 1;
            self.stats.phase_changes += 1;
            return Some(self.phase[s]);
        }
        if self.head[s] == e {
            let mut h = e;
            while self.entries[h as usize].deleted {
                h += 1;
            }
            self.head[s] = h;
        }
        None
    }

    /// Lets available student `s` apply to its favourite project.
    pub fn apply(&mut self, s: StudentId) -> ApplicationOutcome {
        let si = s.index();
        assert!(self.is_available(s), "{s} is not available");
        let e = self.favourite(si);
        let pair = self.inst.pairs()[e as usize];
        let (p, l) = (pair.project, pair.lecturer);

        self.stats.applications += 1;
        let count = &mut self.entries[e as usize].applications;
        *count += 1;
        assert!(*count <= 3, "{s} applied to {p} more than three times");
        self.stats.max_pair_applications = self.stats.max_pair_applications.max(*count);

        let mut phase_change = None;
        let outcome = if self.fully_available(p) {
            self.add_pair(si, e);
            if self.phase[si] == 1 {
                if let Some(q) = self.find_support(si) {
                    self.mark_precarious(si, q);
                }
            }
            if self.lecturer_full(l) {
                for &q in self.inst.projects_of(l) {
                    self.drain_supporters(q);
                }
            } else if self.project_full(p) {
                self.drain_supporters(p);
            }
            ApplicationOutcome::Accepted { displaced: None }
        } else {
            let rank = pair.lecturer_rank;
            let victim = if !self.project_full(p) {
                // The lecturer is full.
                if let Some(&q) = self.precarious_projects[l.index()].first() {
                    let u = *self.precarious_students[q as usize].first().expect("non-empty");
                    Some((u, true))
                } else {
                    self.lect.worst(l.index()).and_then(|slot| {
                        let w = self.lect.slots[slot as usize].student;
                        let wr = self.lect.rank(slot);
                        self.meta_prefers_ranks(rank, self.phase[si], wr, self.phase[w as usize])
                            .then_some((w, false))
                    })
                }
            } else if let Some(&u) = self.precarious_students[p.index()].first() {
                Some((u, true))
            } else {
                self.proj.worst(p.index()).and_then(|slot| {
                    let w = self.proj.slots[slot as usize].student;
                    let wr = self.proj.rank(slot);
                    self.meta_prefers_ranks(rank, self.phase[si], wr, self.phase[w as usize])
                        .then_some((w, false))
                })
            };
            match victim {
                Some((u, precarious)) => {
                    let u = u as usize;
                    let old = self.remove_pair(u);
                    if !precarious {
                        phase_change = self.remove_entry(u, old).map(|ph| (u, ph));
                    }
                    self.add_pair(si, e);
                    if self.phase[u] < 3 {
                        self.queue.push_back(u as u32);
                    }
                    ApplicationOutcome::Accepted {
                        displaced: Some(Displacement {
                            student: StudentId::from_index(u),
                            project: self.project(old),
                            precarious,
                        }),
                    }
                }
                None => {
                    phase_change = self.remove_entry(si, e).map(|ph| (si, ph));
                    ApplicationOutcome::Rejected
                }
            }
        };

        self.log(Event::Applied {
            student: s,
            project: p,
            outcome,
        });
        if let Some((u, phase)) = phase_change {
            self.log(Event::PhaseChange {
                student: StudentId::from_index(u),
                phase,
            });
        }
        outcome
    }

    /// Moves students to strictly better projects of their own lecturer while
    /// those have room, until no such move is possible.
    pub fn promote_students(&mut self) {
        let inst = self.inst;
        let n2 = inst.n_projects();
        // rho[j]: assigned students who would rather have p_j, offered by the
        // lecturer they are already with.
        let mut rho: Vec<VecDeque<u32>> = vec![VecDeque::new(); n2];
        for s in 0..inst.n_students() {
            let e = self.assigned[s];
            if e == NONE {
                continue;
            }
            let cur = inst.pairs()[e as usize];
            for x in inst.pairs_of(StudentId::from_index(s)) {
                if x.lecturer == cur.lecturer && x.student_rank < cur.student_rank {
                    rho[x.project.index()].push_back(s as u32);
                }
            }
        }
        let mut on_stack = vec![false; n2];
        let mut stack = Vec::new();
        for j in (0..n2).rev() {
            if !rho[j].is_empty() && !self.project_full(ProjectId::from_index(j)) {
                stack.push(j);
                on_stack[j] = true;
            }
        }
        while let Some(j) = stack.pop() {
            on_stack[j] = false;
            let pj = ProjectId::from_index(j);
            let s = rho[j].pop_front().expect("stacked projects have candidates") as usize;
            let sid = StudentId::from_index(s);
            let e = self.assigned[s];
            let cur = inst.pairs()[e as usize];
            let target = inst.pair_index(sid, pj).expect("candidate ranks project") as u32;
            if inst.pairs()[target as usize].student_rank < cur.student_rank {
                debug_assert!(self.lecturer_full(cur.lecturer));
                self.remove_pair(s);
                self.add_pair(s, target);
                self.stats.promotions += 1;
                self.log(Event::Promoted {
                    student: sid,
                    from: cur.project,
                    to: pj,
                });
                let k = cur.project.index();
                if !rho[k].is_empty() && !on_stack[k] {
                    stack.push(k);
                    on_stack[k] = true;
                }
            }
            if !rho[j].is_empty() && !self.project_full(pj) && !on_stack[j] {
                stack.push(j);
                on_stack[j] = true;
            }
        }
    }

    /// Recomputes every maintained quantity from scratch and compares.
    pub fn check_invariants(&self) -> Result<(), String> {
        let inst = self.inst;
        let mut proj_load = vec![0u32; inst.n_projects()];
        let mut lect_load = vec![0u32; inst.n_lecturers()];
        for s in 0..inst.n_students() {
            let e = self.assigned[s];
            if e == NONE {
                if self.precarious[s] {
                    return Err(format!("unassigned s{} marked precarious", s + 1));
                }
                continue;
            }
            if self.entries[e as usize].deleted {
                return Err(format!("s{} holds a removed project", s + 1));
            }
            let pair = inst.pairs()[e as usize];
            proj_load[pair.project.index()] += 1;
            lect_load[pair.lecturer.index()] += 1;

            let should = self.phase[s] == 1
                && (inst.pair_range(pair.student).start..self.entries[e as usize].group_end as usize)
                    .filter(|&x| !self.entries[x].deleted && x as u32 != e)
                    .filter(|&x| inst.pairs()[x].student_rank == pair.student_rank)
                    .any(|x| self.fully_available(inst.pairs()[x].project));
            if should != self.precarious[s] {
                return Err(format!(
                    "s{} precarious flag {} but fully available tie-mate exists: {should}",
                    s + 1,
                    self.precarious[s]
                ));
            }
            if self.precarious[s] {
                let q = ProjectId(self.supporter[s]);
                if !self.fully_available(q) || !self.support_list[q.index()].contains(&(s as u32)) {
                    return Err(format!("s{} has a stale supporter {q}", s + 1));
                }
                if !self.precarious_students[pair.project.index()].contains(&(s as u32)) {
                    return Err(format!("s{} missing from precarious list", s + 1));
                }
            }
        }
        if proj_load != self.proj_load || lect_load != self.lect_load {
            return Err("loads disagree with assignment".into());
        }
        for p in inst.projects() {
            if proj_load[p.index()] > inst.project_capacity(p) {
                return Err(format!("{p} over capacity"));
            }
            if self.proj.count_assigned(p.index()) != proj_load[p.index()] {
                return Err(format!("{p} tie buckets disagree with load"));
            }
            if self.fa_lost[p.index()] && self.fully_available(p) {
                return Err(format!("{p} became fully available again"));
            }
            let l = inst.lecturer_of(p);
            let listed = self.precarious_projects[l.index()].contains(&p.0);
            if listed == self.precarious_students[p.index()].is_empty() {
                return Err(format!("{p} precarious-project listing out of step"));
            }
        }
        for l in inst.lecturers() {
            if lect_load[l.index()] > inst.lecturer_capacity(l) {
                return Err(format!("{l} over capacity"));
            }
            if self.lect.count_assigned(l.index()) != lect_load[l.index()] {
                return Err(format!("{l} tie buckets disagree with load"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samples;
    use crate::stability::{find_blocking_pairs, BlockingKind};

    fn s(n: u32) -> StudentId {
        StudentId::from_number(n)
    }

    fn p(n: u32) -> ProjectId {
        ProjectId::from_number(n)
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

    #[test]
    fn tight_trace_is_reproduced() {
        let inst = samples::tight();
        let out = run(
            &inst,
            &ApproxOptions {
                record_events: true,
                audit: true,
                ..ApproxOptions::default()
            },
        );
        assert_eq!(render_trace(&inst, &out.events), TIGHT_TRACE);
        let pairs: Vec<_> = out.matching.pairs().collect();
        assert_eq!(pairs, vec![(s(1), p(3)), (s(3), p(2))]);
    }

    #[test]
    fn tight_step_by_step() {
        let inst = samples::tight();
        let mut st = AlgState::new(&inst, SchedulePolicy::Fifo);
        st.apply(s(1));
        assert!(st.is_precarious(s(1)));
        let out = st.apply(s(2));
        assert_eq!(
            out,
            ApplicationOutcome::Accepted {
                displaced: Some(Displacement {
                    student: s(1),
                    project: p(3),
                    precarious: true
                })
            }
        );
        assert_eq!(st.worst_assignee(LecturerId(1)), Some(s(2)));
        assert_eq!(st.working_list(s(1)), vec![p(3), p(2)]);
        assert_eq!(st.apply(s(3)), ApplicationOutcome::Rejected);
        assert_eq!(st.working_list(s(3)), vec![p(2), p(1)]);
        assert!(st.meta_prefers_lecturer(LecturerId(1), s(1), s(2)));
        assert!(!st.meta_prefers_lecturer(LecturerId(1), s(1), s(1)));
        st.apply(s(3));
        let out = st.apply(s(1));
        assert!(matches!(
            out,
            ApplicationOutcome::Accepted {
                displaced: Some(Displacement { precarious: false, .. })
            }
        ));
        assert_eq!(st.phase(s(2)), 2);
        st.apply(s(2));
        assert_eq!(st.phase(s(2)), 3);
        assert!(!st.is_available(s(2)));
        st.check_invariants().unwrap();
    }

    #[test]
    fn single_pair() {
        let text = "spa-st 1\ncounts 1 1 1\nproject 1 lecturer 1 cap 1\n\
                    lecturer 1 cap 1 prefs 1\nstudent 1 prefs 1\n";
        let inst = Instance::parse(text).unwrap();
        let m = approx_match(&inst, SchedulePolicy::Fifo);
        assert_eq!(m.pairs().collect::<Vec<_>>(), vec![(s(1), p(1))]);
    }

    #[test]
    fn removing_a_non_last_entry_keeps_the_phase() {
        let inst = samples::tight();
        let mut st = AlgState::new(&inst, SchedulePolicy::Fifo);
        assert_eq!(st.remove_pref(s(3), p(3)), None);
        assert_eq!(st.phase(s(3)), 1);
        assert_eq!(st.remove_pref(s(2), p(3)), Some(2));
        assert_eq!(st.working_list(s(2)), vec![p(3)]);
    }

    #[test]
    fn promotion_within_a_lecturer() {
        let text = "spa-st 1\ncounts 1 2 1\nproject 1 lecturer 1 cap 1\nproject 2 lecturer 1 cap 1\n\
                    lecturer 1 cap 1 prefs 1\nstudent 1 prefs 1 2\n";
        let inst = Instance::parse(text).unwrap();
        let mut st = AlgState::new(&inst, SchedulePolicy::Fifo);
        st.record_events();
        // Put s1 on its second choice by hand: the blocking pair is of kind 3bi.
        let e = inst.pair_index(s(1), p(2)).unwrap() as u32;
        st.add_pair(0, e);
        let before = find_blocking_pairs(&inst, &st.matching()).unwrap();
        assert_eq!(before.len(), 1);
        assert_eq!(before[0].kind, BlockingKind::Bi);
        st.promote_students();
        assert_eq!(st.project_of(s(1)), Some(p(1)));
        assert!(find_blocking_pairs(&inst, &st.matching()).unwrap().is_empty());
        assert_eq!(st.events().len(), 1);
        // Nothing left to do.
        st.promote_students();
        assert_eq!(st.events().len(), 1);
    }

    #[test]
    fn worst_assignee_prefers_phase_one() {
        // l1 ranks s1 and s2 equally; s2 has been through phase 1 already.
        let text = "spa-st 1\ncounts 2 1 1\nproject 1 lecturer 1 cap 2\n\
                    lecturer 1 cap 2 prefs ( 1 2 )\nstudent 1 prefs 1\nstudent 2 prefs 1\n";
        let inst = Instance::parse(text).unwrap();
        let mut st = AlgState::new(&inst, SchedulePolicy::Fifo);
        st.remove_pref(s(2), p(1));
        assert_eq!(st.phase(s(2)), 2);
        st.apply(s(2));
        assert_eq!(st.worst_assignee(LecturerId(0)), Some(s(2)));
        st.apply(s(1));
        assert_eq!(st.worst_assignee(LecturerId(0)), Some(s(1)));
        assert_eq!(st.worst_assignee_in_project(p(1)), Some(s(1)));
        assert!(st.meta_prefers_lecturer(LecturerId(0), s(2), s(1)));
        assert!(!st.meta_prefers_lecturer(LecturerId(0), s(1), s(2)));
    }

    #[test]
    fn schedule_policy_parses() {
        assert_eq!("fifo".parse::<SchedulePolicy>(), Ok(SchedulePolicy::Fifo));
        assert_eq!(
            "shuffled:42".parse::<SchedulePolicy>(),
            Ok(SchedulePolicy::Shuffled(42))
        );
        assert!("random".parse::<SchedulePolicy>().is_err());
        assert_eq!(SchedulePolicy::Shuffled(7).to_string(), "shuffled:7");
    }
}
