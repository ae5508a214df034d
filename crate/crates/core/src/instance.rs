//! The problem data model and its text format.

use std::fmt::Write as _;

use thiserror::Error;

use crate::ids::{LecturerId, ProjectId, StudentId};
use crate::prefs::PrefList;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum InstanceError {
    #[error("{project} has lecturer {lecturer} but there are only {n_lecturers} lecturers")]
    LecturerOutOfRange {
        project: ProjectId,
        lecturer: u32,
        n_lecturers: usize,
    },
    #[error("{owner} ranks unknown {entry}")]
    UnknownEntry { owner: String, entry: String },
    #[error("{owner} ranks {entry} more than once")]
    DuplicateEntry { owner: String, entry: String },
    #[error("{lecturer} ranks {student}, who finds none of its projects acceptable")]
    UnexpectedStudent { lecturer: LecturerId, student: StudentId },
    #[error("{lecturer} does not rank {student}, who finds one of its projects acceptable")]
    MissingStudent { lecturer: LecturerId, student: StudentId },
    #[error("expected {expected} {what} entries, got {got}")]
    CountMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error(transparent)]
    Invalid(#[from] InstanceError),
}

impl ParseError {
    pub(crate) fn syntax(line: usize, message: impl Into<String>) -> Self {
        ParseError::Syntax {
            line,
            message: message.into(),
        }
    }
}

/// One acceptable (student, project) pair with both ranks precomputed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Pair {
    pub student: StudentId,
    pub project: ProjectId,
    pub lecturer: LecturerId,
    /// rank(s, p) on the student's list.
    pub student_rank: u32,
    /// rank of the student on the lecturer's list.
    pub lecturer_rank: u32,
}

/// A validated instance.
///
/// Acceptable pairs are stored flattened, grouped by student in preference
/// order; a pair's position in that table is its "pair index".
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    project_capacity: Vec<u32>,
    project_lecturer: Vec<LecturerId>,
    lecturer_capacity: Vec<u32>,
    student_prefs: Vec<PrefList<ProjectId>>,
    lecturer_prefs: Vec<PrefList<StudentId>>,
    lecturer_projects: Vec<Vec<ProjectId>>,
    pairs: Vec<Pair>,
    pair_start: Vec<usize>,
}

impl Instance {
    pub fn new(
        project_capacity: Vec<u32>,
        project_lecturer: Vec<LecturerId>,
        lecturer_capacity: Vec<u32>,
        student_prefs: Vec<PrefList<ProjectId>>,
        lecturer_prefs: Vec<PrefList<StudentId>>,
    ) -> Result<Self, InstanceError> {
        let n1 = student_prefs.len();
        let n2 = project_capacity.len();
        let n3 = lecturer_capacity.len();
        if project_lecturer.len() != n2 {
            return Err(InstanceError::CountMismatch {
                what: "project lecturer",
                expected: n2,
                got: project_lecturer.len(),
            });
        }
        if lecturer_prefs.len() != n3 {
            return Err(InstanceError::CountMismatch {
                what: "lecturer list",
                expected: n3,
                got: lecturer_prefs.len(),
            });
        }
        let mut lecturer_projects = vec![Vec::new(); n3];
        for (j, &l) in project_lecturer.iter().enumerate() {
            if l.index() >= n3 {
                return Err(InstanceError::LecturerOutOfRange {
                    project: ProjectId::from_index(j),
                    lecturer: l.number(),
                    n_lecturers: n3,
                });
            }
            lecturer_projects[l.index()].push(ProjectId::from_index(j));
        }

        // Which lecturers each student must appear under.
        let mut seen = vec![u32::MAX; n2.max(n1)];
        let mut expected: Vec<Vec<LecturerId>> = vec![Vec::new(); n1];
        for (i, prefs) in student_prefs.iter().enumerate() {
            let s = StudentId::from_index(i);
            for &p in prefs.items() {
                if p.index() >= n2 {
                    return Err(InstanceError::UnknownEntry {
                        owner: s.to_string(),
                        entry: p.to_string(),
                    });
                }
                if seen[p.index()] == i as u32 {
                    return Err(InstanceError::DuplicateEntry {
                        owner: s.to_string(),
                        entry: p.to_string(),
                    });
                }
                seen[p.index()] = i as u32;
                let l = project_lecturer[p.index()];
                if !expected[i].contains(&l) {
                    expected[i].push(l);
                }
            }
        }

        seen.iter_mut().for_each(|x| *x = u32::MAX);
        // lecturer_rank_of[i] holds (lecturer, rank) for each lecturer ranking s_i.
        let mut lecturer_rank_of: Vec<Vec<(LecturerId, u32)>> = vec![Vec::new(); n1];
        for (k, prefs) in lecturer_prefs.iter().enumerate() {
            let l = LecturerId::from_index(k);
            for (s, rank) in prefs.ranked() {
                if s.index() >= n1 {
                    return Err(InstanceError::UnknownEntry {
                        owner: l.to_string(),
                        entry: s.to_string(),
                    });
                }
                if seen[s.index()] == k as u32 {
                    return Err(InstanceError::DuplicateEntry {
                        owner: l.to_string(),
                        entry: s.to_string(),
                    });
                }
                seen[s.index()] = k as u32;
                if !expected[s.index()].contains(&l) {
                    return Err(InstanceError::UnexpectedStudent {
                        lecturer: l,
                        student: s,
                    });
                }
                lecturer_rank_of[s.index()].push((l, rank));
            }
        }

        let mut pairs = Vec::new();
        let mut pair_start = Vec::with_capacity(n1 + 1);
        for (i, prefs) in student_prefs.iter().enumerate() {
            pair_start.push(pairs.len());
            let s = StudentId::from_index(i);
            for (p, student_rank) in prefs.ranked() {
                let l = project_lecturer[p.index()];
                let lecturer_rank = lecturer_rank_of[i]
                    .iter()
                    .find(|&&(k, _)| k == l)
                    .map(|&(_, r)| r)
                    .ok_or(InstanceError::MissingStudent {
                        lecturer: l,
                        student: s,
                    })?;
                pairs.push(Pair {
                    student: s,
                    project: p,
                    lecturer: l,
                    student_rank,
                    lecturer_rank,
                });
            }
        }
        pair_start.push(pairs.len());

        Ok(Self {
            project_capacity,
            project_lecturer,
            lecturer_capacity,
            student_prefs,
            lecturer_prefs,
            lecturer_projects,
            pairs,
            pair_start,
        })
    }

    pub fn n_students(&self) -> usize {
        self.student_prefs.len()
    }

    pub fn n_projects(&self) -> usize {
        self.project_capacity.len()
    }

    pub fn n_lecturers(&self) -> usize {
        self.lecturer_capacity.len()
    }

    pub fn students(&self) -> impl Iterator<Item = StudentId> {
        (0..self.n_students()).map(StudentId::from_index)
    }

    pub fn projects(&self) -> impl Iterator<Item = ProjectId> {
        (0..self.n_projects()).map(ProjectId::from_index)
    }

    pub fn lecturers(&self) -> impl Iterator<Item = LecturerId> {
        (0..self.n_lecturers()).map(LecturerId::from_index)
    }

    pub fn project_capacity(&self, p: ProjectId) -> u32 {
        self.project_capacity[p.index()]
    }

    pub fn lecturer_capacity(&self, l: LecturerId) -> u32 {
        self.lecturer_capacity[l.index()]
    }

    pub fn lecturer_of(&self, p: ProjectId) -> LecturerId {
        self.project_lecturer[p.index()]
    }

    /// P_k: the projects offered by `l`, ascending.
    pub fn projects_of(&self, l: LecturerId) -> &[ProjectId] {
        &self.lecturer_projects[l.index()]
    }

    pub fn student_prefs(&self, s: StudentId) -> &PrefList<ProjectId> {
        &self.student_prefs[s.index()]
    }

    pub fn lecturer_prefs(&self, l: LecturerId) -> &PrefList<StudentId> {
        &self.lecturer_prefs[l.index()]
    }

    /// Total length of all student lists.
    pub fn n_pairs(&self) -> usize {
        self.pairs.len()
    }

    pub fn pairs(&self) -> &[Pair] {
        &self.pairs
    }

    /// Pair indices of `s`, in preference order.
    pub fn pair_range(&self, s: StudentId) -> std::ops::Range<usize> {
        self.pair_start[s.index()]..self.pair_start[s.index() + 1]
    }

    pub fn pairs_of(&self, s: StudentId) -> &[Pair] {
        &self.pairs[self.pair_range(s)]
    }

    pub fn pair_index(&self, s: StudentId, p: ProjectId) -> Option<usize> {
        self.pair_range(s).find(|&e| self.pairs[e].project == p)
    }

    pub fn pair(&self, s: StudentId, p: ProjectId) -> Option<&Pair> {
        self.pair_index(s, p).map(|e| &self.pairs[e])
    }

    pub fn is_acceptable(&self, s: StudentId, p: ProjectId) -> bool {
        self.pair_index(s, p).is_some()
    }

    pub fn student_rank(&self, s: StudentId, p: ProjectId) -> Option<u32> {
        self.pair(s, p).map(|x| x.student_rank)
    }

    pub fn lecturer_rank(&self, l: LecturerId, s: StudentId) -> Option<u32> {
        self.pairs_of(s)
            .iter()
            .find(|x| x.lecturer == l)
            .map(|x| x.lecturer_rank)
    }

    /// Parses the line-oriented instance format.
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        parse_instance(text)
    }

    /// Canonical text form; `Instance::parse` inverts it.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("spa-st 1\n");
        let _ = writeln!(
            out,
            "counts {} {} {}",
            self.n_students(),
            self.n_projects(),
            self.n_lecturers()
        );
        for p in self.projects() {
            let _ = writeln!(
                out,
                "project {} lecturer {} cap {}",
                p.number(),
                self.lecturer_of(p).number(),
                self.project_capacity(p)
            );
        }
        for l in self.lecturers() {
            let _ = write!(out, "lecturer {} cap {} prefs", l.number(), self.lecturer_capacity(l));
            write_groups(&mut out, self.lecturer_prefs(l), |s| s.number());
            out.push('\n');
        }
        for s in self.students() {
            let _ = write!(out, "student {} prefs", s.number());
            write_groups(&mut out, self.student_prefs(s), |p| p.number());
            out.push('\n');
        }
        out
    }
}

pub(crate) fn write_groups<T: Copy + Eq>(out: &mut String, list: &PrefList<T>, num: impl Fn(T) -> u32) {
    if list.is_empty() {
        out.push_str(" -");
        return;
    }
    for group in list.groups() {
        if group.len() == 1 {
            let _ = write!(out, " {}", num(group[0]));
        } else {
            out.push_str(" (");
            for &x in group {
                let _ = write!(out, " {}", num(x));
            }
            out.push_str(" )");
        }
    }
}

/// Splits a line into tokens, treating parentheses as separate tokens and
/// dropping any `#` comment.
pub(crate) fn tokenize(line: &str) -> Vec<String> {
    let line = line.split('#').next().unwrap_or("");
    line.replace('(', " ( ")
        .replace(')', " ) ")
        .split_whitespace()
        .map(str::to_owned)
        .collect()
}

/// Non-blank, comment-stripped lines with their 1-based line numbers.
pub(crate) fn content_lines(text: &str) -> impl Iterator<Item = (usize, Vec<String>)> + '_ {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, tokenize(l)))
        .filter(|(_, t)| !t.is_empty())
}

pub(crate) fn parse_number(tok: Option<&String>, line: usize, what: &str) -> Result<u32, ParseError> {
    let tok = tok.ok_or_else(|| ParseError::syntax(line, format!("missing {what}")))?;
    tok.parse::<u32>()
        .map_err(|_| ParseError::syntax(line, format!("bad {what} `{tok}`")))
}

pub(crate) fn expect_keyword(tok: Option<&String>, kw: &str, line: usize) -> Result<(), ParseError> {
    match tok {
        Some(t) if t == kw => Ok(()),
        Some(t) => Err(ParseError::syntax(line, format!("expected `{kw}`, found `{t}`"))),
        None => Err(ParseError::syntax(line, format!("expected `{kw}`"))),
    }
}

/// Parses `<groups>` (everything after the `prefs` keyword) into 1-based numbers.
pub(crate) fn parse_groups(toks: &[String], line: usize) -> Result<Vec<Vec<u32>>, ParseError> {
    if toks.len() == 1 && toks[0] == "-" {
        return Ok(Vec::new());
    }
    let mut groups = Vec::new();
    let mut open: Option<Vec<u32>> = None;
    for tok in toks {
        match tok.as_str() {
            "(" => {
                if open.is_some() {
                    return Err(ParseError::syntax(line, "nested `(`"));
                }
                open = Some(Vec::new());
            }
            ")" => match open.take() {
                Some(g) if !g.is_empty() => groups.push(g),
                Some(_) => return Err(ParseError::syntax(line, "empty tie")),
                None => return Err(ParseError::syntax(line, "unmatched `)`")),
            },
            _ => {
                let n = parse_number(Some(tok), line, "id")?;
                if n == 0 {
                    return Err(ParseError::syntax(line, "ids are 1-based"));
                }
                match open.as_mut() {
                    Some(g) => g.push(n),
                    None => groups.push(vec![n]),
                }
            }
        }
    }
    if open.is_some() {
        return Err(ParseError::syntax(line, "unclosed `(`"));
    }
    Ok(groups)
}

fn parse_instance(text: &str) -> Result<Instance, ParseError> {
    let mut lines = content_lines(text);
    let (ln, header) = lines.next().ok_or_else(|| ParseError::syntax(1, "empty input"))?;
    if header != ["spa-st", "1"] {
        return Err(ParseError::syntax(ln, "expected header `spa-st 1`"));
    }
    let (ln, counts) = lines
        .next()
        .ok_or_else(|| ParseError::syntax(ln + 1, "missing counts line"))?;
    expect_keyword(counts.first(), "counts", ln)?;
    if counts.len() != 4 {
        return Err(ParseError::syntax(ln, "expected `counts <n1> <n2> <n3>`"));
    }
    let n1 = parse_number(counts.get(1), ln, "n1")? as usize;
    let n2 = parse_number(counts.get(2), ln, "n2")? as usize;
    let n3 = parse_number(counts.get(3), ln, "n3")? as usize;

    let mut project_capacity = vec![None; n2];
    let mut project_lecturer = vec![LecturerId(0); n2];
    let mut lecturer_capacity = vec![None; n3];
    let mut lecturer_prefs = vec![PrefList::default(); n3];
    let mut student_prefs: Vec<Option<PrefList<ProjectId>>> = vec![None; n1];

    let mut last_line = ln;
    for (ln, toks) in lines {
        last_line = ln;
        let id = |what: &str, n: usize| -> Result<usize, ParseError> {
            let v = parse_number(toks.get(1), ln, what)? as usize;
            if v == 0 || v > n {
                return Err(ParseError::syntax(ln, format!("{what} id {v} out of range 1..={n}")));
            }
            Ok(v - 1)
        };
        match toks[0].as_str() {
            "project" => {
                let j = id("project", n2)?;
                expect_keyword(toks.get(2), "lecturer", ln)?;
                let k = parse_number(toks.get(3), ln, "lecturer")?;
                expect_keyword(toks.get(4), "cap", ln)?;
                let cap = parse_number(toks.get(5), ln, "capacity")?;
                if toks.len() != 6 {
                    return Err(ParseError::syntax(ln, "trailing tokens"));
                }
                if project_capacity[j].is_some() {
                    return Err(ParseError::syntax(ln, format!("project {} defined twice", j + 1)));
                }
                if k == 0 {
                    return Err(ParseError::syntax(ln, "ids are 1-based"));
                }
                project_capacity[j] = Some(cap);
                project_lecturer[j] = LecturerId::from_number(k);
            }
            "lecturer" => {
                let k = id("lecturer", n3)?;
                expect_keyword(toks.get(2), "cap", ln)?;
                let cap = parse_number(toks.get(3), ln, "capacity")?;
                expect_keyword(toks.get(4), "prefs", ln)?;
                if lecturer_capacity[k].is_some() {
                    return Err(ParseError::syntax(ln, format!("lecturer {} defined twice", k + 1)));
                }
                let groups = parse_groups(&toks[5..], ln)?;
                lecturer_capacity[k] = Some(cap);
                lecturer_prefs[k] =
                    PrefList::from_groups(groups.into_iter().map(|g| g.into_iter().map(StudentId::from_number)));
            }
            "student" => {
                let i = id("student", n1)?;
                expect_keyword(toks.get(2), "prefs", ln)?;
                if student_prefs[i].is_some() {
                    return Err(ParseError::syntax(ln, format!("student {} defined twice", i + 1)));
                }
                let groups = parse_groups(&toks[3..], ln)?;
                student_prefs[i] = Some(PrefList::from_groups(
                    groups.into_iter().map(|g| g.into_iter().map(ProjectId::from_number)),
                ));
            }
            other => return Err(ParseError::syntax(ln, format!("unknown record `{other}`"))),
        }
    }

    let missing = |what: &str, i: usize| ParseError::syntax(last_line, format!("{what} {} not defined", i + 1));
    let project_capacity = project_capacity
        .into_iter()
        .enumerate()
        .map(|(j, c)| c.ok_or_else(|| missing("project", j)))
        .collect::<Result<Vec<_>, _>>()?;
    let lecturer_capacity = lecturer_capacity
        .into_iter()
        .enumerate()
        .map(|(k, c)| c.ok_or_else(|| missing("lecturer", k)))
        .collect::<Result<Vec<_>, _>>()?;
    let student_prefs = student_prefs
        .into_iter()
        .enumerate()
        .map(|(i, p)| p.ok_or_else(|| missing("student", i)))
        .collect::<Result<Vec<_>, _>>()?;

    Ok(Instance::new(
        project_capacity,
        project_lecturer,
        lecturer_capacity,
        student_prefs,
        lecturer_prefs,
    )?)
}
