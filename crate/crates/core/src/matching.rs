use std::fmt::Write as _;

use thiserror::Error;

use crate::ids::{LecturerId, ProjectId, StudentId};
use crate::instance::{content_lines, expect_keyword, parse_number, Instance, ParseError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MatchingError {
    #[error("matching covers {got} students but the instance has {expected}")]
    WrongSize { expected: usize, got: usize },
    #[error("{project} is not acceptable to {student}")]
    NotAcceptable { student: StudentId, project: ProjectId },
    #[error("{project} is over capacity ({load} > {capacity})")]
    ProjectOverCapacity {
        project: ProjectId,
        load: u32,
        capacity: u32,
    },
    #[error("{lecturer} is over capacity ({load} > {capacity})")]
    LecturerOverCapacity {
        lecturer: LecturerId,
        load: u32,
        capacity: u32,
    },
    #[error("{student} is already assigned")]
    AlreadyAssigned { student: StudentId },
}

/// An assignment of students to projects respecting acceptability and both
/// capacity bounds. Loads are kept in step with the assignment.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Matching {
    assignment: Vec<Option<ProjectId>>,
    project_load: Vec<u32>,
    lecturer_load: Vec<u32>,
    size: usize,
}

impl Matching {
    pub fn empty(inst: &Instance) -> Self {
        Self {
            assignment: vec![None; inst.n_students()],
            project_load: vec![0; inst.n_projects()],
            lecturer_load: vec![0; inst.n_lecturers()],
            size: 0,
        }
    }

    /// Validates a raw per-student assignment.
    pub fn from_assignment(inst: &Instance, assignment: Vec<Option<ProjectId>>) -> Result<Self, MatchingError> {
        if assignment.len() != inst.n_students() {
            return Err(MatchingError::WrongSize {
                expected: inst.n_students(),
                got: assignment.len(),
            });
        }
        let mut m = Self::empty(inst);
        for (i, p) in assignment.into_iter().enumerate() {
            if let Some(p) = p {
                m.assign(inst, StudentId::from_index(i), p)?;
            }
        }
        Ok(m)
    }

    pub fn from_pairs(
        inst: &Instance,
        pairs: impl IntoIterator<Item = (StudentId, ProjectId)>,
    ) -> Result<Self, MatchingError> {
        let mut m = Self::empty(inst);
        for (s, p) in pairs {
            m.assign(inst, s, p)?;
        }
        Ok(m)
    }

    /// Assigns an unassigned student, checking acceptability and capacities.
    pub fn assign(&mut self, inst: &Instance, s: StudentId, p: ProjectId) -> Result<(), MatchingError> {
        if s.index() >= self.assignment.len() || p.index() >= inst.n_projects() {
            return Err(MatchingError::NotAcceptable { student: s, project: p });
        }
        if self.assignment[s.index()].is_some() {
            return Err(MatchingError::AlreadyAssigned { student: s });
        }
        if !inst.is_acceptable(s, p) {
            return Err(MatchingError::NotAcceptable { student: s, project: p });
        }
        let l = inst.lecturer_of(p);
        if self.project_load[p.index()] >= inst.project_capacity(p) {
            return Err(MatchingError::ProjectOverCapacity {
                project: p,
                load: self.project_load[p.index()] + 1,
                capacity: inst.project_capacity(p),
            });
        }
        if self.lecturer_load[l.index()] >= inst.lecturer_capacity(l) {
            return Err(MatchingError::LecturerOverCapacity {
                lecturer: l,
                load: self.lecturer_load[l.index()] + 1,
                capacity: inst.lecturer_capacity(l),
            });
        }
        self.assignment[s.index()] = Some(p);
        self.project_load[p.index()] += 1;
        self.lecturer_load[l.index()] += 1;
        self.size += 1;
        Ok(())
    }

    /// Unassigns `s`, returning its former project.
    pub fn unassign(&mut self, inst: &Instance, s: StudentId) -> Option<ProjectId> {
        let p = self.assignment[s.index()].take()?;
        self.project_load[p.index()] -= 1;
        self.lecturer_load[inst.lecturer_of(p).index()] -= 1;
        self.size -= 1;
        Some(p)
    }

    /// Checks that this matching is consistent with `inst` (useful when a
    /// matching built for one instance is handed to code holding another).
    pub fn check(&self, inst: &Instance) -> Result<(), MatchingError> {
        let rebuilt = Self::from_assignment(inst, self.assignment.clone())?;
        debug_assert_eq!(&rebuilt, self);
        Ok(())
    }

    pub fn project_of(&self, s: StudentId) -> Option<ProjectId> {
        self.assignment[s.index()]
    }

    pub fn assignment(&self) -> &[Option<ProjectId>] {
        &self.assignment
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn project_load(&self, p: ProjectId) -> u32 {
        self.project_load[p.index()]
    }

    pub fn lecturer_load(&self, l: LecturerId) -> u32 {
        self.lecturer_load[l.index()]
    }

    pub fn project_full(&self, inst: &Instance, p: ProjectId) -> bool {
        self.project_load(p) >= inst.project_capacity(p)
    }

    pub fn lecturer_full(&self, inst: &Instance, l: LecturerId) -> bool {
        self.lecturer_load(l) >= inst.lecturer_capacity(l)
    }

    /// Assigned (student, project) pairs, ascending by student.
    pub fn pairs(&self) -> impl Iterator<Item = (StudentId, ProjectId)> + '_ {
        self.assignment
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.map(|p| (StudentId::from_index(i), p)))
    }

    pub fn assignees(&self, p: ProjectId) -> impl Iterator<Item = StudentId> + '_ {
        self.pairs().filter(move |&(_, q)| q == p).map(|(s, _)| s)
    }

    /// The `assign`/`size` text form.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (s, p) in self.pairs() {
            let _ = writeln!(out, "assign {} {}", s.number(), p.number());
        }
        let _ = writeln!(out, "size {}", self.size);
        out
    }
}

/// Parses the matching text form into a raw assignment for `n_students`
/// students. Capacity and acceptability are not checked here; pass the
/// result to [`Matching::from_assignment`].
pub fn parse_assignment(text: &str, n_students: usize) -> Result<Vec<Option<ProjectId>>, ParseError> {
    let mut assignment = vec![None; n_students];
    let mut size = None;
    for (ln, toks) in content_lines(text) {
        if size.is_some() {
            return Err(ParseError::syntax(ln, "content after `size` line"));
        }
        match toks[0].as_str() {
            "assign" => {
                let i = parse_number(toks.get(1), ln, "student")? as usize;
                let j = parse_number(toks.get(2), ln, "project")?;
                if toks.len() != 3 {
                    return Err(ParseError::syntax(ln, "expected `assign <i> <j>`"));
                }
                if i == 0 || i > n_students || j == 0 {
                    return Err(ParseError::syntax(ln, "id out of range"));
                }
                if assignment[i - 1].is_some() {
                    return Err(ParseError::syntax(ln, format!("student {i} assigned twice")));
                }
                assignment[i - 1] = Some(ProjectId::from_number(j));
            }
            "size" => {
                expect_keyword(toks.first(), "size", ln)?;
                size = Some((ln, parse_number(toks.get(1), ln, "size")? as usize));
            }
            other => return Err(ParseError::syntax(ln, format!("unknown record `{other}`"))),
        }
    }
    if let Some((ln, size)) = size {
        let count = assignment.iter().flatten().count();
        if size != count {
            return Err(ParseError::syntax(
                ln,
                format!("size {size} disagrees with {count} assign lines"),
            ));
        }
    }
    Ok(assignment)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samples;

    fn s(n: u32) -> StudentId {
        StudentId::from_number(n)
    }

    fn p(n: u32) -> ProjectId {
        ProjectId::from_number(n)
    }

    #[test]
    fn capacities_are_enforced() {
        let inst = samples::tight();
        let mut m = Matching::empty(&inst);
        m.assign(&inst, s(1), p(3)).unwrap();
        assert!(matches!(
            m.assign(&inst, s(2), p(3)),
            Err(MatchingError::ProjectOverCapacity { .. })
        ));
        assert!(matches!(
            m.assign(&inst, s(2), p(1)),
            Err(MatchingError::NotAcceptable { .. })
        ));
        assert_eq!(m.lecturer_load(LecturerId(1)), 1);
        assert_eq!(m.unassign(&inst, s(1)), Some(p(3)));
        assert_eq!(m.size(), 0);
        assert_eq!(m.lecturer_load(LecturerId(1)), 0);
    }

    #[test]
    fn text_round_trip() {
        let inst = samples::tight();
        let m = Matching::from_pairs(&inst, [(s(1), p(2)), (s(2), p(3)), (s(3), p(1))]).unwrap();
        let text = m.to_text();
        assert_eq!(text, "assign 1 2\nassign 2 3\nassign 3 1\nsize 3\n");
        let raw = parse_assignment(&text, 3).unwrap();
        assert_eq!(Matching::from_assignment(&inst, raw).unwrap(), m);
    }

    #[test]
    fn size_line_must_agree() {
        assert!(parse_assignment("assign 1 2\nsize 2\n", 3).is_err());
    }
}
