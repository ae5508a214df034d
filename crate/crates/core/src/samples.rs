//! Small hand-made instances used by tests, the acceptance suite and the CLI docs.

use crate::instance::Instance;

/// Three students, three projects, two lecturers. FIFO approximation on this
/// instance returns a stable matching of size 2 while the maximum has size 3.
pub const TIGHT: &str = "\
spa-st 1
counts 3 3 2
project 1 lecturer 1 cap 2
project 2 lecturer 1 cap 1
project 3 lecturer 2 cap 1
lecturer 1 cap 2 prefs 1 3
lecturer 2 cap 1 prefs 1 2 3
student 1 prefs ( 3 2 )
student 2 prefs 3
student 3 prefs 3 2 1
";

/// Two students whose only stable matching is {(s2,p2)}; its HRT clone has a
/// stable matching that maps back to an unstable one.
pub const CLONE_TRAP: &str = "\
spa-st 1
counts 2 3 2
project 1 lecturer 1 cap 1
project 2 lecturer 1 cap 1
project 3 lecturer 2 cap 1
lecturer 1 cap 1 prefs 2 1
lecturer 2 cap 1 prefs 2
student 1 prefs 1 2
student 2 prefs 2 3
";

/// Four students with ties on both sides; maximum stable matching size 4.
pub const SPARE_CAPACITY: &str = "\
spa-st 1
counts 4 4 2
project 1 lecturer 1 cap 2
project 2 lecturer 1 cap 2
project 3 lecturer 2 cap 2
project 4 lecturer 2 cap 1
lecturer 1 cap 2 prefs 2 4
lecturer 2 cap 2 prefs 4 ( 1 2 3 )
student 1 prefs 3
student 2 prefs 4 1 2
student 3 prefs 3
student 4 prefs ( 2 3 ) 4 1
";

pub fn tight() -> Instance {
    Instance::parse(TIGHT).expect("built-in instance parses")
}

pub fn clone_trap() -> Instance {
    Instance::parse(CLONE_TRAP).expect("built-in instance parses")
}

pub fn spare_capacity() -> Instance {
    Instance::parse(SPARE_CAPACITY).expect("built-in instance parses")
}
