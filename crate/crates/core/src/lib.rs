//! Stable matchings for student-project allocation where both students and
//! lecturers may express ties.
//!
//! The crate covers the data model and text formats ([`instance`],
//! [`matching`]), stability checking ([`stability`]), a linear-time
//! approximation for maximum stable matchings ([`approx`]), exact solvers
//! ([`oracle`] by enumeration, [`ip`] through an integer programme), the
//! reduction to hospitals/residents with ties ([`hrt`]), random instance
//! generation ([`gen`]) and the experiment harness ([`experiment`]).

pub mod approx;
pub mod experiment;
pub mod gen;
pub mod hrt;
pub mod ids;
pub mod instance;
pub mod ip;
pub mod matching;
pub mod oracle;
pub mod prefs;
pub mod samples;
pub mod stability;

pub use ids::{HospitalId, LecturerId, ProjectId, ResidentId, StudentId};
pub use instance::{Instance, InstanceError, Pair, ParseError};
pub use matching::{Matching, MatchingError};
pub use prefs::PrefList;
pub use stability::{find_blocking_pairs, is_stable, satisfies_condition_star, BlockingKind, BlockingPair};
