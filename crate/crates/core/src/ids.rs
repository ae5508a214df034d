use std::fmt;

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident, $prefix:literal) => {
        $(#[$meta])*
        ///
        /// Stored 0-based; displayed 1-based with a letter prefix.
        #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub u32);

        impl $name {
            pub fn from_index(index: usize) -> Self {
                Self(index as u32)
            }

            /// Builds an id from its 1-based external number.
            pub fn from_number(number: u32) -> Self {
                assert!(number >= 1, "external ids are 1-based");
                Self(number - 1)
            }

            pub fn index(self) -> usize {
                self.0 as usize
            }

            pub fn number(self) -> u32 {
                self.0 + 1
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}{}", $prefix, self.0 + 1)
            }
        }
    };
}

id_type!(
    /// A student.
    StudentId,
    "s"
);
id_type!(
    /// A project.
    ProjectId,
    "p"
);
id_type!(
    /// A lecturer.
    LecturerId,
    "l"
);
id_type!(
    /// A resident of a hospitals/residents instance.
    ResidentId,
    "r"
);
id_type!(
    /// A hospital of a hospitals/residents instance.
    HospitalId,
    "h"
);
