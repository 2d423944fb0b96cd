//! Dense indices into a validated [`WorldSpec`](crate::WorldSpec).
//!
//! Indices follow document order. They are only meaningful for the world
//! that produced them.

use core::fmt;

macro_rules! index_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub(crate) u16);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0 as usize
            }

            #[inline]
            pub(crate) fn from_usize(i: usize) -> Self {
                Self(i as u16)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}#{}", stringify!($name), self.0)
            }
        }
    };
}

index_type!(
    /// A location.
    LocationIx
);
index_type!(
    /// An object (item, container or door).
    ObjectIx
);
index_type!(
    /// A non-player character.
    CharacterIx
);
index_type!(
    /// A conversation topic.
    TopicIx
);
index_type!(
    /// A plot point.
    PlotIx
);

/// Upper bound on entities per category, so indices fit the compact state.
pub const MAX_ENTITIES: usize = u16::MAX as usize;
