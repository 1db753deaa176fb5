//! Orderings of the four members of a transformation class.

use std::fmt::{self, Debug, Display};

use itertools::Itertools;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// One of the four operations making up a transformation class.
///
/// `ALL` lists the members in canonical order, which also defines the
/// lexicographic order on permutations.
pub trait ClassMember: Copy + Eq + Ord + Debug + Send + Sync + 'static {
    const ALL: [Self; 4];

    fn name(self) -> &'static str;

    fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == name)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Permutation<T: ClassMember> {
    order: [T; 4],
}

impl<T: ClassMember> Permutation<T> {
    pub fn new(order: [T; 4]) -> Result<Self> {
        for m in T::ALL {
            if order.iter().filter(|&&o| o == m).count() != 1 {
                return Err(Error::Param(format!(
                    "{:?} is not a permutation of {:?}",
                    order,
                    T::ALL
                )));
            }
        }
        Ok(Self { order })
    }

    pub fn canonical() -> Self {
        Self { order: T::ALL }
    }

    /// All 24 orderings, lexicographically sorted by canonical member order.
    pub fn all() -> Vec<Self> {
        T::ALL
            .into_iter()
            .permutations(4)
            .map(|p| Self {
                order: [p[0], p[1], p[2], p[3]],
            })
            .collect()
    }

    pub fn order(&self) -> &[T; 4] {
        &self.order
    }

    pub fn iter(&self) -> impl Iterator<Item = T> + '_ {
        self.order.iter().copied()
    }

    pub fn position(&self, member: T) -> usize {
        self.order.iter().position(|&m| m == member).expect("valid permutation")
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.order.iter().map(|m| m.name()).collect()
    }

    pub fn parse_names<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        if names.len() != 4 {
            return Err(Error::Param(format!("expected 4 operation names, got {}", names.len())));
        }
        let mut order = [T::ALL[0]; 4];
        for (slot, name) in order.iter_mut().zip(names) {
            *slot = T::parse(name.as_ref())
                .ok_or_else(|| Error::Param(format!("unknown operation {:?}", name.as_ref())))?;
        }
        Self::new(order)
    }
}

impl<T: ClassMember> Debug for Permutation<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl<T: ClassMember> Display for Permutation<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.names().join(">"))
    }
}

impl<T: ClassMember> Serialize for Permutation<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.names().serialize(s)
    }
}

impl<'de, T: ClassMember> Deserialize<'de> for Permutation<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let names = Vec::<String>::deserialize(d)?;
        Self::parse_names(&names).map_err(serde::de::Error::custom)
    }
}
