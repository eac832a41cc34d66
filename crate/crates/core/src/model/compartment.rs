use serde::{Deserialize, Serialize};
use std::fmt;

/// Epidemic state of an individual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Compartment {
    S,
    I,
    R,
}

impl Compartment {
    pub const ALL: [Compartment; 3] = [Compartment::S, Compartment::I, Compartment::R];

    pub fn index(self) -> usize {
        match self {
            Compartment::S => 0,
            Compartment::I => 1,
            Compartment::R => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Compartment> {
        Compartment::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Compartment::S => "S",
            Compartment::I => "I",
            Compartment::R => "R",
        }
    }
}

impl fmt::Display for Compartment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
