use std::fmt;
use std::str::FromStr;

/// The two event classes. Seizure is the positive class everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Class {
    Seizure,
    NonSeizure,
}

impl Class {
    pub fn as_str(self) -> &'static str {
        match self {
            Class::Seizure => "seizure",
            Class::NonSeizure => "non_seizure",
        }
    }

    pub fn other(self) -> Class {
        match self {
            Class::Seizure => Class::NonSeizure,
            Class::NonSeizure => Class::Seizure,
        }
    }
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown class label `{0}` (expected `seizure` or `non_seizure`)")]
pub struct ParseClassError(pub String);

impl FromStr for Class {
    type Err = ParseClassError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "seizure" | "s" => Ok(Class::Seizure),
            "non_seizure" | "nonseizure" | "ns" => Ok(Class::NonSeizure),
            other => Err(ParseClassError(other.to_string())),
        }
    }
}
