//! Identifier grammar.
//!
//! Model elements use `UCnn`, `SDnn`, `SMnn` with dotted sub-ids for
//! conditions (`UC02.C3`), messages (`SD01.M4`, keyed by sequence number)
//! and transitions (`SM01.T7`). Table rows are addressed as `<table>.<line>`
//! (`UC02.15`). Registry items are `HNn`, `Recn` and `Hypn`.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Splits `prefix` + decimal digits. Returns `None` unless the whole tail is
/// digits and non-empty.
pub fn split_numbered(s: &str, prefix: &str) -> Option<u32> {
    let tail = s.strip_prefix(prefix)?;
    if tail.is_empty() || !tail.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    tail.parse().ok()
}

pub fn is_use_case_id(s: &str) -> bool {
    split_numbered(s, "UC").is_some()
}

pub fn is_sequence_id(s: &str) -> bool {
    split_numbered(s, "SD").is_some()
}

pub fn is_state_machine_id(s: &str) -> bool {
    split_numbered(s, "SM").is_some()
}

/// Compares strings treating runs of ASCII digits as numbers, so `HN2`
/// sorts before `HN10` and `UC02.9` before `UC02.15`.
pub fn natural_cmp(a: &str, b: &str) -> Ordering {
    let (mut a, mut b) = (a.as_bytes(), b.as_bytes());
    loop {
        match (a.first(), b.first()) {
            (None, None) => return Ordering::Equal,
            (None, Some(_)) => return Ordering::Less,
            (Some(_), None) => return Ordering::Greater,
            (Some(x), Some(y)) if x.is_ascii_digit() && y.is_ascii_digit() => {
                let la = a.iter().take_while(|c| c.is_ascii_digit()).count();
                let lb = b.iter().take_while(|c| c.is_ascii_digit()).count();
                let (na, nb) = (trim_zeros(&a[..la]), trim_zeros(&b[..lb]));
                let ord = na.len().cmp(&nb.len()).then_with(|| na.cmp(nb)).then_with(|| la.cmp(&lb));
                if ord != Ordering::Equal {
                    return ord;
                }
                a = &a[la..];
                b = &b[lb..];
            }
            (Some(x), Some(y)) => {
                if x != y {
                    return x.cmp(y);
                }
                a = &a[1..];
                b = &b[1..];
            }
        }
    }
}

fn trim_zeros(digits: &[u8]) -> &[u8] {
    let start = digits.iter().position(|&d| d != b'0').unwrap_or(digits.len());
    &digits[start..]
}

/// The three registries kept next to the HAZOP tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemKind {
    Hazard,
    Recommendation,
    Hypothesis,
}

impl ItemKind {
    pub const ALL: [ItemKind; 3] = [ItemKind::Hazard, ItemKind::Recommendation, ItemKind::Hypothesis];

    pub fn prefix(self) -> &'static str {
        match self {
            ItemKind::Hazard => "HN",
            ItemKind::Recommendation => "Rec",
            ItemKind::Hypothesis => "Hyp",
        }
    }

    pub fn format(self, n: u32) -> String {
        format!("{}{}", self.prefix(), n)
    }

    /// Numeric part of an id of this kind.
    pub fn number(self, id: &str) -> Option<u32> {
        split_numbered(id, self.prefix())
    }
}

/// Which diagram family a table (and its rows) belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagramType {
    UseCase,
    Sequence,
    StateMachine,
}

impl DiagramType {
    pub const ALL: [DiagramType; 3] = [DiagramType::UseCase, DiagramType::Sequence, DiagramType::StateMachine];

    pub fn of_table(table_id: &str) -> Option<DiagramType> {
        if is_use_case_id(table_id) {
            Some(DiagramType::UseCase)
        } else if is_sequence_id(table_id) {
            Some(DiagramType::Sequence)
        } else if is_state_machine_id(table_id) {
            Some(DiagramType::StateMachine)
        } else {
            None
        }
    }

    pub fn short(self) -> &'static str {
        match self {
            DiagramType::UseCase => "UC",
            DiagramType::Sequence => "SD",
            DiagramType::StateMachine => "SM",
        }
    }
}

/// Traceability label of one HAZOP table line, `UC02.15`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RowAnchor {
    pub table: String,
    pub line: u32,
}

impl RowAnchor {
    pub fn new(table: impl Into<String>, line: u32) -> Self {
        Self { table: table.into(), line }
    }
}

impl PartialOrd for RowAnchor {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for RowAnchor {
    fn cmp(&self, other: &Self) -> Ordering {
        natural_cmp(&self.table, &other.table).then_with(|| self.line.cmp(&other.line))
    }
}

impl fmt::Display for RowAnchor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.table, self.line)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid row anchor `{0}`, expected <table>.<line>")]
pub struct BadAnchor(pub String);

impl FromStr for RowAnchor {
    type Err = BadAnchor;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (table, line) = s.rsplit_once('.').ok_or_else(|| BadAnchor(s.to_string()))?;
        if DiagramType::of_table(table).is_none() {
            return Err(BadAnchor(s.to_string()));
        }
        let line = line.parse::<u32>().ok().filter(|&n| n > 0).ok_or_else(|| BadAnchor(s.to_string()))?;
        Ok(RowAnchor::new(table, line))
    }
}

impl Serialize for RowAnchor {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RowAnchor {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
