use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dsl::SourceSpan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Error,
    Warning,
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Level::Error => f.write_str("error"),
            Level::Warning => f.write_str("warning"),
        }
    }
}

/// A located finding from model validation, registry loading or
/// traceability checking.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub level: Level,
    pub code: String,
    /// Element, row anchor or registry item the finding is about.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub element: Option<String>,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<SourceSpan>,
}

impl Diagnostic {
    pub fn error(code: &str, element: impl Into<Option<String>>, message: impl Into<String>) -> Self {
        Self {
            level: Level::Error,
            code: code.to_string(),
            element: element.into(),
            message: message.into(),
            span: None,
        }
    }

    pub fn warning(code: &str, element: impl Into<Option<String>>, message: impl Into<String>) -> Self {
        Self {
            level: Level::Warning,
            ..Self::error(code, element, message)
        }
    }

    pub fn with_span(mut self, span: Option<SourceSpan>) -> Self {
        self.span = span;
        self
    }

    pub fn is_error(&self) -> bool {
        self.level == Level::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(span) = &self.span {
            write!(f, "{span}: ")?;
        }
        write!(f, "{}[{}]", self.level, self.code)?;
        if let Some(element) = &self.element {
            write!(f, " {element}")?;
        }
        write!(f, ": {}", self.message)
    }
}

/// Sorts by element id, then rule code, then message, so repeated runs
/// print identical lists.
pub fn sort_diagnostics(diags: &mut [Diagnostic]) {
    diags.sort_by(|a, b| {
        crate::ids::natural_cmp(a.element.as_deref().unwrap_or(""), b.element.as_deref().unwrap_or(""))
            .then_with(|| a.code.cmp(&b.code))
            .then_with(|| a.message.cmp(&b.message))
    });
}

pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(Diagnostic::is_error)
}

/// Rule codes shared between the model validator, registry loader and
/// consistency checker.
pub mod codes {
    // model
    pub const SYNTAX: &str = "SYNTAX";
    pub const DUPLICATE_ID: &str = "DUPLICATE_ID";
    pub const BAD_ID: &str = "BAD_ID";
    pub const UC_NO_CONDITIONS: &str = "UC_NO_CONDITIONS";
    pub const UC_EMPTY_CONDITION: &str = "UC_EMPTY_CONDITION";
    pub const SD_UNKNOWN_USE_CASE: &str = "SD_UNKNOWN_USE_CASE";
    pub const SD_NO_SYSTEM: &str = "SD_NO_SYSTEM";
    pub const SD_MULTIPLE_SYSTEM: &str = "SD_MULTIPLE_SYSTEM";
    pub const SD_DUPLICATE_LIFELINE: &str = "SD_DUPLICATE_LIFELINE";
    pub const SD_UNKNOWN_LIFELINE: &str = "SD_UNKNOWN_LIFELINE";
    pub const SD_MESSAGE_ORDER: &str = "SD_MESSAGE_ORDER";
    pub const SD_EMPTY_GUARD: &str = "SD_EMPTY_GUARD";
    pub const SM_UNKNOWN_STATE: &str = "SM_UNKNOWN_STATE";
    pub const SM_DUPLICATE_STATE: &str = "SM_DUPLICATE_STATE";
    pub const SM_INITIAL: &str = "SM_INITIAL";
    pub const SM_NONDETERMINISTIC: &str = "SM_NONDETERMINISTIC";
    pub const SM_EMPTY_TRANSITION: &str = "SM_EMPTY_TRANSITION";
    pub const SM_BAD_EVENT: &str = "SM_BAD_EVENT";

    // registry
    pub const REGISTRY_FORMAT: &str = "REGISTRY_FORMAT";
    pub const DUPLICATE_ENTRY: &str = "DUPLICATE_ENTRY";
    pub const UNKNOWN_ELEMENT_KIND: &str = "UNKNOWN_ELEMENT_KIND";
    pub const UNKNOWN_ATTRIBUTE: &str = "UNKNOWN_ATTRIBUTE";
    pub const UNKNOWN_APPLICABILITY: &str = "UNKNOWN_APPLICABILITY";
    pub const BAD_APPLICABILITY: &str = "BAD_APPLICABILITY";
    pub const EMPTY_GUIDE_WORD: &str = "EMPTY_GUIDE_WORD";
    pub const BAD_TRIGGERED_NOTE: &str = "BAD_TRIGGERED_NOTE";

    // analysis store
    pub const DANGLING_HAZARD: &str = "DANGLING_HAZARD";
    pub const DANGLING_RECOMMENDATION: &str = "DANGLING_RECOMMENDATION";
    pub const DANGLING_ROW: &str = "DANGLING_ROW";
    pub const STALE_ATTRIBUTE_REF: &str = "STALE_ATTRIBUTE_REF";
    pub const DUPLICATE_ROW: &str = "DUPLICATE_ROW";
    pub const DUPLICATE_ITEM: &str = "DUPLICATE_ITEM";
    pub const MODEL_FINGERPRINT_MISMATCH: &str = "MODEL_FINGERPRINT_MISMATCH";
    pub const SEVERITY_NOT_IN_SCALE: &str = "SEVERITY_NOT_IN_SCALE";
    pub const INTERPRETED_WITHOUT_DEVIATION: &str = "INTERPRETED_WITHOUT_DEVIATION";
    pub const ORPHAN_HAZARD: &str = "ORPHAN_HAZARD";
    pub const REC_WITHOUT_COVERS: &str = "REC_WITHOUT_COVERS";
    pub const MISSING_REAL_WORLD_EFFECT: &str = "MISSING_REAL_WORLD_EFFECT";
}
