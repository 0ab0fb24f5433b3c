//! `.hzm` text format for project models.
//!
//! The grammar is documented in `GRAMMAR.md` at the crate root. Parsing is
//! a pure function of the source texts; several files are merged in
//! lexicographic path order.

mod parser;
mod writer;

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub use parser::parse_file;
pub use writer::serialize_model;

use crate::model::ProjectModel;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceSpan {
    pub file: PathBuf,
    /// 1-based.
    pub line: u32,
    /// 1-based, counted in characters.
    pub column: u32,
    pub length: u32,
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file.display(), self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("{span}: {message}{}", expected.as_ref().map(|e| format!(" (expected {e})")).unwrap_or_default())]
pub struct ParseError {
    pub span: SourceSpan,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<String>,
}

impl ParseError {
    pub fn to_diagnostic(&self) -> crate::diagnostic::Diagnostic {
        let message = match &self.expected {
            Some(e) => format!("{} (expected {e})", self.message),
            None => self.message.clone(),
        };
        crate::diagnostic::Diagnostic::error(crate::diagnostic::codes::SYNTAX, None, message).with_span(Some(self.span.clone()))
    }
}

/// One `.hzm` input.
#[derive(Debug, Clone)]
pub struct SourceFile {
    pub path: PathBuf,
    pub text: String,
}

impl SourceFile {
    pub fn new(path: impl Into<PathBuf>, text: impl Into<String>) -> Self {
        Self { path: path.into(), text: text.into() }
    }
}

/// Parses and merges all sources. Every file is parsed even after an error
/// so a single run reports as many problems as possible.
pub fn parse_model(sources: &[SourceFile]) -> Result<ProjectModel, Vec<ParseError>> {
    let mut ordered: Vec<&SourceFile> = sources.iter().collect();
    ordered.sort_by(|a, b| a.path.cmp(&b.path));

    let mut model = ProjectModel::default();
    let mut named = false;
    let mut errors = Vec::new();
    for src in ordered {
        match parse_file(&src.path, &src.text) {
            Ok(part) => {
                if !named {
                    if let Some(name) = part.name {
                        model.name = name;
                        named = true;
                    }
                }
                model.use_cases.extend(part.model.use_cases);
                model.sequence_diagrams.extend(part.model.sequence_diagrams);
                model.state_machines.extend(part.model.state_machines);
                model.spans.0.extend(part.model.spans.0);
            }
            Err(mut e) => errors.append(&mut e),
        }
    }
    if errors.is_empty() {
        Ok(model)
    } else {
        Err(errors)
    }
}

/// Single in-memory source, mostly for tests and the service.
pub fn parse_str(text: &str) -> Result<ProjectModel, Vec<ParseError>> {
    parse_model(&[SourceFile::new("<input>", text)])
}
