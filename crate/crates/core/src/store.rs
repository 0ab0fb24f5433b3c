//! The analyst's HAZOP tables plus the hazard, recommendation and
//! hypothesis registries that cross-reference them.
//!
//! Everything lives in one JSON document (`project.hza`). Every mutation
//! either applies completely or leaves the store untouched, and never
//! introduces a reference that does not resolve.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::AttributeRef;
use crate::ids::{natural_cmp, DiagramType, ItemKind, RowAnchor};

pub const FORMAT_VERSION: u32 = 1;

pub fn default_severity_scale() -> Vec<String> {
    ["Catastrophic", "Severe", "Moderate", "Minor", "None"].map(String::from).to_vec()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Skeleton,
    Interpreted,
    NotApplicable,
    Orphaned,
}

impl RowStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RowStatus::Skeleton => "skeleton",
            RowStatus::Interpreted => "interpreted",
            RowStatus::NotApplicable => "not_applicable",
            RowStatus::Orphaned => "orphaned",
        }
    }
}

/// One line of a HAZOP table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationRow {
    pub table_id: String,
    pub line: u32,
    pub attribute_ref: AttributeRef,
    pub guide_word: String,
    /// Generated from the guide-word interpretation; refreshed on every
    /// regeneration and never edited by the analyst.
    #[serde(default)]
    pub deviation_hint: String,
    #[serde(default)]
    pub deviation: String,
    #[serde(default)]
    pub use_case_effect: String,
    #[serde(default)]
    pub real_world_effect: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub severity: Option<String>,
    #[serde(default)]
    pub possible_causes: String,
    #[serde(default)]
    pub recommendations: Vec<String>,
    #[serde(default)]
    pub remarks: String,
    #[serde(default)]
    pub hazards: Vec<String>,
    pub status: RowStatus,
    /// Status held before the row was orphaned, restored if its key returns.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior_status: Option<RowStatus>,
}

impl DeviationRow {
    pub fn anchor(&self) -> RowAnchor {
        RowAnchor::new(self.table_id.clone(), self.line)
    }

    pub fn key(&self) -> (&str, &AttributeRef, &str) {
        (&self.table_id, &self.attribute_ref, &self.guide_word)
    }

    pub fn diagram_type(&self) -> Option<DiagramType> {
        DiagramType::of_table(&self.table_id)
    }

    /// Fields the analyst owns. Regeneration must leave these untouched.
    pub fn analyst_fields(&self) -> AnalystFields<'_> {
        AnalystFields {
            deviation: &self.deviation,
            use_case_effect: &self.use_case_effect,
            real_world_effect: &self.real_world_effect,
            severity: self.severity.as_deref(),
            possible_causes: &self.possible_causes,
            recommendations: &self.recommendations,
            remarks: &self.remarks,
            hazards: &self.hazards,
        }
    }
}

#[derive(Debug, PartialEq, Eq)]
pub struct AnalystFields<'a> {
    pub deviation: &'a str,
    pub use_case_effect: &'a str,
    pub real_world_effect: &'a str,
    pub severity: Option<&'a str>,
    pub possible_causes: &'a str,
    pub recommendations: &'a [String],
    pub remarks: &'a str,
    pub hazards: &'a [String],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hazard {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    /// Manual annotation: how often a preliminary hazard analysis found it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pha_occurrences: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub covers: Vec<String>,
    #[serde(default)]
    pub sources: Vec<RowAnchor>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HypothesisStatus {
    #[default]
    Open,
    Confirmed,
    Rejected,
}

impl HypothesisStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            HypothesisStatus::Open => "open",
            HypothesisStatus::Confirmed => "confirmed",
            HypothesisStatus::Rejected => "rejected",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub status: HypothesisStatus,
    #[serde(default)]
    pub sources: Vec<RowAnchor>,
}

/// Numbers of deleted registry items; never handed out again.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Tombstones {
    #[serde(default)]
    pub hazards: BTreeSet<u32>,
    #[serde(default)]
    pub recommendations: BTreeSet<u32>,
    #[serde(default)]
    pub hypotheses: BTreeSet<u32>,
}

impl Tombstones {
    fn of(&self, kind: ItemKind) -> &BTreeSet<u32> {
        match kind {
            ItemKind::Hazard => &self.hazards,
            ItemKind::Recommendation => &self.recommendations,
            ItemKind::Hypothesis => &self.hypotheses,
        }
    }

    fn of_mut(&mut self, kind: ItemKind) -> &mut BTreeSet<u32> {
        match kind {
            ItemKind::Hazard => &mut self.hazards,
            ItemKind::Recommendation => &mut self.recommendations,
            ItemKind::Hypothesis => &mut self.hypotheses,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisStore {
    pub format_version: u32,
    #[serde(default)]
    pub project: String,
    /// Fingerprint of the model the tables were last generated from.
    #[serde(default)]
    pub model_fingerprint: Option<String>,
    pub severity_scale: Vec<String>,
    #[serde(default)]
    pub rows: Vec<DeviationRow>,
    #[serde(default)]
    pub hazards: Vec<Hazard>,
    #[serde(default)]
    pub recommendations: Vec<Recommendation>,
    #[serde(default)]
    pub hypotheses: Vec<Hypothesis>,
    #[serde(default)]
    pub tombstones: Tombstones,
}

impl Default for AnalysisStore {
    fn default() -> Self {
        Self {
            format_version: FORMAT_VERSION,
            project: String::new(),
            model_fingerprint: None,
            severity_scale: default_severity_scale(),
            rows: Vec::new(),
            hazards: Vec::new(),
            recommendations: Vec::new(),
            hypotheses: Vec::new(),
            tombstones: Tombstones::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StoreError {
    #[error("row {0} does not exist")]
    UnknownRow(RowAnchor),
    #[error("severity `{severity}` is not in the scale ({})", scale.join(", "))]
    SeverityNotInScale { severity: String, scale: Vec<String> },
    #[error("hazard {0} does not exist")]
    DanglingHazard(String),
    #[error("recommendation {0} does not exist")]
    DanglingRecommendation(String),
    #[error("row {0} does not exist")]
    DanglingRow(String),
    #[error("{0} does not exist")]
    UnknownItem(String),
    #[error("{id} is still referenced by {}", by.join(", "))]
    ItemInUse { id: String, by: Vec<String> },
    #[error("{0}")]
    InvalidStatus(String),
    #[error("{0}")]
    Invalid(String),
}

impl StoreError {
    /// Rule code shared with the consistency checker.
    pub fn code(&self) -> &'static str {
        use crate::diagnostic::codes;
        match self {
            StoreError::UnknownRow(_) => "UNKNOWN_ROW",
            StoreError::SeverityNotInScale { .. } => codes::SEVERITY_NOT_IN_SCALE,
            StoreError::DanglingHazard(_) => codes::DANGLING_HAZARD,
            StoreError::DanglingRecommendation(_) => codes::DANGLING_RECOMMENDATION,
            StoreError::DanglingRow(_) => codes::DANGLING_ROW,
            StoreError::UnknownItem(_) => "UNKNOWN_ITEM",
            StoreError::ItemInUse { .. } => "ITEM_IN_USE",
            StoreError::InvalidStatus(_) => "INVALID_STATUS",
            StoreError::Invalid(_) => "INVALID",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StoreFileError {
    #[error("cannot access {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path} is not a valid analysis file: {source}")]
    Format { path: String, source: serde_json::Error },
    #[error("{path} has format version {found}; this build reads up to {FORMAT_VERSION}")]
    Version { path: String, found: u32 },
}

/// Field edits for one row. Absent fields are left unchanged; an empty
/// `severity` clears it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowUpdate {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deviation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub use_case_effect: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub real_world_effect: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub severity: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub possible_causes: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recommendations: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub remarks: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hazards: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<RowStatus>,
    /// Hazards created in the same edit and linked to the row.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub new_hazards: Vec<NewHazard>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NewHazard {
    pub text: String,
    #[serde(default)]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NewRecommendation {
    pub text: String,
    #[serde(default)]
    pub covers: Vec<String>,
    #[serde(default)]
    pub sources: Vec<RowAnchor>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NewHypothesis {
    pub text: String,
    #[serde(default)]
    pub status: HypothesisStatus,
    #[serde(default)]
    pub sources: Vec<RowAnchor>,
}

/// Partial edit of a hazard, recommendation or hypothesis.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ItemUpdate {
    #[serde(default)]
    pub text: Option<String>,
    #[serde(default)]
    pub note: Option<String>,
    #[serde(default)]
    pub pha_occurrences: Option<u32>,
    #[serde(default)]
    pub covers: Option<Vec<String>>,
    #[serde(default)]
    pub sources: Option<Vec<RowAnchor>>,
    #[serde(default)]
    pub status: Option<HypothesisStatus>,
}

/// Hazard list, recommendation list and hypothesis list, as delivered next
/// to the tables.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Outputs {
    pub hazards: Vec<HazardEntry>,
    pub recommendations: Vec<Recommendation>,
    pub hypotheses: Vec<Hypothesis>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HazardEntry {
    pub hazard: Hazard,
    pub occurrences: Occurrences,
    /// Rows naming the hazard, in table order.
    pub rows: Vec<RowAnchor>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Occurrences {
    pub use_case: usize,
    pub sequence: usize,
    pub state_machine: usize,
}

impl Occurrences {
    pub fn get(&self, t: DiagramType) -> usize {
        match t {
            DiagramType::UseCase => self.use_case,
            DiagramType::Sequence => self.sequence,
            DiagramType::StateMachine => self.state_machine,
        }
    }

    fn bump(&mut self, t: DiagramType) {
        match t {
            DiagramType::UseCase => self.use_case += 1,
            DiagramType::Sequence => self.sequence += 1,
            DiagramType::StateMachine => self.state_machine += 1,
        }
    }
}

impl AnalysisStore {
    pub fn new(project: impl Into<String>) -> Self {
        Self { project: project.into(), ..Self::default() }
    }

    pub fn load(path: &Path) -> Result<Self, StoreFileError> {
        let text = fs::read_to_string(path).map_err(|source| StoreFileError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text).map_err(|e| match e {
            StoreFileError::Format { source, .. } => StoreFileError::Format { path: path.display().to_string(), source },
            StoreFileError::Version { found, .. } => StoreFileError::Version { path: path.display().to_string(), found },
            other => other,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, StoreFileError> {
        let store: AnalysisStore =
            serde_json::from_str(text).map_err(|source| StoreFileError::Format { path: String::new(), source })?;
        if store.format_version > FORMAT_VERSION {
            return Err(StoreFileError::Version { path: String::new(), found: store.format_version });
        }
        Ok(store)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("store serializes");
        s.push('\n');
        s
    }

    /// Writes to a temporary file next to `path` and renames it over the
    /// target, so readers see either the old or the new document.
    pub fn save(&self, path: &Path) -> Result<(), StoreFileError> {
        let io = |source| StoreFileError::Io { path: path.display().to_string(), source };
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
        tmp.write_all(self.to_json().as_bytes()).map_err(io)?;
        tmp.as_file().sync_all().map_err(io)?;
        tmp.persist(path).map_err(|e| io(e.error))?;
        Ok(())
    }

    pub fn row(&self, table: &str, line: u32) -> Option<&DeviationRow> {
        self.rows.iter().find(|r| r.table_id == table && r.line == line)
    }

    fn row_index(&self, table: &str, line: u32) -> Result<usize, StoreError> {
        self.rows
            .iter()
            .position(|r| r.table_id == table && r.line == line)
            .ok_or_else(|| StoreError::UnknownRow(RowAnchor::new(table, line)))
    }

    pub fn rows_of<'a>(&'a self, table: &'a str) -> impl Iterator<Item = &'a DeviationRow> + 'a {
        self.rows.iter().filter(move |r| r.table_id == table)
    }

    /// Table ids in natural order.
    pub fn table_ids(&self) -> Vec<&str> {
        let set: BTreeSet<&str> = self.rows.iter().map(|r| r.table_id.as_str()).collect();
        let mut ids: Vec<&str> = set.into_iter().collect();
        ids.sort_by(|a, b| natural_cmp(a, b));
        ids
    }

    pub fn max_line(&self, table: &str) -> u32 {
        self.rows_of(table).map(|r| r.line).max().unwrap_or(0)
    }

    pub fn hazard(&self, id: &str) -> Option<&Hazard> {
        self.hazards.iter().find(|h| h.id == id)
    }

    pub fn recommendation(&self, id: &str) -> Option<&Recommendation> {
        self.recommendations.iter().find(|r| r.id == id)
    }

    pub fn hypothesis(&self, id: &str) -> Option<&Hypothesis> {
        self.hypotheses.iter().find(|h| h.id == id)
    }

    /// Keeps rows in (table, line) order.
    pub fn sort_rows(&mut self) {
        self.rows.sort_by(|a, b| natural_cmp(&a.table_id, &b.table_id).then(a.line.cmp(&b.line)));
    }

    fn used_numbers(&self, kind: ItemKind) -> BTreeSet<u32> {
        let ids: Vec<&str> = match kind {
            ItemKind::Hazard => self.hazards.iter().map(|h| h.id.as_str()).collect(),
            ItemKind::Recommendation => self.recommendations.iter().map(|r| r.id.as_str()).collect(),
            ItemKind::Hypothesis => self.hypotheses.iter().map(|h| h.id.as_str()).collect(),
        };
        ids.into_iter().filter_map(|id| kind.number(id)).collect()
    }

    /// Smallest positive number that is neither in use nor tombstoned.
    pub fn allocate_id(&self, kind: ItemKind) -> String {
        let used = self.used_numbers(kind);
        let dead = self.tombstones.of(kind);
        let n = (1..).find(|n| !used.contains(n) && !dead.contains(n)).expect("unbounded range");
        kind.format(n)
    }

    fn check_severity(&self, severity: &str) -> Result<(), StoreError> {
        if self.severity_scale.iter().any(|s| s == severity) {
            Ok(())
        } else {
            Err(StoreError::SeverityNotInScale { severity: severity.to_string(), scale: self.severity_scale.clone() })
        }
    }

    fn check_hazards<'a>(&self, ids: impl IntoIterator<Item = &'a String>) -> Result<(), StoreError> {
        for id in ids {
            if self.hazard(id).is_none() {
                return Err(StoreError::DanglingHazard(id.clone()));
            }
        }
        Ok(())
    }

    fn check_rows<'a>(&self, anchors: impl IntoIterator<Item = &'a RowAnchor>) -> Result<(), StoreError> {
        for a in anchors {
            if self.row(&a.table, a.line).is_none() {
                return Err(StoreError::DanglingRow(a.to_string()));
            }
        }
        Ok(())
    }

    /// Applies `update` to one row. Validation happens before any change,
    /// so an error leaves the store as it was.
    pub fn set_row_fields(&mut self, table: &str, line: u32, update: RowUpdate) -> Result<&DeviationRow, StoreError> {
        let idx = self.row_index(table, line)?;
        let row = &self.rows[idx];

        if let Some(sev) = update.severity.as_deref().filter(|s| !s.is_empty()) {
            self.check_severity(sev)?;
        }
        if let Some(h) = &update.hazards {
            self.check_hazards(h)?;
        }
        if let Some(recs) = &update.recommendations {
            if let Some(bad) = recs.iter().find(|r| self.recommendation(r).is_none()) {
                return Err(StoreError::DanglingRecommendation(bad.clone()));
            }
        }
        if let Some(h) = update.new_hazards.iter().find(|h| h.text.trim().is_empty()) {
            let _ = h;
            return Err(StoreError::Invalid("a new hazard needs a description".into()));
        }

        let deviation = update.deviation.as_deref().unwrap_or(&row.deviation);
        let has_deviation = !deviation.trim().is_empty();
        let content_status = |current: RowStatus| -> Result<RowStatus, StoreError> {
            match update.status {
                Some(RowStatus::Orphaned) => Err(StoreError::InvalidStatus("rows are orphaned only by regeneration".into())),
                Some(RowStatus::Interpreted) if !has_deviation => {
                    Err(StoreError::InvalidStatus("an interpreted row needs a deviation".into()))
                }
                Some(RowStatus::Skeleton) if has_deviation => {
                    Err(StoreError::InvalidStatus("a row with a deviation cannot go back to skeleton".into()))
                }
                Some(s) => Ok(s),
                None => Ok(match current {
                    RowStatus::NotApplicable => RowStatus::NotApplicable,
                    _ if has_deviation => RowStatus::Interpreted,
                    _ => RowStatus::Skeleton,
                }),
            }
        };
        let (status, prior_status) = if row.status == RowStatus::Orphaned {
            let base = row.prior_status.unwrap_or(RowStatus::Skeleton);
            (RowStatus::Orphaned, Some(content_status(base)?))
        } else {
            (content_status(row.status)?, None)
        };

        // validated; apply
        let mut created = Vec::new();
        for h in &update.new_hazards {
            let id = self.allocate_id(ItemKind::Hazard);
            self.hazards.push(Hazard { id: id.clone(), text: h.text.trim().to_string(), note: h.note.clone(), pha_occurrences: None });
            created.push(id);
        }

        let row = &mut self.rows[idx];
        if let Some(v) = update.deviation {
            row.deviation = v;
        }
        if let Some(v) = update.use_case_effect {
            row.use_case_effect = v;
        }
        if let Some(v) = update.real_world_effect {
            row.real_world_effect = v;
        }
        if let Some(v) = update.severity {
            row.severity = if v.is_empty() { None } else { Some(v) };
        }
        if let Some(v) = update.possible_causes {
            row.possible_causes = v;
        }
        if let Some(v) = update.recommendations {
            row.recommendations = dedup(v);
        }
        if let Some(v) = update.remarks {
            row.remarks = v;
        }
        if let Some(v) = update.hazards {
            row.hazards = dedup(v);
        }
        for id in created {
            if !row.hazards.contains(&id) {
                row.hazards.push(id);
            }
        }
        row.status = status;
        row.prior_status = prior_status;

        let anchor = row.anchor();
        let hazards = row.hazards.clone();
        let recs = row.recommendations.clone();
        for rec in self.recommendations.iter_mut().filter(|r| recs.contains(&r.id)) {
            if !rec.sources.contains(&anchor) {
                rec.sources.push(anchor.clone());
            }
            for h in &hazards {
                if !rec.covers.contains(h) {
                    rec.covers.push(h.clone());
                }
            }
        }
        Ok(&self.rows[idx])
    }

    /// Adds a copy of a row's key at the end of its table so the analyst can
    /// record another deviation for the same attribute and guide word.
    pub fn duplicate_row(&mut self, table: &str, line: u32) -> Result<RowAnchor, StoreError> {
        let idx = self.row_index(table, line)?;
        let src = &self.rows[idx];
        let status = if src.status == RowStatus::Orphaned { RowStatus::Orphaned } else { RowStatus::Skeleton };
        let copy = DeviationRow {
            table_id: src.table_id.clone(),
            line: self.max_line(table) + 1,
            attribute_ref: src.attribute_ref.clone(),
            guide_word: src.guide_word.clone(),
            deviation_hint: src.deviation_hint.clone(),
            deviation: String::new(),
            use_case_effect: String::new(),
            real_world_effect: String::new(),
            severity: None,
            possible_causes: String::new(),
            recommendations: Vec::new(),
            remarks: String::new(),
            hazards: Vec::new(),
            status,
            prior_status: (status == RowStatus::Orphaned).then_some(RowStatus::Skeleton),
        };
        let anchor = copy.anchor();
        self.rows.push(copy);
        self.sort_rows();
        Ok(anchor)
    }

    pub fn add_hazard(&mut self, new: NewHazard) -> Result<String, StoreError> {
        if new.text.trim().is_empty() {
            return Err(StoreError::Invalid("a hazard needs a description".into()));
        }
        let id = self.allocate_id(ItemKind::Hazard);
        self.hazards.push(Hazard { id: id.clone(), text: new.text.trim().to_string(), note: new.note, pha_occurrences: None });
        Ok(id)
    }

    pub fn add_recommendation(&mut self, new: NewRecommendation) -> Result<String, StoreError> {
        if new.text.trim().is_empty() {
            return Err(StoreError::Invalid("a recommendation needs a text".into()));
        }
        self.check_hazards(&new.covers)?;
        self.check_rows(&new.sources)?;
        let id = self.allocate_id(ItemKind::Recommendation);
        self.recommendations.push(Recommendation {
            id: id.clone(),
            text: new.text.trim().to_string(),
            covers: dedup(new.covers),
            sources: dedup(new.sources),
        });
        Ok(id)
    }

    pub fn add_hypothesis(&mut self, new: NewHypothesis) -> Result<String, StoreError> {
        if new.text.trim().is_empty() {
            return Err(StoreError::Invalid("a hypothesis needs a text".into()));
        }
        self.check_rows(&new.sources)?;
        let id = self.allocate_id(ItemKind::Hypothesis);
        self.hypotheses.push(Hypothesis {
            id: id.clone(),
            text: new.text.trim().to_string(),
            status: new.status,
            sources: dedup(new.sources),
        });
        Ok(id)
    }

    /// Edits a hazard, recommendation or hypothesis. Fields that do not
    /// exist on the item kind are rejected.
    pub fn update_item(&mut self, id: &str, update: ItemUpdate) -> Result<(), StoreError> {
        let kind = item_kind(id).ok_or_else(|| StoreError::UnknownItem(id.to_string()))?;
        if update.text.as_deref().is_some_and(|t| t.trim().is_empty()) {
            return Err(StoreError::Invalid("text cannot be empty".into()));
        }
        let misplaced = |field: &str| StoreError::Invalid(format!("`{field}` does not apply to {id}"));
        match kind {
            ItemKind::Hazard => {
                if update.covers.is_some() {
                    return Err(misplaced("covers"));
                }
                if update.sources.is_some() {
                    return Err(misplaced("sources"));
                }
                if update.status.is_some() {
                    return Err(misplaced("status"));
                }
                let h = self.hazards.iter_mut().find(|h| h.id == id).ok_or_else(|| StoreError::UnknownItem(id.into()))?;
                if let Some(t) = update.text {
                    h.text = t;
                }
                if let Some(n) = update.note {
                    h.note = if n.is_empty() { None } else { Some(n) };
                }
                if let Some(p) = update.pha_occurrences {
                    h.pha_occurrences = Some(p);
                }
            }
            ItemKind::Recommendation => {
                if update.note.is_some() || update.pha_occurrences.is_some() || update.status.is_some() {
                    return Err(misplaced("note/pha_occurrences/status"));
                }
                if let Some(c) = &update.covers {
                    self.check_hazards(c)?;
                }
                if let Some(s) = &update.sources {
                    self.check_rows(s)?;
                }
                let r = self.recommendations.iter_mut().find(|r| r.id == id).ok_or_else(|| StoreError::UnknownItem(id.into()))?;
                if let Some(t) = update.text {
                    r.text = t;
                }
                if let Some(c) = update.covers {
                    r.covers = dedup(c);
                }
                if let Some(s) = update.sources {
                    r.sources = dedup(s);
                }
            }
            ItemKind::Hypothesis => {
                if update.note.is_some() || update.pha_occurrences.is_some() || update.covers.is_some() {
                    return Err(misplaced("note/pha_occurrences/covers"));
                }
                if let Some(s) = &update.sources {
                    self.check_rows(s)?;
                }
                let h = self.hypotheses.iter_mut().find(|h| h.id == id).ok_or_else(|| StoreError::UnknownItem(id.into()))?;
                if let Some(t) = update.text {
                    h.text = t;
                }
                if let Some(s) = update.status {
                    h.status = s;
                }
                if let Some(s) = update.sources {
                    h.sources = dedup(s);
                }
            }
        }
        Ok(())
    }

    /// Removes an unreferenced item and tombstones its number.
    pub fn delete_item(&mut self, id: &str) -> Result<(), StoreError> {
        let kind = item_kind(id).ok_or_else(|| StoreError::UnknownItem(id.to_string()))?;
        let n = kind.number(id).expect("item_kind checked the number");
        let by: Vec<String> = match kind {
            ItemKind::Hazard => self
                .rows
                .iter()
                .filter(|r| r.hazards.iter().any(|h| h == id))
                .map(|r| r.anchor().to_string())
                .chain(self.recommendations.iter().filter(|r| r.covers.iter().any(|h| h == id)).map(|r| r.id.clone()))
                .collect(),
            ItemKind::Recommendation => self
                .rows
                .iter()
                .filter(|r| r.recommendations.iter().any(|x| x == id))
                .map(|r| r.anchor().to_string())
                .collect(),
            ItemKind::Hypothesis => Vec::new(),
        };
        if !by.is_empty() {
            return Err(StoreError::ItemInUse { id: id.to_string(), by });
        }
        let before = self.hazards.len() + self.recommendations.len() + self.hypotheses.len();
        match kind {
            ItemKind::Hazard => self.hazards.retain(|h| h.id != id),
            ItemKind::Recommendation => self.recommendations.retain(|r| r.id != id),
            ItemKind::Hypothesis => self.hypotheses.retain(|h| h.id != id),
        }
        if before == self.hazards.len() + self.recommendations.len() + self.hypotheses.len() {
            return Err(StoreError::UnknownItem(id.to_string()));
        }
        self.tombstones.of_mut(kind).insert(n);
        Ok(())
    }

    /// The three output lists, deduplicated and in id order, each hazard
    /// annotated with the rows that name it.
    pub fn concatenate_outputs(&self) -> Outputs {
        let mut hazard_rows: BTreeMap<&str, Vec<&DeviationRow>> = BTreeMap::new();
        for row in &self.rows {
            for h in dedup_refs(&row.hazards) {
                hazard_rows.entry(h).or_default().push(row);
            }
        }

        let mut hazards: Vec<HazardEntry> = unique_by_id(&self.hazards, |h| &h.id)
            .into_iter()
            .map(|h| {
                let mut rows: Vec<&DeviationRow> = hazard_rows.get(h.id.as_str()).cloned().unwrap_or_default();
                rows.sort_by_key(|a| a.anchor());
                let mut occurrences = Occurrences::default();
                for r in &rows {
                    if let Some(t) = r.diagram_type() {
                        occurrences.bump(t);
                    }
                }
                HazardEntry { hazard: h.clone(), occurrences, rows: rows.iter().map(|r| r.anchor()).collect() }
            })
            .collect();
        hazards.sort_by(|a, b| natural_cmp(&a.hazard.id, &b.hazard.id));

        let mut recommendations: Vec<Recommendation> =
            unique_by_id(&self.recommendations, |r| &r.id).into_iter().cloned().collect();
        recommendations.sort_by(|a, b| natural_cmp(&a.id, &b.id));
        let mut hypotheses: Vec<Hypothesis> = unique_by_id(&self.hypotheses, |h| &h.id).into_iter().cloned().collect();
        hypotheses.sort_by(|a, b| natural_cmp(&a.id, &b.id));

        Outputs { hazards, recommendations, hypotheses }
    }
}

/// Kind of a registry item id, if it is well formed.
pub fn item_kind(id: &str) -> Option<ItemKind> {
    // `Hyp` and `HN` share the leading `H`, so try every prefix.
    ItemKind::ALL.into_iter().find(|k| k.number(id).is_some())
}

/// Free-function form of [`AnalysisStore::concatenate_outputs`].
pub fn concatenate_outputs(store: &AnalysisStore) -> Outputs {
    store.concatenate_outputs()
}

fn dedup<T: PartialEq>(items: Vec<T>) -> Vec<T> {
    let mut out: Vec<T> = Vec::with_capacity(items.len());
    for item in items {
        if !out.contains(&item) {
            out.push(item);
        }
    }
    out
}

fn dedup_refs(items: &[String]) -> Vec<&str> {
    let mut seen = BTreeSet::new();
    items.iter().map(String::as_str).filter(|s| seen.insert(*s)).collect()
}

fn unique_by_id<T>(items: &[T], id: impl Fn(&T) -> &String) -> Vec<&T> {
    let mut seen = BTreeSet::new();
    items.iter().filter(|i| seen.insert(id(i).clone())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry::Attribute;

    fn row(table: &str, line: u32, element: &str, attribute: Attribute, word: &str) -> DeviationRow {
        DeviationRow {
            table_id: table.into(),
            line,
            attribute_ref: AttributeRef::new(element, attribute),
            guide_word: word.into(),
            deviation_hint: String::new(),
            deviation: String::new(),
            use_case_effect: String::new(),
            real_world_effect: String::new(),
            severity: None,
            possible_causes: String::new(),
            recommendations: vec![],
            remarks: String::new(),
            hazards: vec![],
            status: RowStatus::Skeleton,
            prior_status: None,
        }
    }

    fn with_hazards(ids: &[u32]) -> AnalysisStore {
        let mut s = AnalysisStore::new("t");
        for n in ids {
            s.hazards.push(Hazard { id: format!("HN{n}"), text: "h".into(), note: None, pha_occurrences: None });
        }
        s
    }

    #[test]
    fn allocate_ids() {
        assert_eq!(with_hazards(&[1, 2, 3, 4, 5, 6]).allocate_id(ItemKind::Hazard), "HN7");
        assert_eq!(AnalysisStore::default().allocate_id(ItemKind::Hazard), "HN1");
        let mut s = with_hazards(&[1, 3]);
        s.tombstones.hazards.insert(2);
        assert_eq!(s.allocate_id(ItemKind::Hazard), "HN4");
        assert_eq!(s.allocate_id(ItemKind::Recommendation), "Rec1");
    }

    #[test]
    fn deleted_ids_are_not_reused() {
        let mut s = with_hazards(&[1, 2]);
        s.delete_item("HN2").unwrap();
        assert_eq!(s.add_hazard(NewHazard { text: "x".into(), note: None }).unwrap(), "HN3");
        assert!(matches!(s.delete_item("HN9"), Err(StoreError::UnknownItem(_))));
    }

    #[test]
    fn filling_a_row_promotes_status() {
        let mut s = with_hazards(&[6]);
        s.rows.push(row("UC02", 1, "UC02.C1", Attribute::Precondition, "No"));
        let r = s
            .set_row_fields(
                "UC02",
                1,
                RowUpdate {
                    deviation: Some("The patient tries to stand up while the robot is not properly positioned".into()),
                    real_world_effect: Some("Fall of the patient".into()),
                    severity: Some("Catastrophic".into()),
                    hazards: Some(vec!["HN6".into()]),
                    ..RowUpdate::default()
                },
            )
            .unwrap();
        assert_eq!(r.status, RowStatus::Interpreted);
        assert_eq!(r.severity.as_deref(), Some("Catastrophic"));

        let r = s.set_row_fields("UC02", 1, RowUpdate { deviation: Some(String::new()), ..Default::default() }).unwrap();
        assert_eq!(r.status, RowStatus::Skeleton);
    }

    #[test]
    fn rejected_edits_leave_the_row_alone() {
        let mut s = with_hazards(&[1]);
        s.rows.push(row("UC02", 1, "UC02.C1", Attribute::Precondition, "No"));
        let before = s.clone();
        let err = s
            .set_row_fields("UC02", 1, RowUpdate { deviation: Some("d".into()), severity: Some("Purple".into()), ..Default::default() })
            .unwrap_err();
        assert_eq!(err.code(), "SEVERITY_NOT_IN_SCALE");
        let err = s
            .set_row_fields(
                "UC02",
                1,
                RowUpdate { hazards: Some(vec!["HN99".into()]), new_hazards: vec![NewHazard { text: "x".into(), note: None }], ..Default::default() },
            )
            .unwrap_err();
        assert_eq!(err, StoreError::DanglingHazard("HN99".into()));
        assert!(matches!(s.set_row_fields("UC02", 7, RowUpdate::default()), Err(StoreError::UnknownRow(_))));
        assert_eq!(s, before);
    }

    #[test]
    fn new_hazard_in_same_edit() {
        let mut s = AnalysisStore::new("t");
        s.rows.push(row("UC02", 1, "UC02.C1", Attribute::Precondition, "No"));
        let r = s
            .set_row_fields(
                "UC02",
                1,
                RowUpdate { new_hazards: vec![NewHazard { text: "Fall of the patient".into(), note: None }], ..Default::default() },
            )
            .unwrap();
        assert_eq!(r.hazards, vec!["HN1"]);
        assert_eq!(s.hazards.len(), 1);
    }

    #[test]
    fn linking_a_recommendation_records_the_source() {
        let mut s = with_hazards(&[6]);
        s.rows.push(row("UC02", 15, "UC02.C3", Attribute::Precondition, "No"));
        let rec = s.add_recommendation(NewRecommendation { text: "Check robot position".into(), ..Default::default() }).unwrap();
        s.set_row_fields("UC02", 15, RowUpdate { hazards: Some(vec!["HN6".into()]), recommendations: Some(vec![rec.clone()]), ..Default::default() })
            .unwrap();
        let rec = s.recommendation(&rec).unwrap();
        assert_eq!(rec.sources, vec![RowAnchor::new("UC02", 15)]);
        assert_eq!(rec.covers, vec!["HN6"]);
        assert!(matches!(s.delete_item("HN6"), Err(StoreError::ItemInUse { .. })));
    }

    #[test]
    fn outputs_count_occurrences_per_diagram() {
        let mut s = with_hazards(&[2, 6]);
        for (t, l) in [("UC01", 1), ("UC01", 2), ("UC02", 1), ("SD01", 1), ("SD01", 2)] {
            let mut r = row(t, l, "x", Attribute::Precondition, "No");
            r.hazards = vec!["HN6".into()];
            s.rows.push(r);
        }
        let out = s.concatenate_outputs();
        assert_eq!(out.hazards.len(), 2);
        assert_eq!(out.hazards[0].hazard.id, "HN2");
        assert_eq!(out.hazards[1].occurrences, Occurrences { use_case: 3, sequence: 2, state_machine: 0 });
        assert_eq!(out.hazards[1].rows[0].to_string(), "SD01.1");

        assert_eq!(AnalysisStore::default().concatenate_outputs(), Outputs::default());
    }

    #[test]
    fn save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("project.hza");
        let mut s = with_hazards(&[1]);
        s.rows.push(row("SM01", 1, "SM01.T1", Attribute::Event, "No"));
        s.save(&path).unwrap();
        assert_eq!(AnalysisStore::load(&path).unwrap(), s);

        let mut future = s.clone();
        future.format_version = FORMAT_VERSION + 1;
        fs::write(&path, future.to_json()).unwrap();
        assert!(matches!(AnalysisStore::load(&path), Err(StoreFileError::Version { .. })));
    }

    #[test]
    fn item_kinds() {
        assert_eq!(item_kind("HN3"), Some(ItemKind::Hazard));
        assert_eq!(item_kind("Hyp3"), Some(ItemKind::Hypothesis));
        assert_eq!(item_kind("Rec"), None);
    }
}
