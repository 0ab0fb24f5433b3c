//! Deviation skeleton generation and merging with existing analysis work.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::ids::natural_cmp;
use crate::model::{ElementRef, ProjectModel};
use crate::registry::{applicable_entries, Attribute, AttributeKind, ElementKind, GuideWordRegistry, TriggeredNote};
use crate::store::{AnalysisStore, DeviationRow, RowStatus};

/// Points at one attribute of one model element, e.g. `SD01.M2` /
/// `message_argument`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AttributeRef {
    pub element: String,
    #[serde(flatten)]
    pub kind: AttributeKind,
}

impl AttributeRef {
    pub fn new(element: impl Into<String>, attribute: Attribute) -> Self {
        Self { element: element.into(), kind: attribute.into() }
    }

    pub fn attribute(&self) -> Attribute {
        self.kind.attribute
    }
}

impl std::fmt::Display for AttributeRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {}", self.element, self.kind.attribute)
    }
}

/// A generated, not yet analysed table line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonRow {
    pub table_id: String,
    pub line: u32,
    pub attribute_ref: AttributeRef,
    pub guide_word: String,
    pub deviation_hint: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub triggered_note: Option<TriggeredNote>,
}

impl SkeletonRow {
    pub fn into_row(self) -> DeviationRow {
        DeviationRow {
            table_id: self.table_id,
            line: self.line,
            attribute_ref: self.attribute_ref,
            guide_word: self.guide_word,
            deviation_hint: self.deviation_hint,
            deviation: String::new(),
            use_case_effect: String::new(),
            real_world_effect: String::new(),
            severity: None,
            possible_causes: String::new(),
            recommendations: Vec::new(),
            remarks: String::new(),
            hazards: Vec::new(),
            status: RowStatus::Skeleton,
            prior_status: None,
        }
    }
}

/// One analysable attribute of a model element.
#[derive(Debug, Clone)]
pub struct AttributeInstance<'a> {
    pub table_id: &'a str,
    pub element: ElementRef<'a>,
    pub attribute_ref: AttributeRef,
    /// Element text substituted into guide-word interpretations.
    pub subject: String,
}

/// All attribute instances in model order: use cases, then sequence
/// diagrams, then state machines, each element's attributes in their fixed
/// order.
pub fn attribute_instances(model: &ProjectModel) -> Vec<AttributeInstance<'_>> {
    let mut out = Vec::new();
    for use_case in &model.use_cases {
        for condition in &use_case.conditions {
            out.push(AttributeInstance {
                table_id: &use_case.id,
                element: ElementRef::Condition { use_case, condition },
                attribute_ref: AttributeRef::new(condition.id.clone(), Attribute::of_condition(condition.kind)),
                subject: condition.text.clone(),
            });
        }
    }
    for diagram in &model.sequence_diagrams {
        for message in &diagram.messages {
            let id = diagram.message_id(message);
            let signature = format!("{}:{}", message.seq, message.signature());
            for &attribute in ElementKind::Message.attributes() {
                let subject = match attribute {
                    Attribute::InteractionConstraint => message.guard.clone().unwrap_or_default(),
                    Attribute::SendReceiveTiming => match &message.timing {
                        Some(t) => format!("{signature} {{{t}}}"),
                        None => signature.clone(),
                    },
                    Attribute::Lifelines => format!("{signature} ({} -> {})", message.sender, message.receiver),
                    _ => signature.clone(),
                };
                out.push(AttributeInstance {
                    table_id: &diagram.id,
                    element: ElementRef::Message { diagram, message },
                    attribute_ref: AttributeRef::new(id.clone(), attribute),
                    subject,
                });
            }
        }
    }
    for machine in &model.state_machines {
        for transition in &machine.transitions {
            let route = format!("{} -> {}", transition.source, transition.target);
            for &attribute in ElementKind::Transition.attributes() {
                let subject = match attribute {
                    Attribute::Event => {
                        let e = transition.event.as_ref().map(|e| e.to_string()).unwrap_or_else(|| "(no event)".into());
                        format!("{e} ({route})")
                    }
                    Attribute::Guard => transition.guard.clone().unwrap_or_default(),
                    _ => {
                        let a = if transition.actions.is_empty() { "(no action)".into() } else { transition.actions_text() };
                        format!("{a} ({route})")
                    }
                };
                out.push(AttributeInstance {
                    table_id: &machine.id,
                    element: ElementRef::Transition { machine, transition },
                    attribute_ref: AttributeRef::new(transition.id.clone(), attribute),
                    subject,
                });
            }
        }
    }
    out
}

/// Cross product of attribute instances with their applicable guide words.
/// Lines are numbered from 1 within each table in generation order.
pub fn generate_skeleton(model: &ProjectModel, registry: &GuideWordRegistry) -> Vec<SkeletonRow> {
    let mut lines: HashMap<&str, u32> = HashMap::new();
    let mut rows = Vec::new();
    for inst in attribute_instances(model) {
        let entries = applicable_entries(registry, &inst.element, inst.attribute_ref.kind)
            .expect("attribute instances always match their element kind");
        for entry in entries {
            let line = lines.entry(inst.table_id).or_insert(0);
            *line += 1;
            rows.push(SkeletonRow {
                table_id: inst.table_id.to_string(),
                line: *line,
                attribute_ref: inst.attribute_ref.clone(),
                guide_word: entry.guide_word.clone(),
                deviation_hint: entry.instantiate(&inst.subject),
                triggered_note: entry.triggered_note,
            });
        }
    }
    rows
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct TableMerge {
    pub kept: usize,
    pub added: usize,
    pub orphaned: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct MergeReport {
    /// Existing rows whose key is still generated.
    pub kept: usize,
    pub added: usize,
    /// Rows orphaned by this merge.
    pub orphaned: usize,
    /// Orphaned rows whose key came back; included in `kept`.
    pub revived: usize,
    /// Rows that were orphaned before and still are.
    pub previously_orphaned: usize,
    pub tables: BTreeMap<String, TableMerge>,
}

impl MergeReport {
    /// Table entries in natural id order.
    pub fn table_lines(&self) -> Vec<(&str, TableMerge)> {
        let mut v: Vec<(&str, TableMerge)> = self.tables.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        v.sort_by(|a, b| natural_cmp(a.0, b.0));
        v
    }
}

type Key<'a> = (&'a str, &'a AttributeRef, &'a str);

/// Merges freshly generated skeleton rows into `existing`.
///
/// Rows are matched on (table, attribute, guide word). Matched rows keep
/// their line number and analyst fields and only get a fresh hint. New keys
/// are appended after the highest line of their table. Rows whose key is no
/// longer generated are marked orphaned, never removed.
pub fn merge_regenerated(existing: &AnalysisStore, fresh: &[SkeletonRow]) -> (AnalysisStore, MergeReport) {
    let mut report = MergeReport::default();
    let fresh_by_key: HashMap<Key<'_>, &SkeletonRow> =
        fresh.iter().map(|r| ((r.table_id.as_str(), &r.attribute_ref, r.guide_word.as_str()), r)).collect();

    let mut store = existing.clone();
    for row in &mut store.rows {
        let key = (row.table_id.as_str(), &row.attribute_ref, row.guide_word.as_str());
        let table = report.tables.entry(row.table_id.clone()).or_default();
        match fresh_by_key.get(&key) {
            Some(src) => {
                row.deviation_hint = src.deviation_hint.clone();
                if row.status == RowStatus::Orphaned {
                    row.status = row.prior_status.take().unwrap_or(if row.deviation.trim().is_empty() {
                        RowStatus::Skeleton
                    } else {
                        RowStatus::Interpreted
                    });
                    report.revived += 1;
                }
                table.kept += 1;
                report.kept += 1;
            }
            None if row.status == RowStatus::Orphaned => report.previously_orphaned += 1,
            None => {
                row.prior_status = Some(row.status);
                row.status = RowStatus::Orphaned;
                table.orphaned += 1;
                report.orphaned += 1;
            }
        }
    }

    let present: HashSet<Key<'_>> = existing
        .rows
        .iter()
        .map(|r| (r.table_id.as_str(), &r.attribute_ref, r.guide_word.as_str()))
        .collect();
    let mut next_line: HashMap<String, u32> = HashMap::new();
    for src in fresh {
        if present.contains(&(src.table_id.as_str(), &src.attribute_ref, src.guide_word.as_str())) {
            continue;
        }
        let line = next_line.entry(src.table_id.clone()).or_insert_with(|| existing.max_line(&src.table_id));
        *line += 1;
        let mut row = src.clone().into_row();
        row.line = *line;
        store.rows.push(row);
        report.tables.entry(src.table_id.clone()).or_default().added += 1;
        report.added += 1;
    }
    store.sort_rows();
    (store, report)
}

/// Generates from `model` and merges into `existing`, recording the model
/// fingerprint on the result.
pub fn regenerate(
    existing: &AnalysisStore,
    model: &ProjectModel,
    registry: &GuideWordRegistry,
) -> (AnalysisStore, MergeReport) {
    let fresh = generate_skeleton(model, registry);
    let (mut store, report) = merge_regenerated(existing, &fresh);
    store.model_fingerprint = Some(model.fingerprint());
    (store, report)
}
