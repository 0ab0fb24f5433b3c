//! Cross-checks between the model and the analysis store.

use std::collections::{BTreeMap, BTreeSet};

use crate::diagnostic::{codes, sort_diagnostics, Diagnostic};
use crate::engine::AttributeRef;
use crate::model::{ElementRef, ProjectModel};
use crate::registry::{Attribute, ElementKind};
use crate::store::{AnalysisStore, RowStatus};

/// Reports every broken reference exactly once, plus softer completeness
/// warnings. Orphaned rows are expected to point at missing elements and
/// are not reported as stale.
pub fn check_consistency(model: &ProjectModel, store: &AnalysisStore) -> Vec<Diagnostic> {
    let mut out = Vec::new();

    let hazard_ids: BTreeSet<&str> = store.hazards.iter().map(|h| h.id.as_str()).collect();
    let rec_ids: BTreeSet<&str> = store.recommendations.iter().map(|r| r.id.as_str()).collect();
    let anchors: BTreeSet<(&str, u32)> = store.rows.iter().map(|r| (r.table_id.as_str(), r.line)).collect();

    for (kind, ids) in [
        ("hazard", store.hazards.iter().map(|h| h.id.as_str()).collect::<Vec<_>>()),
        ("recommendation", store.recommendations.iter().map(|r| r.id.as_str()).collect()),
        ("hypothesis", store.hypotheses.iter().map(|h| h.id.as_str()).collect()),
    ] {
        for (id, n) in counts(ids) {
            if n > 1 {
                out.push(Diagnostic::error(codes::DUPLICATE_ITEM, id.to_string(), format!("{kind} id {id} is used {n} times")));
            }
        }
    }

    let mut seen_lines: BTreeMap<(&str, u32), usize> = BTreeMap::new();
    for row in &store.rows {
        *seen_lines.entry((row.table_id.as_str(), row.line)).or_default() += 1;
    }
    for ((table, line), n) in seen_lines {
        if n > 1 {
            out.push(Diagnostic::error(codes::DUPLICATE_ROW, format!("{table}.{line}"), format!("line {line} of {table} appears {n} times")));
        }
    }

    for row in &store.rows {
        let anchor = row.anchor().to_string();
        for h in &row.hazards {
            if !hazard_ids.contains(h.as_str()) {
                out.push(Diagnostic::error(codes::DANGLING_HAZARD, anchor.clone(), format!("row names unknown hazard {h}")));
            }
        }
        for r in &row.recommendations {
            if !rec_ids.contains(r.as_str()) {
                out.push(Diagnostic::error(
                    codes::DANGLING_RECOMMENDATION,
                    anchor.clone(),
                    format!("row names unknown recommendation {r}"),
                ));
            }
        }
        if let Some(sev) = &row.severity {
            if !store.severity_scale.iter().any(|s| s == sev) {
                out.push(Diagnostic::error(
                    codes::SEVERITY_NOT_IN_SCALE,
                    anchor.clone(),
                    format!("severity `{sev}` is not in the scale"),
                ));
            }
        }
        let status = if row.status == RowStatus::Orphaned { row.prior_status } else { Some(row.status) };
        if status == Some(RowStatus::Interpreted) && row.deviation.trim().is_empty() {
            out.push(Diagnostic::error(codes::INTERPRETED_WITHOUT_DEVIATION, anchor.clone(), "row is interpreted but has no deviation"));
        }
        if row.status != RowStatus::Orphaned && !attribute_exists(model, &row.table_id, &row.attribute_ref) {
            out.push(Diagnostic::error(
                codes::STALE_ATTRIBUTE_REF,
                anchor.clone(),
                format!("{} does not exist in the model; regenerate the tables", row.attribute_ref),
            ));
        }
        if row.status == RowStatus::Interpreted && !row.hazards.is_empty() && row.real_world_effect.trim().is_empty() {
            out.push(Diagnostic::warning(codes::MISSING_REAL_WORLD_EFFECT, anchor.clone(), "row names a hazard but has no real world effect"));
        }
    }

    let mut referenced: BTreeSet<&str> = BTreeSet::new();
    for row in &store.rows {
        referenced.extend(row.hazards.iter().map(String::as_str));
    }
    for rec in &store.recommendations {
        for h in &rec.covers {
            referenced.insert(h);
            if !hazard_ids.contains(h.as_str()) {
                out.push(Diagnostic::error(codes::DANGLING_HAZARD, rec.id.clone(), format!("covers unknown hazard {h}")));
            }
        }
        for a in &rec.sources {
            if !anchors.contains(&(a.table.as_str(), a.line)) {
                out.push(Diagnostic::error(codes::DANGLING_ROW, rec.id.clone(), format!("cites unknown row {a}")));
            }
        }
        if rec.covers.is_empty() {
            out.push(Diagnostic::warning(codes::REC_WITHOUT_COVERS, rec.id.clone(), "recommendation covers no hazard"));
        }
    }
    for hyp in &store.hypotheses {
        for a in &hyp.sources {
            if !anchors.contains(&(a.table.as_str(), a.line)) {
                out.push(Diagnostic::error(codes::DANGLING_ROW, hyp.id.clone(), format!("cites unknown row {a}")));
            }
        }
    }
    for h in &store.hazards {
        if !referenced.contains(h.id.as_str()) {
            out.push(Diagnostic::warning(codes::ORPHAN_HAZARD, h.id.clone(), "hazard is not referenced by any row"));
        }
    }

    if let Some(stored) = &store.model_fingerprint {
        if *stored != model.fingerprint() {
            out.push(Diagnostic::error(
                codes::MODEL_FINGERPRINT_MISMATCH,
                None,
                "the model changed since the tables were generated; regenerate them",
            ));
        }
    }

    sort_diagnostics(&mut out);
    out
}

/// True if the model still has the element and it carries that attribute
/// inside the given table.
fn attribute_exists(model: &ProjectModel, table: &str, attr: &AttributeRef) -> bool {
    if attr.element.split_once('.').map(|(head, _)| head) != Some(table) {
        return false;
    }
    if attr.kind.attribute.element_kind() != attr.kind.element_kind {
        return false;
    }
    match model.lookup(&attr.element) {
        Some(ElementRef::Condition { condition, .. }) => attr.kind.attribute == Attribute::of_condition(condition.kind),
        Some(ElementRef::Message { .. }) => attr.kind.element_kind == ElementKind::Message,
        Some(ElementRef::Transition { .. }) => attr.kind.element_kind == ElementKind::Transition,
        _ => false,
    }
}

fn counts(ids: Vec<&str>) -> BTreeMap<&str, usize> {
    let mut m = BTreeMap::new();
    for id in ids {
        *m.entry(id).or_default() += 1;
    }
    m
}
