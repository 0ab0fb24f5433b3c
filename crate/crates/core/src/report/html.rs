use std::collections::BTreeSet;
use std::fmt::Write;

use crate::consistency::check_consistency;
use crate::diagnostic::{has_errors, sort_diagnostics, Diagnostic};
use crate::dsl::serialize_model;
use crate::ids::{natural_cmp, DiagramType, RowAnchor};
use crate::metrics::{GuideWordUsage, ProjectStats};
use crate::model::{validate_model, ProjectModel};
use crate::store::{AnalysisStore, DeviationRow, RowStatus};

#[derive(Debug, Clone, Default)]
pub struct RenderOptions {
    /// Printed in the header when set. Leave unset for reproducible output.
    pub timestamp: Option<String>,
    /// Render even when error-level diagnostics exist, with a banner.
    pub force: bool,
    pub guideword_usage: Option<GuideWordUsage>,
}

#[derive(Debug, Clone, thiserror::Error)]
#[error("the project has {} blocking diagnostic(s); fix them or force the report", blocking.len())]
pub struct ReportError {
    pub blocking: Vec<Diagnostic>,
}

const STYLE: &str = "body{font-family:system-ui,sans-serif;margin:2rem;color:#1d1d1f}
h1{margin-bottom:0}
nav a{margin-right:1rem}
table{border-collapse:collapse;margin:0.5rem 0 1.5rem;font-size:0.9rem}
th,td{border:1px solid #c8c8cc;padding:0.25rem 0.5rem;vertical-align:top;text-align:left}
th{background:#f0f0f3}
tr:target,li:target{background:#fff6c8}
.hint{color:#86868b;font-style:italic}
.orphaned{color:#86868b;text-decoration:line-through}
.dangling{color:#c0392b}
.banner{border:2px solid #c0392b;background:#fdecea;padding:0.5rem 1rem}
pre{background:#f6f6f8;padding:0.75rem;overflow-x:auto}
";

/// Known anchor targets, collected before rendering so links can be
/// emitted only when their target will exist.
struct Anchors {
    ids: BTreeSet<String>,
}

impl Anchors {
    fn link(&self, target: &str, text: &str) -> String {
        if self.ids.contains(target) {
            format!("<a href=\"#{}\">{}</a>", esc(target), esc(text))
        } else {
            format!("<span class=\"dangling\">{}</span>", esc(text))
        }
    }

    fn links(&self, ids: &[String]) -> String {
        ids.iter().map(|id| self.link(id, id)).collect::<Vec<_>>().join(", ")
    }

    fn row_links(&self, anchors: &[RowAnchor]) -> String {
        anchors.iter().map(|a| self.link(&a.to_string(), &a.to_string())).collect::<Vec<_>>().join(", ")
    }
}

/// Hands out each `id` attribute once even if the store holds duplicates.
struct Emitted(BTreeSet<String>);

impl Emitted {
    fn id_attr(&mut self, id: &str) -> String {
        if self.0.insert(id.to_string()) {
            format!(" id=\"{}\"", esc(id))
        } else {
            String::new()
        }
    }
}

fn model_anchor(element: &str) -> String {
    format!("model-{element}")
}

/// Renders the whole project as one self-contained HTML page. Output is a
/// pure function of the inputs; with no timestamp two renders are
/// byte-identical.
pub fn render_report(
    model: &ProjectModel,
    store: &AnalysisStore,
    stats: &ProjectStats,
    options: &RenderOptions,
) -> Result<String, ReportError> {
    let mut diags = validate_model(model);
    diags.extend(check_consistency(model, store));
    sort_diagnostics(&mut diags);
    if has_errors(&diags) && !options.force {
        return Err(ReportError { blocking: diags.into_iter().filter(Diagnostic::is_error).collect() });
    }

    let anchors = collect_anchors(model, store);
    let mut emitted = Emitted(BTreeSet::new());
    let mut h = String::new();
    let title = if store.project.is_empty() { model.name.as_str() } else { store.project.as_str() };
    let title = if title.is_empty() { "HAZOP-UML analysis" } else { title };

    let _ = write!(
        h,
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>{}</title>\n<style>\n{STYLE}</style>\n</head>\n<body>\n",
        esc(title)
    );
    let _ = writeln!(h, "<h1>{}</h1>", esc(title));
    if let Some(ts) = &options.timestamp {
        let _ = writeln!(h, "<p>Generated {}</p>", esc(ts));
    }
    if let Some(fp) = &store.model_fingerprint {
        let _ = writeln!(h, "<p>Model fingerprint <code>{}</code></p>", esc(fp));
    }
    h.push_str(
        "<nav><a href=\"#tables\">HAZOP tables</a><a href=\"#hazards\">Hazards</a><a href=\"#recommendations\">Recommendations</a><a href=\"#hypotheses\">Hypotheses</a><a href=\"#statistics\">Statistics</a><a href=\"#model\">Model</a></nav>\n",
    );

    if has_errors(&diags) {
        h.push_str("<div class=\"banner\"><strong>Rendered despite errors:</strong>\n<ul>\n");
        for d in diags.iter().filter(|d| d.is_error()) {
            let _ = writeln!(h, "<li>{}</li>", esc(&d.to_string()));
        }
        h.push_str("</ul></div>\n");
    }

    render_tables(&mut h, model, store, &anchors, &mut emitted);
    render_outputs(&mut h, store, &anchors, &mut emitted);
    render_stats(&mut h, stats, options.guideword_usage.as_ref());
    render_model(&mut h, model, &mut emitted);

    h.push_str("</body>\n</html>\n");
    Ok(h)
}

fn collect_anchors(model: &ProjectModel, store: &AnalysisStore) -> Anchors {
    let mut ids = BTreeSet::new();
    for r in &store.rows {
        ids.insert(r.anchor().to_string());
    }
    ids.extend(store.hazards.iter().map(|x| x.id.clone()));
    ids.extend(store.recommendations.iter().map(|x| x.id.clone()));
    ids.extend(store.hypotheses.iter().map(|x| x.id.clone()));
    for uc in &model.use_cases {
        ids.insert(model_anchor(&uc.id));
        ids.extend(uc.conditions.iter().map(|c| model_anchor(&c.id)));
    }
    for sd in &model.sequence_diagrams {
        ids.insert(model_anchor(&sd.id));
        ids.extend(sd.messages.iter().map(|m| model_anchor(&sd.message_id(m))));
    }
    for sm in &model.state_machines {
        ids.insert(model_anchor(&sm.id));
        ids.extend(sm.transitions.iter().map(|t| model_anchor(&t.id)));
    }
    Anchors { ids }
}

/// Tables in model order, then any tables only the store still knows.
fn table_order<'a>(model: &'a ProjectModel, store: &'a AnalysisStore) -> Vec<(&'a str, String)> {
    let mut out: Vec<(&str, String)> = Vec::new();
    for uc in &model.use_cases {
        out.push((&uc.id, uc.name.clone()));
    }
    for sd in &model.sequence_diagrams {
        out.push((&sd.id, sd.name.clone()));
    }
    for sm in &model.state_machines {
        out.push((&sm.id, format!("State machine of {}", sm.object)));
    }
    let known: BTreeSet<&str> = out.iter().map(|(id, _)| *id).collect();
    let mut extra: Vec<&str> = store.table_ids().into_iter().filter(|t| !known.contains(t)).collect();
    extra.sort_by(|a, b| natural_cmp(a, b));
    out.extend(extra.into_iter().map(|t| (t, "no longer in the model".to_string())));
    out
}

fn render_tables(h: &mut String, model: &ProjectModel, store: &AnalysisStore, anchors: &Anchors, emitted: &mut Emitted) {
    h.push_str("<section id=\"tables\">\n<h2>HAZOP tables</h2>\n");
    for (table, caption) in table_order(model, store) {
        let mut rows: Vec<&DeviationRow> = store.rows_of(table).collect();
        if rows.is_empty() {
            continue;
        }
        rows.sort_by_key(|r| r.line);
        let _ = writeln!(
            h,
            "<h3{}>{}: {} ({})</h3>",
            emitted.id_attr(&format!("table-{table}")),
            anchors.link(&model_anchor(table), table),
            esc(&caption),
            rows.len()
        );
        h.push_str("<table>\n<tr><th>Line</th><th>Attribute</th><th>Guide word</th><th>Deviation</th><th>Use case effect</th><th>Real world effect</th><th>Severity</th><th>Possible causes</th><th>Recommendations</th><th>Remarks</th><th>Hazards</th><th>Status</th></tr>\n");
        for r in rows {
            let id = r.anchor().to_string();
            let class = if r.status == RowStatus::Orphaned { " class=\"orphaned\"" } else { "" };
            let deviation = if r.deviation.is_empty() {
                format!("<span class=\"hint\">{}</span>", esc(&r.deviation_hint))
            } else {
                esc(&r.deviation)
            };
            let _ = writeln!(
                h,
                "<tr{}{class}><td>{}</td><td>{} {}</td><td>{}</td><td>{deviation}</td><td>{}</td><td>{}</td><td>{}</td><td>{}</td><td>{}</td><td>{}</td><td>{}</td><td>{}</td></tr>",
                emitted.id_attr(&id),
                esc(&id),
                anchors.link(&model_anchor(&r.attribute_ref.element), &r.attribute_ref.element),
                esc(r.attribute_ref.attribute().as_str()),
                esc(&r.guide_word),
                esc(&r.use_case_effect),
                esc(&r.real_world_effect),
                esc(r.severity.as_deref().unwrap_or("")),
                esc(&r.possible_causes),
                anchors.links(&r.recommendations),
                esc(&r.remarks),
                anchors.links(&r.hazards),
                r.status.as_str(),
            );
        }
        h.push_str("</table>\n");
    }
    h.push_str("</section>\n");
}

fn render_outputs(h: &mut String, store: &AnalysisStore, anchors: &Anchors, emitted: &mut Emitted) {
    let out = store.concatenate_outputs();

    h.push_str("<section id=\"hazards\">\n<h2>Hazards</h2>\n");
    if out.hazards.is_empty() {
        h.push_str("<p>None.</p>\n");
    } else {
        h.push_str("<table>\n<tr><th>Id</th><th>Hazard</th><th>UC</th><th>SD</th><th>SM</th><th>PHA</th><th>Rows</th></tr>\n");
        for e in &out.hazards {
            let note = e.hazard.note.as_deref().map(|n| format!("<br><small>{}</small>", esc(n))).unwrap_or_default();
            let _ = writeln!(
                h,
                "<tr{}><td>{}</td><td>{}{note}</td><td>{}</td><td>{}</td><td>{}</td><td>{}</td><td>{}</td></tr>",
                emitted.id_attr(&e.hazard.id),
                esc(&e.hazard.id),
                esc(&e.hazard.text),
                e.occurrences.get(DiagramType::UseCase),
                e.occurrences.get(DiagramType::Sequence),
                e.occurrences.get(DiagramType::StateMachine),
                e.hazard.pha_occurrences.map(|n| n.to_string()).unwrap_or_default(),
                anchors.row_links(&e.rows),
            );
        }
        h.push_str("</table>\n");
    }
    h.push_str("</section>\n");

    h.push_str("<section id=\"recommendations\">\n<h2>Recommendations</h2>\n");
    if out.recommendations.is_empty() {
        h.push_str("<p>None.</p>\n");
    } else {
        h.push_str("<table>\n<tr><th>Id</th><th>Recommendation</th><th>Covers</th><th>Sources</th></tr>\n");
        for r in &out.recommendations {
            let _ = writeln!(
                h,
                "<tr{}><td>{}</td><td>{}</td><td>{}</td><td>{}</td></tr>",
                emitted.id_attr(&r.id),
                esc(&r.id),
                esc(&r.text),
                anchors.links(&r.covers),
                anchors.row_links(&r.sources),
            );
        }
        h.push_str("</table>\n");
    }
    h.push_str("</section>\n");

    h.push_str("<section id=\"hypotheses\">\n<h2>Hypotheses</h2>\n");
    if out.hypotheses.is_empty() {
        h.push_str("<p>None.</p>\n");
    } else {
        h.push_str("<table>\n<tr><th>Id</th><th>Hypothesis</th><th>Status</th><th>Sources</th></tr>\n");
        for x in &out.hypotheses {
            let _ = writeln!(
                h,
                "<tr{}><td>{}</td><td>{}</td><td>{}</td><td>{}</td></tr>",
                emitted.id_attr(&x.id),
                esc(&x.id),
                esc(&x.text),
                x.status.as_str(),
                anchors.row_links(&x.sources),
            );
        }
        h.push_str("</table>\n");
    }
    h.push_str("</section>\n");
}

fn render_stats(h: &mut String, stats: &ProjectStats, usage: Option<&GuideWordUsage>) {
    h.push_str("<section id=\"statistics\">\n<h2>Statistics</h2>\n<table>\n");
    h.push_str("<tr><th></th><th>Use cases</th><th>Sequence diagrams</th><th>State machines</th></tr>\n");
    let line = |h: &mut String, label: &str, f: &dyn Fn(DiagramType) -> usize| {
        let cells: Vec<String> = DiagramType::ALL.iter().map(|t| format!("<td>{}</td>", f(*t))).collect();
        let _ = writeln!(h, "<tr><th>{label}</th>{}</tr>", cells.concat());
    };
    line(h, "Diagrams", &|t| stats.get(t).element_count);
    line(h, "Conditions / messages / transitions", &|t| stats.get(t).sub_element_count);
    line(h, "Attribute instances", &|t| stats.get(t).attribute_instance_count);
    line(h, "Analyzed deviations", &|t| stats.get(t).analyzed_deviations);
    line(h, "Interpreted deviations", &|t| stats.get(t).interpreted_deviations);
    line(h, "Interpreted with recommendation", &|t| stats.get(t).interpreted_with_recommendation);
    h.push_str("</table>\n");
    let _ = writeln!(h, "<p>States: {}. Hazards: {}.</p>", stats.state_count, stats.hazard_count);

    if let Some(usage) = usage {
        h.push_str("<h3>Guide-word usage</h3>\n<table>\n<tr><th>Element</th><th>Attribute</th><th>Guide word</th><th>Interpreted</th></tr>\n");
        for u in &usage.rows {
            let _ = writeln!(
                h,
                "<tr><td>{}</td><td>{}</td><td>{}</td><td>{}</td></tr>",
                u.attribute.element_kind.as_str(),
                u.attribute.attribute.as_str(),
                esc(&u.guide_word),
                u.count
            );
        }
        h.push_str("</table>\n");
        if usage.unregistered > 0 {
            let _ = writeln!(h, "<p>Interpreted rows with guide words outside the registry: {}.</p>", usage.unregistered);
        }
    }
    h.push_str("</section>\n");
}

fn render_model(h: &mut String, model: &ProjectModel, emitted: &mut Emitted) {
    h.push_str("<section id=\"model\">\n<h2>Model</h2>\n");
    for uc in &model.use_cases {
        let _ = writeln!(h, "<h3{}>{} {}</h3>", emitted.id_attr(&model_anchor(&uc.id)), esc(&uc.id), esc(&uc.name));
        if !uc.actors.is_empty() {
            let _ = writeln!(h, "<p>Actors: {}</p>", esc(&uc.actors.join(", ")));
        }
        if let Some(d) = &uc.description {
            let _ = writeln!(h, "<p>{}</p>", esc(d));
        }
        h.push_str("<table>\n<tr><th>Id</th><th>Kind</th><th>Condition</th></tr>\n");
        for c in &uc.conditions {
            let _ = writeln!(
                h,
                "<tr{}><td>{}</td><td>{}</td><td>{}</td></tr>",
                emitted.id_attr(&model_anchor(&c.id)),
                esc(&c.id),
                c.kind.keyword(),
                esc(&c.text)
            );
        }
        h.push_str("</table>\n");
    }
    for sd in &model.sequence_diagrams {
        let _ = writeln!(
            h,
            "<h3{}>{} {} (use case {})</h3>",
            emitted.id_attr(&model_anchor(&sd.id)),
            esc(&sd.id),
            esc(&sd.name),
            esc(&sd.use_case)
        );
        let lifelines: Vec<String> =
            sd.lifelines.iter().map(|l| if l.system { format!("{} (system)", l.name) } else { l.name.clone() }).collect();
        let _ = writeln!(h, "<p>Lifelines: {}</p>", esc(&lifelines.join(", ")));
        h.push_str("<table>\n<tr><th>Id</th><th>From</th><th>To</th><th>Message</th><th>Guard</th><th>Timing</th></tr>\n");
        for m in &sd.messages {
            let id = sd.message_id(m);
            let _ = writeln!(
                h,
                "<tr{}><td>{}</td><td>{}</td><td>{}</td><td>{}</td><td>{}</td><td>{}</td></tr>",
                emitted.id_attr(&model_anchor(&id)),
                esc(&id),
                esc(&m.sender),
                esc(&m.receiver),
                esc(&format!("{}:{}", m.seq, m.signature())),
                esc(m.guard.as_deref().unwrap_or("")),
                esc(m.timing.as_deref().unwrap_or("")),
            );
        }
        h.push_str("</table>\n");
    }
    for sm in &model.state_machines {
        let _ = writeln!(h, "<h3{}>{} state machine of {}</h3>", emitted.id_attr(&model_anchor(&sm.id)), esc(&sm.id), esc(&sm.object));
        let states: Vec<String> =
            sm.states.iter().map(|s| if s.initial { format!("{} (initial)", s.name) } else { s.name.clone() }).collect();
        let _ = writeln!(h, "<p>States: {}</p>", esc(&states.join(", ")));
        h.push_str("<table>\n<tr><th>Id</th><th>Source</th><th>Target</th><th>Label</th></tr>\n");
        for t in &sm.transitions {
            let _ = writeln!(
                h,
                "<tr{}><td>{}</td><td>{}</td><td>{}</td><td>{}</td></tr>",
                emitted.id_attr(&model_anchor(&t.id)),
                esc(&t.id),
                esc(&t.source),
                esc(&t.target),
                esc(&t.label()),
            );
        }
        h.push_str("</table>\n");
    }
    let _ = writeln!(h, "<details><summary>Model source</summary>\n<pre>{}</pre>\n</details>", esc(&serialize_model(model)));
    h.push_str("</section>\n");
}

fn esc(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}
