//! Random model generation, oracles and helpers shared by integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use hazop_core::engine::AttributeRef;
use hazop_core::ids::RowAnchor;
use hazop_core::model::{
    Argument, Condition, ConditionKind, Event, EventKind, Lifeline, Message, MessageKind, ProjectModel, SequenceDiagram,
    State, StateMachine, Transition, UseCase,
};
use hazop_core::registry::Attribute;
use hazop_core::store::{AnalysisStore, RowUpdate};
use rand::rngs::StdRng;
use rand::seq::{IndexedMutRandom, IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

const WORDS: &[&str] = &[
    "robot", "patient", "handle", "speed", "force", "arm", "grip", "alarm", "seat", "nurse", "motor", "brake", "Robot",
    "Patient", "x", "y2", "_tmp",
];

const TEXT_POOL: &[char] = &[
    'a', 'b', 'c', 'e', 'R', 'Z', '0', '7', ' ', ' ', '"', '\\', ']', '[', '}', '{', '#', ';', ':', ',', '/', '(',
    ')', '<', '>', '=', 'é', '≤', '→', '«', '»', '\n', '\t', '\'', '—', '💡',
];

pub fn ident(r: &mut StdRng) -> String {
    let w = WORDS.choose(r).unwrap();
    if r.random_bool(0.5) {
        format!("{w}{}", r.random_range(0..100))
    } else {
        w.to_string()
    }
}

/// Non-blank free text with awkward characters.
pub fn text(r: &mut StdRng) -> String {
    loop {
        let n = r.random_range(1..24);
        let s: String = (0..n).map(|_| *TEXT_POOL.choose(r).unwrap()).collect();
        if !s.trim().is_empty() {
            return s;
        }
    }
}

/// An identifier or, sometimes, a name that needs quoting.
pub fn name(r: &mut StdRng) -> String {
    if r.random_bool(0.2) {
        format!("{} {}", ident(r), text(r).replace(['\n', '\t'], " ").trim())
    } else {
        ident(r)
    }
}

fn unique_names(r: &mut StdRng, range: std::ops::RangeInclusive<usize>) -> Vec<String> {
    let n = r.random_range(range);
    let mut set = BTreeSet::new();
    let mut out = Vec::new();
    while out.len() < n {
        let candidate = name(r);
        if set.insert(candidate.clone()) {
            out.push(candidate);
        }
    }
    out
}

/// A random model that passes validation.
pub fn random_model(r: &mut StdRng) -> ProjectModel {
    let mut m = ProjectModel::new(if r.random_bool(0.8) { text(r) } else { String::new() });

    for u in 1..=r.random_range(1..=3u32) {
        let id = format!("UC{u:02}");
        let conditions = (1..=r.random_range(0..=5u32))
            .map(|c| Condition {
                id: format!("{id}.C{c}"),
                kind: *[ConditionKind::Precondition, ConditionKind::Postcondition, ConditionKind::Invariant].choose(r).unwrap(),
                text: text(r),
            })
            .collect();
        m.use_cases.push(UseCase {
            id,
            name: text(r),
            actors: unique_names(r, 0..=2),
            conditions,
            description: r.random_bool(0.3).then(|| text(r)),
            meta: if r.random_bool(0.3) { vec![(text(r), text(r))] } else { vec![] },
        });
    }

    for d in 1..=r.random_range(0..=3u32) {
        let names = unique_names(r, 2..=4);
        let system = r.random_range(0..names.len());
        let lifelines: Vec<Lifeline> =
            names.iter().enumerate().map(|(i, n)| Lifeline { name: n.clone(), system: i == system }).collect();
        let mut seq = 0;
        let messages = (0..r.random_range(0..=5))
            .map(|_| {
                seq += if seq == 0 { 1 } else { r.random_range(1..=2) };
                Message {
                    seq,
                    sender: names.choose(r).unwrap().clone(),
                    receiver: names.choose(r).unwrap().clone(),
                    name: name(r),
                    arguments: (0..r.random_range(0..=2))
                        .map(|_| Argument { name: name(r), unit: r.random_bool(0.4).then(|| name(r)) })
                        .collect(),
                    guard: r.random_bool(0.4).then(|| text(r)),
                    timing: r.random_bool(0.2).then(|| text(r)),
                    kind: if r.random_bool(0.3) {
                        Some(*[MessageKind::Indirect, MessageKind::Cognitive, MessageKind::Physical].choose(r).unwrap())
                    } else {
                        None
                    },
                }
            })
            .collect();
        let use_case = m.use_cases.choose(r).unwrap().id.clone();
        m.sequence_diagrams.push(SequenceDiagram { id: format!("SD{d:02}"), name: text(r), use_case, lifelines, messages });
    }

    for s in 1..=r.random_range(0..=2u32) {
        let id = format!("SM{s:02}");
        let names = unique_names(r, 1..=5);
        let states: Vec<State> = names.iter().enumerate().map(|(i, n)| State { name: n.clone(), initial: i == 0 }).collect();
        let transitions = (1..=r.random_range(0..=6u32))
            .map(|t| random_transition(r, &format!("{id}.T{t}"), t, &names))
            .collect();
        m.state_machines.push(StateMachine { id, object: name(r), states, transitions });
    }
    m
}

fn random_transition(r: &mut StdRng, id: &str, index: u32, states: &[String]) -> Transition {
    // The index in the event or guard keeps (source, event, guard) unique.
    let event = if r.random_bool(0.8) {
        Some(match r.random_range(0..5) {
            0 => Event::new(EventKind::Signal, format!("ev{index}")),
            1 => Event::new(EventKind::Signal, format!("ev {index} {}", text(r).replace(['\n', '\t'], " ").trim())),
            2 => Event::new(
                EventKind::Call,
                if r.random_bool(0.5) { format!("op{index}") } else { format!("op{index}({}, 2)", ident(r)) },
            ),
            3 => Event::new(EventKind::TemporalAfter, format!("{}{}", index, ["ms", "s", " min", "h"].choose(r).unwrap())),
            _ => Event::new(EventKind::Change, format!("level{index} < 10")),
        })
    } else {
        None
    };
    let guard = if event.is_none() { Some(format!("g{index} {}", text(r))) } else { r.random_bool(0.4).then(|| text(r)) };
    let actions = (0..r.random_range(0..=2))
        .map(|_| match r.random_range(0..3) {
            0 => ident(r),
            1 => format!("{}({})", ident(r), ident(r)),
            _ => text(r),
        })
        .collect();
    Transition {
        id: id.to_string(),
        source: states.choose(r).unwrap().clone(),
        target: states.choose(r).unwrap().clone(),
        event,
        guard,
        actions,
    }
}

/// A plausible edit of `m`: drops, adds or changes elements.
pub fn edit_model(r: &mut StdRng, m: &ProjectModel) -> ProjectModel {
    let mut m = m.clone();
    for _ in 0..r.random_range(1..=4) {
        match r.random_range(0..7) {
            0 => {
                if let Some(uc) = m.use_cases.choose_mut(r) {
                    if !uc.conditions.is_empty() {
                        let i = r.random_range(0..uc.conditions.len());
                        uc.conditions.remove(i);
                    }
                }
            }
            1 => {
                if let Some(uc) = m.use_cases.choose_mut(r) {
                    let next = uc.conditions.iter().filter_map(|c| c.id.rsplit_once(".C")?.1.parse::<u32>().ok()).max().unwrap_or(0) + 1;
                    let at = r.random_range(0..=uc.conditions.len());
                    uc.conditions.insert(at, Condition { id: format!("{}.C{next}", uc.id), kind: ConditionKind::Invariant, text: text(r) });
                }
            }
            2 => {
                if let Some(sd) = m.sequence_diagrams.choose_mut(r) {
                    if let Some(msg) = sd.messages.choose_mut(r) {
                        msg.guard = if msg.guard.is_some() { None } else { Some(text(r)) };
                    }
                }
            }
            3 => {
                if let Some(sd) = m.sequence_diagrams.choose_mut(r) {
                    if !sd.messages.is_empty() {
                        let i = r.random_range(0..sd.messages.len());
                        sd.messages.remove(i);
                    }
                }
            }
            4 => {
                if let Some(sd) = m.sequence_diagrams.choose_mut(r) {
                    let seq = sd.messages.last().map(|x| x.seq).unwrap_or(0) + 1;
                    let a = sd.lifelines[0].name.clone();
                    let b = sd.lifelines[1].name.clone();
                    sd.messages.push(Message {
                        seq,
                        sender: a,
                        receiver: b,
                        name: ident(r),
                        arguments: vec![],
                        guard: None,
                        timing: None,
                        kind: None,
                    });
                }
            }
            5 => {
                if let Some(sm) = m.state_machines.choose_mut(r) {
                    if !sm.transitions.is_empty() {
                        let i = r.random_range(0..sm.transitions.len());
                        sm.transitions.remove(i);
                    }
                }
            }
            _ => {
                if let Some(sm) = m.state_machines.choose_mut(r) {
                    let next = sm.transitions.iter().filter_map(|t| t.id.rsplit_once(".T")?.1.parse::<u32>().ok()).max().unwrap_or(0) + 1;
                    let names: Vec<String> = sm.states.iter().map(|s| s.name.clone()).collect();
                    let t = random_transition(r, &format!("{}.T{next}", sm.id), next + 100, &names);
                    sm.transitions.push(t);
                }
            }
        }
    }
    m
}

/// Fills a random subset of rows with random analyst content.
pub fn fill_rows(r: &mut StdRng, store: &mut AnalysisStore) {
    let anchors: Vec<RowAnchor> = store.rows.iter().map(|x| x.anchor()).collect();
    if anchors.is_empty() {
        return;
    }
    let hazard = store.add_hazard(hazop_core::store::NewHazard { text: text(r), note: None }).unwrap();
    let rec = store
        .add_recommendation(hazop_core::store::NewRecommendation { text: text(r), ..Default::default() })
        .unwrap();
    let scale = store.severity_scale.clone();
    let mut picks = anchors.clone();
    picks.shuffle(r);
    for a in picks.iter().take(r.random_range(1..=anchors.len().min(12))) {
        let update = RowUpdate {
            deviation: Some(text(r)),
            use_case_effect: r.random_bool(0.7).then(|| text(r)),
            real_world_effect: r.random_bool(0.7).then(|| text(r)),
            severity: r.random_bool(0.5).then(|| scale.choose(r).unwrap().clone()),
            possible_causes: r.random_bool(0.5).then(|| text(r)),
            remarks: r.random_bool(0.3).then(|| text(r)),
            hazards: r.random_bool(0.5).then(|| vec![hazard.clone()]),
            recommendations: r.random_bool(0.3).then(|| vec![rec.clone()]),
            ..RowUpdate::default()
        };
        store.set_row_fields(&a.table, a.line, update).unwrap();
    }
    if r.random_bool(0.3) {
        let a = anchors.choose(r).unwrap();
        store.duplicate_row(&a.table, a.line).unwrap();
    }
}

/// Brute-force row count computed from the raw registry JSON, without the
/// registry module's filtering code.
pub fn brute_force_count(model: &ProjectModel, registry_json: &str) -> usize {
    let v: serde_json::Value = serde_json::from_str(registry_json).unwrap();
    let entries = v["entries"].as_array().unwrap();
    let count = |attr: &str, guard: bool, timing: bool, lifelines: usize| {
        entries
            .iter()
            .filter(|e| e["attribute"] == attr)
            .filter(|e| match e["applicability"].as_str().unwrap_or("always") {
                "always" => true,
                "requires_guard" => guard,
                "requires_timing" => timing,
                "requires_multi_lifeline" => lifelines > 2,
                other => panic!("unknown applicability {other}"),
            })
            .count()
    };
    let mut total = 0;
    for uc in &model.use_cases {
        for c in &uc.conditions {
            let attr = match c.kind {
                ConditionKind::Precondition => "precondition",
                ConditionKind::Postcondition => "postcondition",
                ConditionKind::Invariant => "invariant",
            };
            total += count(attr, false, false, 0);
        }
    }
    for sd in &model.sequence_diagrams {
        for m in &sd.messages {
            for attr in ["general_ordering", "send_receive_timing", "lifelines", "interaction_constraint", "message_argument"] {
                total += count(attr, m.guard.is_some(), m.timing.is_some(), sd.lifelines.len());
            }
        }
    }
    for sm in &model.state_machines {
        for t in &sm.transitions {
            for attr in ["event", "guard", "action"] {
                total += count(attr, t.guard.is_some(), false, 0);
            }
        }
    }
    total
}

/// Minimal importer for the exported table CSV, used to check the export
/// round-trip.
pub fn import_table_csv(content: &str) -> Vec<ImportedRow> {
    let mut reader = csv::Reader::from_reader(content.as_bytes());
    reader
        .records()
        .map(|rec| {
            let rec = rec.unwrap();
            let list = |s: &str| if s.is_empty() { vec![] } else { s.split("; ").map(String::from).collect() };
            let (element, attribute) = rec[2].split_once(' ').unwrap();
            ImportedRow {
                table_id: rec[0].to_string(),
                line: rec[1].parse().unwrap(),
                attribute_ref: AttributeRef::new(element, Attribute::parse(attribute).unwrap()),
                guide_word: rec[3].to_string(),
                deviation: rec[4].to_string(),
                use_case_effect: rec[5].to_string(),
                real_world_effect: rec[6].to_string(),
                severity: (!rec[7].is_empty()).then(|| rec[7].to_string()),
                possible_causes: rec[8].to_string(),
                recommendations: list(&rec[9]),
                remarks: rec[10].to_string(),
                hazards: list(&rec[11]),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportedRow {
    pub table_id: String,
    pub line: u32,
    pub attribute_ref: AttributeRef,
    pub guide_word: String,
    pub deviation: String,
    pub use_case_effect: String,
    pub real_world_effect: String,
    pub severity: Option<String>,
    pub possible_causes: String,
    pub recommendations: Vec<String>,
    pub remarks: String,
    pub hazards: Vec<String>,
}

impl ImportedRow {
    pub fn of(row: &hazop_core::store::DeviationRow) -> Self {
        Self {
            table_id: row.table_id.clone(),
            line: row.line,
            attribute_ref: row.attribute_ref.clone(),
            guide_word: row.guide_word.clone(),
            deviation: row.deviation.clone(),
            use_case_effect: row.use_case_effect.clone(),
            real_world_effect: row.real_world_effect.clone(),
            severity: row.severity.clone(),
            possible_causes: row.possible_causes.clone(),
            recommendations: row.recommendations.clone(),
            remarks: row.remarks.clone(),
            hazards: row.hazards.clone(),
        }
    }
}

/// `href="#x"` targets that have no matching `id="x"`.
pub fn broken_links(html: &str) -> Vec<String> {
    let collect = |marker: &str| -> Vec<String> {
        html.match_indices(marker)
            .map(|(i, _)| {
                let rest = &html[i + marker.len()..];
                rest[..rest.find('"').unwrap()].to_string()
            })
            .collect()
    };
    let ids: BTreeSet<String> = collect(" id=\"").into_iter().collect();
    collect("href=\"#").into_iter().filter(|h| !ids.contains(h)).collect()
}

pub fn link_count(html: &str) -> usize {
    html.matches("href=\"#").count()
}
