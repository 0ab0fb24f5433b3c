//! Restricted-UML project model: use cases with their condition tables,
//! system sequence diagrams, and flat deterministic state machines.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diagnostic::{codes, sort_diagnostics, Diagnostic};
use crate::dsl::SourceSpan;
use crate::ids;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProjectModel {
    pub name: String,
    #[serde(default)]
    pub use_cases: Vec<UseCase>,
    #[serde(default)]
    pub sequence_diagrams: Vec<SequenceDiagram>,
    #[serde(default)]
    pub state_machines: Vec<StateMachine>,
    #[serde(skip)]
    pub spans: SpanIndex,
}

/// Source locations keyed by element id. Never part of structural equality.
#[derive(Debug, Clone, Default)]
pub struct SpanIndex(pub BTreeMap<String, SourceSpan>);

impl PartialEq for SpanIndex {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UseCase {
    pub id: String,
    pub name: String,
    #[serde(default)]
    pub actors: Vec<String>,
    #[serde(default)]
    pub conditions: Vec<Condition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    /// Free key/value fields of the textual use-case template.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub meta: Vec<(String, String)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionKind {
    Precondition,
    Postcondition,
    Invariant,
}

impl ConditionKind {
    pub fn keyword(self) -> &'static str {
        match self {
            ConditionKind::Precondition => "pre",
            ConditionKind::Postcondition => "post",
            ConditionKind::Invariant => "invariant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    /// Full label, `UC02.C3`.
    pub id: String,
    pub kind: ConditionKind,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceDiagram {
    pub id: String,
    pub name: String,
    pub use_case: String,
    pub lifelines: Vec<Lifeline>,
    pub messages: Vec<Message>,
}

impl SequenceDiagram {
    pub fn system_lifelines(&self) -> impl Iterator<Item = &Lifeline> {
        self.lifelines.iter().filter(|l| l.system)
    }

    pub fn message_id(&self, message: &Message) -> String {
        format!("{}.M{}", self.id, message.seq)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lifeline {
    pub name: String,
    #[serde(default)]
    pub system: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    Indirect,
    Cognitive,
    Physical,
}

impl MessageKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MessageKind::Indirect => "indirect",
            MessageKind::Cognitive => "cognitive",
            MessageKind::Physical => "physical",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "indirect" => Some(MessageKind::Indirect),
            "cognitive" => Some(MessageKind::Cognitive),
            "physical" => Some(MessageKind::Physical),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Argument {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    /// Sequence number as drawn on the diagram; also the message's sub-id.
    pub seq: u32,
    pub sender: String,
    pub receiver: String,
    pub name: String,
    #[serde(default)]
    pub arguments: Vec<Argument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guard: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<MessageKind>,
}

impl Message {
    /// `name(arg, arg: unit)` as it would appear on the diagram.
    pub fn signature(&self) -> String {
        if self.arguments.is_empty() {
            return self.name.clone();
        }
        let args: Vec<String> = self
            .arguments
            .iter()
            .map(|a| match &a.unit {
                Some(u) => format!("{}: {}", a.name, u),
                None => a.name.clone(),
            })
            .collect();
        format!("{}({})", self.name, args.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateMachine {
    pub id: String,
    /// Object whose behaviour the machine describes.
    pub object: String,
    pub states: Vec<State>,
    pub transitions: Vec<Transition>,
}

impl StateMachine {
    pub fn has_state(&self, name: &str) -> bool {
        self.states.iter().any(|s| s.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub name: String,
    #[serde(default)]
    pub initial: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    /// Full label, `SM01.T3`.
    pub id: String,
    pub source: String,
    pub target: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event: Option<Event>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guard: Option<String>,
    #[serde(default)]
    pub actions: Vec<String>,
}

impl Transition {
    pub fn is_empty(&self) -> bool {
        self.event.is_none() && self.guard.is_none() && self.actions.is_empty()
    }

    /// `event [guard] / a(), b()` with absent parts omitted.
    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if let Some(e) = &self.event {
            parts.push(e.to_string());
        }
        if let Some(g) = &self.guard {
            parts.push(format!("[{g}]"));
        }
        if !self.actions.is_empty() {
            parts.push(format!("/ {}", self.actions_text()));
        }
        parts.join(" ")
    }

    pub fn actions_text(&self) -> String {
        self.actions.iter().map(|a| action_call(a)).collect::<Vec<_>>().join(", ")
    }
}

/// Renders a stored action name as a call: `stop` becomes `stop()`, while an
/// action stored with its arguments is kept verbatim.
pub fn action_call(action: &str) -> String {
    if action.contains('(') {
        action.to_string()
    } else {
        format!("{action}()")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Signal,
    Call,
    Change,
    TemporalAfter,
    TemporalWhen,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Event {
    pub kind: EventKind,
    pub payload: String,
}

impl Event {
    pub fn new(kind: EventKind, payload: impl Into<String>) -> Self {
        Self { kind, payload: payload.into() }
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            EventKind::Signal => f.write_str(&self.payload),
            EventKind::Call => f.write_str(&action_call(&self.payload)),
            EventKind::Change => write!(f, "change({})", self.payload),
            EventKind::TemporalAfter => write!(f, "after({})", self.payload),
            EventKind::TemporalWhen => write!(f, "when({})", self.payload),
        }
    }
}

/// Accepts `250ms`, `5s`, `1.5 min`, `2h`.
pub fn is_duration_literal(s: &str) -> bool {
    let s = s.trim();
    let split = s.find(|c: char| !(c.is_ascii_digit() || c == '.')).unwrap_or(s.len());
    let (number, unit) = s.split_at(split);
    let number_ok = !number.is_empty()
        && !number.starts_with('.')
        && !number.ends_with('.')
        && number.matches('.').count() <= 1;
    number_ok && matches!(unit.trim_start(), "ms" | "s" | "sec" | "min" | "h")
}

/// `date=<something>`; the date itself is opaque.
pub fn is_date_expression(s: &str) -> bool {
    s.trim()
        .strip_prefix("date")
        .map(|rest| rest.trim_start())
        .and_then(|rest| rest.strip_prefix('='))
        .is_some_and(|d| !d.trim().is_empty())
}

fn is_name(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next().is_some_and(|c| c.is_alphabetic() || c == '_') && chars.all(|c| c.is_alphanumeric() || c == '_')
}

/// A resolved reference into the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ElementRef<'a> {
    UseCase(&'a UseCase),
    Condition { use_case: &'a UseCase, condition: &'a Condition },
    SequenceDiagram(&'a SequenceDiagram),
    Message { diagram: &'a SequenceDiagram, message: &'a Message },
    StateMachine(&'a StateMachine),
    Transition { machine: &'a StateMachine, transition: &'a Transition },
}

impl ProjectModel {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), ..Self::default() }
    }

    pub fn is_empty(&self) -> bool {
        self.use_cases.is_empty() && self.sequence_diagrams.is_empty() && self.state_machines.is_empty()
    }

    pub fn use_case(&self, id: &str) -> Option<&UseCase> {
        self.use_cases.iter().find(|u| u.id == id)
    }

    pub fn span_of(&self, id: &str) -> Option<&SourceSpan> {
        self.spans.0.get(id)
    }

    /// Resolves `UCnn`, `UCnn.Ck`, `SDnn`, `SDnn.Mk`, `SMnn` and `SMnn.Tk`.
    pub fn lookup(&self, id: &str) -> Option<ElementRef<'_>> {
        let (head, sub) = match id.split_once('.') {
            Some((h, s)) => (h, Some(s)),
            None => (id, None),
        };
        if ids::is_use_case_id(head) {
            let use_case = self.use_cases.iter().find(|u| u.id == head)?;
            match sub {
                None => Some(ElementRef::UseCase(use_case)),
                Some(_) => use_case
                    .conditions
                    .iter()
                    .find(|c| c.id == id)
                    .map(|condition| ElementRef::Condition { use_case, condition }),
            }
        } else if ids::is_sequence_id(head) {
            let diagram = self.sequence_diagrams.iter().find(|d| d.id == head)?;
            match sub {
                None => Some(ElementRef::SequenceDiagram(diagram)),
                Some(s) => {
                    let seq = ids::split_numbered(s, "M")?;
                    diagram
                        .messages
                        .iter()
                        .find(|m| m.seq == seq)
                        .map(|message| ElementRef::Message { diagram, message })
                }
            }
        } else if ids::is_state_machine_id(head) {
            let machine = self.state_machines.iter().find(|m| m.id == head)?;
            match sub {
                None => Some(ElementRef::StateMachine(machine)),
                Some(_) => machine
                    .transitions
                    .iter()
                    .find(|t| t.id == id)
                    .map(|transition| ElementRef::Transition { machine, transition }),
            }
        } else {
            None
        }
    }

    /// SHA-256 over the canonical text form; spans and formatting of the
    /// source files do not affect it.
    pub fn fingerprint(&self) -> String {
        let canonical = crate::dsl::serialize_model(self);
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

/// Free-function form of [`ProjectModel::lookup`].
pub fn element_lookup<'a>(model: &'a ProjectModel, id: &str) -> Option<ElementRef<'a>> {
    model.lookup(id)
}

/// Checks every structural modeling rule. An empty result means the model is
/// well formed; warnings alone do not block generation.
pub fn validate_model(model: &ProjectModel) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let span = |id: &str| model.span_of(id).cloned();

    let mut seen = HashSet::new();
    let top_ids = model
        .use_cases
        .iter()
        .map(|u| (&u.id, ids::is_use_case_id(&u.id), "UC"))
        .chain(model.sequence_diagrams.iter().map(|d| (&d.id, ids::is_sequence_id(&d.id), "SD")))
        .chain(model.state_machines.iter().map(|m| (&m.id, ids::is_state_machine_id(&m.id), "SM")));
    for (id, well_formed, prefix) in top_ids {
        if !well_formed {
            out.push(
                Diagnostic::error(codes::BAD_ID, id.clone(), format!("`{id}` does not match {prefix}<digits>"))
                    .with_span(span(id)),
            );
        }
        if !seen.insert(id.as_str()) {
            out.push(Diagnostic::error(codes::DUPLICATE_ID, id.clone(), format!("`{id}` is declared more than once")).with_span(span(id)));
        }
    }

    for uc in &model.use_cases {
        validate_use_case(model, uc, &mut out);
    }
    for sd in &model.sequence_diagrams {
        validate_sequence(model, sd, &mut out);
    }
    for sm in &model.state_machines {
        validate_state_machine(model, sm, &mut out);
    }

    sort_diagnostics(&mut out);
    out
}

fn validate_use_case(model: &ProjectModel, uc: &UseCase, out: &mut Vec<Diagnostic>) {
    if uc.conditions.is_empty() {
        out.push(
            Diagnostic::warning(codes::UC_NO_CONDITIONS, uc.id.clone(), "use case has no conditions and yields no deviations")
                .with_span(model.span_of(&uc.id).cloned()),
        );
    }
    let mut seen = HashSet::new();
    let prefix = format!("{}.C", uc.id);
    for c in &uc.conditions {
        let span = model.span_of(&c.id).cloned();
        if ids::split_numbered(&c.id, &prefix).is_none() {
            out.push(Diagnostic::error(codes::BAD_ID, c.id.clone(), format!("condition id must be {prefix}<digits>")).with_span(span.clone()));
        }
        if !seen.insert(&c.id) {
            out.push(Diagnostic::error(codes::DUPLICATE_ID, c.id.clone(), "condition id is declared more than once").with_span(span.clone()));
        }
        if c.text.trim().is_empty() {
            out.push(Diagnostic::error(codes::UC_EMPTY_CONDITION, c.id.clone(), "condition text is empty").with_span(span));
        }
    }
}

fn validate_sequence(model: &ProjectModel, sd: &SequenceDiagram, out: &mut Vec<Diagnostic>) {
    let sd_span = model.span_of(&sd.id).cloned();
    if model.use_case(&sd.use_case).is_none() {
        out.push(
            Diagnostic::error(codes::SD_UNKNOWN_USE_CASE, sd.id.clone(), format!("use case `{}` is not declared", sd.use_case))
                .with_span(sd_span.clone()),
        );
    }
    match sd.system_lifelines().count() {
        0 => out.push(Diagnostic::error(codes::SD_NO_SYSTEM, sd.id.clone(), "no lifeline is flagged as the system").with_span(sd_span.clone())),
        1 => {}
        n => out.push(
            Diagnostic::error(codes::SD_MULTIPLE_SYSTEM, sd.id.clone(), format!("{n} lifelines are flagged as the system; exactly one is allowed"))
                .with_span(sd_span.clone()),
        ),
    }
    let mut names = HashSet::new();
    for l in &sd.lifelines {
        if !names.insert(l.name.as_str()) {
            out.push(
                Diagnostic::error(codes::SD_DUPLICATE_LIFELINE, sd.id.clone(), format!("lifeline `{}` is declared more than once", l.name))
                    .with_span(sd_span.clone()),
            );
        }
    }

    let mut expected_min = 1;
    for (i, m) in sd.messages.iter().enumerate() {
        let mid = sd.message_id(m);
        let span = model.span_of(&mid).cloned();
        let ordered = if i == 0 { m.seq == 1 } else { m.seq >= expected_min };
        if !ordered {
            let msg = if i == 0 {
                format!("first message is numbered {} but numbering starts at 1", m.seq)
            } else {
                format!("message {} does not follow message {}", m.seq, expected_min - 1)
            };
            out.push(Diagnostic::error(codes::SD_MESSAGE_ORDER, mid.clone(), msg).with_span(span.clone()));
        }
        expected_min = expected_min.max(m.seq.saturating_add(1));
        for end in [&m.sender, &m.receiver] {
            if !names.contains(end.as_str()) {
                out.push(
                    Diagnostic::error(codes::SD_UNKNOWN_LIFELINE, mid.clone(), format!("lifeline `{end}` is not declared"))
                        .with_span(span.clone()),
                );
            }
        }
        if m.guard.as_deref().is_some_and(|g| g.trim().is_empty()) {
            out.push(Diagnostic::error(codes::SD_EMPTY_GUARD, mid.clone(), "guard is present but empty").with_span(span.clone()));
        }
    }
}

fn validate_state_machine(model: &ProjectModel, sm: &StateMachine, out: &mut Vec<Diagnostic>) {
    let sm_span = model.span_of(&sm.id).cloned();
    let mut names = HashSet::new();
    for s in &sm.states {
        if !names.insert(s.name.as_str()) {
            out.push(
                Diagnostic::error(codes::SM_DUPLICATE_STATE, sm.id.clone(), format!("state `{}` is declared more than once", s.name))
                    .with_span(sm_span.clone()),
            );
        }
    }
    let initial = sm.states.iter().filter(|s| s.initial).count();
    if initial != 1 {
        out.push(
            Diagnostic::error(codes::SM_INITIAL, sm.id.clone(), format!("expected exactly one initial state, found {initial}"))
                .with_span(sm_span.clone()),
        );
    }

    let prefix = format!("{}.T", sm.id);
    let mut tids = HashSet::new();
    let mut triggers: BTreeSet<(&str, Option<&Event>, Option<&str>)> = BTreeSet::new();
    for t in &sm.transitions {
        let span = model.span_of(&t.id).cloned();
        if ids::split_numbered(&t.id, &prefix).is_none() {
            out.push(Diagnostic::error(codes::BAD_ID, t.id.clone(), format!("transition id must be {prefix}<digits>")).with_span(span.clone()));
        }
        if !tids.insert(&t.id) {
            out.push(Diagnostic::error(codes::DUPLICATE_ID, t.id.clone(), "transition id is declared more than once").with_span(span.clone()));
        }
        for end in [&t.source, &t.target] {
            if !sm.has_state(end) {
                out.push(Diagnostic::error(codes::SM_UNKNOWN_STATE, t.id.clone(), format!("state `{end}` is not declared")).with_span(span.clone()));
            }
        }
        if t.is_empty() {
            out.push(Diagnostic::error(codes::SM_EMPTY_TRANSITION, t.id.clone(), "transition has no event, guard or action").with_span(span.clone()));
        }
        if let Some(e) = &t.event {
            if let Some(problem) = event_problem(e) {
                out.push(Diagnostic::error(codes::SM_BAD_EVENT, t.id.clone(), problem).with_span(span.clone()));
            }
        }
        if !triggers.insert((t.source.as_str(), t.event.as_ref(), t.guard.as_deref())) {
            out.push(
                Diagnostic::error(
                    codes::SM_NONDETERMINISTIC,
                    t.id.clone(),
                    format!("another transition from `{}` has the same event and guard", t.source),
                )
                .with_span(span),
            );
        }
    }
}

fn event_problem(e: &Event) -> Option<String> {
    match e.kind {
        EventKind::Signal if e.payload.trim().is_empty() => Some("signal event has an empty name".into()),
        EventKind::Call if !is_name(e.payload.split('(').next().unwrap_or("")) => {
            Some(format!("`{}` is not a valid operation name", e.payload))
        }
        EventKind::Change if e.payload.trim().is_empty() => Some("change event has an empty expression".into()),
        EventKind::TemporalAfter if !is_duration_literal(&e.payload) => {
            Some(format!("after({}) needs a duration such as 5s or 200ms", e.payload))
        }
        EventKind::TemporalWhen if !is_date_expression(&e.payload) => Some(format!("when({}) needs date=<date>", e.payload)),
        _ => None,
    }
}

// `Event` in a BTreeSet key.
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.kind as u8, &self.payload).cmp(&(other.kind as u8, &other.payload))
    }
}
