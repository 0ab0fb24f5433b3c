//! Guide-word tables: which guide words apply to which attribute of which
//! model element, with a generic interpretation for each combination.
//!
//! The registry is plain JSON so a project can extend or trim the default
//! tables. Loading validates the whole file and reports every problem as a
//! [`Diagnostic`] rather than stopping at the first.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::diagnostic::{codes, Diagnostic};
use crate::model::{ConditionKind, ElementRef};

/// The registry shipped with the tool.
pub const DEFAULT_REGISTRY_JSON: &str = include_str!("../data/default_registry.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementKind {
    UseCaseCondition,
    Message,
    Transition,
}

impl ElementKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ElementKind::UseCaseCondition => "use_case_condition",
            ElementKind::Message => "message",
            ElementKind::Transition => "transition",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [ElementKind::UseCaseCondition, ElementKind::Message, ElementKind::Transition]
            .into_iter()
            .find(|k| k.as_str() == s)
    }

    /// Attributes in the order tables list them.
    pub fn attributes(self) -> &'static [Attribute] {
        use Attribute::*;
        match self {
            ElementKind::UseCaseCondition => &[Precondition, Postcondition, Invariant],
            ElementKind::Message => &[GeneralOrdering, SendReceiveTiming, Lifelines, InteractionConstraint, MessageArgument],
            ElementKind::Transition => &[Event, Guard, Action],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribute {
    Precondition,
    Postcondition,
    Invariant,
    GeneralOrdering,
    SendReceiveTiming,
    Lifelines,
    InteractionConstraint,
    MessageArgument,
    Event,
    Guard,
    Action,
}

impl Attribute {
    pub const ALL: [Attribute; 11] = [
        Attribute::Precondition,
        Attribute::Postcondition,
        Attribute::Invariant,
        Attribute::GeneralOrdering,
        Attribute::SendReceiveTiming,
        Attribute::Lifelines,
        Attribute::InteractionConstraint,
        Attribute::MessageArgument,
        Attribute::Event,
        Attribute::Guard,
        Attribute::Action,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Attribute::Precondition => "precondition",
            Attribute::Postcondition => "postcondition",
            Attribute::Invariant => "invariant",
            Attribute::GeneralOrdering => "general_ordering",
            Attribute::SendReceiveTiming => "send_receive_timing",
            Attribute::Lifelines => "lifelines",
            Attribute::InteractionConstraint => "interaction_constraint",
            Attribute::MessageArgument => "message_argument",
            Attribute::Event => "event",
            Attribute::Guard => "guard",
            Attribute::Action => "action",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Attribute::ALL.into_iter().find(|a| a.as_str() == s)
    }

    pub fn element_kind(self) -> ElementKind {
        match self {
            Attribute::Precondition | Attribute::Postcondition | Attribute::Invariant => ElementKind::UseCaseCondition,
            Attribute::GeneralOrdering
            | Attribute::SendReceiveTiming
            | Attribute::Lifelines
            | Attribute::InteractionConstraint
            | Attribute::MessageArgument => ElementKind::Message,
            Attribute::Event | Attribute::Guard | Attribute::Action => ElementKind::Transition,
        }
    }

    pub fn of_condition(kind: ConditionKind) -> Self {
        match kind {
            ConditionKind::Precondition => Attribute::Precondition,
            ConditionKind::Postcondition => Attribute::Postcondition,
            ConditionKind::Invariant => Attribute::Invariant,
        }
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An attribute together with the kind of element carrying it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AttributeKind {
    pub element_kind: ElementKind,
    pub attribute: Attribute,
}

impl From<Attribute> for AttributeKind {
    fn from(attribute: Attribute) -> Self {
        Self { element_kind: attribute.element_kind(), attribute }
    }
}

impl fmt::Display for AttributeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.element_kind.as_str(), self.attribute)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TriggeredNote {
    #[serde(rename = "triggered")]
    Triggered,
    #[serde(rename = "not_triggered")]
    NotTriggered,
    #[serde(rename = "n/a")]
    NotApplicable,
}

impl TriggeredNote {
    pub fn as_str(self) -> &'static str {
        match self {
            TriggeredNote::Triggered => "triggered",
            TriggeredNote::NotTriggered => "not_triggered",
            TriggeredNote::NotApplicable => "n/a",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [TriggeredNote::Triggered, TriggeredNote::NotTriggered, TriggeredNote::NotApplicable]
            .into_iter()
            .find(|t| t.as_str() == s)
    }
}

/// Structural condition under which an entry applies to an element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Applicability {
    #[default]
    Always,
    /// The message or transition carries a guard.
    RequiresGuard,
    /// The message carries a timing constraint.
    RequiresTiming,
    /// The message's diagram has more than two lifelines.
    RequiresMultiLifeline,
}

impl Applicability {
    pub fn as_str(self) -> &'static str {
        match self {
            Applicability::Always => "always",
            Applicability::RequiresGuard => "requires_guard",
            Applicability::RequiresTiming => "requires_timing",
            Applicability::RequiresMultiLifeline => "requires_multi_lifeline",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [
            Applicability::Always,
            Applicability::RequiresGuard,
            Applicability::RequiresTiming,
            Applicability::RequiresMultiLifeline,
        ]
        .into_iter()
        .find(|a| a.as_str() == s)
    }

    fn allowed_on(self, kind: ElementKind) -> bool {
        match self {
            Applicability::Always => true,
            Applicability::RequiresGuard => kind != ElementKind::UseCaseCondition,
            Applicability::RequiresTiming | Applicability::RequiresMultiLifeline => kind == ElementKind::Message,
        }
    }

    pub fn holds(self, element: &ElementRef<'_>) -> bool {
        match (self, element) {
            (Applicability::Always, _) => true,
            (Applicability::RequiresGuard, ElementRef::Message { message, .. }) => message.guard.is_some(),
            (Applicability::RequiresGuard, ElementRef::Transition { transition, .. }) => transition.guard.is_some(),
            (Applicability::RequiresTiming, ElementRef::Message { message, .. }) => message.timing.is_some(),
            (Applicability::RequiresMultiLifeline, ElementRef::Message { diagram, .. }) => diagram.lifelines.len() > 2,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuideWordEntry {
    pub guide_word: String,
    #[serde(flatten)]
    pub attribute: AttributeKind,
    /// Generic deviation text; `{subject}` is replaced by the element text.
    pub interpretation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub triggered_note: Option<TriggeredNote>,
    #[serde(default)]
    pub applicability: Applicability,
}

impl GuideWordEntry {
    /// Substitutes the element text into the interpretation template.
    pub fn instantiate(&self, subject: &str) -> String {
        if self.interpretation.contains("{subject}") {
            self.interpretation.replace("{subject}", subject)
        } else {
            format!("{} ({subject})", self.interpretation)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuideWordRegistry {
    pub version: String,
    pub entries: Vec<GuideWordEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{attribute} does not apply to {found}")]
pub struct KindMismatch {
    pub attribute: AttributeKind,
    pub found: String,
}

#[derive(Deserialize)]
struct RawRegistry {
    version: String,
    entries: Vec<RawEntry>,
}

#[derive(Deserialize)]
struct RawEntry {
    element_kind: String,
    attribute: String,
    guide_word: String,
    interpretation: String,
    #[serde(default)]
    triggered_note: Option<String>,
    #[serde(default)]
    applicability: Option<String>,
}

impl GuideWordRegistry {
    /// The shipped tables.
    pub fn default_registry() -> Self {
        load_registry(DEFAULT_REGISTRY_JSON).expect("bundled registry is valid")
    }

    pub fn entries_for(&self, attribute: Attribute) -> impl Iterator<Item = &GuideWordEntry> {
        self.entries.iter().filter(move |e| e.attribute.attribute == attribute)
    }

    /// Distinct guide words across all attributes of one element kind, in
    /// first-appearance order.
    pub fn guide_words(&self, kind: ElementKind) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.entries
            .iter()
            .filter(|e| e.attribute.element_kind == kind)
            .map(|e| e.guide_word.as_str())
            .filter(|w| seen.insert(*w))
            .collect()
    }

    pub fn get(&self, attribute: Attribute, guide_word: &str) -> Option<&GuideWordEntry> {
        self.entries_for(attribute).find(|e| e.guide_word == guide_word)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("registry serializes")
    }
}

/// Parses and validates a registry file.
pub fn load_registry(text: &str) -> Result<GuideWordRegistry, Vec<Diagnostic>> {
    let raw: RawRegistry = serde_json::from_str(text)
        .map_err(|e| vec![Diagnostic::error(codes::REGISTRY_FORMAT, None, format!("registry is not valid: {e}"))])?;

    let mut diags = Vec::new();
    let mut entries = Vec::with_capacity(raw.entries.len());
    let mut seen = HashSet::new();
    for (i, e) in raw.entries.into_iter().enumerate() {
        let at = format!("entries[{i}]");
        let Some(element_kind) = ElementKind::parse(&e.element_kind) else {
            diags.push(Diagnostic::error(codes::UNKNOWN_ELEMENT_KIND, at, format!("unknown element kind `{}`", e.element_kind)));
            continue;
        };
        let Some(attribute) = Attribute::parse(&e.attribute) else {
            diags.push(Diagnostic::error(codes::UNKNOWN_ATTRIBUTE, at, format!("unknown attribute `{}`", e.attribute)));
            continue;
        };
        if attribute.element_kind() != element_kind {
            diags.push(Diagnostic::error(
                codes::UNKNOWN_ATTRIBUTE,
                at,
                format!("attribute `{}` does not belong to element kind `{}`", e.attribute, e.element_kind),
            ));
            continue;
        }
        let guide_word = e.guide_word.trim().to_string();
        if guide_word.is_empty() {
            diags.push(Diagnostic::error(codes::EMPTY_GUIDE_WORD, at, "guide word is empty"));
            continue;
        }
        let applicability = match e.applicability.as_deref() {
            None => Applicability::Always,
            Some(s) => match Applicability::parse(s) {
                Some(a) => a,
                None => {
                    diags.push(Diagnostic::error(codes::UNKNOWN_APPLICABILITY, at, format!("unknown applicability `{s}`")));
                    continue;
                }
            },
        };
        if !applicability.allowed_on(element_kind) {
            diags.push(Diagnostic::error(
                codes::BAD_APPLICABILITY,
                at,
                format!("`{}` cannot be evaluated on {}", applicability.as_str(), element_kind.as_str()),
            ));
            continue;
        }
        let triggered_note = match e.triggered_note.as_deref() {
            None => None,
            Some(s) => match TriggeredNote::parse(s) {
                Some(t) => Some(t),
                None => {
                    diags.push(Diagnostic::error(codes::BAD_TRIGGERED_NOTE, at, format!("unknown triggered note `{s}`")));
                    continue;
                }
            },
        };
        if !seen.insert((guide_word.clone(), attribute)) {
            diags.push(Diagnostic::error(
                codes::DUPLICATE_ENTRY,
                at,
                format!("guide word `{guide_word}` is already defined for {attribute}"),
            ));
            continue;
        }
        entries.push(GuideWordEntry {
            guide_word,
            attribute: AttributeKind { element_kind, attribute },
            interpretation: e.interpretation,
            triggered_note,
            applicability,
        });
    }

    if diags.is_empty() {
        Ok(GuideWordRegistry { version: raw.version, entries })
    } else {
        Err(diags)
    }
}

/// The entries for `attribute` whose applicability rule holds on `element`,
/// in registry order.
pub fn applicable_entries<'r>(
    registry: &'r GuideWordRegistry,
    element: &ElementRef<'_>,
    attribute: AttributeKind,
) -> Result<Vec<&'r GuideWordEntry>, KindMismatch> {
    let fits = match element {
        ElementRef::Condition { condition, .. } => attribute.attribute == Attribute::of_condition(condition.kind),
        ElementRef::Message { .. } => attribute.element_kind == ElementKind::Message,
        ElementRef::Transition { .. } => attribute.element_kind == ElementKind::Transition,
        _ => false,
    };
    if !fits || attribute.attribute.element_kind() != attribute.element_kind {
        return Err(KindMismatch { attribute, found: element_label(element) });
    }
    Ok(registry
        .entries_for(attribute.attribute)
        .filter(|e| e.applicability.holds(element))
        .collect())
}

fn element_label(element: &ElementRef<'_>) -> String {
    match element {
        ElementRef::UseCase(u) => format!("use case {}", u.id),
        ElementRef::Condition { condition, .. } => format!("{:?} {}", condition.kind, condition.id).to_lowercase(),
        ElementRef::SequenceDiagram(d) => format!("sequence diagram {}", d.id),
        ElementRef::Message { diagram, message } => format!("message {}", diagram.message_id(message)),
        ElementRef::StateMachine(m) => format!("state machine {}", m.id),
        ElementRef::Transition { transition, .. } => format!("transition {}", transition.id),
    }
}
