//! Deviation counts per diagram type and guide-word usage.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::engine::attribute_instances;
use crate::ids::DiagramType;
use crate::model::{ElementRef, ProjectModel};
use crate::registry::{AttributeKind, GuideWordRegistry};
use crate::store::{AnalysisStore, DeviationRow, RowStatus};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagramStats {
    /// Use cases, sequence diagrams or state machines.
    pub element_count: usize,
    /// Conditions (all three kinds), messages or transitions.
    pub sub_element_count: usize,
    pub attribute_instance_count: usize,
    pub analyzed_deviations: usize,
    pub interpreted_deviations: usize,
    pub interpreted_with_recommendation: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectStats {
    pub use_case: DiagramStats,
    pub sequence: DiagramStats,
    pub state_machine: DiagramStats,
    pub state_count: usize,
    pub hazard_count: usize,
}

impl ProjectStats {
    pub fn get(&self, t: DiagramType) -> &DiagramStats {
        match t {
            DiagramType::UseCase => &self.use_case,
            DiagramType::Sequence => &self.sequence,
            DiagramType::StateMachine => &self.state_machine,
        }
    }

    fn get_mut(&mut self, t: DiagramType) -> &mut DiagramStats {
        match t {
            DiagramType::UseCase => &mut self.use_case,
            DiagramType::Sequence => &mut self.sequence,
            DiagramType::StateMachine => &mut self.state_machine,
        }
    }

    pub fn total_interpreted(&self) -> usize {
        DiagramType::ALL.iter().map(|t| self.get(*t).interpreted_deviations).sum()
    }
}

pub fn compute_stats(model: &ProjectModel, store: &AnalysisStore) -> ProjectStats {
    let mut stats = ProjectStats {
        use_case: DiagramStats {
            element_count: model.use_cases.len(),
            sub_element_count: model.use_cases.iter().map(|u| u.conditions.len()).sum(),
            ..DiagramStats::default()
        },
        sequence: DiagramStats {
            element_count: model.sequence_diagrams.len(),
            sub_element_count: model.sequence_diagrams.iter().map(|d| d.messages.len()).sum(),
            ..DiagramStats::default()
        },
        state_machine: DiagramStats {
            element_count: model.state_machines.len(),
            sub_element_count: model.state_machines.iter().map(|m| m.transitions.len()).sum(),
            ..DiagramStats::default()
        },
        state_count: model.state_machines.iter().map(|m| m.states.len()).sum(),
        hazard_count: store.hazards.len(),
    };

    for inst in attribute_instances(model) {
        let t = match inst.element {
            ElementRef::Condition { .. } => DiagramType::UseCase,
            ElementRef::Message { .. } => DiagramType::Sequence,
            _ => DiagramType::StateMachine,
        };
        stats.get_mut(t).attribute_instance_count += 1;
    }

    for row in &store.rows {
        let Some(t) = row.diagram_type() else { continue };
        if row.status == RowStatus::Orphaned {
            continue;
        }
        let s = stats.get_mut(t);
        s.analyzed_deviations += 1;
        if row.status == RowStatus::Interpreted {
            s.interpreted_deviations += 1;
            if !row.recommendations.is_empty() {
                s.interpreted_with_recommendation += 1;
            }
        }
    }
    stats
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageRow {
    #[serde(flatten)]
    pub attribute: AttributeKind,
    pub guide_word: String,
    pub count: usize,
}

/// Interpreted-row counts for every registry key, zeros included.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuideWordUsage {
    pub rows: Vec<UsageRow>,
    /// Interpreted rows whose key is not in the registry, e.g. after a
    /// guide word was removed from the project registry.
    pub unregistered: usize,
}

impl GuideWordUsage {
    pub fn total(&self) -> usize {
        self.rows.iter().map(|r| r.count).sum::<usize>() + self.unregistered
    }

    pub fn count(&self, attribute: AttributeKind, guide_word: &str) -> Option<usize> {
        self.rows.iter().find(|r| r.attribute == attribute && r.guide_word == guide_word).map(|r| r.count)
    }
}

pub fn guideword_usage(store: &AnalysisStore, registry: &GuideWordRegistry) -> GuideWordUsage {
    let mut counts: HashMap<(AttributeKind, &str), usize> = HashMap::new();
    let interpreted = store.rows.iter().filter(|r: &&DeviationRow| r.status == RowStatus::Interpreted);
    for row in interpreted {
        *counts.entry((row.attribute_ref.kind, row.guide_word.as_str())).or_default() += 1;
    }
    let rows: Vec<UsageRow> = registry
        .entries
        .iter()
        .map(|e| UsageRow {
            attribute: e.attribute,
            guide_word: e.guide_word.clone(),
            count: counts.remove(&(e.attribute, e.guide_word.as_str())).unwrap_or(0),
        })
        .collect();
    GuideWordUsage { rows, unregistered: counts.values().sum() }
}
