use std::fs;
use std::io;
use std::path::Path;

use crate::ids::{natural_cmp, DiagramType};
use crate::metrics::{GuideWordUsage, ProjectStats};
use crate::store::{AnalysisStore, DeviationRow};

pub const TABLE_HEADER: [&str; 12] = [
    "Entity",
    "Line",
    "Attribute",
    "GuideWord",
    "Deviation",
    "UseCaseEffect",
    "RealWorldEffect",
    "Severity",
    "PossibleCauses",
    "SafetyRecommendations",
    "Remarks",
    "HazardNumbers",
];

/// Separator for list cells (recommendations, hazards, covers, sources).
pub const LIST_SEPARATOR: &str = "; ";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvFile {
    /// Path relative to the output directory, e.g. `tables/UC02.csv`.
    pub path: String,
    pub content: String,
}

fn to_csv(header: &[&str], records: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = ::csv::WriterBuilder::new().terminator(::csv::Terminator::CRLF).from_writer(Vec::new());
    w.write_record(header).expect("writing to memory");
    for r in records {
        w.write_record(&r).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv of strings is UTF-8")
}

pub(crate) fn row_record(row: &DeviationRow) -> Vec<String> {
    vec![
        row.table_id.clone(),
        row.line.to_string(),
        row.attribute_ref.to_string(),
        row.guide_word.clone(),
        row.deviation.clone(),
        row.use_case_effect.clone(),
        row.real_world_effect.clone(),
        row.severity.clone().unwrap_or_default(),
        row.possible_causes.clone(),
        row.recommendations.join(LIST_SEPARATOR),
        row.remarks.clone(),
        row.hazards.join(LIST_SEPARATOR),
    ]
}

/// One file per HAZOP table plus the hazard, recommendation and hypothesis
/// lists. Stats files are added when stats are given.
pub fn export_csv(store: &AnalysisStore, stats: Option<(&ProjectStats, &GuideWordUsage)>) -> Vec<CsvFile> {
    let mut files = Vec::new();
    for table in store.table_ids() {
        files.push(CsvFile {
            path: format!("tables/{table}.csv"),
            content: to_csv(&TABLE_HEADER, store.rows_of(table).map(row_record)),
        });
    }

    let outputs = store.concatenate_outputs();
    files.push(CsvFile {
        path: "hazards.csv".into(),
        content: to_csv(
            &["Id", "Hazard", "Note", "UseCaseRows", "SequenceRows", "StateMachineRows", "PhaOccurrences", "Rows"],
            outputs.hazards.iter().map(|h| {
                vec![
                    h.hazard.id.clone(),
                    h.hazard.text.clone(),
                    h.hazard.note.clone().unwrap_or_default(),
                    h.occurrences.use_case.to_string(),
                    h.occurrences.sequence.to_string(),
                    h.occurrences.state_machine.to_string(),
                    h.hazard.pha_occurrences.map(|n| n.to_string()).unwrap_or_default(),
                    join(&h.rows),
                ]
            }),
        ),
    });
    files.push(CsvFile {
        path: "recommendations.csv".into(),
        content: to_csv(
            &["Id", "Recommendation", "Covers", "Sources"],
            outputs
                .recommendations
                .iter()
                .map(|r| vec![r.id.clone(), r.text.clone(), r.covers.join(LIST_SEPARATOR), join(&r.sources)]),
        ),
    });
    files.push(CsvFile {
        path: "hypotheses.csv".into(),
        content: to_csv(
            &["Id", "Hypothesis", "Status", "Sources"],
            outputs
                .hypotheses
                .iter()
                .map(|h| vec![h.id.clone(), h.text.clone(), h.status.as_str().to_string(), join(&h.sources)]),
        ),
    });

    if let Some((stats, usage)) = stats {
        files.push(CsvFile {
            path: "stats.csv".into(),
            content: to_csv(
                &[
                    "DiagramType",
                    "Elements",
                    "SubElements",
                    "AttributeInstances",
                    "AnalyzedDeviations",
                    "InterpretedDeviations",
                    "InterpretedWithRecommendation",
                ],
                DiagramType::ALL.iter().map(|t| {
                    let s = stats.get(*t);
                    vec![
                        t.short().to_string(),
                        s.element_count.to_string(),
                        s.sub_element_count.to_string(),
                        s.attribute_instance_count.to_string(),
                        s.analyzed_deviations.to_string(),
                        s.interpreted_deviations.to_string(),
                        s.interpreted_with_recommendation.to_string(),
                    ]
                }),
            ),
        });
        files.push(CsvFile {
            path: "guideword_usage.csv".into(),
            content: to_csv(
                &["ElementKind", "Attribute", "GuideWord", "Interpreted"],
                usage.rows.iter().map(|u| {
                    vec![
                        u.attribute.element_kind.as_str().to_string(),
                        u.attribute.attribute.as_str().to_string(),
                        u.guide_word.clone(),
                        u.count.to_string(),
                    ]
                }),
            ),
        });
    }
    files.sort_by(|a, b| natural_cmp(&a.path, &b.path));
    files
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(LIST_SEPARATOR)
}

/// Writes `files` under `dir`, creating subdirectories as needed.
pub fn write_csv_dir(dir: &Path, files: &[CsvFile]) -> io::Result<()> {
    for f in files {
        let path = dir.join(&f.path);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, &f.content)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::AttributeRef;
    use crate::registry::Attribute;
    use crate::store::RowStatus;

    fn one_row(deviation: &str) -> AnalysisStore {
        let mut s = AnalysisStore::default();
        s.rows.push(DeviationRow {
            table_id: "UC02".into(),
            line: 1,
            attribute_ref: AttributeRef::new("UC02.C1", Attribute::Precondition),
            guide_word: "No".into(),
            deviation_hint: String::new(),
            deviation: deviation.into(),
            use_case_effect: String::new(),
            real_world_effect: String::new(),
            severity: None,
            possible_causes: String::new(),
            recommendations: vec![],
            remarks: String::new(),
            hazards: vec![],
            status: RowStatus::Interpreted,
            prior_status: None,
        });
        s
    }

    #[test]
    fn one_row_two_lines() {
        let files = export_csv(&one_row("d"), None);
        let t = files.iter().find(|f| f.path == "tables/UC02.csv").unwrap();
        assert_eq!(t.content.lines().count(), 2);
        assert!(t.content.starts_with(&TABLE_HEADER.join(",")));
        assert!(t.content.contains("UC02,1,UC02.C1 precondition,No,d,"));
    }

    #[test]
    fn quoting() {
        let files = export_csv(&one_row("stops, then says \"ok\""), None);
        let t = files.iter().find(|f| f.path == "tables/UC02.csv").unwrap();
        assert!(t.content.contains("\"stops, then says \"\"ok\"\"\""));
    }
}
