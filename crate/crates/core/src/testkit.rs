//! Fixtures shared by the test suites of every crate in the workspace.
//! Compiled only with the `testkit` feature.

use crate::dsl::parse_str;
use crate::engine::regenerate;
use crate::ids::RowAnchor;
use crate::model::ProjectModel;
use crate::registry::GuideWordRegistry;
use crate::store::{AnalysisStore, Hazard, Hypothesis, HypothesisStatus, Recommendation, RowUpdate};

/// Assistive walking robot: five use cases, the nominal standing-up scenario
/// and the controller state machine (9 states, 19 transitions).
pub const MIRAS_MODEL: &str = r#"# Assistive robot for standing up, walking and sitting down
model "MIRAS";

usecase UC01 "Deambulation" {
  actor Patient;
  pre C1 "The patient is standing and holds the handles";
  post C2 "The patient has reached the destination";
  invariant C3 "The robot speed is adapted to the patient";
}

usecase UC02 "Standing up operation" {
  actor Patient;
  actor "Medical staff";
  description "The robot helps the patient to stand up from a seat.";
  meta "Non functional requirements" = "Invariants come from safety properties";
  pre C1 "The robot is in front of the patient";
  pre C2 "The patient is sitting";
  pre C3 "The robot is in standing up mode";
  pre C4 "The handles are in the lower position";
  post C5 "The patient is standing";
  post C6 "The handles are in the upper position";
  post C7 "The robot is in walking mode";
  invariant C8 "The patient holds both handles";
  invariant C9 "The handle speed stays below the configured limit";
}

usecase UC03 "Sitting down operation" {
  actor Patient;
  pre C1 "The patient is standing in front of a seat";
  post C2 "The patient is seated";
}

usecase UC08 "Physiological monitoring" {
  actor Patient;
  actor "Medical staff";
  invariant C1 "Heartbeat and fatigue are monitored";
  post C2 "An alarm is raised on abnormal values";
}

usecase UC10 "Profile learning" {
  actor "Medical staff";
  pre C1 "The patient is identified";
  post C2 "The patient profile is stored";
}

sequence SD01 "Nominal standing up" for UC02 {
  lifeline Patient;
  system Robot;
  msg 1 Patient -> Robot : gripHandles(force);
  msg 2 Patient -> Robot : initiateStandingUp(force: N);
  msg 3 Robot -> Patient : raiseHandlebar(speed: "m/s");
  msg 4 Robot -> Patient : stopHandlebar [end of course];
}

statemachine SM01 for RobotController {
  initial Init;
  state Idle;
  state StandingUp;
  state Walking;
  state Stopped;
  state SittingDown;
  state Alarm;
  state ProfileLearning;
  state EmergencyStop;
  transition T1 Init -> Idle : initDone / calibrate();
  transition T2 Idle -> StandingUp : startStandingUp [handlesGripped] / raiseHandlebar();
  transition T3 StandingUp -> Walking : endOfCourse / setSpeed(low);
  transition T4 StandingUp -> Idle : handlesReleased / lowerHandlebar();
  transition T5 Walking -> Stopped : stopRequest / brake();
  transition T6 Walking -> Alarm : fatigueDetected / raiseAlarm();
  transition T7 Stopped -> Walking : startDeamb [handlesGripped] / setSpeed();
  transition T8 Stopped -> SittingDown : startSittingDown / lowerHandlebar();
  transition T9 SittingDown -> Idle : seated / releaseHandlebar();
  transition T10 Alarm -> Stopped : after(2s) / brake();
  transition T11 Idle -> ProfileLearning : learnProfile / recordProfile();
  transition T12 ProfileLearning -> Idle : profileSaved;
  transition T13 Walking -> EmergencyStop : emergencyButton / cutPower();
  transition T14 StandingUp -> EmergencyStop : emergencyButton / cutPower();
  transition T15 SittingDown -> EmergencyStop : emergencyButton / cutPower();
  transition T16 EmergencyStop -> Idle : reset() / restart();
  transition T17 Alarm -> EmergencyStop : heartbeatLost / cutPower(), callNurse();
  transition T18 Idle -> Init : when(date=00:00) / selfTest();
  transition T19 ProfileLearning -> EmergencyStop : emergencyButton / cutPower();
}
"#;

pub fn miras_model() -> ProjectModel {
    parse_str(MIRAS_MODEL).expect("fixture parses")
}

pub const HN2: &str = "Fall of the patient due to imbalance not caused by the robot";
pub const HN6: &str = "Fall of the patient due to imbalance caused by the robot";

/// Generated tables for [`miras_model`] with a few interpreted rows:
/// HN6 found on UC02 lines 1, 2 and 15, Rec2 covering HN6 and formulated at
/// UC02.15, HN2 distinct from HN6. The store is consistent.
pub fn miras_store(model: &ProjectModel, registry: &GuideWordRegistry) -> AnalysisStore {
    let (mut store, _) = regenerate(&AnalysisStore::new("MIRAS"), model, registry);
    store.hazards = vec![
        Hazard { id: "HN2".into(), text: HN2.into(), note: None, pha_occurrences: Some(1) },
        Hazard { id: "HN6".into(), text: HN6.into(), note: None, pha_occurrences: Some(1) },
    ];
    store.recommendations = vec![
        Recommendation {
            id: "Rec1".into(),
            text: "Monitor the patient balance while walking".into(),
            covers: vec![],
            sources: vec![],
        },
        Recommendation {
            id: "Rec2".into(),
            text: "Check the robot position with respect to the patient before standing up".into(),
            covers: vec![],
            sources: vec![],
        },
    ];
    let fill = |deviation: &str, hazard: &str, rec: Option<&str>| RowUpdate {
        deviation: Some(deviation.into()),
        use_case_effect: Some("Standing up is performed in a wrong configuration".into()),
        real_world_effect: Some("Fall of the patient".into()),
        severity: Some("Catastrophic".into()),
        possible_causes: Some("Positioning error".into()),
        hazards: Some(vec![hazard.into()]),
        recommendations: rec.map(|r| vec![r.into()]),
        ..RowUpdate::default()
    };
    store
        .set_row_fields("UC02", 1, fill("The patient tries to stand up while the robot is not properly positioned", "HN6", None))
        .expect("fixture edit");
    store
        .set_row_fields("UC02", 2, fill("The robot is beside the patient", "HN6", None))
        .expect("fixture edit");
    store
        .set_row_fields("UC02", 15, fill("The robot is in another mode at the same time", "HN6", Some("Rec2")))
        .expect("fixture edit");
    store
        .set_row_fields("UC01", 1, fill("The patient walks without holding the handles", "HN2", Some("Rec1")))
        .expect("fixture edit");
    store.hypotheses.push(Hypothesis {
        id: "Hyp1".into(),
        text: "The patient is able to hold the handles with both hands".into(),
        status: HypothesisStatus::Open,
        sources: vec![RowAnchor::new("UC02", 1)],
    });
    store
}

/// Published MIRAS counts used by [`miras_stats_fixture`].
pub mod miras_counts {
    pub const USE_CASES: usize = 11;
    pub const CONDITIONS: usize = 45;
    pub const UC_ANALYZED: usize = 317;
    pub const UC_INTERPRETED: usize = 134;
    pub const UC_WITH_REC: usize = 72;
    pub const SEQUENCE_DIAGRAMS: usize = 12;
    pub const MESSAGES: usize = 52;
    pub const SD_ANALYZED: usize = 676;
    pub const SD_INTERPRETED: usize = 163;
    pub const SD_WITH_REC: usize = 85;
    pub const STATE_MACHINES: usize = 1;
    pub const STATES: usize = 9;
    pub const TRANSITIONS: usize = 19;
    pub const SM_ANALYZED: usize = 215;
    pub const SM_WITH_REC: usize = 161;
    pub const HAZARDS: usize = 16;
}

/// A model and store shaped to the published MIRAS project counts.
///
/// The use-case tables are the generated skeleton plus analyst-duplicated
/// rows. The sequence-diagram tables hold only the first rows of the
/// skeleton, since the full cross product of 52 messages is larger than the
/// published analyzed count. The state machine has two guarded transitions,
/// which makes its skeleton exactly the published size. Interpreted state
/// machine rows all carry a recommendation.
pub fn miras_stats_fixture(registry: &GuideWordRegistry) -> (ProjectModel, AnalysisStore) {
    use miras_counts::*;
    let base = miras_model();
    let mut text = String::from("model \"MIRAS statistics\";\n");

    // UC02 keeps its 9 conditions; ten more use cases share the other 36.
    let uc02 = base.use_case("UC02").expect("fixture has UC02");
    let mut uc_ids = Vec::new();
    for n in 1..=USE_CASES as u32 {
        let id = format!("UC{n:02}");
        uc_ids.push(id.clone());
        text.push_str(&format!("usecase {id} \"Use case {n}\" {{\n"));
        if id == "UC02" {
            for c in &uc02.conditions {
                let local = c.id.rsplit_once('.').map(|(_, l)| l).unwrap_or(&c.id);
                text.push_str(&format!("  {} {local} \"{}\";\n", c.kind.keyword(), c.text));
            }
        } else {
            let k = if n <= 7 { 4 } else { 3 };
            for c in 1..=k {
                let kw = ["pre", "post", "invariant"][(c - 1) % 3];
                text.push_str(&format!("  {kw} C{c} \"Condition {c} of use case {n}\";\n"));
            }
        }
        text.push_str("}\n");
    }
    for n in 1..=SEQUENCE_DIAGRAMS {
        let messages = if n <= MESSAGES - 4 * SEQUENCE_DIAGRAMS { 5 } else { 4 };
        text.push_str(&format!(
            "sequence SD{n:02} \"Scenario {n}\" for {} {{\n  lifeline Patient;\n  system Robot;\n",
            uc_ids[(n - 1) % uc_ids.len()]
        ));
        for m in 1..=messages {
            let (a, b) = if m % 2 == 1 { ("Patient", "Robot") } else { ("Robot", "Patient") };
            text.push_str(&format!("  msg {m} {a} -> {b} : step{m}(value);\n"));
        }
        text.push_str("}\n");
    }
    let sm_start = MIRAS_MODEL.find("statemachine").expect("fixture has a state machine");
    text.push_str(&MIRAS_MODEL[sm_start..]);
    let model = parse_str(&text).expect("stats fixture parses");

    let (mut store, _) = regenerate(&AnalysisStore::new("MIRAS"), &model, registry);

    // Keep only the first SD rows.
    let mut sd_kept = 0;
    store.rows.retain(|r| {
        if !r.table_id.starts_with("SD") {
            return true;
        }
        sd_kept += 1;
        sd_kept <= SD_ANALYZED
    });
    // Analysts added rows to the use-case tables.
    let uc_rows: Vec<RowAnchor> = store.rows.iter().filter(|r| r.table_id.starts_with("UC")).map(|r| r.anchor()).collect();
    for a in uc_rows.iter().cycle().take(UC_ANALYZED - uc_rows.len()) {
        store.duplicate_row(&a.table, a.line).expect("row exists");
    }

    store.hazards = (1..=HAZARDS)
        .map(|n| Hazard { id: format!("HN{n}"), text: format!("Hazard {n}"), note: None, pha_occurrences: None })
        .collect();
    store.recommendations = (1..=20)
        .map(|n| Recommendation { id: format!("Rec{n}"), text: format!("Recommendation {n}"), covers: vec![], sources: vec![] })
        .collect();

    let mut k = 0usize;
    for (prefix, interpreted, with_rec) in
        [("UC", UC_INTERPRETED, UC_WITH_REC), ("SD", SD_INTERPRETED, SD_WITH_REC), ("SM", SM_WITH_REC, SM_WITH_REC)]
    {
        let anchors: Vec<RowAnchor> =
            store.rows.iter().filter(|r| r.table_id.starts_with(prefix)).map(|r| r.anchor()).take(interpreted).collect();
        for (i, a) in anchors.iter().enumerate() {
            k += 1;
            let update = RowUpdate {
                deviation: Some(format!("Deviation {k}")),
                real_world_effect: Some("Injury".into()),
                hazards: Some(vec![format!("HN{}", k % HAZARDS + 1)]),
                recommendations: (i < with_rec).then(|| vec![format!("Rec{}", k % 20 + 1)]),
                ..RowUpdate::default()
            };
            store.set_row_fields(&a.table, a.line, update).expect("fixture edit");
        }
    }
    (model, store)
}
