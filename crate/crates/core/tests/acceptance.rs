//! End-to-end acceptance criteria. Each criterion prints one PASS/FAIL line.

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use hazop_core::consistency::check_consistency;
use hazop_core::diagnostic::Level;
use hazop_core::dsl::{parse_str, serialize_model};
use hazop_core::engine::{generate_skeleton, merge_regenerated, regenerate};
use hazop_core::ids::RowAnchor;
use hazop_core::metrics::{compute_stats, guideword_usage};
use hazop_core::registry::{Attribute, ElementKind, GuideWordRegistry, DEFAULT_REGISTRY_JSON};
use hazop_core::report::{render_report, RenderOptions};
use hazop_core::store::{AnalysisStore, RowStatus};
use hazop_core::testkit::{miras_counts as mc, miras_model, miras_stats_fixture, miras_store};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration) -> Result<Duration, String> {
    let took = start.elapsed();
    check(took < limit, || format!("took {took:?}, limit {limit:?}"))?;
    Ok(took)
}

fn registry() -> GuideWordRegistry {
    GuideWordRegistry::default_registry()
}

fn cross_product() -> Outcome {
    let start = Instant::now();
    let model = miras_model();
    let uc02 = model.use_case("UC02").unwrap();
    check(uc02.conditions.len() == 9, || format!("UC02 has {} conditions", uc02.conditions.len()))?;
    let words = registry().guide_words(ElementKind::UseCaseCondition).len();
    check(words == 6, || format!("use-case group has {words} guide words"))?;
    let rows = generate_skeleton(&model, &registry());
    let n = rows.iter().filter(|r| r.table_id == "UC02").count();
    check(n == 54, || format!("UC02 has {n} rows"))?;
    let took = within(start, Duration::from_secs(1))?;
    Ok(format!("UC02: 9 conditions x 6 guide words = {n} rows in {took:?}"))
}

fn count_law() -> Outcome {
    let start = Instant::now();
    let reg = registry();
    let mut total = 0;
    for seed in 0..100 {
        let m = common::random_model(&mut common::rng(1000 + seed));
        let got = generate_skeleton(&m, &reg).len();
        let want = common::brute_force_count(&m, DEFAULT_REGISTRY_JSON);
        check(got == want, || format!("seed {seed}: engine {got}, brute force {want}"))?;
        total += got;
    }
    let took = within(start, Duration::from_secs(10))?;
    Ok(format!("100 models, {total} rows, all equal to brute force, {took:?}"))
}

fn miras_stats_echo() -> Outcome {
    let (model, store) = miras_stats_fixture(&registry());
    let s = compute_stats(&model, &store);
    let expect = [
        ("use cases", s.use_case.element_count, mc::USE_CASES),
        ("conditions", s.use_case.sub_element_count, mc::CONDITIONS),
        ("UC analyzed", s.use_case.analyzed_deviations, mc::UC_ANALYZED),
        ("UC interpreted", s.use_case.interpreted_deviations, mc::UC_INTERPRETED),
        ("UC with recommendation", s.use_case.interpreted_with_recommendation, mc::UC_WITH_REC),
        ("sequence diagrams", s.sequence.element_count, mc::SEQUENCE_DIAGRAMS),
        ("messages", s.sequence.sub_element_count, mc::MESSAGES),
        ("SD analyzed", s.sequence.analyzed_deviations, mc::SD_ANALYZED),
        ("SD interpreted", s.sequence.interpreted_deviations, mc::SD_INTERPRETED),
        ("SD with recommendation", s.sequence.interpreted_with_recommendation, mc::SD_WITH_REC),
        ("state machines", s.state_machine.element_count, mc::STATE_MACHINES),
        ("states", s.state_count, mc::STATES),
        ("transitions", s.state_machine.sub_element_count, mc::TRANSITIONS),
        ("SM analyzed", s.state_machine.analyzed_deviations, mc::SM_ANALYZED),
        ("SM with recommendation", s.state_machine.interpreted_with_recommendation, mc::SM_WITH_REC),
        ("hazards", s.hazard_count, mc::HAZARDS),
    ];
    for (what, got, want) in expect {
        check(got == want, || format!("{what}: got {got}, expected {want}"))?;
    }
    // literal published values, independent of the fixture constants
    check(
        (s.use_case.analyzed_deviations, s.use_case.interpreted_deviations, s.use_case.interpreted_with_recommendation)
            == (317, 134, 72),
        || "UC triple differs from 317/134/72".into(),
    )?;
    check((s.state_count, s.state_machine.sub_element_count) == (9, 19), || "SM shape differs from 9/19".into())?;
    Ok("UC 317/134/72, SD 676/163/85, SM 1 machine 9 states 19 transitions 215/161, 16 hazards".into())
}

fn traceability_closure() -> Outcome {
    let model = miras_model();
    let base = miras_store(&model, &registry());
    let errors = |s: &AnalysisStore| -> Vec<_> {
        check_consistency(&model, s).into_iter().filter(|d| d.level == Level::Error).collect()
    };
    let e = errors(&base);
    check(e.is_empty(), || format!("fixture has errors: {e:?}"))?;
    let rec2 = base.recommendation("Rec2").unwrap();
    check(rec2.covers == ["HN6"] && rec2.sources == [RowAnchor::new("UC02", 15)], || {
        format!("Rec2 covers {:?} sources {:?}", rec2.covers, rec2.sources)
    })?;

    type Inject = fn(&mut AnalysisStore);
    let injections: [(&str, &str, Inject); 6] = [
        ("row hazard", "HN99", |s| s.rows[0].hazards.push("HN99".into())),
        ("row recommendation", "Rec77", |s| s.rows[5].recommendations.push("Rec77".into())),
        ("recommendation covers", "HN42", |s| s.recommendations[1].covers.push("HN42".into())),
        ("recommendation source", "UC02.999", |s| s.recommendations[0].sources.push(RowAnchor::new("UC02", 999))),
        ("hypothesis source", "SD01.500", |s| s.hypotheses[0].sources.push(RowAnchor::new("SD01", 500))),
        ("row on a removed condition", "UC02.C99", |s| {
            s.rows[2].attribute_ref.element = "UC02.C99".into();
        }),
    ];
    for (what, bad, inject) in injections {
        let mut s = base.clone();
        inject(&mut s);
        let e = errors(&s);
        check(e.len() == 1, || format!("{what}: {} errors: {e:?}", e.len()))?;
        check(e[0].message.contains(bad) || e[0].element.as_deref() == Some(bad), || {
            format!("{what}: diagnostic does not name {bad}: {}", e[0])
        })?;
    }
    Ok("MIRAS fixture clean; 6 single injections each give exactly 1 error naming the bad id".into())
}

fn merge_safety() -> Outcome {
    let reg = registry();
    let (mut kept, mut added, mut orphaned) = (0, 0, 0);
    for seed in 0..100 {
        let r = &mut common::rng(5000 + seed);
        let m = common::random_model(r);
        let (mut store, _) = regenerate(&AnalysisStore::default(), &m, &reg);
        common::fill_rows(r, &mut store);
        let edited = common::edit_model(r, &m);
        let fresh = generate_skeleton(&edited, &reg);
        let fresh_keys: BTreeSet<_> = fresh.iter().map(|f| (&f.table_id, &f.attribute_ref, &f.guide_word)).collect();
        let (merged, report) = merge_regenerated(&store, &fresh);

        for old in &store.rows {
            let new = merged.row(&old.table_id, old.line).ok_or_else(|| format!("seed {seed}: {} lost", old.anchor()))?;
            check(new.key() == old.key(), || format!("seed {seed}: {} changed key", old.anchor()))?;
            if fresh_keys.contains(&(&old.table_id, &old.attribute_ref, &old.guide_word)) {
                check(new.analyst_fields() == old.analyst_fields(), || format!("seed {seed}: {} content changed", old.anchor()))?;
                check(new.status != RowStatus::Orphaned, || format!("seed {seed}: kept row orphaned"))?;
            } else {
                check(new.status == RowStatus::Orphaned, || format!("seed {seed}: {} not orphaned", old.anchor()))?;
                check(new.analyst_fields() == old.analyst_fields(), || format!("seed {seed}: orphan content changed"))?;
            }
        }
        let mut seen = BTreeSet::new();
        for row in &merged.rows {
            check(seen.insert((row.table_id.clone(), row.line)), || format!("seed {seed}: {} used twice", row.anchor()))?;
            if store.row(&row.table_id, row.line).is_none() {
                check(row.line > store.max_line(&row.table_id), || format!("seed {seed}: {} reuses a line", row.anchor()))?;
            }
        }
        kept += report.kept;
        added += report.added;
        orphaned += report.orphaned;
    }
    Ok(format!("100 sequences: kept {kept}, added {added}, orphaned {orphaned}; no content change, no line reuse"))
}

fn round_trip() -> Outcome {
    for seed in 0..500 {
        let m = common::random_model(&mut common::rng(20_000 + seed));
        let text = serialize_model(&m);
        let back = parse_str(&text).map_err(|e| format!("seed {seed}: {:?}", e.first()))?;
        check(back == m, || format!("seed {seed}: parse(serialize(m)) != m"))?;
        let again = serialize_model(&back);
        check(again == text, || format!("seed {seed}: second serialization differs"))?;
    }
    Ok("500 models: structural identity and byte-idempotent serialization".into())
}

fn report_determinism() -> Outcome {
    let reg = registry();
    let model = miras_model();
    let store = miras_store(&model, &reg);
    let stats = compute_stats(&model, &store);
    let opts = RenderOptions { guideword_usage: Some(guideword_usage(&store, &reg)), ..Default::default() };
    let a = render_report(&model, &store, &stats, &opts).map_err(|e| e.to_string())?;
    let b = render_report(&model, &store, &stats, &opts).map_err(|e| e.to_string())?;
    check(a == b, || "two renders differ".into())?;
    let broken = common::broken_links(&a);
    check(broken.is_empty(), || format!("broken links: {broken:?}"))?;
    for needle in ["href=\"#UC02.15\"", "href=\"#HN6\"", "id=\"UC02.15\"", "id=\"HN6\"", "href=\"#Rec2\""] {
        check(a.contains(needle), || format!("missing {needle}"))?;
    }

    let (smodel, sstore) = miras_stats_fixture(&reg);
    let big = render_report(&smodel, &sstore, &compute_stats(&smodel, &sstore), &RenderOptions::default())
        .map_err(|e| e.to_string())?;
    let broken = common::broken_links(&big);
    check(broken.is_empty(), || format!("stats fixture broken links: {broken:?}"))?;
    Ok(format!(
        "byte-identical renders ({} bytes); {} + {} internal links, 0 broken",
        a.len(),
        common::link_count(&a),
        common::link_count(&big)
    ))
}

fn applicability_filtering() -> Outcome {
    let reg = registry();
    let model = miras_model();
    let rows = generate_skeleton(&model, &reg);
    let ic_rows = |rows: &[hazop_core::engine::SkeletonRow], element: &str| {
        rows.iter()
            .filter(|r| r.attribute_ref.element == element && r.attribute_ref.attribute() == Attribute::InteractionConstraint)
            .count()
    };
    for m in ["SD01.M1", "SD01.M2", "SD01.M3"] {
        let n = ic_rows(&rows, m);
        check(n == 0, || format!("{m} is unguarded but has {n} interaction_constraint rows"))?;
    }
    check(ic_rows(&rows, "SD01.M4") > 0, || "guarded SD01.M4 lost its interaction_constraint rows".into())?;

    let mut unguarded = 0;
    for seed in 0..100 {
        let m = common::random_model(&mut common::rng(9000 + seed));
        let rows = generate_skeleton(&m, &reg);
        for sd in &m.sequence_diagrams {
            for msg in sd.messages.iter().filter(|x| x.guard.is_none()) {
                unguarded += 1;
                let n = ic_rows(&rows, &sd.message_id(msg));
                check(n == 0, || format!("seed {seed}: {} has {n} rows", sd.message_id(msg)))?;
            }
        }
    }
    Ok(format!("0 interaction_constraint rows on {} unguarded messages", unguarded + 3))
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 8] = [
        ("cross-product count", cross_product),
        ("count law oracle", count_law),
        ("MIRAS fixture echo", miras_stats_echo),
        ("traceability closure", traceability_closure),
        ("merge safety", merge_safety),
        ("round-trip", round_trip),
        ("report determinism and link closure", report_determinism),
        ("applicability filtering", applicability_filtering),
    ];
    let mut failed = Vec::new();
    for (name, f) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                println!("FAIL  {name}: {why}");
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
