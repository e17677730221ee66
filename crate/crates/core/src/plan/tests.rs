use proptest::prelude::*;

use super::*;
use crate::gateway::{FixtureResponse, Operation};
use crate::testkit::pdf::gradient_descent_paper;

const GD_SPEC: &str = include_str!("../../assets/benchmark/specs/ML-GD.spec");

fn benchmark_specs() -> Vec<(String, String)> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/assets/benchmark/specs");
    let mut out: Vec<(String, String)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_stem().unwrap().to_string_lossy().into_owned(), std::fs::read_to_string(&p).unwrap())
        })
        .collect();
    out.sort();
    out
}

fn planner_fixture(reply: &str) -> (tempfile::TempDir, Gateway, PaperDocument, PlanningPromptOptions) {
    let dir = tempfile::tempdir().unwrap();
    let gateway = Gateway::replay(dir.path());
    let doc = crate::ingest::parse_document(&gradient_descent_paper()).unwrap();
    let opts = PlanningPromptOptions::default();
    let req = build_planning_prompt(&doc, &opts);
    gateway.record(Operation::Completion, &req, FixtureResponse::Text(reply.into())).unwrap();
    (dir, gateway, doc, opts)
}

#[test]
fn six_module_plan_from_replay() {
    let reply = format!("Here is the plan.\n\n{GD_SPEC}\nLet me know if you need changes.");
    let (_dir, gateway, doc, opts) = planner_fixture(&reply);
    let spec = plan_modules(&doc, &gateway, &opts).unwrap();
    assert_eq!(spec.modules.len(), 6);
    assert_eq!(spec.module_ids(), vec![1, 2, 3, 4, 5, 6]);
    assert_eq!(spec.modules[2].title, "Momentum vs Adam");
}

#[test]
fn prose_without_plan_is_a_parse_error_after_one_retry() {
    let prose = "This document studies optimizers. I would build a nice demo.";
    let (_dir, gateway, doc, opts) = planner_fixture(prose);
    let retry = reformat_request(&build_planning_prompt(&doc, &opts), prose, "no `spec` block found");
    gateway.record(Operation::Completion, &retry, FixtureResponse::Text("Still just prose.".into())).unwrap();
    assert!(matches!(plan_modules(&doc, &gateway, &opts), Err(PlanError::SpecParse(_))));
}

#[test]
fn reformat_retry_can_recover() {
    let prose = "This document studies optimizers.";
    let (_dir, gateway, doc, opts) = planner_fixture(prose);
    let retry = reformat_request(&build_planning_prompt(&doc, &opts), prose, "no `spec` block found");
    gateway.record(Operation::Completion, &retry, FixtureResponse::Text(GD_SPEC.into())).unwrap();
    assert_eq!(plan_modules(&doc, &gateway, &opts).unwrap().modules.len(), 6);
}

#[test]
fn duplicate_ids_surface_as_parse_error() {
    let dup = GD_SPEC.replace("id: 2\n", "id: 1\n");
    let (_dir, gateway, doc, opts) = planner_fixture(&dup);
    let problem = "module 1: duplicate module id";
    let retry = reformat_request(&build_planning_prompt(&doc, &opts), &dup, problem);
    gateway.record(Operation::Completion, &retry, FixtureResponse::Text(dup.clone())).unwrap();
    match plan_modules(&doc, &gateway, &opts) {
        Err(PlanError::SpecParse(msg)) => assert!(msg.contains("duplicate"), "{msg}"),
        other => panic!("expected SpecParse, got {other:?}"),
    }
}

#[test]
fn header_without_modules_is_empty_plan() {
    let (_dir, gateway, doc, opts) = planner_fixture("```spec\ntopic: t\nnavigation: sidebar\nshell: s\n```\n");
    assert!(matches!(plan_modules(&doc, &gateway, &opts), Err(PlanError::EmptyPlan)));
}

#[test]
fn valid_spec_has_no_violations() {
    assert_eq!(validate_spec(&parse_spec(GD_SPEC).unwrap()), vec![]);
}

#[test]
fn module_without_controls_names_the_module() {
    let mut spec = parse_spec(GD_SPEC).unwrap();
    spec.modules[3].controls.clear();
    let v = validate_spec(&spec);
    assert_eq!(v.len(), 1);
    assert_eq!(v[0].module, Some(4));
}

#[test]
fn ordinal_gap_is_a_violation() {
    let mut spec = parse_spec(GD_SPEC).unwrap();
    spec.modules[1].id = 7;
    assert_eq!(validate_spec(&spec).len(), 1);
}

#[test]
fn all_benchmark_specs_validate() {
    let specs = benchmark_specs();
    assert_eq!(specs.len(), 19);
    for (name, text) in specs {
        let spec = parse_spec(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(validate_spec(&spec), vec![], "{name}");
        assert_eq!(parse_spec(&serialize_spec(&spec)).unwrap(), spec, "{name}");
    }
}

#[test]
fn control_kinds_parse_loosely() {
    assert_eq!("Drag Surface".parse::<ControlKind>(), Ok(ControlKind::DragSurface));
    assert_eq!("text_input".parse::<ControlKind>(), Ok(ControlKind::TextInput));
    assert!("knob".parse::<ControlKind>().is_err());
    assert!(parse_spec(&GD_SPEC.replace("control: dropdown", "control: knob")).is_err());
}

#[test]
fn continuation_lines_join_the_previous_field() {
    let text = "```spec\ntopic: first half\nsecond half\nnavigation: sidebar\nshell: s\n```";
    assert_eq!(parse_spec(text).unwrap().topic, "first half second half");
}

fn line() -> impl Strategy<Value = String> {
    "[A-Za-z0-9][A-Za-z0-9 ,.()=-]{0,30}[A-Za-z0-9]".prop_map(|s| s)
}

/// (title, mechanism, controls, outputs, narrative)
type EntryParts = (String, String, Vec<(ControlKind, String, String)>, Vec<String>, String);

fn entry() -> impl Strategy<Value = EntryParts> {
    (
        line(),
        line(),
        prop::collection::vec((prop::sample::select(ControlKind::ALL.to_vec()), line(), prop::option::of(line())), 1..4),
        prop::collection::vec(line(), 1..3),
        line(),
    )
        .prop_map(|(t, m, c, o, n)| (t, m, c.into_iter().map(|(k, p, r)| (k, p, r.unwrap_or_default())).collect(), o, n))
}

fn spec_strategy() -> impl Strategy<Value = GenerationSpec> {
    (line(), line(), line(), prop::collection::vec(entry(), 1..7)).prop_map(|(topic, navigation, shell, entries)| GenerationSpec {
        topic,
        navigation,
        shell,
        modules: entries
            .into_iter()
            .enumerate()
            .map(|(i, (title, mechanism, controls, outputs, narrative))| ModulePlanEntry {
                id: i as u32 + 1,
                title,
                mechanism,
                controls: controls.into_iter().map(|(kind, parameter, range)| Control { kind, parameter, range }).collect(),
                outputs,
                narrative,
            })
            .collect(),
    })
}

proptest! {
    #[test]
    fn wire_round_trip_is_identity(spec in spec_strategy()) {
        let text = serialize_spec(&spec);
        let parsed = parse_spec(&text).unwrap();
        prop_assert_eq!(&parsed, &spec);
        prop_assert_eq!(serialize_spec(&parsed), text);
    }

    #[test]
    fn generated_specs_are_valid_and_ordinals_are_positions(spec in spec_strategy()) {
        prop_assert!(validate_spec(&spec).is_empty());
        for (i, m) in spec.modules.iter().enumerate() {
            prop_assert_eq!(m.id as usize, i + 1);
        }
    }
}
