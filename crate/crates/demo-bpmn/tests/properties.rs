mod common;

use demo_bpmn::json::{model_from_json, model_to_json};
use demo_bpmn::xml::{from_xml, to_xml, XmlOptions};
use demo_bpmn_core::compose::{compose, ComposeError};
use demo_bpmn_core::ctp::TraceBounds;
use demo_bpmn_core::expand::{expand_transaction, ExpandOptions};
use demo_bpmn_core::model::{parse_model, serialize_model, validate_model, TransactionKind};
use demo_bpmn_core::sim::{simulate, ChoicePolicy};
use demo_bpmn_core::PatternLevel;
use proptest::prelude::*;

fn level() -> impl Strategy<Value = PatternLevel> {
    prop::sample::select(PatternLevel::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn generated_models_are_valid(model in common::model_strategy()) {
        prop_assert!(validate_model(&model).is_empty());
    }

    #[test]
    fn dsl_round_trip(model in common::model_strategy()) {
        let text = serialize_model(&model);
        prop_assert_eq!(parse_model(&text).map_err(|d| d[0].to_string()), Ok(model));
    }

    #[test]
    fn json_round_trip(model in common::model_strategy()) {
        let text = model_to_json(&model);
        prop_assert_eq!(model_from_json(&text).map_err(|d| d[0].to_string()), Ok(model));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn block_xml_round_trip(
        name in "[ -~\t\n]{0,24}",
        roles in ("[A-Za-z][A-Za-z0-9_-]{0,5}", "[A-Za-z][A-Za-z0-9_-]{0,5}"),
        level in level(),
        production: bool,
        layout: bool,
    ) {
        let tk = TransactionKind::new("TK07", &name, &roles.0, &roles.1);
        let g = expand_transaction(&tk, &ExpandOptions::new(level).with_production(production));
        let xml = to_xml(&g, XmlOptions { layout }).unwrap();
        prop_assert_eq!(to_xml(&g, XmlOptions { layout }).unwrap(), xml.clone());
        prop_assert_eq!(from_xml(&xml).unwrap(), g);
    }

    #[test]
    fn composed_xml_round_trip(model in common::model_strategy(), level in level()) {
        let Some(root) = demo_bpmn_core::model::roots(&model).first().map(|t| t.id.clone()) else {
            return Ok(());
        };
        let g = match compose(&model.tree(&root), &ExpandOptions::new(level)) {
            Ok(g) => g,
            // The basic pattern has no decline or reject to hang a child on.
            Err(ComposeError::AnchorMissing { event, .. }) if level == PatternLevel::Basic => {
                prop_assert!(event == "dc" || event == "rj", "{}", event);
                return Ok(());
            }
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        let xml = to_xml(&g, XmlOptions::default()).unwrap();
        prop_assert_eq!(from_xml(&xml).unwrap(), g);
    }

    #[test]
    fn equal_scripts_give_equal_traces(
        script in prop::collection::vec(
            prop::sample::select(vec!["promise", "decline", "quit", "re-request", "declare", "accept", "reject", "stop", "re-declare"]),
            0..10,
        ),
        level in level(),
    ) {
        let g = expand_transaction(&TransactionKind::new("TK01", "t", "R0", "R1"), &ExpandOptions::new(level));
        let policy = ChoicePolicy::Scripted(script.iter().map(|s| s.to_string()).collect());
        let a = simulate(&g, &policy, TraceBounds::default()).map(|r| r.steps);
        let b = simulate(&g, &policy, TraceBounds::default()).map(|r| r.steps);
        prop_assert_eq!(a.map_err(|e| e.to_string()), b.map_err(|e| e.to_string()));
    }
}
