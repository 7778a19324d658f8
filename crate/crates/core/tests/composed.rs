use demo_bpmn_core::bpmn::validate_bpmn;
use demo_bpmn_core::compose::{compose, fragment_shape};
use demo_bpmn_core::ctp::{PatternLevel, TraceBounds};
use demo_bpmn_core::expand::ExpandOptions;
use demo_bpmn_core::model::poligyn;
use demo_bpmn_core::sim::{enumerate_bpmn_traces, explore};

fn poligyn_at(level: PatternLevel) -> demo_bpmn_core::bpmn::BpmnGraph {
    compose(&poligyn(), &ExpandOptions::new(level)).expect("poligyn composes")
}

#[test]
fn poligyn_is_sound_at_every_level() {
    for level in PatternLevel::ALL {
        let g = poligyn_at(level);
        assert!(validate_bpmn(&g).is_empty(), "{level}");
        let e = explore(&g, Some(level), TraceBounds::default());
        assert!(
            e.is_sound(),
            "{level}: {:?} {:?}",
            e.deadlocks.first(),
            e.violations.first()
        );
        assert!(e.completed > 0);
    }
}

#[test]
fn optional_child_sits_behind_one_split() {
    for level in [PatternLevel::Basic, PatternLevel::Standard] {
        let shape = fragment_shape(&poligyn_at(level), "TK02").unwrap();
        assert_eq!(shape.host_pool, "TK01_executor");
        assert_eq!(shape.optional_splits, ["TK02_C_split"], "{level}");
        assert!(shape.enclosing_loops.is_empty(), "{level}");
    }
}

#[test]
fn repeated_child_sits_in_one_loop() {
    for level in [PatternLevel::Basic, PatternLevel::Standard] {
        let shape = fragment_shape(&poligyn_at(level), "TK03").unwrap();
        assert_eq!(shape.enclosing_loops.len(), 1, "{level}: {shape:?}");
        assert!(shape.optional_splits.is_empty());
    }
}

#[test]
fn basic_poligyn_runs_children_inside_the_promise() {
    let t = enumerate_bpmn_traces(&poligyn_at(PatternLevel::Basic), TraceBounds::default());
    assert_eq!(t.deadlock_count, 0);
    // TK02 skipped or run once, times TK03 run one to three times.
    assert_eq!(t.runs.len(), 6);
    for run in &t.runs {
        let line: Vec<&str> = run.iter().map(|s| s.message.as_str()).collect();
        let pm = line.iter().position(|m| *m == "pm(TK01)").unwrap();
        let da = line.iter().position(|m| *m == "da(TK01)").unwrap();
        assert!(line[pm + 1..da].iter().all(|m| !m.ends_with("(TK01)")));
        assert!(line[pm + 1..da].contains(&"ac(TK03)"));
    }
}
