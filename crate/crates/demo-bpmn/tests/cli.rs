mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::data_dir;

fn demo_bpmn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_demo-bpmn"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn data(name: &str) -> String {
    data_dir().join(name).to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn compile_basic_poligyn_has_four_participants() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("poligyn.bpmn");
    let o = demo_bpmn(&[
        "compile",
        &data("poligyn.demo"),
        "--level",
        "basic",
        "-o",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let xml = std::fs::read_to_string(out).unwrap();
    assert_eq!(xml.matches("<bpmn:participant ").count(), 4);
}

#[test]
fn basic_block_conforms() {
    let o = demo_bpmn(&["conformance", "--level", "basic", &data("tk01-basic.bpmn")]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("1 = 1 traces"), "{}", stdout(&o));
}

#[test]
fn conformance_reads_the_level_from_the_messages() {
    for (file, line) in [
        ("tk01-basic.bpmn", "1 = 1 traces"),
        ("tk01-standard.bpmn", "21 = 21 traces"),
        ("tk01-complete.bpmn", "⊂"),
    ] {
        let o = demo_bpmn(&["conformance", &data(file)]);
        assert_eq!(o.status.code(), Some(0), "{file}: {}", stdout(&o));
        assert!(stdout(&o).contains(line), "{file}: {}", stdout(&o));
    }
}

#[test]
fn cyclic_model_has_one_acyclic_diagnostic() {
    let o = demo_bpmn(&["validate", &data("cyclic.demo")]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert_eq!(err.matches("error[ACYCLIC]").count(), 1);
    assert!(
        err.starts_with(&format!("{}:4:1:", data("cyclic.demo"))),
        "{err}"
    );
}

#[test]
fn compile_reproduces_the_goldens() {
    for level in ["basic", "standard", "complete"] {
        let o = demo_bpmn(&["compile", &data("poligyn.demo"), "--level", level]);
        assert_eq!(o.status.code(), Some(0));
        let golden =
            std::fs::read_to_string(data_dir().join(format!("poligyn-{level}.bpmn"))).unwrap();
        assert_eq!(stdout(&o), golden, "{level}");

        let o = demo_bpmn(&[
            "expand",
            "TK01",
            "--model",
            &data("poligyn.demo"),
            "--level",
            level,
        ]);
        let golden =
            std::fs::read_to_string(data_dir().join(format!("tk01-{level}.bpmn"))).unwrap();
        assert_eq!(stdout(&o), golden, "{level}");
    }
    let o = demo_bpmn(&[
        "compile",
        &data("poligyn.demo"),
        "--include-production",
        "--layout",
    ]);
    let golden = std::fs::read_to_string(data_dir().join("poligyn-standard-layout.bpmn")).unwrap();
    assert_eq!(stdout(&o), golden);
    let o = demo_bpmn(&["compile", &data("poligyn.demo"), "--format", "dot"]);
    let golden = std::fs::read_to_string(data_dir().join("poligyn-standard.dot")).unwrap();
    assert_eq!(stdout(&o), golden);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let args = [
        "conformance",
        &data("poligyn-standard.bpmn"),
        "--format",
        "json",
    ];
    let a = demo_bpmn(&args);
    let b = demo_bpmn(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["result"], "PASS");
    assert_eq!(v["deadlock_count"], 0);
}

#[test]
fn roundtrip_accepts_every_golden() {
    for path in common::golden_bpmn_files() {
        let o = demo_bpmn(&["roundtrip", path.to_str().unwrap()]);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{}: {}",
            path.display(),
            stderr(&o)
        );
    }
}

#[test]
fn roundtrip_reports_reformatted_input() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(data_dir().join("tk01-basic.bpmn")).unwrap();
    let f = write(
        dir.path(),
        "b.bpmn",
        &text.replacen("  <bpmn:", "    <bpmn:", 1),
    );
    let o = demo_bpmn(&["roundtrip", &f]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("error[ROUNDTRIP]"), "{}", stderr(&o));
}

#[test]
fn multiple_roots_need_a_choice() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(
        dir.path(),
        "two.demo",
        "transaction TK01 \"a\" initiator CA00 executor A01\ntransaction TK02 \"b\" initiator CA00 executor A02\n",
    );
    let o = demo_bpmn(&["compile", &f]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--root"), "{}", stderr(&o));
    let o = demo_bpmn(&["compile", &f, "--root", "TK02"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).matches("<bpmn:participant ").count(), 2);
}

#[test]
fn syntax_errors_exit_2_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(
        dir.path(),
        "bad.demo",
        "transaction TK01 \"a\" initiator CA00 executor A01\n(TK01/pm) -> TK02\n",
    );
    let o = demo_bpmn(&["validate", &f]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with(&format!("{f}:2:")), "{}", stderr(&o));
    assert!(stderr(&o).contains("error[SYNTAX]"));

    let f = write(
        dir.path(),
        "bad.json",
        "{\"transactions\": [\n  {\"id\": 1}",
    );
    let o = demo_bpmn(&["compile", &f]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with(&format!("{f}:2:")), "{}", stderr(&o));
}

#[test]
fn missing_input_exits_2() {
    let o = demo_bpmn(&["validate", "/nonexistent/model.demo"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("cannot read"));
}

#[test]
fn json_model_compiles_like_the_dsl() {
    let dir = tempfile::tempdir().unwrap();
    let json = demo_bpmn::json::model_to_json(&demo_bpmn_core::model::poligyn());
    let f = write(dir.path(), "poligyn.json", &json);
    let o = demo_bpmn(&["compile", &f, "--level", "basic"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let golden = std::fs::read_to_string(data_dir().join("poligyn-basic.bpmn")).unwrap();
    assert_eq!(stdout(&o), golden);
}

#[test]
fn xml_problems_are_classified() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(data_dir().join("tk01-basic.bpmn")).unwrap();

    let f = write(dir.path(), "trunc.bpmn", &text[..text.len() / 2]);
    let o = demo_bpmn(&["validate", &f]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));

    let timer = text.replacen(
        "<bpmn:startEvent id=\"TK01_I_start\"/>",
        "<bpmn:startEvent id=\"TK01_I_start\"><bpmn:timerEventDefinition/></bpmn:startEvent>",
        1,
    );
    assert_ne!(timer, text);
    let f = write(dir.path(), "timer.bpmn", &timer);
    let o = demo_bpmn(&["validate", &f]);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).contains("timerEventDefinition"),
        "{}",
        stderr(&o)
    );

    let ghost = text.replacen("targetRef=\"TK01_I_", "targetRef=\"ghost_", 1);
    let f = write(dir.path(), "ghost.bpmn", &ghost);
    let o = demo_bpmn(&["validate", &f]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("ghost_"), "{}", stderr(&o));
}

#[test]
fn bpmn_diagnostics_point_at_the_element() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(data_dir().join("tk01-basic.bpmn")).unwrap();
    // Point the initiator's first sequence flow back at its own start event.
    let line = text
        .lines()
        .find(|l| l.contains("<bpmn:sequenceFlow "))
        .unwrap();
    let target = line
        .split("targetRef=\"")
        .nth(1)
        .unwrap()
        .split('"')
        .next()
        .unwrap();
    let source = line
        .split("sourceRef=\"")
        .nth(1)
        .unwrap()
        .split('"')
        .next()
        .unwrap();
    let looped = line.replacen(
        &format!("targetRef=\"{target}\""),
        &format!("targetRef=\"{source}\""),
        1,
    );
    let f = write(dir.path(), "loop.bpmn", &text.replacen(line, &looped, 1));
    let o = demo_bpmn(&["validate", &f]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    let start = format!("id=\"{source}\"");
    let row = text.lines().position(|l| l.contains(&start)).unwrap() + 1;
    let col = text.lines().nth(row - 1).unwrap().find('<').unwrap() + 1;
    let want = format!("{f}:{row}:{col}: error[START_IN]");
    assert!(err.lines().any(|l| l.starts_with(&want)), "{err}");
}

#[test]
fn missing_stop_notification_deadlocks_after_reject() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(data_dir().join("tk01-standard.bpmn")).unwrap();
    let kept: Vec<&str> = text
        .lines()
        .filter(|l| !(l.contains("<bpmn:messageFlow ") && l.contains("messageRef=\"TK01_msg_st\"")))
        .collect();
    assert_eq!(kept.len() + 1, text.lines().count());
    let f = write(dir.path(), "nostop.bpmn", &(kept.join("\n") + "\n"));
    let o = demo_bpmn(&["conformance", &f]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.contains("result: FAIL"), "{out}");
    let witness = out
        .lines()
        .skip_while(|l| !l.starts_with("deadlocks:"))
        .nth(1)
        .unwrap();
    assert!(witness.contains("rj(TK01)"), "{out}");
}

#[test]
fn simulate_prints_the_trace() {
    let o = demo_bpmn(&[
        "simulate",
        &data("tk01-standard.bpmn"),
        "--script",
        "decline,quit",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o), "rq(TK01)·dc(TK01)·qt(TK01)\n");

    let o = demo_bpmn(&[
        "simulate",
        &data("tk01-standard.bpmn"),
        "--script",
        "decline",
    ]);
    assert_eq!(o.status.code(), Some(1));

    let a = demo_bpmn(&[
        "simulate",
        &data("poligyn.demo"),
        "--level",
        "complete",
        "--seed",
        "11",
    ]);
    let b = demo_bpmn(&[
        "simulate",
        &data("poligyn.demo"),
        "--level",
        "complete",
        "--seed",
        "11",
    ]);
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).starts_with("rq(TK01)"));
}

#[test]
fn bad_flags_are_usage_errors() {
    let o = demo_bpmn(&["compile", &data("poligyn.demo"), "--level", "ultimate"]);
    assert_eq!(o.status.code(), Some(2));
    let o = demo_bpmn(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("roundtrip"));
}
