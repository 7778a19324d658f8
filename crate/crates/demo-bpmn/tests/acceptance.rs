//! Acceptance run: prints one `criterion N: PASS|FAIL` line per criterion
//! and exits non-zero if any fails.

mod common;

use std::collections::BTreeSet;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use demo_bpmn::xml::{from_xml, to_xml, XmlError, XmlOptions};
use demo_bpmn_core::bpmn::{
    rules as bpmn_rules, validate_bpmn, BpmnGraph, MessageFlow, SequenceFlow,
};
use demo_bpmn_core::compose::{compose, fragment_shape};
use demo_bpmn_core::ctp::TraceBounds;
use demo_bpmn_core::expand::{expand_transaction, ExpandOptions};
use demo_bpmn_core::model::{parse_model, poligyn, serialize_model, TransactionKind};
use demo_bpmn_core::sim::{enumerate_bpmn_traces, explore, ChoicePolicy, Outcome, Simulator};
use demo_bpmn_core::{build_ctp, PatternLevel};
use proptest::strategy::{Strategy, ValueTree};
use proptest::test_runner::{Config, TestRunner};

type Check = Result<String, String>;

struct Criterion {
    name: &'static str,
    check: fn() -> Check,
    budget: Duration,
}

fn block(level: PatternLevel) -> BpmnGraph {
    expand_transaction(
        &TransactionKind::new("TK01", "patient problem diagnosing", "CA00", "A01"),
        &ExpandOptions::new(level),
    )
}

fn bounds(loop_bound: u32, revoke_bound: u32) -> TraceBounds {
    TraceBounds {
        loop_bound,
        revoke_bound,
    }
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn happy_flow() -> Check {
    let traces = enumerate_bpmn_traces(&block(PatternLevel::Basic), bounds(2, 2)).traces();
    let lines: Vec<String> = traces.iter().map(|t| t.to_string()).collect();
    ensure(lines == ["rq·pm·da·ac"], || format!("got {lines:?}"))?;
    Ok("{ rq·pm·da·ac }".into())
}

fn standard_oracle() -> Check {
    let g = block(PatternLevel::Standard);
    let machine = build_ctp(PatternLevel::Standard);
    let mut counts = Vec::new();
    for u in 0..=2 {
        let bpmn: BTreeSet<String> = enumerate_bpmn_traces(&g, bounds(u, 0))
            .traces()
            .iter()
            .map(|t| t.to_string())
            .collect();
        let ctp: BTreeSet<String> = machine
            .enumerate_traces(u, 0)
            .iter()
            .map(|t| t.to_string())
            .collect();
        let brute = common::brute_force_standard(u);
        let closed = ((u + 1) + 2 * (u + 1) * (u + 1)) as usize;
        ensure(brute.len() == closed, || {
            format!("u={u}: brute force finds {}", brute.len())
        })?;
        ensure(ctp == brute, || {
            format!("u={u}: machine and brute force differ")
        })?;
        ensure(bpmn == ctp, || {
            format!(
                "u={u}: missing {:?}, extra {:?}",
                ctp.difference(&bpmn).next(),
                bpmn.difference(&ctp).next()
            )
        })?;
        counts.push(bpmn.len().to_string());
    }
    Ok(format!("counts {}", counts.join(", ")))
}

fn revocation() -> Check {
    let g = block(PatternLevel::Complete);
    let sim = Simulator::new(&g, bounds(2, 2));
    let script = |s: &[&str]| ChoicePolicy::Scripted(s.iter().map(|x| x.to_string()).collect());
    let allowed = sim.run(&script(&[
        "promise",
        "declare",
        "accept",
        "revoke-accept",
        "allow",
    ]));
    ensure(allowed.outcome == Outcome::ScriptExhausted, || {
        format!("allow run: {:?}", allowed.outcome)
    })?;
    ensure(
        allowed.trace().to_string() == "rq·pm·da·ac·rv-ac·al",
        || allowed.trace().to_string(),
    )?;
    let sends = sim.enabled_sends(&allowed.marking, "TK01_executor");
    ensure(sends.contains("da") && sends.contains("rv-da"), || {
        format!("executor may send {sends:?}")
    })?;

    let before = sim.run(&script(&["pm", "da", "ac"]));
    let refused = sim.run(&script(&["pm", "da", "ac", "rv-ac", "rf"]));
    ensure(
        refused.trace().to_string() == "rq·pm·da·ac·rv-ac·rf",
        || refused.trace().to_string(),
    )?;
    ensure(before.marking.same_place(&refused.marking), || {
        "refuse does not restore the marking".into()
    })?;
    Ok(format!(
        "executor may send {}",
        sends.into_iter().collect::<Vec<_>>().join(", ")
    ))
}

fn deadlock_freedom() -> Check {
    let mut states = 0;
    for level in PatternLevel::ALL {
        for (what, g) in [
            ("block", block(level)),
            (
                "poligyn",
                compose(&poligyn(), &ExpandOptions::new(level)).unwrap(),
            ),
        ] {
            let e = explore(&g, Some(level), bounds(2, 2));
            ensure(e.deadlock_count == 0 && !e.truncated, || {
                format!(
                    "{level} {what}: {} deadlocks, first {:?}",
                    e.deadlock_count,
                    e.deadlocks.first()
                )
            })?;
            states += e.states;
        }
    }
    Ok(format!("{states} markings explored"))
}

fn poligyn_structure() -> Check {
    for level in [PatternLevel::Basic, PatternLevel::Standard] {
        let g = compose(&poligyn(), &ExpandOptions::new(level)).map_err(|e| e.to_string())?;
        ensure(g.pools.len() == 4, || {
            format!("{level}: {} pools", g.pools.len())
        })?;
        let name = |id: &str| {
            g.find_node(id)
                .map(|(_, n)| n.name.clone())
                .unwrap_or_default()
        };

        let tk02 = fragment_shape(&g, "TK02").ok_or("no TK02 fragment")?;
        ensure(
            tk02.optional_splits.len() == 1 && tk02.enclosing_loops.is_empty(),
            || format!("{level}: {tk02:?}"),
        )?;
        ensure(name(&tk02.optional_splits[0]).ends_with("0..1"), || {
            format!("{level}: split {}", tk02.optional_splits[0])
        })?;

        let tk03 = fragment_shape(&g, "TK03").ok_or("no TK03 fragment")?;
        ensure(
            tk03.enclosing_loops.len() == 1 && tk03.optional_splits.is_empty(),
            || format!("{level}: {tk03:?}"),
        )?;
        let pool = g.pool(&tk03.host_pool).ok_or("no host pool")?;
        let back = pool
            .sequence_flows
            .iter()
            .find(|f| f.id == tk03.enclosing_loops[0])
            .ok_or("loop edge is not a sequence flow")?;
        let loop_named = [&back.source, &back.target]
            .iter()
            .any(|n| name(n).ends_with("1..*"));
        ensure(loop_named, || {
            format!("{level}: loop {} is not the 1..* gateway", back.id)
        })?;

        let e = explore(&g, Some(level), bounds(2, 2));
        ensure(e.violation_count == 0, || {
            format!("{level}: {:?}", e.violations.first())
        })?;
    }
    Ok("4 pools, TK02 behind one 0..1 split, TK03 in one 1..* loop".into())
}

fn round_trips() -> Check {
    let mut runner = TestRunner::new(Config {
        cases: 200,
        ..Config::default()
    });
    let strategy = common::model_strategy();
    for i in 0..200 {
        let model = strategy
            .new_tree(&mut runner)
            .map_err(|e| e.to_string())?
            .current();
        let text = serialize_model(&model);
        let back = parse_model(&text).map_err(|d| format!("model {i}: {}", d[0]))?;
        ensure(back == model, || format!("model {i} changed:\n{text}"))?;
    }

    let mut graphs = 0;
    for level in PatternLevel::ALL {
        for production in [false, true] {
            let opts = ExpandOptions::new(level).with_production(production);
            for g in [block(level), compose(&poligyn(), &opts).unwrap()] {
                for layout in [false, true] {
                    let xml = to_xml(&g, XmlOptions { layout }).map_err(|e| e.to_string())?;
                    let back = from_xml(&xml).map_err(|e| e.to_string())?;
                    ensure(back == g, || format!("{level}: graph changed by XML"))?;
                    graphs += 1;
                }
            }
        }
    }

    let goldens = common::golden_bpmn_files();
    for path in &goldens {
        let out = Command::new(env!("CARGO_BIN_EXE_demo-bpmn"))
            .arg("roundtrip")
            .arg(path)
            .output()
            .map_err(|e| e.to_string())?;
        ensure(out.status.success(), || {
            format!(
                "{}: {}",
                path.display(),
                String::from_utf8_lossy(&out.stderr)
            )
        })?;
    }
    Ok(format!(
        "200 models, {graphs} graphs, {} goldens",
        goldens.len()
    ))
}

fn rules_fire(g: &BpmnGraph) -> Vec<&'static str> {
    let mut r: Vec<&'static str> = validate_bpmn(g).iter().map(|d| d.rule).collect();
    r.sort_unstable();
    r.dedup();
    r
}

fn validator_mutations() -> Check {
    let base = block(PatternLevel::Standard);
    ensure(validate_bpmn(&base).is_empty(), || {
        "unmutated block has diagnostics".into()
    })?;

    let mut intra = base.clone();
    let pool = &intra.pools[0];
    let send = pool.nodes.iter().find(|n| n.kind.is_send()).unwrap();
    let catch = pool.nodes.iter().find(|n| n.kind.is_catch()).unwrap();
    let message = send.kind.message().unwrap().to_string();
    let flow = MessageFlow {
        id: "mutant_mf".into(),
        source: send.id.clone(),
        target: catch.id.clone(),
        message,
    };
    intra.message_flows.push(flow);
    let r = rules_fire(&intra);
    ensure(r == [bpmn_rules::MSG_CROSS], || {
        format!("intra-pool flow fires {r:?}")
    })?;

    let mut into_start = base.clone();
    let pool = &mut into_start.pools[0];
    let start = pool
        .nodes
        .iter()
        .find(|n| n.kind.is_start())
        .unwrap()
        .id
        .clone();
    let other = pool
        .nodes
        .iter()
        .find(|n| n.kind.is_send())
        .unwrap()
        .id
        .clone();
    pool.sequence_flows.push(SequenceFlow {
        id: "mutant_sf".into(),
        source: other,
        target: start,
        guard: None,
    });
    let r = rules_fire(&into_start);
    ensure(r == [bpmn_rules::START_IN], || {
        format!("flow into start fires {r:?}")
    })?;

    let xml = to_xml(&base, XmlOptions::default()).map_err(|e| e.to_string())?;
    let target = &base.pools[0].sequence_flows[0].target;
    let dangling = xml.replacen(&format!("targetRef=\"{target}\""), "targetRef=\"ghost\"", 1);
    match from_xml(&dangling) {
        Err(XmlError::Dangling { reference, .. }) if reference == "ghost" => {}
        other => return Err(format!("dangling reference gives {other:?}")),
    }
    Ok("MSG_CROSS, START_IN, Dangling".into())
}

fn main() {
    let criteria = [
        Criterion {
            name: "happy-flow uniqueness",
            check: happy_flow,
            budget: Duration::from_secs(1),
        },
        Criterion {
            name: "standard oracle equivalence",
            check: standard_oracle,
            budget: Duration::from_secs(5),
        },
        Criterion {
            name: "complete revocation semantics",
            check: revocation,
            budget: Duration::from_secs(1),
        },
        Criterion {
            name: "deadlock freedom",
            check: deadlock_freedom,
            budget: Duration::from_secs(30),
        },
        Criterion {
            name: "PoliGyn structure",
            check: poligyn_structure,
            budget: Duration::from_secs(5),
        },
        Criterion {
            name: "round trips",
            check: round_trips,
            budget: Duration::from_secs(10),
        },
        Criterion {
            name: "validator rules",
            check: validator_mutations,
            budget: Duration::from_secs(1),
        },
    ];
    assert!(Path::new(env!("CARGO_BIN_EXE_demo-bpmn")).exists());
    let mut failed = 0;
    for (
        i,
        Criterion {
            name,
            check,
            budget,
        },
    ) in criteria.into_iter().enumerate()
    {
        let t = Instant::now();
        let result = check();
        let took = t.elapsed();
        let (verdict, detail) = match result {
            Ok(d) if took <= budget => ("PASS", d),
            Ok(d) => ("FAIL", format!("{d}; over the {budget:?} budget")),
            Err(e) => ("FAIL", e),
        };
        if verdict == "FAIL" {
            failed += 1;
        }
        println!(
            "criterion {}: {verdict} {name} ({detail}) in {took:.2?}",
            i + 1
        );
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
