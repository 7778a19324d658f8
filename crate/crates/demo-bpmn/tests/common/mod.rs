#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use demo_bpmn_core::model::{
    CardinalityRange, DemoModel, ResponseLink, TransactionKind, LINK_EVENTS,
};
use proptest::prelude::*;

/// Standard pattern written out by hand: (state, act, next state, loop).
/// Loop 1 is decline then re-request, loop 2 is reject then re-declare.
const STANDARD: &[(&str, &str, &str, u8)] = &[
    ("initial", "rq", "requested", 0),
    ("requested", "pm", "promised", 0),
    ("requested", "dc", "declined", 0),
    ("declined", "rq", "requested", 1),
    ("declined", "qt", "quit", 0),
    ("promised", "da", "declared", 0),
    ("declared", "ac", "accepted", 0),
    ("declared", "rj", "rejected", 0),
    ("rejected", "da", "declared", 2),
    ("rejected", "st", "stopped", 0),
];

const FINAL: [&str; 3] = ["accepted", "quit", "stopped"];

/// Every standard-pattern word in which each loop is taken at most `u`
/// times, found by walking the table above.
pub fn brute_force_standard(u: u32) -> BTreeSet<String> {
    fn walk(
        state: &str,
        loops: [u32; 3],
        u: u32,
        word: &mut Vec<&'static str>,
        out: &mut BTreeSet<String>,
    ) {
        if FINAL.contains(&state) {
            out.insert(word.join("·"));
            return;
        }
        for &(from, act, to, lp) in STANDARD {
            if from != state {
                continue;
            }
            let mut next = loops;
            next[lp as usize] += 1;
            if lp > 0 && next[lp as usize] > u {
                continue;
            }
            word.push(act);
            walk(to, next, u, word, out);
            word.pop();
        }
    }
    let mut out = BTreeSet::new();
    walk("initial", [0; 3], u, &mut Vec::new(), &mut out);
    out
}

fn cardinality() -> impl Strategy<Value = CardinalityRange> {
    (0u32..4, prop::option::of(0u32..4)).prop_map(|(low, extra)| CardinalityRange {
        low,
        high: extra.map(|e| (low + e).max(1)),
    })
}

/// Valid models: up to eight transaction kinds where each one after the
/// first may hang below an earlier one, so links always form a forest.
pub fn model_strategy() -> impl Strategy<Value = DemoModel> {
    let kind = (
        "[A-Z]{1,3}",
        "[a-z0-9 \"\\\\-]{0,16}",
        "[A-Za-z][A-Za-z0-9_-]{0,5}",
        "[A-Za-z][A-Za-z0-9_-]{0,5}",
    );
    prop::collection::vec(
        (
            kind,
            any::<prop::sample::Index>(),
            any::<bool>(),
            0..LINK_EVENTS.len(),
            cardinality(),
        ),
        1..8,
    )
    .prop_map(|rows| {
        let mut model = DemoModel::default();
        for (i, ((prefix, name, ini, exe), parent, linked, event, card)) in
            rows.into_iter().enumerate()
        {
            let id = format!("{prefix}{:02}", i + 1);
            if i > 0 && linked {
                let parent = &model.transaction_kinds[parent.index(i)].id;
                model
                    .response_links
                    .push(ResponseLink::new(parent, LINK_EVENTS[event], &id, card));
            }
            model
                .transaction_kinds
                .push(TransactionKind::new(&id, &name, &ini, &exe));
        }
        model
    })
}

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("data")
}

/// Checked-in `.bpmn` goldens, sorted by name.
pub fn golden_bpmn_files() -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(data_dir())
        .expect("tests/data exists")
        .map(|e| e.expect("readable entry").path())
        .filter(|p| p.extension().is_some_and(|e| e == "bpmn"))
        .collect();
    files.sort();
    files
}
