use alloc::collections::BTreeSet;
use core::hash::BuildHasherDefault;

use alloc::string::String;
use alloc::vec::Vec;
use indexmap::IndexSet;
use rustc_hash::FxHasher;

use super::{message_line, Marking, Simulator, TkStep};
use crate::bpmn::BpmnGraph;
use crate::ctp::{build_ctp, Configuration, CtpMachine, PatternLevel, Trace, TraceBounds};

/// How many witnesses of each kind are kept.
const WITNESS_LIMIT: usize = 16;
/// State budget of [`explore`].
const STATE_LIMIT: usize = 2_000_000;

/// A path into a problem and what went wrong there.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub steps: Vec<TkStep>,
    pub detail: String,
}

impl Witness {
    pub fn line(&self) -> String {
        message_line(&self.steps)
    }

    pub fn trace(&self) -> Trace {
        Trace::new(self.steps.iter().map(|s| s.step).collect())
    }
}

/// Complete runs found by [`enumerate_bpmn_traces`].
#[derive(Debug, Clone, Default)]
pub struct TraceSet {
    pub runs: BTreeSet<Vec<TkStep>>,
    pub deadlocks: Vec<Witness>,
    pub deadlock_count: usize,
    /// Branches abandoned because a bound was exhausted.
    pub cut: usize,
}

impl TraceSet {
    /// The runs with transaction ids dropped.
    pub fn traces(&self) -> BTreeSet<Trace> {
        self.runs
            .iter()
            .map(|r| Trace::new(r.iter().map(|s| s.step).collect()))
            .collect()
    }
}

/// Every complete run of `graph` within `bounds`, deduplicated.
pub fn enumerate_bpmn_traces(graph: &BpmnGraph, bounds: TraceBounds) -> TraceSet {
    let sim = Simulator::new(graph, bounds);
    let mut out = TraceSet::default();
    let mut path = Vec::new();
    let mut on_path = BTreeSet::new();
    dfs(&sim, sim.initial(), &mut path, &mut on_path, &mut out);
    out
}

fn dfs(
    sim: &Simulator,
    m: Marking,
    path: &mut Vec<TkStep>,
    on_path: &mut BTreeSet<Marking>,
    out: &mut TraceSet,
) {
    let opts = sim.options(&m);
    if opts.choices.is_empty() {
        if m.is_empty() {
            out.runs.insert(path.clone());
        } else if opts.blocked {
            out.cut += 1;
        } else {
            out.deadlock_count += 1;
            if out.deadlocks.len() < WITNESS_LIMIT {
                out.deadlocks.push(Witness {
                    steps: path.clone(),
                    detail: sim.describe_marking(&m),
                });
            }
        }
        return;
    }
    if !on_path.insert(m.clone()) {
        // A cycle that no bound controls.
        out.cut += 1;
        return;
    }
    for choice in opts.choices {
        let (next, step) = sim.apply(&m, choice);
        let Some(next) = next else {
            out.cut += 1;
            continue;
        };
        let pushed = step.is_some();
        path.extend(step);
        dfs(sim, next, path, on_path, out);
        if pushed {
            path.pop();
        }
    }
    on_path.remove(&m);
}

/// Outcome of a state-space search.
#[derive(Debug, Clone, Default)]
pub struct Exploration {
    pub states: usize,
    /// Reachable markings where every process has finished.
    pub completed: usize,
    pub cut: usize,
    pub deadlocks: Vec<Witness>,
    pub deadlock_count: usize,
    /// Runs whose per-transaction projection the pattern does not accept.
    pub violations: Vec<Witness>,
    pub violation_count: usize,
    /// The state budget ran out before the search finished.
    pub truncated: bool,
}

impl Exploration {
    pub fn is_sound(&self) -> bool {
        self.deadlock_count == 0 && self.violation_count == 0 && !self.truncated
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
struct State {
    marking: Marking,
    monitors: Vec<Configuration>,
}

type StateSet = IndexSet<State, BuildHasherDefault<FxHasher>>;

/// Breadth-first search over markings. With `level` set, each transaction
/// kind found in the message names is tracked by a pattern monitor: every
/// act must be a step of the current instance (a new instance starts when
/// the current one may stop and the act does not continue it) and every
/// finished run must leave all instances where they may stop.
pub fn explore(graph: &BpmnGraph, level: Option<PatternLevel>, bounds: TraceBounds) -> Exploration {
    let sim = Simulator::new(graph, bounds);
    let tks = graph.transaction_ids();
    let machine = level.map(build_ctp);
    let acts: Vec<Option<(usize, TkStep)>> = (0..sim.message_count())
        .map(|i| {
            let s = sim.tk_step(i)?;
            let k = tks.iter().position(|t| *t == s.tk)?;
            Some((k, s))
        })
        .collect();
    let mut out = Exploration::default();

    let mut states = StateSet::default();
    states.insert(State {
        marking: sim.initial(),
        monitors: alloc::vec![Configuration::initial(); tks.len()],
    });
    // Predecessor and sent message of every state but the first.
    let mut parent: Vec<(u32, Option<u16>)> = alloc::vec![(0, None)];

    let witness = |parent: &[(u32, Option<u16>)], mut at: usize, extra: Option<usize>| {
        let mut msgs: Vec<usize> = extra.into_iter().collect();
        while at != 0 {
            let (p, m) = parent[at];
            msgs.extend(m.map(usize::from));
            at = p as usize;
        }
        msgs.reverse();
        msgs.into_iter()
            .filter_map(|m| sim.tk_step(m))
            .collect::<Vec<_>>()
    };

    let mut i = 0;
    while i < states.len() {
        if states.len() > STATE_LIMIT {
            out.truncated = true;
            break;
        }
        let state = states[i].clone();
        let opts = sim.options(&state.marking);
        if opts.choices.is_empty() {
            if state.marking.is_empty() {
                out.completed += 1;
                if let Some(machine) = &machine {
                    let bad = state
                        .monitors
                        .iter()
                        .zip(&tks)
                        .find(|(c, _)| **c != Configuration::initial() && !machine.may_stop(c));
                    if let Some((c, tk)) = bad {
                        out.violation_count += 1;
                        if out.violations.len() < WITNESS_LIMIT {
                            out.violations.push(Witness {
                                steps: witness(&parent, i, None),
                                detail: alloc::format!("{tk} ends in state {}", c.label()),
                            });
                        }
                    }
                }
            } else if opts.blocked {
                out.cut += 1;
            } else {
                out.deadlock_count += 1;
                if out.deadlocks.len() < WITNESS_LIMIT {
                    out.deadlocks.push(Witness {
                        steps: witness(&parent, i, None),
                        detail: sim.describe_marking(&state.marking),
                    });
                }
            }
        }
        for choice in opts.choices {
            let (next, msg) = sim.apply_indexed(&state.marking, choice);
            let Some(marking) = next else {
                out.cut += 1;
                continue;
            };
            let mut monitors = state.monitors.clone();
            if let (Some(machine), Some((k, s))) = (&machine, msg.and_then(|m| acts[m].as_ref())) {
                match advance(machine, &monitors[*k], s) {
                    Some(c) => monitors[*k] = c,
                    None => {
                        out.violation_count += 1;
                        if out.violations.len() < WITNESS_LIMIT {
                            out.violations.push(Witness {
                                steps: witness(&parent, i, msg),
                                detail: alloc::format!(
                                    "{} is not a step of {} in state {}",
                                    s.message,
                                    s.tk,
                                    monitors[*k].label()
                                ),
                            });
                        }
                        continue;
                    }
                }
            }
            let (_, fresh) = states.insert_full(State { marking, monitors });
            if fresh {
                parent.push((i as u32, msg.map(|m| m as u16)));
            }
        }
        i += 1;
    }
    out.states = states.len();
    out
}

fn advance(machine: &CtpMachine, c: &Configuration, s: &TkStep) -> Option<Configuration> {
    machine.step(c, s.step.party, s.step.act).ok().or_else(|| {
        machine
            .may_stop(c)
            .then(|| {
                machine
                    .step(&Configuration::initial(), s.step.party, s.step.act)
                    .ok()
            })
            .flatten()
    })
}
