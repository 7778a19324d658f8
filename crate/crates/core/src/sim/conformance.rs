use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use super::explore::{enumerate_bpmn_traces, Witness};
use super::{ChoicePolicy, Outcome, Simulator};
use crate::bpmn::{BpmnGraph, MessageName};
use crate::ctp::{build_ctp, PatternLevel, Trace, TraceBounds};

/// How many differing traces a report lists on each side.
const LISTED: usize = 10;

/// The script of the revocation probe: a happy run up to acceptance, then
/// the executor revokes the acceptance and the initiator allows it.
pub const REVOCATION_SCRIPT: [&str; 5] = ["promise", "declare", "accept", "revoke-accept", "allow"];

/// How the BPMN trace set relates to the pattern's trace set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceVerdict {
    Equal,
    /// Every BPMN trace is a pattern trace, but not the other way round.
    Included,
    Differs,
}

impl fmt::Display for TraceVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TraceVerdict::Equal => "=",
            TraceVerdict::Included => "⊂",
            TraceVerdict::Differs => "≠",
        })
    }
}

/// Outcome of replaying an accepted transaction's revocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RevocationCheck {
    /// Messages exchanged by the scripted prefix.
    pub prefix: String,
    /// Act codes the executor can send once the revocation is allowed.
    pub executor_can_send: BTreeSet<String>,
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub struct ConformanceReport {
    pub level: PatternLevel,
    pub bounds: TraceBounds,
    pub bpmn_traces: usize,
    pub ctp_traces: usize,
    pub verdict: TraceVerdict,
    /// Pattern traces the BPMN cannot produce (first few).
    pub missing: Vec<Trace>,
    /// BPMN traces the pattern rejects (first few).
    pub extra: Vec<Trace>,
    pub deadlocks: Vec<Witness>,
    pub deadlock_count: usize,
    pub revocation: Option<RevocationCheck>,
}

impl ConformanceReport {
    /// Exact equality where the level promises it, inclusion at the complete
    /// level, no deadlocks, and a passing revocation probe when one ran.
    pub fn passed(&self) -> bool {
        let traces_ok = match self.level {
            PatternLevel::Complete => self.verdict != TraceVerdict::Differs,
            _ => self.verdict == TraceVerdict::Equal,
        };
        traces_ok && self.deadlock_count == 0 && self.revocation.as_ref().is_none_or(|r| r.passed)
    }
}

impl fmt::Display for ConformanceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "level: {} (loop bound {}, revoke bound {})",
            self.level, self.bounds.loop_bound, self.bounds.revoke_bound
        )?;
        writeln!(
            f,
            "traces: {} {} {} traces",
            self.bpmn_traces, self.verdict, self.ctp_traces
        )?;
        for t in &self.missing {
            writeln!(f, "  missing: {t}")?;
        }
        for t in &self.extra {
            writeln!(f, "  extra: {t}")?;
        }
        writeln!(f, "deadlocks: {}", self.deadlock_count)?;
        for w in &self.deadlocks {
            writeln!(f, "  after {}: {}", w.line(), w.detail)?;
        }
        if let Some(r) = &self.revocation {
            let sends: Vec<&str> = r.executor_can_send.iter().map(String::as_str).collect();
            writeln!(
                f,
                "revocation: {} after {} (executor may send {})",
                if r.passed { "ok" } else { "FAILED" },
                r.prefix,
                sends.join(", ")
            )?;
        }
        write!(f, "result: {}", if self.passed() { "PASS" } else { "FAIL" })
    }
}

/// Compares the traces of a single-transaction collaboration with those of
/// the pattern at `level`, both within `bounds`.
pub fn check_conformance(
    graph: &BpmnGraph,
    level: PatternLevel,
    bounds: TraceBounds,
) -> ConformanceReport {
    let machine = build_ctp(level);
    let found = enumerate_bpmn_traces(graph, bounds);
    let bpmn = found.traces();
    let ctp: BTreeSet<Trace> = machine
        .enumerate_traces(bounds.loop_bound, bounds.revoke_bound)
        .into_iter()
        .collect();
    let missing: Vec<Trace> = ctp.difference(&bpmn).cloned().collect();
    let extra: Vec<Trace> = bpmn.difference(&ctp).cloned().collect();
    let verdict = match (missing.is_empty(), extra.is_empty()) {
        (true, true) => TraceVerdict::Equal,
        (false, true) => TraceVerdict::Included,
        _ => TraceVerdict::Differs,
    };
    let revocation = (level == PatternLevel::Complete).then(|| revocation_check(graph, bounds));
    ConformanceReport {
        level,
        bounds,
        bpmn_traces: bpmn.len(),
        ctp_traces: ctp.len(),
        verdict,
        missing: missing.into_iter().take(LISTED).collect(),
        extra: extra.into_iter().take(LISTED).collect(),
        deadlocks: found.deadlocks,
        deadlock_count: found.deadlock_count,
        revocation,
    }
}

fn revocation_check(graph: &BpmnGraph, bounds: TraceBounds) -> RevocationCheck {
    let bounds = TraceBounds {
        revoke_bound: bounds.revoke_bound.max(1),
        ..bounds
    };
    let sim = Simulator::new(graph, bounds);
    let script = ChoicePolicy::Scripted(REVOCATION_SCRIPT.iter().map(|s| s.to_string()).collect());
    let run = sim.run(&script);
    let promise: BTreeSet<&str> = graph
        .messages
        .iter()
        .filter(|m| {
            m.name
                .parse::<MessageName>()
                .is_ok_and(|n| n.act.code() == "pm")
        })
        .map(|m| m.id.as_str())
        .collect();
    let executor = graph
        .pools
        .iter()
        .find(|p| {
            p.nodes
                .iter()
                .any(|n| n.kind.is_send() && n.kind.message().is_some_and(|m| promise.contains(m)))
        })
        .map(|p| p.id.clone());
    let executor_can_send = match (&executor, &run.outcome) {
        (Some(pool), Outcome::ScriptExhausted) => sim.enabled_sends(&run.marking, pool),
        _ => BTreeSet::new(),
    };
    let passed = ["da", "rv-da"]
        .iter()
        .all(|a| executor_can_send.contains(*a));
    RevocationCheck {
        prefix: if run.steps.is_empty() {
            format!("{:?}", run.outcome)
        } else {
            run.message_line()
        },
        executor_can_send,
        passed,
    }
}
