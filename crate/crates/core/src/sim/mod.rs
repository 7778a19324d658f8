//! Token semantics for [`BpmnGraph`] collaborations.
//!
//! Tokens sit on flow nodes. Moves that cannot change the observable
//! behaviour (start events, merges, abstract tasks, end events, message
//! receipt with a single consumer) fire eagerly; the remaining moves are
//! the decision points explored by the policies: send tasks, exclusive
//! splits, event-based gateways with several deliverable messages, and a
//! choice between message start events.
//!
//! Messages are delivered per pool: a send task puts one copy of its message
//! into the mailbox of every pool that one of its message flows reaches. A
//! message start event only fires while its pool has no token, so every
//! pool runs one instance at a time.

mod conformance;
mod explore;

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::bpmn::{BpmnGraph, GatewayKind, MessageName, NodeKind, TaskKind};
use crate::compose::{GUARD_ANOTHER, GUARD_DONE};
use crate::ctp::{ActKind, Step, Trace, TraceBounds, TRACE_SEP};
use crate::expand::{GUARD_RE_DECLARE, GUARD_RE_REQUEST};
use crate::model::CardinalityRange;

pub use conformance::{check_conformance, ConformanceReport, RevocationCheck, TraceVerdict};
pub use explore::{enumerate_bpmn_traces, explore, Exploration, TraceSet, Witness};

/// Guards whose traversal is counted against the loop bound.
pub const LOOP_GUARDS: [&str; 3] = [GUARD_RE_REQUEST, GUARD_RE_DECLARE, GUARD_ANOTHER];

/// Safety net against cycles made only of eager moves.
const SETTLE_LIMIT: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Start,
    MessageStart(usize),
    Catch(usize),
    Send(usize),
    Abstract,
    End { terminate: bool },
    Exclusive,
    EventBased,
    Parallel,
}

struct NetNode<'g> {
    id: &'g str,
    pool: usize,
    kind: Kind,
    out: Vec<usize>,
    incoming: usize,
    /// Pools reached by the message flows of a send task.
    delivers_to: Vec<usize>,
    /// Cardinality carried by a multi-instance loop gateway.
    card: Option<CardinalityRange>,
    /// Slot in [`Marking::loop_counters`] of a gateway with counted exits.
    counter: Option<usize>,
}

struct NetFlow<'g> {
    target: usize,
    guard: Option<&'g str>,
    counted: bool,
    done: bool,
}

struct NetMessage {
    step: Option<(String, Step)>,
    name: String,
    revoke: bool,
}

/// Index form of a graph, built once per simulation.
pub(crate) struct Net<'g> {
    nodes: Vec<NetNode<'g>>,
    flows: Vec<NetFlow<'g>>,
    messages: Vec<NetMessage>,
    pools: Vec<&'g str>,
    pool_nodes: Vec<Vec<usize>>,
    message_starts: Vec<Vec<usize>>,
    /// Per counter slot: the nodes from which its gateway can be reached.
    counter_reach: Vec<Vec<bool>>,
    /// Per counter slot: whether a message start leads to its gateway.
    restart_reach: Vec<bool>,
}

impl<'g> Net<'g> {
    fn new(graph: &'g BpmnGraph) -> Self {
        let messages: Vec<NetMessage> = graph
            .messages
            .iter()
            .map(|m| {
                let parsed = m.name.parse::<MessageName>().ok();
                NetMessage {
                    step: parsed
                        .as_ref()
                        .map(|n| (n.tk.clone(), Step::new(n.party(), n.act))),
                    name: m.name.clone(),
                    revoke: parsed.as_ref().is_some_and(|n| n.act.is_revoke()),
                }
            })
            .collect();
        let msg_index = |id: &str| graph.messages.iter().position(|m| m.id == id);

        let mut nodes = Vec::new();
        let mut pool_nodes = vec![Vec::new(); graph.pools.len()];
        let mut message_starts = vec![Vec::new(); graph.pools.len()];
        for (pi, pool) in graph.pools.iter().enumerate() {
            for n in &pool.nodes {
                let msg = n.kind.message().and_then(msg_index);
                let kind = match (&n.kind, msg) {
                    (NodeKind::StartEvent { message: None }, _) => Kind::Start,
                    (NodeKind::StartEvent { .. }, Some(m)) => Kind::MessageStart(m),
                    (NodeKind::IntermediateCatchEvent { .. }, Some(m)) => Kind::Catch(m),
                    (
                        NodeKind::Task {
                            kind: TaskKind::Receive,
                            ..
                        },
                        Some(m),
                    ) => Kind::Catch(m),
                    (
                        NodeKind::Task {
                            kind: TaskKind::Send,
                            ..
                        },
                        Some(m),
                    ) => Kind::Send(m),
                    (NodeKind::EndEvent { terminate }, _) => Kind::End {
                        terminate: *terminate,
                    },
                    (NodeKind::Gateway(GatewayKind::Exclusive), _) => Kind::Exclusive,
                    (NodeKind::Gateway(GatewayKind::EventBased), _) => Kind::EventBased,
                    (NodeKind::Gateway(GatewayKind::Parallel), _) => Kind::Parallel,
                    // Unresolvable message references behave like plain tasks.
                    _ => Kind::Abstract,
                };
                if let Kind::MessageStart(_) = kind {
                    message_starts[pi].push(nodes.len());
                }
                pool_nodes[pi].push(nodes.len());
                nodes.push(NetNode {
                    id: &n.id,
                    pool: pi,
                    kind,
                    out: Vec::new(),
                    incoming: 0,
                    delivers_to: Vec::new(),
                    card: None,
                    counter: None,
                });
            }
        }
        let mut by_pool: alloc::collections::BTreeMap<(usize, &str), usize> = Default::default();
        let mut by_id: alloc::collections::BTreeMap<&str, usize> = Default::default();
        for (i, n) in nodes.iter().enumerate() {
            by_pool.entry((n.pool, n.id)).or_insert(i);
            by_id.entry(n.id).or_insert(i);
        }
        let index_of = |id: &str, pool: Option<usize>| match pool {
            Some(p) => by_pool.get(&(p, id)).copied(),
            None => by_id.get(id).copied(),
        };
        let mut flows = Vec::new();
        let mut edges = Vec::new();
        for (pi, pool) in graph.pools.iter().enumerate() {
            for f in &pool.sequence_flows {
                if let (Some(s), Some(t)) =
                    (index_of(&f.source, Some(pi)), index_of(&f.target, Some(pi)))
                {
                    let guard = f.guard.as_deref();
                    edges.push((s, flows.len()));
                    flows.push(NetFlow {
                        target: t,
                        guard,
                        counted: guard.is_some_and(|g| LOOP_GUARDS.contains(&g)),
                        done: guard == Some(GUARD_DONE),
                    });
                }
            }
        }
        for (s, fi) in edges {
            nodes[s].out.push(fi);
            let t = flows[fi].target;
            nodes[t].incoming += 1;
        }
        for mf in &graph.message_flows {
            let (Some(s), Some(t)) = (index_of(&mf.source, None), index_of(&mf.target, None))
            else {
                continue;
            };
            let tp = nodes[t].pool;
            if !nodes[s].delivers_to.contains(&tp) {
                nodes[s].delivers_to.push(tp);
            }
        }
        for (i, pool) in graph.pools.iter().enumerate() {
            for n in &pool.nodes {
                let Some(ni) = index_of(&n.id, Some(i)) else {
                    continue;
                };
                let loops = nodes[ni]
                    .out
                    .iter()
                    .any(|&f| flows[f].guard == Some(GUARD_ANOTHER));
                if loops {
                    nodes[ni].card = n
                        .name
                        .rsplit(' ')
                        .next()
                        .and_then(|w| w.parse::<CardinalityRange>().ok());
                }
            }
        }
        let mut counter_reach = Vec::new();
        let mut restart_reach = Vec::new();
        for g in 0..nodes.len() {
            let counted = nodes[g]
                .out
                .iter()
                .any(|&f| flows[f].counted || flows[f].done);
            if !counted {
                continue;
            }
            nodes[g].counter = Some(counter_reach.len());
            let mut reach = vec![false; nodes.len()];
            let mut stack = vec![g];
            reach[g] = true;
            while let Some(n) = stack.pop() {
                for (s, node) in nodes.iter().enumerate() {
                    if !reach[s] && node.out.iter().any(|&f| flows[f].target == n) {
                        reach[s] = true;
                        stack.push(s);
                    }
                }
            }
            restart_reach.push(
                reach
                    .iter()
                    .zip(&nodes)
                    .any(|(r, n)| *r && matches!(n.kind, Kind::MessageStart(_))),
            );
            counter_reach.push(reach);
        }
        Net {
            restart_reach,
            counter_reach,
            nodes,
            flows,
            messages,
            pools: graph.pools.iter().map(|p| p.id.as_str()).collect(),
            pool_nodes,
            message_starts,
        }
    }

    fn mailbox_index(&self, pool: usize, msg: usize) -> usize {
        pool * self.messages.len() + msg
    }

    fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }
}

/// Distribution of tokens and undelivered messages, plus the counters the
/// exploration bounds apply to.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Marking {
    /// Node indices, one entry per token.
    tokens: Bag,
    /// Mailbox slots (pool and message), one entry per undelivered copy.
    mailbox: Bag,
    loop_counters: Vec<u8>,
    revokes: u8,
}

/// Sorted multiset of small indices. Markings are sparse, so this keeps
/// explored states small.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Bag(Vec<u16>);

impl Bag {
    fn count(&self, x: usize) -> u32 {
        let x = x as u16;
        let lo = self.0.partition_point(|&y| y < x);
        self.0[lo..].iter().take_while(|&&y| y == x).count() as u32
    }

    fn contains(&self, x: usize) -> bool {
        self.0.binary_search(&(x as u16)).is_ok()
    }

    fn add(&mut self, x: usize) {
        let x = u16::try_from(x).expect("graph fits in u16 indices");
        let at = self.0.partition_point(|&y| y <= x);
        self.0.insert(at, x);
    }

    fn take(&mut self, x: usize) {
        let at = self
            .0
            .binary_search(&(x as u16))
            .expect("taking an absent element");
        self.0.remove(at);
    }

    fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Distinct elements in ascending order.
    fn distinct(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.0.iter().map(|&x| x as usize).collect();
        v.dedup();
        v
    }

    fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().map(|&x| x as usize)
    }
}

impl Marking {
    /// Whether no token and no message is left.
    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty() && self.mailbox.is_empty()
    }

    pub fn revokes(&self) -> u32 {
        u32::from(self.revokes)
    }

    /// Equality of tokens and mailbox, ignoring counters.
    pub fn same_place(&self, other: &Marking) -> bool {
        self.tokens == other.tokens && self.mailbox == other.mailbox
    }
}

/// A decision point of the token game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Choice {
    Send { node: usize },
    Branch { gateway: usize, flow: usize },
    Deliver { gateway: usize, catch: usize },
    Start { node: usize },
}

/// One performed act, attributed to its transaction kind.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TkStep {
    pub tk: String,
    pub step: Step,
    /// Message name as written in the graph, e.g. `al-ac(TK01)`.
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct Options {
    choices: Vec<Choice>,
    /// Some move was withheld because a bound is exhausted.
    blocked: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChoicePolicy {
    Exhaustive,
    Random {
        seed: u64,
    },
    /// Guard labels consumed at exclusive splits, in order. Act codes such
    /// as `pm` are accepted for the matching act names.
    Scripted(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    /// Every token reached an end event and no message is left.
    Completed,
    /// Tokens or messages remain and nothing can move.
    Deadlock,
    /// Every remaining move would exceed a loop or revoke bound.
    BoundExceeded,
    /// A decision was needed after the script ran out.
    ScriptExhausted,
    ScriptMismatch {
        expected: String,
        available: Vec<String>,
    },
}

/// Result of one simulation run.
#[derive(Debug, Clone)]
pub struct Run {
    pub steps: Vec<TkStep>,
    pub outcome: Outcome,
    pub marking: Marking,
}

impl Run {
    /// Acts of all transactions, in order.
    pub fn trace(&self) -> Trace {
        Trace::new(self.steps.iter().map(|s| s.step).collect())
    }

    /// Acts of one transaction kind, in order.
    pub fn project(&self, tk: &str) -> Trace {
        project(&self.steps, tk)
    }

    /// Message names joined by the trace separator.
    pub fn message_line(&self) -> String {
        message_line(&self.steps)
    }
}

pub fn project(steps: &[TkStep], tk: &str) -> Trace {
    Trace::new(
        steps
            .iter()
            .filter(|s| s.tk == tk)
            .map(|s| s.step)
            .collect(),
    )
}

pub fn message_line(steps: &[TkStep]) -> String {
    let mut out = String::new();
    for (i, s) in steps.iter().enumerate() {
        if i > 0 {
            out.push(TRACE_SEP);
        }
        out.push_str(&s.message);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("deadlock after [{trace}]: {stuck}")]
    Deadlock { trace: String, stuck: String },
    #[error("bound exceeded after [{trace}]")]
    BoundExceeded { trace: String },
    #[error("script exhausted after [{trace}]")]
    ScriptExhausted { trace: String },
    #[error("script expects {expected} but only [{}] are available after [{trace}]", available.join(", "))]
    ScriptMismatch {
        expected: String,
        available: Vec<String>,
        trace: String,
    },
}

/// Executes graphs with token semantics.
pub struct Simulator<'g> {
    net: Net<'g>,
    bounds: TraceBounds,
}

impl<'g> Simulator<'g> {
    pub fn new(graph: &'g BpmnGraph, bounds: TraceBounds) -> Self {
        Simulator {
            net: Net::new(graph),
            bounds,
        }
    }

    pub fn bounds(&self) -> TraceBounds {
        self.bounds
    }

    /// Tokens on every plain start event, settled.
    pub fn initial(&self) -> Marking {
        let mut m = Marking {
            tokens: Bag::default(),
            mailbox: Bag::default(),
            loop_counters: vec![0; self.net.counter_reach.len()],
            revokes: 0,
        };
        for (i, node) in self.net.nodes.iter().enumerate() {
            if node.kind == Kind::Start {
                m.tokens.add(i);
            }
        }
        self.settle(&mut m);
        m
    }

    fn produce(&self, m: &mut Marking, node: usize) {
        for &f in &self.net.nodes[node].out {
            m.tokens.add(self.net.flows[f].target);
        }
    }

    fn pool_idle(&self, m: &Marking, pool: usize) -> bool {
        !m.tokens.iter().any(|n| self.net.nodes[n].pool == pool)
    }

    fn has_mail(&self, m: &Marking, pool: usize, msg: usize) -> bool {
        m.mailbox.contains(self.net.mailbox_index(pool, msg))
    }

    fn take_mail(&self, m: &mut Marking, pool: usize, msg: usize) {
        m.mailbox.take(self.net.mailbox_index(pool, msg));
    }

    /// Catch successors of an event-based gateway whose message is there.
    fn deliverable(&self, m: &Marking, gateway: usize) -> Vec<usize> {
        let node = &self.net.nodes[gateway];
        node.out
            .iter()
            .map(|&f| self.net.flows[f].target)
            .filter(|&t| match self.net.nodes[t].kind {
                Kind::Catch(msg) => self.has_mail(m, node.pool, msg),
                _ => false,
            })
            .collect()
    }

    fn enabled_starts(&self, m: &Marking, pool: usize) -> Vec<usize> {
        if !self.pool_idle(m, pool) {
            return Vec::new();
        }
        self.net.message_starts[pool]
            .iter()
            .copied()
            .filter(|&s| match self.net.nodes[s].kind {
                Kind::MessageStart(msg) => self.has_mail(m, pool, msg),
                _ => false,
            })
            .collect()
    }

    fn fire_start(&self, m: &mut Marking, start: usize) {
        if let Kind::MessageStart(msg) = self.net.nodes[start].kind {
            self.take_mail(m, self.net.nodes[start].pool, msg);
        }
        self.produce(m, start);
    }

    fn fire_catch_through(&self, m: &mut Marking, catch: usize) {
        if let Kind::Catch(msg) = self.net.nodes[catch].kind {
            self.take_mail(m, self.net.nodes[catch].pool, msg);
        }
        self.produce(m, catch);
    }

    /// Fires one eager move at `n` if there is one.
    fn fire_eager(&self, m: &mut Marking, n: usize) -> bool {
        let node = &self.net.nodes[n];
        match node.kind {
            Kind::Start | Kind::Abstract => {
                m.tokens.take(n);
                self.produce(m, n);
                true
            }
            Kind::End { terminate } => {
                if terminate {
                    m.tokens
                        .0
                        .retain(|&x| self.net.nodes[x as usize].pool != node.pool);
                } else {
                    m.tokens.take(n);
                }
                true
            }
            Kind::Exclusive if node.out.len() <= 1 => {
                if node.out.is_empty() {
                    return false;
                }
                m.tokens.take(n);
                self.produce(m, n);
                true
            }
            Kind::Parallel => {
                let need = node.incoming.max(1) as u32;
                if m.tokens.count(n) < need {
                    return false;
                }
                for _ in 0..need {
                    m.tokens.take(n);
                }
                self.produce(m, n);
                true
            }
            Kind::Catch(msg) if self.has_mail(m, node.pool, msg) => {
                m.tokens.take(n);
                self.fire_catch_through(m, n);
                true
            }
            Kind::EventBased => {
                let ready = self.deliverable(m, n);
                if ready.len() != 1 {
                    return false;
                }
                m.tokens.take(n);
                self.fire_catch_through(m, ready[0]);
                true
            }
            // A message start never holds a token; treat a stray one as a pass.
            Kind::MessageStart(_) => {
                m.tokens.take(n);
                self.produce(m, n);
                true
            }
            _ => false,
        }
    }

    /// Applies eager moves until none is left. Returns `false` if the limit
    /// was hit.
    fn settle(&self, m: &mut Marking) -> bool {
        let mut budget = SETTLE_LIMIT;
        loop {
            let mut progressed = false;
            for n in m.tokens.distinct() {
                while m.tokens.contains(n) && self.fire_eager(m, n) {
                    progressed = true;
                    budget -= 1;
                    if budget == 0 {
                        return false;
                    }
                }
            }
            for pool in 0..self.net.pools.len() {
                let starts = self.enabled_starts(m, pool);
                if starts.len() == 1 {
                    self.fire_start(m, starts[0]);
                    progressed = true;
                }
            }
            if !progressed {
                return true;
            }
        }
    }

    fn flow_allowed(&self, m: &Marking, gateway: usize, flow: usize) -> bool {
        let f = &self.net.flows[flow];
        let count = self.net.nodes[gateway]
            .counter
            .map_or(0, |c| u32::from(m.loop_counters[c]));
        let card = self.net.nodes[gateway].card;
        if f.counted {
            if count >= self.bounds.loop_bound {
                return false;
            }
            if let Some(high) = card.and_then(|c| c.high) {
                return count + 1 < high;
            }
            return true;
        }
        if f.done {
            if let Some(c) = card {
                return count + 1 >= c.low;
            }
        }
        true
    }

    pub(crate) fn options(&self, m: &Marking) -> Options {
        let mut o = Options::default();
        for n in m.tokens.distinct() {
            let node = &self.net.nodes[n];
            match node.kind {
                Kind::Send(msg) => {
                    if self.net.messages[msg].revoke
                        && u32::from(m.revokes) >= self.bounds.revoke_bound
                    {
                        o.blocked = true;
                    } else {
                        o.choices.push(Choice::Send { node: n });
                    }
                }
                Kind::Exclusive if node.out.len() > 1 => {
                    for &f in &node.out {
                        if self.flow_allowed(m, n, f) {
                            o.choices.push(Choice::Branch {
                                gateway: n,
                                flow: f,
                            });
                        } else {
                            o.blocked = true;
                        }
                    }
                }
                Kind::EventBased => {
                    let ready = self.deliverable(m, n);
                    if ready.len() > 1 {
                        for c in ready {
                            o.choices.push(Choice::Deliver {
                                gateway: n,
                                catch: c,
                            });
                        }
                    }
                }
                _ => {}
            }
        }
        for pool in 0..self.net.pools.len() {
            let starts = self.enabled_starts(m, pool);
            if starts.len() > 1 {
                for s in starts {
                    o.choices.push(Choice::Start { node: s });
                }
            }
        }
        o
    }

    /// Applies a decision and settles. Returns the performed act, if any,
    /// and `None` as marking if eager moves did not terminate.
    pub(crate) fn apply(&self, m: &Marking, choice: Choice) -> (Option<Marking>, Option<TkStep>) {
        let (next, msg) = self.apply_indexed(m, choice);
        (next, msg.and_then(|i| self.tk_step(i)))
    }

    /// The act a message index stands for.
    pub(crate) fn tk_step(&self, msg: usize) -> Option<TkStep> {
        let info = &self.net.messages[msg];
        info.step.as_ref().map(|(tk, s)| TkStep {
            tk: tk.clone(),
            step: *s,
            message: info.name.clone(),
        })
    }

    pub(crate) fn message_count(&self) -> usize {
        self.net.messages.len()
    }

    /// Like [`Self::apply`], reporting the sent message by index.
    pub(crate) fn apply_indexed(
        &self,
        m: &Marking,
        choice: Choice,
    ) -> (Option<Marking>, Option<usize>) {
        let mut m = m.clone();
        let mut step = None;
        match choice {
            Choice::Send { node } => {
                let Kind::Send(msg) = self.net.nodes[node].kind else {
                    unreachable!("send choice on a send task")
                };
                m.tokens.take(node);
                for &p in &self.net.nodes[node].delivers_to {
                    m.mailbox.add(self.net.mailbox_index(p, msg));
                }
                let info = &self.net.messages[msg];
                if info.revoke {
                    m.revokes = m.revokes.saturating_add(1);
                }
                step = Some(msg);
                self.produce(&mut m, node);
            }
            Choice::Branch { gateway, flow } => {
                m.tokens.take(gateway);
                let f = &self.net.flows[flow];
                if let Some(c) = self.net.nodes[gateway].counter {
                    if f.counted {
                        m.loop_counters[c] = m.loop_counters[c].saturating_add(1);
                    }
                    if f.done {
                        m.loop_counters[c] = 0;
                    }
                }
                m.tokens.add(f.target);
            }
            Choice::Deliver { gateway, catch } => {
                m.tokens.take(gateway);
                self.fire_catch_through(&mut m, catch);
            }
            Choice::Start { node } => self.fire_start(&mut m, node),
        }
        let ok = self.settle(&mut m);
        self.forget_dead_counters(&mut m);
        (ok.then_some(m), step)
    }

    /// Resets counters whose gateway no token can reach any more, so runs
    /// that only differ in spent loop iterations share a marking. Counters
    /// behind a message start survive until the whole run is over, since
    /// the bound covers every instance of the pool.
    fn forget_dead_counters(&self, m: &mut Marking) {
        let over = m.is_empty();
        for (c, reach) in self.net.counter_reach.iter().enumerate() {
            if m.loop_counters[c] == 0 {
                continue;
            }
            let restartable = !over && self.net.restart_reach[c];
            if !restartable && !m.tokens.iter().any(|t| reach[t]) {
                m.loop_counters[c] = 0;
            }
        }
    }

    /// Guard label or short description of a decision.
    pub fn describe(&self, choice: Choice) -> String {
        match choice {
            Choice::Send { node } => match self.net.nodes[node].kind {
                Kind::Send(msg) => format!("send {}", self.net.messages[msg].name),
                _ => String::from("send"),
            },
            Choice::Branch { flow, .. } => String::from(self.net.flows[flow].guard.unwrap_or("")),
            Choice::Deliver { catch, .. } | Choice::Start { node: catch } => {
                match self.net.nodes[catch].kind {
                    Kind::Catch(msg) | Kind::MessageStart(msg) => {
                        format!("receive {}", self.net.messages[msg].name)
                    }
                    _ => String::from("receive"),
                }
            }
        }
    }

    /// Nodes holding tokens and undelivered messages, for witnesses.
    pub fn describe_marking(&self, m: &Marking) -> String {
        let mut parts: Vec<String> = Vec::new();
        for (i, n) in self.net.nodes.iter().enumerate() {
            for _ in 0..m.tokens.count(i) {
                parts.push(format!("token@{}", n.id));
            }
        }
        for p in 0..self.net.pools.len() {
            for (mi, msg) in self.net.messages.iter().enumerate() {
                let c = m.mailbox.count(self.net.mailbox_index(p, mi));
                for _ in 0..c {
                    parts.push(format!("mail {}@{}", msg.name, self.net.pools[p]));
                }
            }
        }
        if parts.is_empty() {
            return String::from("nothing");
        }
        parts.join(", ")
    }

    /// Short codes of the acts the pool can send next, looking through
    /// exclusive gateways, merges and abstract tasks. Bounds are ignored.
    pub fn enabled_sends(&self, m: &Marking, pool_id: &str) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let Some(pool) = self.net.pools.iter().position(|p| *p == pool_id) else {
            return out;
        };
        let mut seen = BTreeSet::new();
        let mut stack: Vec<usize> = self.net.pool_nodes[pool]
            .iter()
            .copied()
            .filter(|&n| m.tokens.contains(n))
            .collect();
        while let Some(n) = stack.pop() {
            if !seen.insert(n) {
                continue;
            }
            let node = &self.net.nodes[n];
            match node.kind {
                Kind::Send(msg) => {
                    let name = &self.net.messages[msg].name;
                    let code = name
                        .parse::<MessageName>()
                        .map(|mn| mn.act_code())
                        .unwrap_or_else(|_| name.clone());
                    out.insert(code);
                }
                Kind::Exclusive | Kind::Parallel | Kind::Abstract | Kind::Start => {
                    stack.extend(node.out.iter().map(|&f| self.net.flows[f].target));
                }
                _ => {}
            }
        }
        out
    }

    /// Whether the node with this id currently holds a token.
    pub fn has_token(&self, m: &Marking, node_id: &str) -> bool {
        self.net
            .node_index(node_id)
            .is_some_and(|i| m.tokens.contains(i))
    }

    /// Runs from the initial marking under `policy`. Exhaustive policy
    /// behaves like a scripted run without script: it takes the first
    /// option at every decision.
    pub fn run(&self, policy: &ChoicePolicy) -> Run {
        self.run_from(self.initial(), policy)
    }

    pub fn run_from(&self, start: Marking, policy: &ChoicePolicy) -> Run {
        let mut m = start;
        let mut steps = Vec::new();
        let mut rng = match policy {
            ChoicePolicy::Random { seed } => Some(ChaCha8Rng::seed_from_u64(*seed)),
            _ => None,
        };
        let mut script = match policy {
            ChoicePolicy::Scripted(s) => Some(s.iter()),
            _ => None,
        };
        loop {
            let opts = self.options(&m);
            if opts.choices.is_empty() {
                let outcome = if m.is_empty() {
                    Outcome::Completed
                } else if opts.blocked {
                    Outcome::BoundExceeded
                } else {
                    Outcome::Deadlock
                };
                return Run {
                    steps,
                    outcome,
                    marking: m,
                };
            }
            let choice = if let Some(rng) = rng.as_mut() {
                opts.choices[rng.gen_range(0..opts.choices.len())]
            } else if let Some(script) = script.as_mut() {
                match self.scripted_choice(&opts.choices, script) {
                    Ok(c) => c,
                    Err(outcome) => {
                        return Run {
                            steps,
                            outcome,
                            marking: m,
                        }
                    }
                }
            } else {
                opts.choices[0]
            };
            let (next, step) = self.apply(&m, choice);
            steps.extend(step);
            match next {
                Some(n) => m = n,
                None => {
                    return Run {
                        steps,
                        outcome: Outcome::BoundExceeded,
                        marking: m,
                    }
                }
            }
        }
    }

    fn scripted_choice<'s>(
        &self,
        choices: &[Choice],
        script: &mut impl Iterator<Item = &'s String>,
    ) -> Result<Choice, Outcome> {
        let branch = choices.iter().find(|c| matches!(c, Choice::Branch { .. }));
        let Some(&Choice::Branch { gateway, .. }) = branch else {
            return Ok(choices[0]);
        };
        let here: Vec<Choice> = choices
            .iter()
            .copied()
            .filter(|c| matches!(c, Choice::Branch { gateway: g, .. } if *g == gateway))
            .collect();
        let Some(want) = script.next() else {
            return Err(Outcome::ScriptExhausted);
        };
        here.iter()
            .copied()
            .find(|c| guard_matches(&self.describe(*c), want))
            .ok_or_else(|| Outcome::ScriptMismatch {
                expected: want.clone(),
                available: here.iter().map(|c| self.describe(*c)).collect(),
            })
    }
}

/// Whether script item `want` selects the branch labelled `guard`.
pub fn guard_matches(guard: &str, want: &str) -> bool {
    if guard == want {
        return true;
    }
    let act =
        ActKind::from_code(want).or_else(|| ActKind::ALL.into_iter().find(|a| a.name() == want));
    match (act, guard) {
        (Some(ActKind::Request), GUARD_RE_REQUEST) | (Some(ActKind::Declare), GUARD_RE_DECLARE) => {
            true
        }
        (Some(a), g) => a.name() == g,
        (None, _) => false,
    }
}

/// Runs `graph` once. Errors carry the partial trace in message-name form.
pub fn simulate(
    graph: &BpmnGraph,
    policy: &ChoicePolicy,
    bounds: TraceBounds,
) -> Result<Run, SimError> {
    let sim = Simulator::new(graph, bounds);
    let run = sim.run(policy);
    let trace = run.message_line();
    match run.outcome.clone() {
        Outcome::Completed => Ok(run),
        Outcome::Deadlock => Err(SimError::Deadlock {
            trace,
            stuck: sim.describe_marking(&run.marking),
        }),
        Outcome::BoundExceeded => Err(SimError::BoundExceeded { trace }),
        Outcome::ScriptExhausted => Err(SimError::ScriptExhausted { trace }),
        Outcome::ScriptMismatch {
            expected,
            available,
        } => Err(SimError::ScriptMismatch {
            expected,
            available,
            trace,
        }),
    }
}

impl fmt::Display for TkStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl TkStep {
    pub fn code(&self) -> String {
        self.step.act.code().to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctp::PatternLevel;
    use crate::expand::{expand_transaction, ExpandOptions};
    use crate::model::TransactionKind;

    fn block(level: PatternLevel) -> BpmnGraph {
        let tk = TransactionKind::new("TK01", "t", "R0", "R1");
        expand_transaction(&tk, &ExpandOptions::new(level))
    }

    fn script(items: &[&str]) -> ChoicePolicy {
        ChoicePolicy::Scripted(items.iter().map(|s| String::from(*s)).collect())
    }

    #[test]
    fn basic_runs_the_happy_flow() {
        let g = block(PatternLevel::Basic);
        for policy in [
            ChoicePolicy::Exhaustive,
            ChoicePolicy::Random { seed: 7 },
            script(&[]),
        ] {
            let run = simulate(&g, &policy, TraceBounds::default()).unwrap();
            assert_eq!(run.trace().to_string(), "rq·pm·da·ac");
        }
    }

    #[test]
    fn standard_decline_quit() {
        let g = block(PatternLevel::Standard);
        let run = simulate(&g, &script(&["decline", "quit"]), TraceBounds::default()).unwrap();
        assert_eq!(run.trace().to_string(), "rq·dc·qt");
        assert_eq!(run.message_line(), "rq(TK01)·dc(TK01)·qt(TK01)");
    }

    #[test]
    fn standard_script_errors() {
        let g = block(PatternLevel::Standard);
        let err = simulate(&g, &script(&["decline"]), TraceBounds::default()).unwrap_err();
        assert!(matches!(err, SimError::ScriptExhausted { .. }));
        let err = simulate(&g, &script(&["accept"]), TraceBounds::default()).unwrap_err();
        assert!(matches!(err, SimError::ScriptMismatch { .. }), "{err}");
        let zero = TraceBounds {
            loop_bound: 0,
            revoke_bound: 0,
        };
        let err = simulate(&g, &script(&["decline", "re-request"]), zero).unwrap_err();
        assert!(matches!(err, SimError::ScriptMismatch { .. }), "{err}");
    }

    #[test]
    fn random_runs_are_reproducible() {
        let g = block(PatternLevel::Complete);
        let a = simulate(
            &g,
            &ChoicePolicy::Random { seed: 42 },
            TraceBounds::default(),
        );
        let b = simulate(
            &g,
            &ChoicePolicy::Random { seed: 42 },
            TraceBounds::default(),
        );
        assert_eq!(a.map(|r| r.steps), b.map(|r| r.steps));
    }

    #[test]
    fn revoke_accept_then_allow_reaches_rejected() {
        let g = block(PatternLevel::Complete);
        let sim = Simulator::new(&g, TraceBounds::default());
        let run = sim.run(&script(&[
            "promise",
            "declare",
            "accept",
            "revoke-accept",
            "allow",
        ]));
        assert_eq!(run.outcome, Outcome::ScriptExhausted);
        assert_eq!(run.trace().to_string(), "rq·pm·da·ac·rv-ac·al");
        let sends = sim.enabled_sends(&run.marking, "TK01_executor");
        assert!(sends.contains("da") && sends.contains("rv-da"), "{sends:?}");
    }

    #[test]
    fn refused_revoke_restores_marking() {
        let g = block(PatternLevel::Complete);
        let sim = Simulator::new(&g, TraceBounds::default());
        let before = sim.run(&script(&["pm", "da", "ac"]));
        let after = sim.run(&script(&["pm", "da", "ac", "rv-ac", "rf"]));
        assert_eq!(before.outcome, Outcome::ScriptExhausted);
        assert_eq!(after.outcome, Outcome::ScriptExhausted);
        assert!(before.marking.same_place(&after.marking));
    }

    #[test]
    fn guard_matching() {
        assert!(guard_matches("promise", "pm"));
        assert!(guard_matches("re-request", "rq"));
        assert!(guard_matches("revoke-accept", "rv-ac"));
        assert!(!guard_matches("revoke-request", "rq"));
        assert!(guard_matches("another", "another"));
    }
}
