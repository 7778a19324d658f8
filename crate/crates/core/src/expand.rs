//! Expansion of one transaction kind into a two-pool BPMN building block.
//!
//! The basic and standard blocks are laid out by hand. The complete block is
//! generated from a turn table: in every coordination situation exactly one
//! party may act, the other waits for its message (or has ended and is
//! restarted by a message start event). Each party's process is the
//! projection of that table onto its own pool.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::bpmn::{
    BpmnGraph, FlowNode, GatewayKind, Message, MessageFlow, MessageName, NodeKind, Pool,
    SequenceFlow, TaskKind,
};
use crate::ctp::{ActKind, CtpMachine, CtpState, Party, PatternLevel};
use crate::model::TransactionKind;

/// Guard on the re-request branch taken after a decline.
pub const GUARD_RE_REQUEST: &str = "re-request";
/// Guard on the re-declare branch taken after a reject.
pub const GUARD_RE_DECLARE: &str = "re-declare";
/// Guard on a branch that terminates the party's process.
pub const GUARD_END: &str = "end";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpandOptions {
    pub level: PatternLevel,
    pub include_production: bool,
    /// Prefix for every id of the block. Empty means `"<tk id>_"`.
    pub id_prefix: String,
}

impl ExpandOptions {
    pub fn new(level: PatternLevel) -> Self {
        ExpandOptions {
            level,
            include_production: false,
            id_prefix: String::new(),
        }
    }

    pub fn with_production(mut self, on: bool) -> Self {
        self.include_production = on;
        self
    }

    pub(crate) fn prefix_for(&self, tk: &TransactionKind) -> String {
        if self.id_prefix.is_empty() {
            format!("{}_", tk.id)
        } else {
            self.id_prefix.clone()
        }
    }
}

impl Default for ExpandOptions {
    fn default() -> Self {
        Self::new(PatternLevel::Standard)
    }
}

/// Id of the initiator pool of a block built with `prefix`.
pub fn initiator_pool_id(prefix: &str) -> String {
    format!("{prefix}initiator")
}

/// Id of the executor pool of a block built with `prefix`.
pub fn executor_pool_id(prefix: &str) -> String {
    format!("{prefix}executor")
}

/// Id of the single send task for `act` in a block built with `prefix`.
/// Every non-revocation act has exactly one send task at each level where it
/// exists.
pub fn send_task_id(prefix: &str, act: ActKind) -> String {
    let side = match act.performer() {
        Some(Party::Initiator) => "I",
        _ => "E",
    };
    format!("{prefix}{side}_send_{}", id_code(act))
}

fn id_code(act: ActKind) -> String {
    act.code().replace('-', "_")
}

pub(crate) struct PoolBuilder {
    pub pool: Pool,
    node_prefix: String,
    next_flow: usize,
}

impl PoolBuilder {
    pub fn new(id: String, name: &str, node_prefix: String) -> Self {
        PoolBuilder {
            pool: Pool::new(&id, name),
            node_prefix,
            next_flow: 1,
        }
    }

    pub fn node(&mut self, local: &str, name: &str, kind: NodeKind) -> String {
        let id = format!("{}{local}", self.node_prefix);
        self.pool.nodes.push(FlowNode {
            id: id.clone(),
            name: name.into(),
            kind,
        });
        id
    }

    pub fn flow(&mut self, source: &str, target: &str, guard: Option<&str>) -> String {
        let id = format!("{}f{}", self.node_prefix, self.next_flow);
        self.next_flow += 1;
        self.pool.sequence_flows.push(SequenceFlow {
            id: id.clone(),
            source: source.into(),
            target: target.into(),
            guard: guard.map(String::from),
        });
        id
    }

    pub fn chain(&mut self, nodes: &[&str]) {
        for w in nodes.windows(2) {
            self.flow(w[0], w[1], None);
        }
    }
}

struct BlockBuilder<'a> {
    tk: &'a TransactionKind,
    prefix: String,
    messages: Vec<Message>,
    by_name: BTreeMap<MessageName, String>,
    message_flows: Vec<MessageFlow>,
    initiator: PoolBuilder,
    executor: PoolBuilder,
}

impl<'a> BlockBuilder<'a> {
    fn new(tk: &'a TransactionKind, prefix: String) -> Self {
        BlockBuilder {
            tk,
            initiator: PoolBuilder::new(
                initiator_pool_id(&prefix),
                &tk.initiator_role,
                format!("{prefix}I_"),
            ),
            executor: PoolBuilder::new(
                executor_pool_id(&prefix),
                &tk.executor_role,
                format!("{prefix}E_"),
            ),
            prefix,
            messages: Vec::new(),
            by_name: BTreeMap::new(),
            message_flows: Vec::new(),
        }
    }

    fn pool(&mut self, party: Party) -> &mut PoolBuilder {
        match party {
            Party::Initiator => &mut self.initiator,
            Party::Executor => &mut self.executor,
        }
    }

    fn message(&mut self, name: MessageName) -> String {
        if let Some(id) = self.by_name.get(&name) {
            return id.clone();
        }
        let code = name.act_code().replace('-', "_");
        let id = format!("{}msg_{code}", self.prefix);
        self.messages.push(Message {
            id: id.clone(),
            name: name.to_string(),
        });
        self.by_name.insert(name, id.clone());
        id
    }

    fn send(&mut self, party: Party, local: &str, name: MessageName) -> String {
        let label = name.to_string();
        let msg = self.message(name);
        self.pool(party).node(
            local,
            &label,
            NodeKind::Task {
                kind: TaskKind::Send,
                message: Some(msg),
            },
        )
    }

    fn send_act(&mut self, act: ActKind) -> String {
        let party = act.performer().expect("plain act");
        let name = MessageName::new(act, &self.tk.id);
        self.send(party, &format!("send_{}", id_code(act)), name)
    }

    fn catch(&mut self, party: Party, local: &str, name: MessageName) -> String {
        let label = name.to_string();
        let msg = self.message(name);
        self.pool(party).node(
            local,
            &label,
            NodeKind::IntermediateCatchEvent { message: msg },
        )
    }

    fn catch_act(&mut self, party: Party, act: ActKind, suffix: &str) -> String {
        let name = MessageName::new(act, &self.tk.id);
        self.catch(party, &format!("catch_{}{suffix}", id_code(act)), name)
    }

    fn message_start(&mut self, local: &str, name: MessageName) -> String {
        let label = name.to_string();
        let msg = self.message(name);
        self.executor
            .node(local, &label, NodeKind::StartEvent { message: Some(msg) })
    }

    fn plain_start(&mut self, party: Party) -> String {
        self.pool(party)
            .node("start", "", NodeKind::StartEvent { message: None })
    }

    fn end(&mut self, party: Party, local: &str) -> String {
        self.pool(party)
            .node(local, "", NodeKind::EndEvent { terminate: false })
    }

    fn gateway(&mut self, party: Party, local: &str, kind: GatewayKind) -> String {
        self.pool(party).node(local, "", NodeKind::Gateway(kind))
    }

    fn production(&mut self) -> String {
        let label = format!("execute({})", self.tk.id);
        self.executor.node(
            "execute",
            &label,
            NodeKind::Task {
                kind: TaskKind::Abstract,
                message: None,
            },
        )
    }

    fn link(&mut self, source: &str, target: &str) {
        let src_msg = self
            .initiator
            .pool
            .node(source)
            .or_else(|| self.executor.pool.node(source))
            .and_then(|n| n.kind.message().map(String::from))
            .expect("message flow source is a send task");
        if self
            .message_flows
            .iter()
            .any(|f| f.source == source && f.target == target)
        {
            return;
        }
        let id = format!("{}mf{}", self.prefix, self.message_flows.len() + 1);
        self.message_flows.push(MessageFlow {
            id,
            source: source.into(),
            target: target.into(),
            message: src_msg,
        });
    }

    fn finish(self) -> BpmnGraph {
        BpmnGraph {
            pools: vec![self.initiator.pool, self.executor.pool],
            messages: self.messages,
            message_flows: self.message_flows,
        }
    }
}

/// Builds the building block of `tk` at `opts.level`.
pub fn expand_transaction(tk: &TransactionKind, opts: &ExpandOptions) -> BpmnGraph {
    let mut b = BlockBuilder::new(tk, opts.prefix_for(tk));
    match opts.level {
        PatternLevel::Basic => basic(&mut b, opts.include_production),
        PatternLevel::Standard => standard(&mut b, opts.include_production),
        PatternLevel::Complete => complete(&mut b, opts.include_production),
    }
    b.finish()
}

fn basic(b: &mut BlockBuilder, production: bool) {
    use ActKind as A;
    use Party::{Executor as E, Initiator as I};

    let i_start = b.plain_start(I);
    let send_rq = b.send_act(A::Request);
    let c_pm = b.catch_act(I, A::Promise, "");
    let c_da = b.catch_act(I, A::Declare, "");
    let send_ac = b.send_act(A::Accept);
    let i_end = b.end(I, "end_accepted");
    b.initiator
        .chain(&[&i_start, &send_rq, &c_pm, &c_da, &send_ac, &i_end]);

    let e_start = b.message_start("start_rq", MessageName::new(A::Request, &b.tk.id));
    let send_pm = b.send_act(A::Promise);
    let exec = production.then(|| b.production());
    let send_da = b.send_act(A::Declare);
    let c_ac = b.catch_act(E, A::Accept, "");
    let e_end = b.end(E, "end_accepted");
    let mut chain = vec![e_start.as_str(), send_pm.as_str()];
    if let Some(x) = &exec {
        chain.push(x);
    }
    chain.extend([send_da.as_str(), c_ac.as_str(), e_end.as_str()]);
    b.executor.chain(&chain);

    b.link(&send_rq, &e_start);
    b.link(&send_pm, &c_pm);
    b.link(&send_da, &c_da);
    b.link(&send_ac, &c_ac);
}

fn standard(b: &mut BlockBuilder, production: bool) {
    use ActKind as A;
    use GatewayKind::{EventBased as EBG, Exclusive as XOR};
    use Party::{Executor as E, Initiator as I};

    // Initiator
    let start = b.plain_start(I);
    let m_rq = b.gateway(I, "merge_request", XOR);
    let send_rq = b.send_act(A::Request);
    let eb_req = b.gateway(I, "await_response", EBG);
    let c_pm = b.catch_act(I, A::Promise, "");
    let c_dc = b.catch_act(I, A::Decline, "");
    let x_dec = b.gateway(I, "after_decline", XOR);
    let send_qt = b.send_act(A::Quit);
    let end_q = b.end(I, "end_quit");
    let m_da = b.gateway(I, "merge_await_declare", XOR);
    let eb_da = b.gateway(I, "await_declare", EBG);
    let c_da = b.catch_act(I, A::Declare, "");
    let c_st = b.catch_act(I, A::Stop, "");
    let x_decl = b.gateway(I, "after_declare", XOR);
    let send_ac = b.send_act(A::Accept);
    let end_a = b.end(I, "end_accepted");
    let send_rj = b.send_act(A::Reject);
    let end_s = b.end(I, "end_stopped");

    let p = &mut b.initiator;
    p.chain(&[&start, &m_rq, &send_rq, &eb_req]);
    p.flow(&eb_req, &c_pm, None);
    p.flow(&eb_req, &c_dc, None);
    p.flow(&c_pm, &m_da, None);
    p.flow(&c_dc, &x_dec, None);
    p.flow(&x_dec, &m_rq, Some(GUARD_RE_REQUEST));
    p.flow(&x_dec, &send_qt, Some(A::Quit.name()));
    p.flow(&send_qt, &end_q, None);
    p.flow(&m_da, &eb_da, None);
    p.flow(&eb_da, &c_da, None);
    p.flow(&eb_da, &c_st, None);
    p.flow(&c_da, &x_decl, None);
    p.flow(&x_decl, &send_ac, Some(A::Accept.name()));
    p.flow(&x_decl, &send_rj, Some(A::Reject.name()));
    p.flow(&send_ac, &end_a, None);
    p.flow(&send_rj, &m_da, None);
    p.flow(&c_st, &end_s, None);

    // Executor
    let e_start = b.message_start("start_rq", MessageName::new(A::Request, &b.tk.id));
    let m_req = b.gateway(E, "merge_request", XOR);
    let x_req = b.gateway(E, "after_request", XOR);
    let send_pm = b.send_act(A::Promise);
    let exec = production.then(|| b.production());
    let e_m_da = b.gateway(E, "merge_declare", XOR);
    let send_da = b.send_act(A::Declare);
    let eb_decl = b.gateway(E, "await_verdict", EBG);
    let c_ac = b.catch_act(E, A::Accept, "");
    let e_end_a = b.end(E, "end_accepted");
    let c_rj = b.catch_act(E, A::Reject, "");
    let x_rej = b.gateway(E, "after_reject", XOR);
    let send_st = b.send_act(A::Stop);
    let e_end_s = b.end(E, "end_stopped");
    let send_dc = b.send_act(A::Decline);
    let eb_dec = b.gateway(E, "await_after_decline", EBG);
    let c_rq = b.catch_act(E, A::Request, "");
    let c_qt = b.catch_act(E, A::Quit, "");
    let e_end_q = b.end(E, "end_quit");

    let p = &mut b.executor;
    p.chain(&[&e_start, &m_req, &x_req]);
    p.flow(&x_req, &send_pm, Some(A::Promise.name()));
    p.flow(&x_req, &send_dc, Some(A::Decline.name()));
    match &exec {
        Some(x) => p.chain(&[&send_pm, x, &e_m_da]),
        None => p.chain(&[&send_pm, &e_m_da]),
    }
    p.chain(&[&e_m_da, &send_da, &eb_decl]);
    p.flow(&eb_decl, &c_ac, None);
    p.flow(&eb_decl, &c_rj, None);
    p.flow(&c_ac, &e_end_a, None);
    p.flow(&c_rj, &x_rej, None);
    p.flow(&x_rej, &e_m_da, Some(GUARD_RE_DECLARE));
    p.flow(&x_rej, &send_st, Some(A::Stop.name()));
    p.flow(&send_st, &e_end_s, None);
    p.flow(&send_dc, &eb_dec, None);
    p.flow(&eb_dec, &c_rq, None);
    p.flow(&eb_dec, &c_qt, None);
    p.flow(&c_rq, &m_req, None);
    p.flow(&c_qt, &e_end_q, None);

    b.link(&send_rq, &e_start);
    b.link(&send_rq, &c_rq);
    b.link(&send_pm, &c_pm);
    b.link(&send_dc, &c_dc);
    b.link(&send_da, &c_da);
    b.link(&send_ac, &c_ac);
    b.link(&send_rj, &c_rj);
    b.link(&send_qt, &c_qt);
    b.link(&send_st, &c_st);
}

/// A coordination situation of the complete pattern as both parties see it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Situation {
    state: CtpState,
    pending: Option<ActKind>,
    /// `initiated` reached by an allowed revoke of the request.
    rolled: bool,
}

impl Situation {
    const START: Situation = Situation {
        state: CtpState::Initiated,
        pending: None,
        rolled: false,
    };

    fn settled(state: CtpState) -> Self {
        Situation {
            state,
            pending: None,
            rolled: false,
        }
    }

    fn label(&self) -> String {
        let mut s = String::from(self.state.name());
        if self.rolled {
            s.push_str("_again");
        }
        if let Some(p) = self.pending {
            s.push('_');
            s.push_str(&id_code(p));
        }
        s
    }

    /// The party holding the turn and its options; `None` ends the process.
    fn turn(&self) -> (Party, Vec<Option<ActKind>>) {
        use ActKind as A;
        use CtpState as S;
        if let Some(rv) = self.pending {
            let replier = rv.performer().expect("revoke").counterparty();
            return (replier, vec![Some(A::Allow), Some(A::Refuse)]);
        }
        let (party, acts): (Party, &[Option<ActKind>]) = match (self.state, self.rolled) {
            (S::Initiated, false) => (Party::Initiator, &[Some(A::Request)]),
            (S::Initiated, true) => (Party::Initiator, &[Some(A::Request), None]),
            (S::Requested, _) => (Party::Executor, &[Some(A::Promise), Some(A::Decline)]),
            (S::Promised, _) => (Party::Executor, &[Some(A::Declare), Some(A::RevokePromise)]),
            (S::Declared, _) => (
                Party::Initiator,
                &[Some(A::Accept), Some(A::Reject), Some(A::RevokeRequest)],
            ),
            (S::Accepted, _) => (
                Party::Initiator,
                &[None, Some(A::RevokeAccept), Some(A::RevokeRequest)],
            ),
            (S::Declined, _) => (
                Party::Initiator,
                &[Some(A::Request), Some(A::RevokeRequest)],
            ),
            (S::Rejected, _) => (
                Party::Executor,
                &[
                    Some(A::Declare),
                    Some(A::RevokeDeclare),
                    Some(A::RevokePromise),
                ],
            ),
            (S::Quit | S::Stopped, _) => unreachable!("no quit or stop at complete level"),
        };
        (party, acts.to_vec())
    }

    /// Whether `party` has a running process in this situation.
    fn alive(&self, party: Party) -> bool {
        party == Party::Initiator
            || self.pending.is_some()
            || !matches!(self.state, CtpState::Initiated | CtpState::Accepted)
    }

    fn after(&self, act: ActKind) -> Situation {
        use ActKind as A;
        match (self.pending, act) {
            (Some(rv), A::Allow) => Situation {
                state: CtpMachine::rollback_target(rv).expect("revoke"),
                pending: None,
                rolled: rv == A::RevokeRequest,
            },
            (Some(_), _) => Situation {
                pending: None,
                ..*self
            },
            (None, rv) if rv.is_revoke() => Situation {
                pending: Some(rv),
                ..*self
            },
            (None, a) => Situation::settled(match a {
                A::Request => CtpState::Requested,
                A::Promise => CtpState::Promised,
                A::Decline => CtpState::Declined,
                A::Declare => CtpState::Declared,
                A::Accept => CtpState::Accepted,
                A::Reject => CtpState::Rejected,
                _ => unreachable!("no quit or stop at complete level"),
            }),
        }
    }

    fn message(&self, act: ActKind, tk: &str) -> MessageName {
        match (self.pending, act) {
            (Some(rv), ActKind::Allow | ActKind::Refuse) => MessageName::reply(act, rv, tk),
            _ => MessageName::new(act, tk),
        }
    }

    fn guard(&self, act: Option<ActKind>) -> &'static str {
        match (self.state, self.pending, act) {
            (_, _, None) => GUARD_END,
            (CtpState::Declined, None, Some(ActKind::Request)) => GUARD_RE_REQUEST,
            (CtpState::Rejected, None, Some(ActKind::Declare)) => GUARD_RE_DECLARE,
            (_, _, Some(a)) => a.name(),
        }
    }
}

fn situations() -> Vec<Situation> {
    let mut seen = BTreeSet::new();
    let mut order = Vec::new();
    let mut queue = VecDeque::from([Situation::START]);
    seen.insert(Situation::START);
    while let Some(s) = queue.pop_front() {
        order.push(s);
        for act in s.turn().1.into_iter().flatten() {
            let next = s.after(act);
            if seen.insert(next) {
                queue.push_back(next);
            }
        }
    }
    order
}

/// Where a party's sequence flow goes when it enters a situation.
#[derive(Clone)]
enum Entry {
    Node(String),
    /// The party has no process in the situation: it ends here.
    Ended,
}

fn complete(b: &mut BlockBuilder, production: bool) {
    let tk = b.tk.id.clone();
    let sits = situations();

    // Head node of every (party, situation) where the party is alive.
    let mut heads: BTreeMap<(Party, Situation), String> = BTreeMap::new();
    for s in &sits {
        let (actor, options) = s.turn();
        let label = s.label();
        if options.len() > 1 {
            let g = b.gateway(actor, &format!("choose_{label}"), GatewayKind::Exclusive);
            heads.insert((actor, *s), g);
        }
        let waiter = actor.counterparty();
        let sends = options.iter().flatten().count();
        if s.alive(waiter) && sends > 1 {
            let g = b.gateway(waiter, &format!("await_{label}"), GatewayKind::EventBased);
            heads.insert((waiter, *s), g);
        }
    }

    // Shared send tasks for plain acts, one per act kind.
    let mut plain_sends: BTreeMap<ActKind, String> = BTreeMap::new();
    for s in &sits {
        for act in s.turn().1.into_iter().flatten() {
            if s.pending.is_none() && !act.is_revoke() && !plain_sends.contains_key(&act) {
                let id = b.send_act(act);
                plain_sends.insert(act, id);
            }
        }
    }

    // Per-situation send tasks and catch elements.
    struct Move {
        from: Situation,
        act: Option<ActKind>,
        send: Option<String>,
        catch: Option<String>,
    }
    let mut moves: Vec<Move> = Vec::new();
    let mut ends: BTreeMap<(Party, String), String> = BTreeMap::new();
    let mut starts: BTreeMap<String, String> = BTreeMap::new();
    for s in &sits {
        let (actor, options) = s.turn();
        let waiter = actor.counterparty();
        let label = s.label();
        for act in options {
            let Some(a) = act else {
                moves.push(Move {
                    from: *s,
                    act: None,
                    send: None,
                    catch: None,
                });
                continue;
            };
            let name = s.message(a, &tk);
            let send = match plain_sends.get(&a) {
                Some(id) if s.pending.is_none() && !a.is_revoke() => id.clone(),
                _ => b.send(
                    actor,
                    &format!("send_{}_{label}", id_code_of(&name)),
                    name.clone(),
                ),
            };
            let catch = if s.alive(waiter) {
                Some(b.catch(
                    waiter,
                    &format!("catch_{}_{label}", id_code_of(&name)),
                    name,
                ))
            } else {
                let key = name.to_string();
                let local = format!("start_{}", id_code_of(&name));
                let id = match starts.get(&key) {
                    Some(id) => id.clone(),
                    None => {
                        let id = b.message_start(&local, name);
                        starts.insert(key, id.clone());
                        id
                    }
                };
                Some(id)
            };
            moves.push(Move {
                from: *s,
                act: Some(a),
                send: Some(send),
                catch,
            });
        }
    }

    let entry = |party: Party, s: Situation| -> Entry {
        if !s.alive(party) {
            return Entry::Ended;
        }
        if let Some(h) = heads.get(&(party, s)) {
            return Entry::Node(h.clone());
        }
        // Single-option situation: the move itself is the head.
        let (actor, _) = s.turn();
        let m = moves
            .iter()
            .find(|m| m.from == s && m.act.is_some())
            .expect("situation with one move");
        let node = if actor == party {
            m.send.clone()
        } else {
            m.catch.clone()
        };
        Entry::Node(node.expect("move nodes"))
    };

    let mut link_to = |b: &mut BlockBuilder,
                       party: Party,
                       from: &str,
                       to: Entry,
                       guard: Option<&str>,
                       end_label: &str| {
        let target = match to {
            Entry::Node(n) => n,
            Entry::Ended => {
                let key = (party, String::from(end_label));
                match ends.get(&key) {
                    Some(e) => e.clone(),
                    None => {
                        let e = b.end(party, &format!("end_{end_label}"));
                        ends.insert(key, e.clone());
                        e
                    }
                }
            }
        };
        b.pool(party).flow(from, &target, guard);
    };

    // Initiator start.
    let i_start = b.plain_start(Party::Initiator);
    let first = entry(Party::Initiator, Situation::START);
    link_to(b, Party::Initiator, &i_start, first, None, "");

    let mut linked: BTreeSet<String> = BTreeSet::new();
    for m in &moves {
        let s = m.from;
        let (actor, options) = s.turn();
        let waiter = actor.counterparty();
        let guard = s.guard(m.act);
        let Some(act) = m.act else {
            let head = heads
                .get(&(actor, s))
                .expect("end is always one of several options")
                .clone();
            link_to(b, actor, &head, Entry::Ended, Some(guard), &s.label());
            continue;
        };
        let next = s.after(act);
        let send = m.send.clone().expect("send");
        let catch = m.catch.clone().expect("catch");

        // Actor: choice -> send -> next situation.
        if options.len() > 1 {
            let head = heads[&(actor, s)].clone();
            b.pool(actor).flow(&head, &send, Some(guard));
        }
        if linked.insert(send.clone()) {
            let mut from = send.clone();
            if production && act == ActKind::Promise && s.pending.is_none() {
                let x = b.production();
                b.executor.flow(&send, &x, None);
                from = x;
            }
            let to = entry(actor, next);
            link_to(b, actor, &from, to, None, &next.label());
        }

        // Waiter: await -> catch -> next situation.
        let waiter_alive = s.alive(waiter);
        if waiter_alive && options.iter().flatten().count() > 1 {
            let head = heads[&(waiter, s)].clone();
            b.pool(waiter).flow(&head, &catch, None);
        }
        if linked.insert(catch.clone()) {
            let to = entry(waiter, next);
            link_to(b, waiter, &catch, to, None, &next.label());
        }
        b.link(&send, &catch);
    }

    insert_merges(&mut b.initiator);
    insert_merges(&mut b.executor);
}

fn id_code_of(name: &MessageName) -> String {
    name.act_code().replace('-', "_")
}

/// Gives every non-gateway, non-end node with several incoming flows an
/// exclusive merge in front, and every gateway that both merges and splits
/// a separate merge as well.
fn insert_merges(p: &mut PoolBuilder) {
    let ids: Vec<(String, bool)> = p
        .pool
        .nodes
        .iter()
        .map(|n| (n.id.clone(), n.kind.is_end()))
        .collect();
    for (id, is_end) in ids {
        if is_end {
            continue;
        }
        let incoming: Vec<usize> = p
            .pool
            .sequence_flows
            .iter()
            .enumerate()
            .filter(|(_, f)| f.target == id)
            .map(|(i, _)| i)
            .collect();
        if incoming.len() < 2 {
            continue;
        }
        let local = id
            .strip_prefix(p.node_prefix.as_str())
            .unwrap_or(&id)
            .to_string();
        let merge = p.node(
            &format!("merge_{local}"),
            "",
            NodeKind::Gateway(GatewayKind::Exclusive),
        );
        for i in incoming {
            p.pool.sequence_flows[i].target = merge.clone();
        }
        p.flow(&merge, &id, None);
    }
}
