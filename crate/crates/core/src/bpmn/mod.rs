//! In-memory BPMN 2.0 collaboration restricted to events, tasks, gateways,
//! sequence flows, message flows, pools, lanes and messages.

pub mod analysis;
mod validate;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::ctp::{ActKind, Party};

pub use validate::{rules, validate_bpmn};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub id: String,
    pub name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GatewayKind {
    Exclusive,
    EventBased,
    Parallel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TaskKind {
    Abstract,
    Send,
    Receive,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeKind {
    /// `message == None` is a plain start event.
    StartEvent {
        message: Option<String>,
    },
    IntermediateCatchEvent {
        message: String,
    },
    EndEvent {
        terminate: bool,
    },
    Task {
        kind: TaskKind,
        message: Option<String>,
    },
    Gateway(GatewayKind),
}

impl NodeKind {
    pub fn message(&self) -> Option<&str> {
        match self {
            NodeKind::StartEvent { message } | NodeKind::Task { message, .. } => message.as_deref(),
            NodeKind::IntermediateCatchEvent { message } => Some(message),
            _ => None,
        }
    }

    pub fn is_start(&self) -> bool {
        matches!(self, NodeKind::StartEvent { .. })
    }

    pub fn is_end(&self) -> bool {
        matches!(self, NodeKind::EndEvent { .. })
    }

    pub fn is_send(&self) -> bool {
        matches!(
            self,
            NodeKind::Task {
                kind: TaskKind::Send,
                ..
            }
        )
    }

    /// Elements that consume an incoming message.
    pub fn is_catch(&self) -> bool {
        matches!(
            self,
            NodeKind::StartEvent { message: Some(_) }
                | NodeKind::IntermediateCatchEvent { .. }
                | NodeKind::Task {
                    kind: TaskKind::Receive,
                    ..
                }
        )
    }

    pub fn is_event(&self) -> bool {
        matches!(
            self,
            NodeKind::StartEvent { .. }
                | NodeKind::IntermediateCatchEvent { .. }
                | NodeKind::EndEvent { .. }
        )
    }

    pub fn gateway(&self) -> Option<GatewayKind> {
        match self {
            NodeKind::Gateway(g) => Some(*g),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowNode {
    pub id: String,
    pub name: String,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceFlow {
    pub id: String,
    pub source: String,
    pub target: String,
    pub guard: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lane {
    pub id: String,
    pub name: String,
    pub node_refs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pool {
    pub id: String,
    pub name: String,
    /// `None` for a black-box participant.
    pub process_id: Option<String>,
    pub lanes: Vec<Lane>,
    pub nodes: Vec<FlowNode>,
    pub sequence_flows: Vec<SequenceFlow>,
}

impl Pool {
    pub fn new(id: &str, name: &str) -> Self {
        Pool {
            id: id.into(),
            name: name.into(),
            process_id: Some(format!("{id}_process")),
            lanes: Vec::new(),
            nodes: Vec::new(),
            sequence_flows: Vec::new(),
        }
    }

    pub fn node(&self, id: &str) -> Option<&FlowNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn incoming<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a SequenceFlow> + 'a {
        self.sequence_flows.iter().filter(move |f| f.target == id)
    }

    pub fn outgoing<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a SequenceFlow> + 'a {
        self.sequence_flows.iter().filter(move |f| f.source == id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MessageFlow {
    pub id: String,
    pub source: String,
    pub target: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BpmnGraph {
    pub pools: Vec<Pool>,
    pub messages: Vec<Message>,
    pub message_flows: Vec<MessageFlow>,
}

/// What an id refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Element<'a> {
    Pool(&'a Pool),
    Process(&'a Pool),
    Lane(&'a Pool, &'a Lane),
    Node(&'a Pool, &'a FlowNode),
    SequenceFlow(&'a Pool, &'a SequenceFlow),
    MessageFlow(&'a MessageFlow),
    Message(&'a Message),
}

impl BpmnGraph {
    /// Id → element map. Later duplicates shadow earlier ones.
    pub fn id_index(&self) -> BTreeMap<&str, Element<'_>> {
        let mut idx = BTreeMap::new();
        for m in &self.messages {
            idx.insert(m.id.as_str(), Element::Message(m));
        }
        for p in &self.pools {
            idx.insert(p.id.as_str(), Element::Pool(p));
            if let Some(proc_id) = &p.process_id {
                idx.insert(proc_id.as_str(), Element::Process(p));
            }
            for l in &p.lanes {
                idx.insert(l.id.as_str(), Element::Lane(p, l));
            }
            for n in &p.nodes {
                idx.insert(n.id.as_str(), Element::Node(p, n));
            }
            for f in &p.sequence_flows {
                idx.insert(f.id.as_str(), Element::SequenceFlow(p, f));
            }
        }
        for mf in &self.message_flows {
            idx.insert(mf.id.as_str(), Element::MessageFlow(mf));
        }
        idx
    }

    pub fn pool(&self, id: &str) -> Option<&Pool> {
        self.pools.iter().find(|p| p.id == id)
    }

    pub fn pool_named(&self, name: &str) -> Option<&Pool> {
        self.pools.iter().find(|p| p.name == name)
    }

    /// The node and the pool that holds it.
    pub fn find_node(&self, id: &str) -> Option<(&Pool, &FlowNode)> {
        self.pools.iter().find_map(|p| p.node(id).map(|n| (p, n)))
    }

    pub fn message(&self, id: &str) -> Option<&Message> {
        self.messages.iter().find(|m| m.id == id)
    }

    pub fn node_count(&self) -> usize {
        self.pools.iter().map(|p| p.nodes.len()).sum()
    }

    /// Ids of all transaction kinds whose messages occur in the graph, in
    /// first-occurrence order.
    pub fn transaction_ids(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for m in &self.messages {
            if let Ok(name) = m.name.parse::<MessageName>() {
                if !out.contains(&name.tk) {
                    out.push(name.tk);
                }
            }
        }
        out
    }
}

/// The structured form of a message name such as `rq(TK01)` or
/// `al-pm(TK01)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MessageName {
    pub act: ActKind,
    /// For allow/refuse: the revoke being answered.
    pub answers: Option<ActKind>,
    pub tk: String,
}

impl MessageName {
    pub fn new(act: ActKind, tk: &str) -> Self {
        MessageName {
            act,
            answers: None,
            tk: tk.into(),
        }
    }

    pub fn reply(act: ActKind, revoke: ActKind, tk: &str) -> Self {
        MessageName {
            act,
            answers: Some(revoke),
            tk: tk.into(),
        }
    }

    /// Code of the act, `al-pm` style for replies.
    pub fn act_code(&self) -> String {
        match (self.act, self.answers.and_then(ActKind::revoked)) {
            (act, Some(revoked)) => format!("{}-{}", act.code(), revoked.code()),
            (act, None) => String::from(act.code()),
        }
    }

    /// Who performs the act carried by this message.
    pub fn party(&self) -> Party {
        match self.act.performer() {
            Some(p) => p,
            None => self
                .answers
                .and_then(ActKind::performer)
                .map_or(Party::Executor, Party::counterparty),
        }
    }
}

impl fmt::Display for MessageName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.act_code(), self.tk)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BadMessageName(pub String);

impl FromStr for MessageName {
    type Err = BadMessageName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || BadMessageName(s.into());
        let (code, rest) = s.split_once('(').ok_or_else(bad)?;
        let tk = rest.strip_suffix(')').ok_or_else(bad)?;
        if tk.is_empty() {
            return Err(bad());
        }
        if let Some(act) = ActKind::from_code(code) {
            if matches!(act, ActKind::Allow | ActKind::Refuse) {
                return Err(bad());
            }
            return Ok(MessageName::new(act, tk));
        }
        let (reply, revoked) = code.split_once('-').ok_or_else(bad)?;
        let act = match reply {
            "al" => ActKind::Allow,
            "rf" => ActKind::Refuse,
            _ => return Err(bad()),
        };
        let revoke = ActKind::from_code(revoked)
            .and_then(ActKind::revoke_of)
            .ok_or_else(bad)?;
        Ok(MessageName::reply(act, revoke, tk))
    }
}

/// Element counts of a graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BlockStats {
    pub pools: usize,
    pub lanes: usize,
    pub start_events: usize,
    pub intermediate_events: usize,
    pub end_events: usize,
    pub send_tasks: usize,
    pub receive_tasks: usize,
    pub abstract_tasks: usize,
    pub exclusive_gateways: usize,
    pub event_based_gateways: usize,
    pub parallel_gateways: usize,
    pub sequence_flows: usize,
    pub message_flows: usize,
    pub messages: usize,
}

impl BlockStats {
    pub fn events(&self) -> usize {
        self.start_events + self.intermediate_events + self.end_events
    }

    pub fn tasks(&self) -> usize {
        self.send_tasks + self.receive_tasks + self.abstract_tasks
    }

    pub fn gateways(&self) -> usize {
        self.exclusive_gateways + self.event_based_gateways + self.parallel_gateways
    }

    pub fn flow_nodes(&self) -> usize {
        self.events() + self.tasks() + self.gateways()
    }
}

impl fmt::Display for BlockStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "pools: {}", self.pools)?;
        writeln!(
            f,
            "events: {} (start {}, intermediate {}, end {})",
            self.events(),
            self.start_events,
            self.intermediate_events,
            self.end_events
        )?;
        writeln!(
            f,
            "tasks: {} (send {}, receive {}, abstract {})",
            self.tasks(),
            self.send_tasks,
            self.receive_tasks,
            self.abstract_tasks
        )?;
        writeln!(
            f,
            "gateways: {} (exclusive {}, event-based {}, parallel {})",
            self.gateways(),
            self.exclusive_gateways,
            self.event_based_gateways,
            self.parallel_gateways
        )?;
        writeln!(f, "sequence flows: {}", self.sequence_flows)?;
        write!(f, "message flows: {}", self.message_flows)
    }
}

pub fn block_stats(graph: &BpmnGraph) -> BlockStats {
    let mut s = BlockStats {
        pools: graph.pools.len(),
        message_flows: graph.message_flows.len(),
        messages: graph.messages.len(),
        ..BlockStats::default()
    };
    for pool in &graph.pools {
        s.lanes += pool.lanes.len();
        s.sequence_flows += pool.sequence_flows.len();
        for node in &pool.nodes {
            match &node.kind {
                NodeKind::StartEvent { .. } => s.start_events += 1,
                NodeKind::IntermediateCatchEvent { .. } => s.intermediate_events += 1,
                NodeKind::EndEvent { .. } => s.end_events += 1,
                NodeKind::Task { kind, .. } => match kind {
                    TaskKind::Send => s.send_tasks += 1,
                    TaskKind::Receive => s.receive_tasks += 1,
                    TaskKind::Abstract => s.abstract_tasks += 1,
                },
                NodeKind::Gateway(g) => match g {
                    GatewayKind::Exclusive => s.exclusive_gateways += 1,
                    GatewayKind::EventBased => s.event_based_gateways += 1,
                    GatewayKind::Parallel => s.parallel_gateways += 1,
                },
            }
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn message_names_round_trip() {
        for s in [
            "rq(TK01)",
            "rv-ac(TK01)",
            "al-pm(TK02)",
            "rf-rq(X1)",
            "qt(TK9)",
        ] {
            let m: MessageName = s.parse().unwrap();
            assert_eq!(m.to_string(), s);
        }
        for bad in ["al(TK01)", "rq", "rq()", "zz(TK01)", "al-dc(TK01)"] {
            assert!(bad.parse::<MessageName>().is_err(), "{bad}");
        }
    }

    #[test]
    fn reply_party_is_counterparty_of_revoker() {
        let al: MessageName = "al-ac(TK01)".parse().unwrap();
        assert_eq!(al.party(), Party::Executor);
        let rf: MessageName = "rf-da(TK01)".parse().unwrap();
        assert_eq!(rf.party(), Party::Initiator);
        let pm: MessageName = "pm(TK01)".parse().unwrap();
        assert_eq!(pm.party(), Party::Executor);
    }

    #[test]
    fn empty_stats() {
        assert_eq!(block_stats(&BpmnGraph::default()), BlockStats::default());
        assert_eq!(BlockStats::default().flow_nodes(), 0);
    }
}
