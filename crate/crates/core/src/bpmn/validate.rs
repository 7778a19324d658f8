use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec::Vec;

use super::analysis::PoolGraph;
use super::{BpmnGraph, NodeKind, TaskKind};
use crate::diag::{Diagnostic, Locus};

/// Rule ids reported by [`validate_bpmn`].
pub mod rules {
    pub const SEQ_SCOPE: &str = "SEQ_SCOPE";
    pub const MSG_CROSS: &str = "MSG_CROSS";
    pub const START_IN: &str = "START_IN";
    pub const END_OUT: &str = "END_OUT";
    pub const REACH: &str = "REACH";
    pub const COREACH: &str = "COREACH";
    pub const ID_UNIQ: &str = "ID_UNIQ";
    pub const EBG_TARGETS: &str = "EBG_TARGETS";
    pub const DANGLING: &str = "DANGLING";
    pub const MSG_KIND: &str = "MSG_KIND";
}

fn diag(rule: &'static str, id: &str, message: alloc::string::String) -> Diagnostic {
    Diagnostic::error(rule, Locus::Element(id.into()), message)
}

/// Checks the structural rules of the collaboration. Returns an empty list
/// iff the graph is well formed.
pub fn validate_bpmn(graph: &BpmnGraph) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    check_unique_ids(graph, &mut out);

    // node id -> pool index
    let mut owner: BTreeMap<&str, usize> = BTreeMap::new();
    for (pi, pool) in graph.pools.iter().enumerate() {
        for n in &pool.nodes {
            owner.entry(n.id.as_str()).or_insert(pi);
        }
    }
    let declared_messages: BTreeSet<&str> = graph.messages.iter().map(|m| m.id.as_str()).collect();

    for (pi, pool) in graph.pools.iter().enumerate() {
        for lane in &pool.lanes {
            for r in &lane.node_refs {
                if pool.node(r).is_none() {
                    out.push(diag(
                        rules::DANGLING,
                        &lane.id,
                        format!("lane refers to unknown node {r} of pool {}", pool.id),
                    ));
                }
            }
        }
        for f in &pool.sequence_flows {
            for end in [&f.source, &f.target] {
                match owner.get(end.as_str()) {
                    None => out.push(diag(
                        rules::DANGLING,
                        &f.id,
                        format!("sequence flow refers to unknown node {end}"),
                    )),
                    Some(&p) if p != pi => out.push(diag(
                        rules::SEQ_SCOPE,
                        &f.id,
                        format!("sequence flow leaves pool {} towards {end}", pool.id),
                    )),
                    _ => {}
                }
            }
        }
        for n in &pool.nodes {
            if let Some(m) = n.kind.message() {
                if !declared_messages.contains(m) {
                    out.push(diag(rules::DANGLING, &n.id, format!("unknown message {m}")));
                }
            }
            let has_in = pool.sequence_flows.iter().any(|f| f.target == n.id);
            let has_out = pool.sequence_flows.iter().any(|f| f.source == n.id);
            match &n.kind {
                NodeKind::StartEvent { .. } if has_in => out.push(diag(
                    rules::START_IN,
                    &n.id,
                    "start event has an incoming sequence flow".into(),
                )),
                NodeKind::EndEvent { .. } if has_out => out.push(diag(
                    rules::END_OUT,
                    &n.id,
                    "end event has an outgoing sequence flow".into(),
                )),
                NodeKind::Gateway(super::GatewayKind::EventBased) => {
                    for f in pool.outgoing(&n.id) {
                        let ok = pool.node(&f.target).is_none_or(|t| {
                            matches!(
                                t.kind,
                                NodeKind::IntermediateCatchEvent { .. }
                                    | NodeKind::Task {
                                        kind: TaskKind::Receive,
                                        ..
                                    }
                            )
                        });
                        if !ok {
                            out.push(diag(
                                rules::EBG_TARGETS,
                                &n.id,
                                format!(
                                    "event-based gateway leads to {} which cannot catch a message",
                                    f.target
                                ),
                            ));
                        }
                    }
                }
                _ => {}
            }
        }

        let g = PoolGraph::new(pool);
        let reach = g.reachable();
        let coreach = g.coreachable();
        for (i, n) in pool.nodes.iter().enumerate() {
            if !n.kind.is_start() && !reach[i] {
                out.push(diag(
                    rules::REACH,
                    &n.id,
                    "not reachable from a start event".into(),
                ));
            }
            if !coreach[i] {
                out.push(diag(
                    rules::COREACH,
                    &n.id,
                    "no path to an end event".into(),
                ));
            }
        }
    }

    for mf in &graph.message_flows {
        if !declared_messages.contains(mf.message.as_str()) {
            out.push(diag(
                rules::DANGLING,
                &mf.id,
                format!("message flow carries unknown message {}", mf.message),
            ));
        }
        let src = owner.get(mf.source.as_str()).copied();
        let tgt = owner.get(mf.target.as_str()).copied();
        if src.is_none() {
            out.push(diag(
                rules::DANGLING,
                &mf.id,
                format!("message flow refers to unknown node {}", mf.source),
            ));
        }
        if tgt.is_none() {
            out.push(diag(
                rules::DANGLING,
                &mf.id,
                format!("message flow refers to unknown node {}", mf.target),
            ));
        }
        let (Some(sp), Some(tp)) = (src, tgt) else {
            continue;
        };
        if sp == tp {
            out.push(diag(
                rules::MSG_CROSS,
                &mf.id,
                format!("message flow stays inside pool {}", graph.pools[sp].id),
            ));
            continue;
        }
        let source = graph.pools[sp].node(&mf.source).expect("owner map");
        let target = graph.pools[tp].node(&mf.target).expect("owner map");
        if !source.kind.is_send() || source.kind.message() != Some(mf.message.as_str()) {
            out.push(diag(
                rules::MSG_KIND,
                &mf.id,
                format!("source {} is not a send task for {}", source.id, mf.message),
            ));
        }
        if !target.kind.is_catch() || target.kind.message() != Some(mf.message.as_str()) {
            out.push(diag(
                rules::MSG_KIND,
                &mf.id,
                format!("target {} does not catch {}", target.id, mf.message),
            ));
        }
    }
    out
}

fn check_unique_ids(graph: &BpmnGraph, out: &mut Vec<Diagnostic>) {
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    let mut reported: BTreeSet<&str> = BTreeSet::new();
    let mut ids: Vec<&str> = Vec::new();
    ids.extend(graph.messages.iter().map(|m| m.id.as_str()));
    for p in &graph.pools {
        ids.push(&p.id);
        if let Some(proc_id) = &p.process_id {
            ids.push(proc_id);
        }
        ids.extend(p.lanes.iter().map(|l| l.id.as_str()));
        ids.extend(p.nodes.iter().map(|n| n.id.as_str()));
        ids.extend(p.sequence_flows.iter().map(|f| f.id.as_str()));
    }
    ids.extend(graph.message_flows.iter().map(|f| f.id.as_str()));
    for id in ids {
        if !seen.insert(id) && reported.insert(id) {
            out.push(diag(
                rules::ID_UNIQ,
                id,
                format!("id {id} is declared more than once"),
            ));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bpmn::{FlowNode, Message, MessageFlow, Pool, SequenceFlow};
    use alloc::string::String;
    use alloc::vec;

    fn node(id: &str, kind: NodeKind) -> FlowNode {
        FlowNode {
            id: id.into(),
            name: String::new(),
            kind,
        }
    }

    fn flow(id: &str, s: &str, t: &str) -> SequenceFlow {
        SequenceFlow {
            id: id.into(),
            source: s.into(),
            target: t.into(),
            guard: None,
        }
    }

    fn ping() -> BpmnGraph {
        let mut a = Pool::new("A", "a");
        a.nodes = vec![
            node("a_s", NodeKind::StartEvent { message: None }),
            node(
                "a_send",
                NodeKind::Task {
                    kind: TaskKind::Send,
                    message: Some("m".into()),
                },
            ),
            node("a_e", NodeKind::EndEvent { terminate: false }),
        ];
        a.sequence_flows = vec![flow("a_f1", "a_s", "a_send"), flow("a_f2", "a_send", "a_e")];
        let mut b = Pool::new("B", "b");
        b.nodes = vec![
            node(
                "b_s",
                NodeKind::StartEvent {
                    message: Some("m".into()),
                },
            ),
            node("b_e", NodeKind::EndEvent { terminate: false }),
        ];
        b.sequence_flows = vec![flow("b_f1", "b_s", "b_e")];
        BpmnGraph {
            pools: vec![a, b],
            messages: vec![Message {
                id: "m".into(),
                name: "rq(T1)".into(),
            }],
            message_flows: vec![MessageFlow {
                id: "mf".into(),
                source: "a_send".into(),
                target: "b_s".into(),
                message: "m".into(),
            }],
        }
    }

    fn rule_set(g: &BpmnGraph) -> Vec<&'static str> {
        let mut r: Vec<_> = validate_bpmn(g).into_iter().map(|d| d.rule).collect();
        r.dedup();
        r
    }

    #[test]
    fn well_formed() {
        assert!(validate_bpmn(&ping()).is_empty());
    }

    #[test]
    fn duplicate_id() {
        let mut g = ping();
        g.pools[1].nodes[1].id = "a_e".into();
        g.pools[1].sequence_flows[0].target = "a_e".into();
        assert!(rule_set(&g).contains(&rules::ID_UNIQ));
    }

    #[test]
    fn dangling_and_scope() {
        let mut g = ping();
        g.message_flows[0].target = "nowhere".into();
        assert_eq!(rule_set(&g), [rules::DANGLING]);

        let mut g = ping();
        g.pools[0].sequence_flows[1].target = "b_e".into();
        let r = rule_set(&g);
        assert!(r.contains(&rules::SEQ_SCOPE));
    }

    #[test]
    fn start_in_end_out_and_reach() {
        let mut g = ping();
        g.pools[0].sequence_flows.push(flow("x", "a_send", "a_s"));
        assert_eq!(rule_set(&g), [rules::START_IN]);

        let mut g = ping();
        g.pools[1].nodes.push(node(
            "b_orphan",
            NodeKind::Gateway(super::super::GatewayKind::Exclusive),
        ));
        g.pools[1].sequence_flows.push(flow("y", "b_orphan", "b_e"));
        assert_eq!(rule_set(&g), [rules::REACH]);

        let mut g = ping();
        g.pools[1].sequence_flows.push(flow("z", "b_e", "b_s"));
        let r = rule_set(&g);
        assert!(r.contains(&rules::END_OUT) && r.contains(&rules::START_IN));
    }

    #[test]
    fn message_flow_rules() {
        let mut g = ping();
        g.message_flows[0].target = "a_e".into();
        assert_eq!(rule_set(&g), [rules::MSG_CROSS]);

        let mut g = ping();
        g.message_flows[0].target = "b_e".into();
        assert_eq!(rule_set(&g), [rules::MSG_KIND]);
    }
}
