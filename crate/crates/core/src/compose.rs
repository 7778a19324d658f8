//! Splicing building blocks along the transaction tree.
//!
//! The initiator side of a child transaction is inlined into the pool that
//! holds the parent's anchor (the send task of the act that causes the
//! response link's event); the child's executor keeps a pool of its own.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use thiserror::Error;

use crate::bpmn::analysis::PoolGraph;
use crate::bpmn::{BpmnGraph, FlowNode, GatewayKind, MessageName, NodeKind, SequenceFlow};
use crate::ctp::CtpState;
use crate::diag::Diagnostic;
use crate::expand::{expand_transaction, ExpandOptions};
use crate::model::{roots, validate_model, CardinalityRange, DemoModel, ResponseLink};

/// Guard on the loop-back edge of a repeated child.
pub const GUARD_ANOTHER: &str = "another";
/// Guard on the exit of a repeated child.
pub const GUARD_DONE: &str = "done";
/// Guard on the edge that bypasses an optional child.
pub const GUARD_SKIP: &str = "skip";

/// Guard on the edge that enters an optional child.
pub fn guard_init(child_tk: &str) -> String {
    format!("init {child_tk}")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InsertionPoint {
    pub parent_tk: String,
    /// Id of the send task after which the child is initiated.
    pub anchor: String,
    pub link: ResponseLink,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ComposeError {
    #[error("no send task realizes ({parent_tk}/{event}) at this pattern level")]
    AnchorMissing { parent_tk: String, event: String },
    #[error("model is invalid ({} diagnostics)", .0.len())]
    InvalidModel(Vec<Diagnostic>),
    #[error("model has {0} roots; compose one tree at a time")]
    RootCount(usize),
}

/// Id of the send task in `graph` that performs the act causing `event`
/// of transaction `tk`.
pub fn anchor_for(graph: &BpmnGraph, tk: &str, event: CtpState) -> Option<String> {
    let act = event.caused_by()?;
    let wanted = MessageName::new(act, tk);
    let msg = graph
        .messages
        .iter()
        .find(|m| m.name.parse::<MessageName>().ok().as_ref() == Some(&wanted))?;
    graph
        .pools
        .iter()
        .flat_map(|p| &p.nodes)
        .find(|n| n.kind.is_send() && n.kind.message() == Some(msg.id.as_str()))
        .map(|n| n.id.clone())
}

/// One point per response link leaving a transaction of `block`, in link
/// order. The parent is every transaction kind whose messages occur in the
/// block.
pub fn insertion_points(
    model: &DemoModel,
    block: &BpmnGraph,
) -> Result<Vec<InsertionPoint>, ComposeError> {
    let mut out = Vec::new();
    for tk in block.transaction_ids() {
        for link in model.links_from(&tk) {
            let anchor = anchor_for(block, &tk, link.parent_event).ok_or_else(|| {
                ComposeError::AnchorMissing {
                    parent_tk: tk.clone(),
                    event: link_event(link),
                }
            })?;
            out.push(InsertionPoint {
                parent_tk: tk.clone(),
                anchor,
                link: link.clone(),
            });
        }
    }
    Ok(out)
}

fn link_event(link: &ResponseLink) -> String {
    crate::model::event_code(link.parent_event)
        .unwrap_or(link.parent_event.name())
        .to_string()
}

/// Composes the single tree of `model` into one collaboration.
pub fn compose(model: &DemoModel, opts: &ExpandOptions) -> Result<BpmnGraph, ComposeError> {
    let diags = validate_model(model);
    if !diags.is_empty() {
        return Err(ComposeError::InvalidModel(diags));
    }
    let rs = roots(model);
    if rs.len() != 1 {
        return Err(ComposeError::RootCount(rs.len()));
    }
    let root = rs[0];
    let block_opts = |tk: &crate::model::TransactionKind| ExpandOptions {
        id_prefix: format!("{}_", tk.id),
        ..opts.clone()
    };
    let mut graph = expand_transaction(root, &block_opts(root));

    // Continuation flow after each anchor, moved along as children chain up.
    let mut tails: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    let mut queue = VecDeque::from([root.id.clone()]);
    while let Some(tk) = queue.pop_front() {
        for link in model.links_from(&tk) {
            let anchor = anchor_for(&graph, &tk, link.parent_event).ok_or_else(|| {
                ComposeError::AnchorMissing {
                    parent_tk: tk.clone(),
                    event: link_event(link),
                }
            })?;
            let child = model.transaction(&link.child_tk).expect("validated");
            let block = expand_transaction(child, &block_opts(child));
            let tail = match tails.get(&anchor) {
                Some(t) => *t,
                None => {
                    let (pi, _) = graph
                        .pools
                        .iter()
                        .enumerate()
                        .find(|(_, p)| p.node(&anchor).is_some())
                        .expect("anchor found");
                    let fi = graph.pools[pi]
                        .sequence_flows
                        .iter()
                        .position(|f| f.source == anchor)
                        .expect("send task has a successor");
                    (pi, fi)
                }
            };
            let new_tail = inline(&mut graph, tail, block, &link.child_tk, link.cardinality);
            tails.insert(anchor, new_tail);
            queue.push_back(link.child_tk.clone());
        }
    }
    Ok(graph)
}

/// Composes every tree of a valid model, one collaboration per root.
pub fn compose_forest(
    model: &DemoModel,
    opts: &ExpandOptions,
) -> Result<Vec<(String, BpmnGraph)>, ComposeError> {
    let diags = validate_model(model);
    if !diags.is_empty() {
        return Err(ComposeError::InvalidModel(diags));
    }
    roots(model)
        .into_iter()
        .map(|r| compose(&model.tree(&r.id), opts).map(|g| (r.id.clone(), g)))
        .collect()
}

/// Inlines the initiator pool of `block` at the flow `tail` and appends the
/// executor pool. Returns the flow that now leads to the old continuation.
fn inline(
    graph: &mut BpmnGraph,
    (pi, tail): (usize, usize),
    mut block: BpmnGraph,
    child_tk: &str,
    card: CardinalityRange,
) -> (usize, usize) {
    let executor = block.pools.pop().expect("executor pool");
    let initiator = block.pools.pop().expect("initiator pool");
    graph.pools.push(executor);
    graph.messages.append(&mut block.messages);
    graph.message_flows.append(&mut block.message_flows);

    let start = initiator
        .nodes
        .iter()
        .find(|n| matches!(n.kind, NodeKind::StartEvent { message: None }))
        .map(|n| n.id.clone())
        .expect("initiator start");
    let is_end = |id: &str| initiator.node(id).is_some_and(|n| n.kind.is_end());
    let entry = initiator
        .outgoing(&start)
        .next()
        .map(|f| f.target.clone())
        .expect("start has a successor");

    let host = &mut graph.pools[pi];
    let mut exits: Vec<usize> = Vec::new();
    for f in &initiator.sequence_flows {
        if f.source == start {
            continue;
        }
        if is_end(&f.target) {
            exits.push(host.sequence_flows.len());
        }
        host.sequence_flows.push(f.clone());
    }
    host.nodes.extend(
        initiator
            .nodes
            .iter()
            .filter(|n| n.id != start && !n.kind.is_end())
            .cloned(),
    );

    let mut w = Wrapper {
        host,
        prefix: format!("{child_tk}_C_"),
        next: 1,
    };
    let cont = w.host.sequence_flows[tail].target.clone();
    let optional = card.low == 0;
    let repeated = card.high != Some(1) || card.low > 1;
    let split = optional.then(|| w.gateway("split", &format!("{child_tk} {card}")));
    let join = optional.then(|| w.gateway("join", ""));
    let repeat = repeated.then(|| w.gateway("repeat", ""));
    let looper = repeated.then(|| w.gateway("loop", &format!("{child_tk} {card}")));

    let body = repeat.clone().unwrap_or_else(|| entry.clone());
    if let Some(r) = &repeat {
        w.flow(r, &entry, None);
    }
    match (&split, &join) {
        (Some(s), Some(j)) => {
            w.host.sequence_flows[tail].target = s.clone();
            w.flow(s, &body, Some(&guard_init(child_tk)));
            w.flow(s, j, Some(GUARD_SKIP));
        }
        _ => w.host.sequence_flows[tail].target = body.clone(),
    }

    let exit_target = looper
        .clone()
        .or_else(|| join.clone())
        .unwrap_or_else(|| cont.clone());
    let last = if exits.len() > 1 {
        let merge = w.gateway("exit", "");
        for &e in &exits {
            w.host.sequence_flows[e].target = merge.clone();
        }
        w.flow(&merge, &exit_target, None)
    } else {
        w.host.sequence_flows[exits[0]].target = exit_target;
        exits[0]
    };
    let done = match (&looper, &repeat) {
        (Some(l), Some(r)) => {
            w.flow(l, r, Some(GUARD_ANOTHER));
            let to = join.clone().unwrap_or_else(|| cont.clone());
            Some(w.flow(l, &to, Some(GUARD_DONE)))
        }
        _ => None,
    };
    let new_tail = match (&join, done) {
        (Some(j), _) => w.flow(j, &cont, None),
        (None, Some(d)) => d,
        (None, None) => last,
    };
    (pi, new_tail)
}

struct Wrapper<'a> {
    host: &'a mut crate::bpmn::Pool,
    prefix: String,
    next: usize,
}

impl Wrapper<'_> {
    fn gateway(&mut self, local: &str, name: &str) -> String {
        let id = format!("{}{local}", self.prefix);
        self.host.nodes.push(FlowNode {
            id: id.clone(),
            name: name.into(),
            kind: NodeKind::Gateway(GatewayKind::Exclusive),
        });
        id
    }

    fn flow(&mut self, source: &str, target: &str, guard: Option<&str>) -> usize {
        let id = format!("{}f{}", self.prefix, self.next);
        self.next += 1;
        self.host.sequence_flows.push(SequenceFlow {
            id,
            source: source.into(),
            target: target.into(),
            guard: guard.map(String::from),
        });
        self.host.sequence_flows.len() - 1
    }
}

/// Whether a path from `from` that avoids `avoid` reaches one of `targets`.
fn reaches_any(g: &PoolGraph, from: usize, avoid: usize, targets: &[usize]) -> bool {
    let mut seen = alloc::vec![false; g.len()];
    let mut stack = alloc::vec![from];
    while let Some(v) = stack.pop() {
        if v == avoid || core::mem::replace(&mut seen[v], true) {
            continue;
        }
        if targets.contains(&v) {
            return true;
        }
        stack.extend(g.successors(v).iter().map(|&(_, w)| w));
    }
    false
}

/// How an inlined child fragment is embedded in its host pool.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FragmentShape {
    pub host_pool: String,
    /// Nodes of the child's initiator side inside the host pool.
    pub nodes: Vec<String>,
    /// Exclusive splits that dominate every fragment node and whose skip
    /// edge bypasses the fragment.
    pub optional_splits: Vec<String>,
    /// Back edges whose natural loop holds the whole fragment.
    pub enclosing_loops: Vec<String>,
}

/// Locates the inlined fragment of `child_tk` (the nodes its block
/// contributed, not the cardinality wrapper) and reports what guards it.
pub fn fragment_shape(graph: &BpmnGraph, child_tk: &str) -> Option<FragmentShape> {
    let own = format!("{child_tk}_");
    let wrapper = format!("{child_tk}_C_");
    let initiator = crate::expand::initiator_pool_id(&own);
    let pool = graph.pools.iter().find(|p| {
        p.id != initiator
            && p.nodes
                .iter()
                .any(|n| n.id.starts_with(&own) && !n.id.starts_with(&wrapper))
    })?;
    let g = PoolGraph::new(pool);
    let members: Vec<usize> = pool
        .nodes
        .iter()
        .enumerate()
        .filter(|(_, n)| n.id.starts_with(&own) && !n.id.starts_with(&wrapper))
        .map(|(i, _)| i)
        .collect();
    let idom = g.immediate_dominators();
    let optional_splits = pool
        .nodes
        .iter()
        .enumerate()
        .filter(|(_, n)| n.kind.gateway() == Some(GatewayKind::Exclusive))
        .filter(|(i, _)| members.iter().all(|&m| g.dominates(&idom, *i, m)))
        .filter(|(i, n)| {
            pool.outgoing(&n.id)
                .filter(|f| f.guard.as_deref() == Some(GUARD_SKIP))
                .filter_map(|f| g.index_of(&f.target))
                .any(|t| !reaches_any(&g, t, *i, &members))
        })
        .map(|(_, n)| n.id.clone())
        .collect();
    let enclosing_loops = g
        .back_edges()
        .iter()
        .enumerate()
        .filter(|(_, b)| **b)
        .filter(|(f, _)| {
            let body = g.natural_loop(*f);
            members.iter().all(|m| body.contains(m))
        })
        .map(|(f, _)| pool.sequence_flows[f].id.clone())
        .collect();
    Some(FragmentShape {
        host_pool: pool.id.clone(),
        nodes: members.iter().map(|&i| pool.nodes[i].id.clone()).collect(),
        optional_splits,
        enclosing_loops,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bpmn::{block_stats, validate_bpmn};
    use crate::ctp::PatternLevel;
    use crate::model::{poligyn, TransactionKind};
    use alloc::vec;

    #[test]
    fn poligyn_points() {
        let m = poligyn();
        let tk = m.transaction("TK01").unwrap();
        let block = expand_transaction(tk, &ExpandOptions::new(PatternLevel::Standard));
        let pts = insertion_points(&m, &block).unwrap();
        let kids: Vec<&str> = pts.iter().map(|p| p.link.child_tk.as_str()).collect();
        assert_eq!(kids, ["TK02", "TK03"]);
        assert!(pts.iter().all(|p| p.anchor == "TK01_E_send_pm"));
    }

    #[test]
    fn decline_anchor_missing_at_basic() {
        let mut m = poligyn();
        m.response_links[0].parent_event = CtpState::Declined;
        let tk = m.transaction("TK01").unwrap();
        let block = expand_transaction(tk, &ExpandOptions::new(PatternLevel::Basic));
        assert!(matches!(
            insertion_points(&m, &block),
            Err(ComposeError::AnchorMissing { .. })
        ));
        assert!(matches!(
            compose(&m, &ExpandOptions::new(PatternLevel::Basic)),
            Err(ComposeError::AnchorMissing { .. })
        ));
    }

    #[test]
    fn single_transaction_is_its_block() {
        let tk = TransactionKind::new("TK01", "t", "R0", "R1");
        let m = DemoModel {
            transaction_kinds: vec![tk.clone()],
            response_links: vec![],
        };
        for level in PatternLevel::ALL {
            let opts = ExpandOptions::new(level);
            assert_eq!(compose(&m, &opts).unwrap(), expand_transaction(&tk, &opts));
        }
    }

    #[test]
    fn poligyn_composes_validly() {
        for level in PatternLevel::ALL {
            for production in [false, true] {
                let opts = ExpandOptions::new(level).with_production(production);
                let g = compose(&poligyn(), &opts).unwrap();
                assert_eq!(validate_bpmn(&g), [], "{level}");
                assert_eq!(g.pools.len(), 4);
                if level == PatternLevel::Basic {
                    assert_eq!(block_stats(&g).message_flows, 12);
                }
            }
        }
    }

    #[test]
    fn multi_root_is_rejected() {
        let m = DemoModel {
            transaction_kinds: vec![
                TransactionKind::new("TK01", "a", "R0", "R1"),
                TransactionKind::new("TK02", "b", "R0", "R2"),
            ],
            response_links: vec![],
        };
        assert_eq!(
            compose(&m, &ExpandOptions::default()),
            Err(ComposeError::RootCount(2))
        );
        assert_eq!(
            compose_forest(&m, &ExpandOptions::default()).unwrap().len(),
            2
        );
    }

    #[test]
    fn cardinalities_shape_the_wrapper() {
        for (card, splits, loops) in [
            (CardinalityRange::ONE, 0, 0),
            (CardinalityRange::OPTIONAL, 1, 0),
            (CardinalityRange::MANY, 0, 1),
            (CardinalityRange::ANY, 1, 1),
            (CardinalityRange::new(2, Some(3)), 0, 1),
        ] {
            let mut m = poligyn();
            m.response_links.truncate(1);
            m.transaction_kinds.truncate(2);
            m.response_links[0].cardinality = card;
            let g = compose(&m, &ExpandOptions::new(PatternLevel::Basic)).unwrap();
            assert_eq!(validate_bpmn(&g), [], "{card}");
            let flows: Vec<&SequenceFlow> =
                g.pools.iter().flat_map(|p| &p.sequence_flows).collect();
            let skip = flows
                .iter()
                .filter(|f| f.guard.as_deref() == Some(GUARD_SKIP))
                .count();
            let another = flows
                .iter()
                .filter(|f| f.guard.as_deref() == Some(GUARD_ANOTHER))
                .count();
            assert_eq!((skip, another), (splits, loops), "{card}");
        }
    }
}
