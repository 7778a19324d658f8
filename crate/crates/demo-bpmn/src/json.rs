//! JSON forms: the model (objects `transactions` and `links`), composed
//! graphs, conformance reports and explorations.

use demo_bpmn_core::bpmn::{BpmnGraph, GatewayKind, NodeKind, TaskKind};
use demo_bpmn_core::model::{
    event_code, event_from_code, rules, CardinalityRange, DemoModel, ResponseLink, TransactionKind,
};
use demo_bpmn_core::sim::{ConformanceReport, Exploration, TraceVerdict, Witness};
use demo_bpmn_core::{ActKind, CtpState, Diagnostic, Locus};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDto {
    #[serde(default)]
    pub transactions: Vec<TransactionDto>,
    #[serde(default)]
    pub links: Vec<LinkDto>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransactionDto {
    pub id: String,
    pub name: String,
    pub initiator_role: String,
    pub executor_role: String,
}

/// Events and acts may be given by name (`promised`, `request`) or by
/// short code (`pm`, `rq`). Cardinalities use the `N..M` text form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkDto {
    pub parent_tk: String,
    pub parent_event: String,
    pub child_tk: String,
    #[serde(default = "default_act")]
    pub child_act: String,
    pub cardinality: String,
}

fn default_act() -> String {
    ActKind::Request.name().to_string()
}

impl From<&DemoModel> for ModelDto {
    fn from(m: &DemoModel) -> Self {
        ModelDto {
            transactions: m
                .transaction_kinds
                .iter()
                .map(|t| TransactionDto {
                    id: t.id.clone(),
                    name: t.name.clone(),
                    initiator_role: t.initiator_role.clone(),
                    executor_role: t.executor_role.clone(),
                })
                .collect(),
            links: m
                .response_links
                .iter()
                .map(|l| LinkDto {
                    parent_tk: l.parent_tk.clone(),
                    parent_event: l.parent_event.name().to_string(),
                    child_tk: l.child_tk.clone(),
                    child_act: l.child_act.name().to_string(),
                    cardinality: l.cardinality.to_string(),
                })
                .collect(),
        }
    }
}

impl ModelDto {
    /// Converts to a model, reporting every unusable field. Structural
    /// rules (forest, references, acyclicity) are left to model validation.
    pub fn into_model(self) -> Result<DemoModel, Vec<Diagnostic>> {
        let mut diags = Vec::new();
        let mut model = DemoModel::default();
        for t in self.transactions {
            model.transaction_kinds.push(TransactionKind::new(
                &t.id,
                &t.name,
                &t.initiator_role,
                &t.executor_role,
            ));
        }
        for (i, l) in self.links.into_iter().enumerate() {
            let event = CtpState::from_name(&l.parent_event)
                .filter(|s| event_code(*s).is_some())
                .or_else(|| event_from_code(&l.parent_event));
            let act = ActKind::from_code(&l.child_act)
                .or_else(|| ActKind::ALL.into_iter().find(|a| a.name() == l.child_act));
            let card = l.cardinality.parse::<CardinalityRange>();
            let Some(event) = event else {
                diags.push(Diagnostic::error(
                    rules::LINK_KIND,
                    Locus::Link(i),
                    format!(
                        "{} is not an event a response link can start from",
                        l.parent_event
                    ),
                ));
                continue;
            };
            let card = match card {
                Ok(c) => c,
                Err(e) => {
                    diags.push(Diagnostic::error(
                        rules::CARD,
                        Locus::Link(i),
                        e.to_string(),
                    ));
                    continue;
                }
            };
            let mut link = ResponseLink::new(&l.parent_tk, event, &l.child_tk, card);
            match act {
                Some(a) => link.child_act = a,
                None => {
                    diags.push(Diagnostic::error(
                        rules::LINK_KIND,
                        Locus::Link(i),
                        format!("unknown act {}", l.child_act),
                    ));
                    continue;
                }
            }
            model.response_links.push(link);
        }
        if diags.is_empty() {
            Ok(model)
        } else {
            Err(diags)
        }
    }
}

/// Parses the JSON model form. Malformed JSON gives one syntax diagnostic
/// at the position serde reports.
pub fn model_from_json(text: &str) -> Result<DemoModel, Vec<Diagnostic>> {
    let dto: ModelDto = serde_json::from_str(text).map_err(|e| {
        vec![Diagnostic::at_line(
            rules::SYNTAX,
            e.line() as u32,
            e.column() as u32,
            e.to_string(),
        )]
    })?;
    dto.into_model()
}

pub fn model_to_json(model: &DemoModel) -> String {
    let mut s =
        serde_json::to_string_pretty(&ModelDto::from(model)).expect("plain data serializes");
    s.push('\n');
    s
}

fn node_kind(kind: &NodeKind) -> Value {
    let (k, extra) = match kind {
        NodeKind::StartEvent { message } => ("startEvent", message.as_deref()),
        NodeKind::IntermediateCatchEvent { message } => {
            ("intermediateCatchEvent", Some(message.as_str()))
        }
        NodeKind::EndEvent { terminate: false } => ("endEvent", None),
        NodeKind::EndEvent { terminate: true } => ("terminateEndEvent", None),
        NodeKind::Task { kind, message } => (
            match kind {
                TaskKind::Abstract => "task",
                TaskKind::Send => "sendTask",
                TaskKind::Receive => "receiveTask",
            },
            message.as_deref(),
        ),
        NodeKind::Gateway(g) => (
            match g {
                GatewayKind::Exclusive => "exclusiveGateway",
                GatewayKind::EventBased => "eventBasedGateway",
                GatewayKind::Parallel => "parallelGateway",
            },
            None,
        ),
    };
    match extra {
        Some(m) => json!({ "kind": k, "message": m }),
        None => json!({ "kind": k }),
    }
}

/// A plain JSON rendering of a collaboration.
pub fn graph_to_json(graph: &BpmnGraph) -> String {
    let pools: Vec<Value> = graph
        .pools
        .iter()
        .map(|p| {
            let nodes: Vec<Value> = p
                .nodes
                .iter()
                .map(|n| {
                    let mut v = node_kind(&n.kind);
                    v["id"] = json!(n.id);
                    v["name"] = json!(n.name);
                    v
                })
                .collect();
            let flows: Vec<Value> = p
                .sequence_flows
                .iter()
                .map(|f| json!({ "id": f.id, "source": f.source, "target": f.target, "guard": f.guard }))
                .collect();
            json!({
                "id": p.id,
                "name": p.name,
                "process": p.process_id,
                "lanes": p.lanes.iter().map(|l| json!({ "id": l.id, "name": l.name, "nodes": l.node_refs })).collect::<Vec<_>>(),
                "nodes": nodes,
                "sequence_flows": flows,
            })
        })
        .collect();
    let v = json!({
        "pools": pools,
        "messages": graph.messages.iter().map(|m| json!({ "id": m.id, "name": m.name })).collect::<Vec<_>>(),
        "message_flows": graph
            .message_flows
            .iter()
            .map(|f| json!({ "id": f.id, "source": f.source, "target": f.target, "message": f.message }))
            .collect::<Vec<_>>(),
    });
    let mut s = serde_json::to_string_pretty(&v).expect("json values serialize");
    s.push('\n');
    s
}

fn witnesses(ws: &[Witness]) -> Vec<Value> {
    ws.iter()
        .map(|w| json!({ "trace": w.line(), "detail": w.detail }))
        .collect()
}

pub fn report_to_json(r: &ConformanceReport) -> String {
    let verdict = match r.verdict {
        TraceVerdict::Equal => "equal",
        TraceVerdict::Included => "included",
        TraceVerdict::Differs => "differs",
    };
    let v = json!({
        "level": r.level.name(),
        "loop_bound": r.bounds.loop_bound,
        "revoke_bound": r.bounds.revoke_bound,
        "verdict": verdict,
        "bpmn_traces": r.bpmn_traces,
        "ctp_traces": r.ctp_traces,
        "missing": r.missing.iter().map(|t| t.to_string()).collect::<Vec<_>>(),
        "extra": r.extra.iter().map(|t| t.to_string()).collect::<Vec<_>>(),
        "deadlock_count": r.deadlock_count,
        "deadlocks": witnesses(&r.deadlocks),
        "revocation": r.revocation.as_ref().map(|rv| json!({
            "prefix": rv.prefix,
            "executor_can_send": rv.executor_can_send,
            "passed": rv.passed,
        })),
        "result": if r.passed() { "PASS" } else { "FAIL" },
    });
    let mut s = serde_json::to_string_pretty(&v).expect("json values serialize");
    s.push('\n');
    s
}

pub fn exploration_to_json(e: &Exploration) -> String {
    let v = json!({
        "states": e.states,
        "completed": e.completed,
        "cut": e.cut,
        "truncated": e.truncated,
        "deadlock_count": e.deadlock_count,
        "deadlocks": witnesses(&e.deadlocks),
        "violation_count": e.violation_count,
        "violations": witnesses(&e.violations),
        "result": if e.is_sound() { "PASS" } else { "FAIL" },
    });
    let mut s = serde_json::to_string_pretty(&v).expect("json values serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use demo_bpmn_core::model::poligyn;

    #[test]
    fn model_round_trip() {
        let m = poligyn();
        let text = model_to_json(&m);
        assert!(text.contains("\"transactions\"") && text.contains("\"links\""));
        assert_eq!(model_from_json(&text).unwrap(), m);
    }

    #[test]
    fn codes_are_accepted() {
        let text = r#"{"transactions":[
            {"id":"TK01","name":"a","initiator_role":"CA00","executor_role":"A01"},
            {"id":"TK02","name":"b","initiator_role":"A01","executor_role":"A02"}],
          "links":[{"parent_tk":"TK01","parent_event":"pm","child_tk":"TK02","cardinality":"0..1"}]}"#;
        let m = model_from_json(text).unwrap();
        assert_eq!(m.response_links[0].parent_event, CtpState::Promised);
        assert_eq!(m.response_links[0].child_act, ActKind::Request);
    }

    #[test]
    fn bad_fields_are_diagnosed() {
        let text = r#"{"links":[
            {"parent_tk":"TK01","parent_event":"quit","child_tk":"TK02","cardinality":"0..1"},
            {"parent_tk":"TK01","parent_event":"pm","child_tk":"TK02","cardinality":"2..1"}]}"#;
        let d = model_from_json(text).unwrap_err();
        let r: Vec<&str> = d.iter().map(|d| d.rule).collect();
        assert_eq!(r, [rules::LINK_KIND, rules::CARD]);

        let d = model_from_json("{\"transactions\": [").unwrap_err();
        assert_eq!(d[0].rule, rules::SYNTAX);
        assert!(matches!(d[0].locus, Locus::Text { line: 1, .. }));
    }
}
