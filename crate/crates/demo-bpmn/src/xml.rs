//! BPMN 2.0 interchange XML for the supported element subset.
//!
//! The writer is deterministic: elements appear in declaration order and
//! attributes in a fixed order, so equal graphs give byte-identical text.
//! The reader accepts what the writer produces, ignores unknown attributes
//! and skips any diagram-interchange section.

use std::collections::{BTreeMap, BTreeSet};

use demo_bpmn_core::bpmn::analysis::PoolGraph;
use demo_bpmn_core::bpmn::{
    validate_bpmn, BpmnGraph, FlowNode, GatewayKind, Lane, Message, MessageFlow, NodeKind, Pool,
    SequenceFlow, TaskKind,
};
use demo_bpmn_core::Diagnostic;
use quick_xml::events::attributes::Attribute;
use quick_xml::events::{BytesDecl, BytesStart, Event};
use quick_xml::name::QName;
use quick_xml::{Reader, Writer, XmlVersion};
use thiserror::Error;

pub const BPMN_NS: &str = "http://www.omg.org/spec/BPMN/20100524/MODEL";
pub const BPMNDI_NS: &str = "http://www.omg.org/spec/BPMN/20100524/DI";
pub const DC_NS: &str = "http://www.omg.org/spec/DD/20100524/DC";
pub const DI_NS: &str = "http://www.omg.org/spec/DD/20100524/DI";

const COLLABORATION_ID: &str = "collaboration";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum XmlError {
    #[error("{line}:{col}: malformed XML: {message}")]
    XmlSyntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("{line}:{col}: unsupported element <{name}>")]
    UnsupportedElement {
        name: String,
        line: usize,
        col: usize,
    },
    #[error("{id} refers to missing {reference}")]
    Dangling { id: String, reference: String },
    #[error("pool {0} has nodes but no process id")]
    MissingProcess(String),
    #[error("graph is not well formed ({} diagnostics)", .0.len())]
    InvalidGraph(Vec<Diagnostic>),
}

/// Writer settings.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct XmlOptions {
    /// Adds a diagram-interchange section with a simple layered layout.
    pub layout: bool,
}

/// Serializes a well-formed graph.
pub fn to_xml(graph: &BpmnGraph, opts: XmlOptions) -> Result<String, XmlError> {
    let diags = validate_bpmn(graph);
    if !diags.is_empty() {
        return Err(XmlError::InvalidGraph(diags));
    }
    write_xml(graph, opts)
}

/// Serializes without checking well-formedness, so broken graphs can be
/// written for inspection or tests.
pub fn write_xml(graph: &BpmnGraph, opts: XmlOptions) -> Result<String, XmlError> {
    if let Some(p) = graph
        .pools
        .iter()
        .find(|p| p.process_id.is_none() && !p.nodes.is_empty())
    {
        return Err(XmlError::MissingProcess(p.id.clone()));
    }
    let mut w = Writer::new_with_indent(Vec::new(), b' ', 2);
    emit(&mut w, graph, opts).expect("writing to memory cannot fail");
    let mut text = String::from_utf8(w.into_inner()).expect("writer emits UTF-8");
    text.push('\n');
    Ok(text)
}

type W = Writer<Vec<u8>>;
type IoResult = std::io::Result<()>;

fn start<'a>(name: &'a str, attrs: &[(&'a str, &'a str)]) -> BytesStart<'a> {
    let mut e = BytesStart::new(name);
    for (key, value) in attrs {
        e.push_attribute(Attribute {
            key: QName(key),
            value: escape_attr(value).into(),
        });
    }
    e
}

/// Escapes markup characters and the whitespace that attribute-value
/// normalization would otherwise turn into spaces.
fn escape_attr(v: &str) -> String {
    let mut out = String::with_capacity(v.len());
    for c in v.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            '\t' => out.push_str("&#9;"),
            '\n' => out.push_str("&#10;"),
            '\r' => out.push_str("&#13;"),
            c => out.push(c),
        }
    }
    out
}

fn empty(w: &mut W, name: &str, attrs: &[(&str, &str)]) -> IoResult {
    w.write_event(Event::Empty(start(name, attrs)))
}

fn open(w: &mut W, name: &str, attrs: &[(&str, &str)]) -> IoResult {
    w.write_event(Event::Start(start(name, attrs)))
}

fn close(w: &mut W, name: &str) -> IoResult {
    w.write_event(Event::End(quick_xml::events::BytesEnd::new(name)))
}

/// `id`, then `name` when non-empty, then the rest.
fn named<'a>(id: &'a str, name: &'a str, rest: &[(&'a str, &'a str)]) -> Vec<(&'a str, &'a str)> {
    let mut v = vec![("id", id)];
    if !name.is_empty() {
        v.push(("name", name));
    }
    v.extend_from_slice(rest);
    v
}

fn emit(w: &mut W, graph: &BpmnGraph, opts: XmlOptions) -> IoResult {
    w.write_event(Event::Decl(BytesDecl::new("1.0", Some("UTF-8"), None)))?;
    let mut root = vec![("xmlns:bpmn", BPMN_NS)];
    if opts.layout {
        root.extend([
            ("xmlns:bpmndi", BPMNDI_NS),
            ("xmlns:dc", DC_NS),
            ("xmlns:di", DI_NS),
        ]);
    }
    root.extend([("id", "definitions"), ("targetNamespace", "urn:demo-bpmn")]);
    open(w, "bpmn:definitions", &root)?;

    for m in &graph.messages {
        empty(w, "bpmn:message", &named(&m.id, &m.name, &[]))?;
    }
    if graph.pools.is_empty() && graph.message_flows.is_empty() {
        empty(w, "bpmn:collaboration", &[("id", COLLABORATION_ID)])?;
    } else {
        open(w, "bpmn:collaboration", &[("id", COLLABORATION_ID)])?;
        for p in &graph.pools {
            let rest: Vec<(&str, &str)> = p
                .process_id
                .iter()
                .map(|id| ("processRef", id.as_str()))
                .collect();
            empty(w, "bpmn:participant", &named(&p.id, &p.name, &rest))?;
        }
        for mf in &graph.message_flows {
            empty(
                w,
                "bpmn:messageFlow",
                &[
                    ("id", &mf.id),
                    ("sourceRef", &mf.source),
                    ("targetRef", &mf.target),
                    ("messageRef", &mf.message),
                ],
            )?;
        }
        close(w, "bpmn:collaboration")?;
    }

    for p in &graph.pools {
        let Some(proc_id) = &p.process_id else {
            continue;
        };
        open(
            w,
            "bpmn:process",
            &[("id", proc_id), ("isExecutable", "false")],
        )?;
        if !p.lanes.is_empty() {
            let set_id = format!("{proc_id}_lanes");
            open(w, "bpmn:laneSet", &[("id", &set_id)])?;
            for l in &p.lanes {
                open(w, "bpmn:lane", &named(&l.id, &l.name, &[]))?;
                for r in &l.node_refs {
                    open(w, "bpmn:flowNodeRef", &[])?;
                    w.write_event(Event::Text(quick_xml::events::BytesText::new(r)))?;
                    close(w, "bpmn:flowNodeRef")?;
                }
                close(w, "bpmn:lane")?;
            }
            close(w, "bpmn:laneSet")?;
        }
        for n in &p.nodes {
            emit_node(w, n)?;
        }
        for f in &p.sequence_flows {
            let mut attrs = vec![("id", f.id.as_str())];
            if let Some(g) = &f.guard {
                attrs.push(("name", g));
            }
            attrs.extend([
                ("sourceRef", f.source.as_str()),
                ("targetRef", f.target.as_str()),
            ]);
            empty(w, "bpmn:sequenceFlow", &attrs)?;
        }
        close(w, "bpmn:process")?;
    }
    if opts.layout {
        emit_layout(w, graph)?;
    }
    close(w, "bpmn:definitions")
}

fn emit_node(w: &mut W, n: &FlowNode) -> IoResult {
    let with_def = |w: &mut W, tag: &str, def: &str, def_attrs: &[(&str, &str)]| -> IoResult {
        open(w, tag, &named(&n.id, &n.name, &[]))?;
        empty(w, def, def_attrs)?;
        close(w, tag)
    };
    match &n.kind {
        NodeKind::StartEvent { message: None } => {
            empty(w, "bpmn:startEvent", &named(&n.id, &n.name, &[]))
        }
        NodeKind::StartEvent { message: Some(m) } => with_def(
            w,
            "bpmn:startEvent",
            "bpmn:messageEventDefinition",
            &[("messageRef", m)],
        ),
        NodeKind::IntermediateCatchEvent { message } => with_def(
            w,
            "bpmn:intermediateCatchEvent",
            "bpmn:messageEventDefinition",
            &[("messageRef", message)],
        ),
        NodeKind::EndEvent { terminate: false } => {
            empty(w, "bpmn:endEvent", &named(&n.id, &n.name, &[]))
        }
        NodeKind::EndEvent { terminate: true } => {
            with_def(w, "bpmn:endEvent", "bpmn:terminateEventDefinition", &[])
        }
        NodeKind::Task { kind, message } => {
            let tag = match kind {
                TaskKind::Abstract => "bpmn:task",
                TaskKind::Send => "bpmn:sendTask",
                TaskKind::Receive => "bpmn:receiveTask",
            };
            let rest: Vec<(&str, &str)> =
                message.iter().map(|m| ("messageRef", m.as_str())).collect();
            empty(w, tag, &named(&n.id, &n.name, &rest))
        }
        NodeKind::Gateway(g) => {
            let tag = match g {
                GatewayKind::Exclusive => "bpmn:exclusiveGateway",
                GatewayKind::EventBased => "bpmn:eventBasedGateway",
                GatewayKind::Parallel => "bpmn:parallelGateway",
            };
            empty(w, tag, &named(&n.id, &n.name, &[]))
        }
    }
}

/// Shape sizes by node kind.
fn shape_size(kind: &NodeKind) -> (i64, i64) {
    match kind {
        NodeKind::Task { .. } => (100, 80),
        NodeKind::Gateway(_) => (50, 50),
        _ => (36, 36),
    }
}

const LAYER_WIDTH: i64 = 140;
const ROW_HEIGHT: i64 = 100;
const POOL_GAP: i64 = 40;
const POOL_HEADER: i64 = 30;

/// Layered left-to-right placement: a node's layer is its longest distance
/// from a start event over the acyclic part of the pool.
fn layers(pool: &Pool) -> Vec<usize> {
    let g = PoolGraph::new(pool);
    let back = g.back_edges();
    let n = g.len();
    let mut indeg = vec![0usize; n];
    for v in 0..n {
        for &(f, t) in g.successors(v) {
            if !back[f] {
                indeg[t] += 1;
            }
        }
    }
    let mut layer = vec![0usize; n];
    let mut ready: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    ready.reverse();
    while let Some(v) = ready.pop() {
        for &(f, t) in g.successors(v) {
            if back[f] {
                continue;
            }
            layer[t] = layer[t].max(layer[v] + 1);
            indeg[t] -= 1;
            if indeg[t] == 0 {
                ready.push(t);
            }
        }
    }
    layer
}

fn emit_layout(w: &mut W, graph: &BpmnGraph) -> IoResult {
    open(w, "bpmndi:BPMNDiagram", &[("id", "diagram")])?;
    open(
        w,
        "bpmndi:BPMNPlane",
        &[("id", "plane"), ("bpmnElement", COLLABORATION_ID)],
    )?;
    // centre of every node, for edge waypoints
    let mut centre: BTreeMap<&str, (i64, i64)> = BTreeMap::new();
    let mut y0 = 0i64;
    for p in &graph.pools {
        let layer = layers(p);
        let mut rows: BTreeMap<usize, i64> = BTreeMap::new();
        let mut placed = Vec::new();
        for (i, n) in p.nodes.iter().enumerate() {
            let row = rows.entry(layer[i]).or_insert(0);
            let (cw, ch) = (
                POOL_HEADER + 30 + layer[i] as i64 * LAYER_WIDTH + 50,
                y0 + 60 + *row * ROW_HEIGHT,
            );
            *row += 1;
            centre.insert(&n.id, (cw, ch));
            placed.push((n, cw, ch));
        }
        let layers_used = layer.iter().max().map_or(1, |m| m + 1) as i64;
        let rows_used = rows.values().max().copied().unwrap_or(1).max(1);
        let (pw, ph) = (
            POOL_HEADER + 60 + layers_used * LAYER_WIDTH,
            20 + rows_used * ROW_HEIGHT,
        );
        shape(w, &p.id, (0, y0, pw, ph), true)?;
        for (n, cx, cy) in placed {
            let (sw, sh) = shape_size(&n.kind);
            shape(w, &n.id, (cx - sw / 2, cy - sh / 2, sw, sh), false)?;
        }
        y0 += ph + POOL_GAP;
    }
    let flows = graph
        .pools
        .iter()
        .flat_map(|p| {
            p.sequence_flows
                .iter()
                .map(|f| (&f.id, &f.source, &f.target))
        })
        .chain(
            graph
                .message_flows
                .iter()
                .map(|f| (&f.id, &f.source, &f.target)),
        );
    for (id, s, t) in flows {
        let (Some(a), Some(b)) = (centre.get(s.as_str()), centre.get(t.as_str())) else {
            continue;
        };
        let edge_id = format!("{id}_di");
        open(
            w,
            "bpmndi:BPMNEdge",
            &[("id", &edge_id), ("bpmnElement", id)],
        )?;
        for (x, y) in [a, b] {
            let (x, y) = (x.to_string(), y.to_string());
            empty(w, "di:waypoint", &[("x", &x), ("y", &y)])?;
        }
        close(w, "bpmndi:BPMNEdge")?;
    }
    close(w, "bpmndi:BPMNPlane")?;
    close(w, "bpmndi:BPMNDiagram")
}

fn shape(w: &mut W, id: &str, (x, y, wd, ht): (i64, i64, i64, i64), pool: bool) -> IoResult {
    let shape_id = format!("{id}_di");
    let mut attrs = vec![("id", shape_id.as_str()), ("bpmnElement", id)];
    if pool {
        attrs.push(("isHorizontal", "true"));
    }
    open(w, "bpmndi:BPMNShape", &attrs)?;
    let (x, y, wd, ht) = (x.to_string(), y.to_string(), wd.to_string(), ht.to_string());
    empty(
        w,
        "dc:Bounds",
        &[("x", &x), ("y", &y), ("width", &wd), ("height", &ht)],
    )?;
    close(w, "bpmndi:BPMNShape")
}

// ---------------------------------------------------------------- reading

/// An element with its local name, attributes and children.
#[derive(Debug)]
struct Elem {
    name: String,
    attrs: Vec<(String, String)>,
    children: Vec<Elem>,
    text: String,
    pos: usize,
}

impl Elem {
    fn attr(&self, key: &str) -> Option<&str> {
        self.attrs
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

fn line_col(text: &str, pos: usize) -> (usize, usize) {
    let before = &text.as_bytes()[..pos.min(text.len())];
    let line = before.iter().filter(|&&b| b == b'\n').count() + 1;
    let col = before.iter().rev().take_while(|&&b| b != b'\n').count() + 1;
    (line, col)
}

fn local(qname: &str) -> String {
    qname.rsplit_once(':').map_or(qname, |(_, l)| l).to_string()
}

fn parse_tree(text: &str) -> Result<Elem, XmlError> {
    let syntax = |pos: usize, message: String| {
        let (line, col) = line_col(text, pos);
        XmlError::XmlSyntax { line, col, message }
    };
    let mut reader = Reader::from_str(text);
    reader.config_mut().check_end_names = true;
    let mut stack: Vec<Elem> = Vec::new();
    let mut root: Option<Elem> = None;
    loop {
        let pos = reader.buffer_position() as usize;
        let ev = reader
            .read_event()
            .map_err(|e| syntax(reader.error_position() as usize, e.to_string()))?;
        match ev {
            Event::Start(e) | Event::Empty(e) if root.is_some() => {
                return Err(syntax(
                    pos,
                    format!(
                        "content after the root element: <{}>",
                        local(e.name().as_ref())
                    ),
                ));
            }
            Event::Start(e) => {
                stack.push(element(&e, pos).map_err(|m| syntax(pos, m))?);
            }
            Event::Empty(e) => {
                let el = element(&e, pos).map_err(|m| syntax(pos, m))?;
                match stack.last_mut() {
                    Some(parent) => parent.children.push(el),
                    None => root = Some(el),
                }
            }
            Event::End(_) => {
                let el = stack.pop().expect("reader checks nesting");
                match stack.last_mut() {
                    Some(parent) => parent.children.push(el),
                    None => root = Some(el),
                }
            }
            Event::Text(t) => {
                if let Some(top) = stack.last_mut() {
                    let s = t.xml10_content();
                    top.text.push_str(&s);
                }
            }
            Event::GeneralRef(r) => {
                if let Some(top) = stack.last_mut() {
                    let name = r.as_ref().to_string();
                    let resolved = match r.resolve_char_ref() {
                        Ok(Some(c)) => c.to_string(),
                        _ => match name.as_str() {
                            "amp" => "&".into(),
                            "lt" => "<".into(),
                            "gt" => ">".into(),
                            "quot" => "\"".into(),
                            "apos" => "'".into(),
                            _ => return Err(syntax(pos, format!("unknown entity &{name};"))),
                        },
                    };
                    top.text.push_str(&resolved);
                }
            }
            Event::CData(c) => {
                if let Some(top) = stack.last_mut() {
                    top.text.push_str(c.as_ref());
                }
            }
            Event::Eof => {
                if let Some(open) = stack.last() {
                    return Err(syntax(
                        text.len(),
                        format!("document ends inside <{}>", open.name),
                    ));
                }
                return root
                    .ok_or_else(|| syntax(text.len(), "document has no root element".into()));
            }
            _ => {}
        }
    }
}

fn element(e: &BytesStart<'_>, pos: usize) -> Result<Elem, String> {
    let mut attrs = Vec::new();
    for a in e.attributes() {
        let a = a.map_err(|err| err.to_string())?;
        let key = a.key.as_ref().to_string();
        let value = a
            .normalized_value(XmlVersion::Implicit1_0)
            .map_err(|err| err.to_string())?
            .into_owned();
        attrs.push((key, value));
    }
    Ok(Elem {
        name: local(e.name().as_ref()),
        attrs,
        children: Vec::new(),
        text: String::new(),
        pos,
    })
}

/// Parses a document in the supported subset.
pub fn from_xml(text: &str) -> Result<BpmnGraph, XmlError> {
    let root = parse_tree(text)?;
    let unsupported = |e: &Elem| {
        let (line, col) = line_col(text, e.pos);
        XmlError::UnsupportedElement {
            name: e.name.clone(),
            line,
            col,
        }
    };
    let required = |e: &Elem, key: &str| -> Result<String, XmlError> {
        e.attr(key).map(str::to_string).ok_or_else(|| {
            let (line, col) = line_col(text, e.pos);
            XmlError::XmlSyntax {
                line,
                col,
                message: format!("<{}> lacks attribute {key}", e.name),
            }
        })
    };
    if root.name != "definitions" {
        return Err(unsupported(&root));
    }

    let mut graph = BpmnGraph::default();
    let mut participants: Vec<(String, String, Option<String>)> = Vec::new();
    let mut processes: BTreeMap<String, &Elem> = BTreeMap::new();
    for child in &root.children {
        match child.name.as_str() {
            "message" => graph.messages.push(Message {
                id: required(child, "id")?,
                name: child.attr("name").unwrap_or_default().to_string(),
            }),
            "collaboration" => {
                for c in &child.children {
                    match c.name.as_str() {
                        "participant" => participants.push((
                            required(c, "id")?,
                            c.attr("name").unwrap_or_default().to_string(),
                            c.attr("processRef").map(str::to_string),
                        )),
                        "messageFlow" => graph.message_flows.push(MessageFlow {
                            id: required(c, "id")?,
                            source: required(c, "sourceRef")?,
                            target: required(c, "targetRef")?,
                            message: required(c, "messageRef")?,
                        }),
                        "documentation" | "extensionElements" => {}
                        _ => return Err(unsupported(c)),
                    }
                }
            }
            "process" => {
                processes.insert(required(child, "id")?, child);
            }
            "BPMNDiagram" | "documentation" | "extensionElements" => {}
            _ => return Err(unsupported(child)),
        }
    }

    let mut used_processes = BTreeSet::new();
    for (id, name, process_ref) in participants {
        let mut pool = Pool {
            id,
            name,
            process_id: process_ref.clone(),
            lanes: Vec::new(),
            nodes: Vec::new(),
            sequence_flows: Vec::new(),
        };
        if let Some(pref) = &process_ref {
            let proc_el = processes.get(pref).ok_or_else(|| XmlError::Dangling {
                id: pool.id.clone(),
                reference: pref.clone(),
            })?;
            used_processes.insert(pref.clone());
            read_process(proc_el, &mut pool, &unsupported, &required)?;
        }
        graph.pools.push(pool);
    }
    if let Some((id, _)) = processes
        .iter()
        .find(|(id, _)| !used_processes.contains(*id))
    {
        return Err(XmlError::Dangling {
            id: id.clone(),
            reference: "a participant".into(),
        });
    }
    check_references(&graph)?;
    Ok(graph)
}

fn read_process(
    el: &Elem,
    pool: &mut Pool,
    unsupported: &dyn Fn(&Elem) -> XmlError,
    required: &dyn Fn(&Elem, &str) -> Result<String, XmlError>,
) -> Result<(), XmlError> {
    for c in &el.children {
        let kind = match c.name.as_str() {
            "laneSet" => {
                for l in &c.children {
                    if l.name != "lane" {
                        return Err(unsupported(l));
                    }
                    let mut lane = Lane {
                        id: required(l, "id")?,
                        name: l.attr("name").unwrap_or_default().to_string(),
                        node_refs: Vec::new(),
                    };
                    for r in &l.children {
                        if r.name != "flowNodeRef" {
                            return Err(unsupported(r));
                        }
                        lane.node_refs.push(r.text.trim().to_string());
                    }
                    pool.lanes.push(lane);
                }
                continue;
            }
            "sequenceFlow" => {
                pool.sequence_flows.push(SequenceFlow {
                    id: required(c, "id")?,
                    source: required(c, "sourceRef")?,
                    target: required(c, "targetRef")?,
                    guard: c.attr("name").map(str::to_string),
                });
                continue;
            }
            "documentation" | "extensionElements" => continue,
            "startEvent" => match event_definition(c, unsupported, required)? {
                None => NodeKind::StartEvent { message: None },
                Some(Definition::Message(m)) => NodeKind::StartEvent { message: Some(m) },
                Some(Definition::Terminate(e)) => return Err(unsupported(e)),
            },
            "intermediateCatchEvent" => match event_definition(c, unsupported, required)? {
                Some(Definition::Message(message)) => NodeKind::IntermediateCatchEvent { message },
                Some(Definition::Terminate(e)) => return Err(unsupported(e)),
                None => return Err(unsupported(c)),
            },
            "endEvent" => match event_definition(c, unsupported, required)? {
                None => NodeKind::EndEvent { terminate: false },
                Some(Definition::Terminate(_)) => NodeKind::EndEvent { terminate: true },
                Some(Definition::Message(_)) => return Err(unsupported(c)),
            },
            "task" | "sendTask" | "receiveTask" => {
                no_children(c, unsupported)?;
                let kind = match c.name.as_str() {
                    "task" => TaskKind::Abstract,
                    "sendTask" => TaskKind::Send,
                    _ => TaskKind::Receive,
                };
                NodeKind::Task {
                    kind,
                    message: c.attr("messageRef").map(str::to_string),
                }
            }
            "exclusiveGateway" | "eventBasedGateway" | "parallelGateway" => {
                no_children(c, unsupported)?;
                NodeKind::Gateway(match c.name.as_str() {
                    "exclusiveGateway" => GatewayKind::Exclusive,
                    "eventBasedGateway" => GatewayKind::EventBased,
                    _ => GatewayKind::Parallel,
                })
            }
            _ => return Err(unsupported(c)),
        };
        pool.nodes.push(FlowNode {
            id: required(c, "id")?,
            name: c.attr("name").unwrap_or_default().to_string(),
            kind,
        });
    }
    Ok(())
}

enum Definition<'e> {
    Message(String),
    Terminate(&'e Elem),
}

/// Child elements a flow node may carry without meaning anything here.
fn ignorable(e: &Elem) -> bool {
    matches!(
        e.name.as_str(),
        "incoming" | "outgoing" | "documentation" | "extensionElements"
    )
}

fn no_children(e: &Elem, unsupported: &dyn Fn(&Elem) -> XmlError) -> Result<(), XmlError> {
    match e.children.iter().find(|c| !ignorable(c)) {
        Some(c) => Err(unsupported(c)),
        None => Ok(()),
    }
}

fn event_definition<'e>(
    e: &'e Elem,
    unsupported: &dyn Fn(&Elem) -> XmlError,
    required: &dyn Fn(&Elem, &str) -> Result<String, XmlError>,
) -> Result<Option<Definition<'e>>, XmlError> {
    let mut found = None;
    for c in e.children.iter().filter(|c| !ignorable(c)) {
        let def = match c.name.as_str() {
            "messageEventDefinition" => Definition::Message(required(c, "messageRef")?),
            "terminateEventDefinition" => Definition::Terminate(c),
            _ => return Err(unsupported(c)),
        };
        if found.is_some() {
            return Err(unsupported(c));
        }
        found = Some(def);
    }
    Ok(found)
}

/// Every id an element refers to must be declared somewhere.
fn check_references(graph: &BpmnGraph) -> Result<(), XmlError> {
    let index = graph.id_index();
    let dangling = |id: &str, reference: &str| XmlError::Dangling {
        id: id.to_string(),
        reference: reference.to_string(),
    };
    let messages: BTreeSet<&str> = graph.messages.iter().map(|m| m.id.as_str()).collect();
    for p in &graph.pools {
        let nodes: BTreeSet<&str> = p.nodes.iter().map(|n| n.id.as_str()).collect();
        for l in &p.lanes {
            if let Some(r) = l.node_refs.iter().find(|r| !nodes.contains(r.as_str())) {
                return Err(dangling(&l.id, r));
            }
        }
        for n in &p.nodes {
            if let Some(m) = n.kind.message() {
                if !messages.contains(m) {
                    return Err(dangling(&n.id, m));
                }
            }
        }
        for f in &p.sequence_flows {
            for end in [&f.source, &f.target] {
                if !index.contains_key(end.as_str()) {
                    return Err(dangling(&f.id, end));
                }
            }
        }
    }
    for mf in &graph.message_flows {
        for r in [&mf.source, &mf.target, &mf.message] {
            if !index.contains_key(r.as_str()) {
                return Err(dangling(&mf.id, r));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use demo_bpmn_core::expand::{expand_transaction, ExpandOptions};
    use demo_bpmn_core::model::TransactionKind;
    use demo_bpmn_core::PatternLevel;

    fn basic() -> BpmnGraph {
        expand_transaction(
            &TransactionKind::new("TK01", "t", "R0", "R1"),
            &ExpandOptions::new(PatternLevel::Basic),
        )
    }

    #[test]
    fn empty_graph() {
        let x = to_xml(&BpmnGraph::default(), XmlOptions::default()).unwrap();
        assert!(
            x.contains("<bpmn:collaboration id=\"collaboration\"/>"),
            "{x}"
        );
        assert!(x.contains(BPMN_NS));
        assert_eq!(from_xml(&x).unwrap(), BpmnGraph::default());
    }

    #[test]
    fn basic_block_round_trips() {
        let g = basic();
        let x = to_xml(&g, XmlOptions::default()).unwrap();
        assert_eq!(x.matches("<bpmn:participant ").count(), 2);
        assert_eq!(x.matches("<bpmn:messageFlow ").count(), 4);
        assert!(!x.contains("BPMNDiagram"));
        assert_eq!(from_xml(&x).unwrap(), g);
    }

    #[test]
    fn layout_is_skipped_on_read() {
        let g = basic();
        let x = to_xml(&g, XmlOptions { layout: true }).unwrap();
        assert!(x.contains("<bpmndi:BPMNShape"));
        assert_eq!(from_xml(&x).unwrap(), g);
    }

    #[test]
    fn escaping() {
        let mut g = basic();
        g.pools[0].name = "a <b> & \"c\" 'd'\n\te".into();
        g.pools[0].sequence_flows[0].guard = Some(String::new());
        let x = write_xml(&g, XmlOptions::default()).unwrap();
        assert_eq!(from_xml(&x).unwrap(), g);
    }

    #[test]
    fn errors() {
        let x = to_xml(&basic(), XmlOptions::default()).unwrap();
        let cut = &x[..x.len() / 2];
        assert!(
            matches!(from_xml(cut), Err(XmlError::XmlSyntax { .. })),
            "{:?}",
            from_xml(cut)
        );

        let timer = x.replacen(
            "<bpmn:startEvent id=\"TK01_I_start\"/>",
            "<bpmn:startEvent id=\"TK01_I_start\"><bpmn:timerEventDefinition/></bpmn:startEvent>",
            1,
        );
        assert_ne!(timer, x);
        match from_xml(&timer) {
            Err(XmlError::UnsupportedElement { name, .. }) => {
                assert_eq!(name, "timerEventDefinition")
            }
            other => panic!("{other:?}"),
        }

        let dataobj = x.replacen(
            "</bpmn:process>",
            "<bpmn:dataObject id=\"d\"/></bpmn:process>",
            1,
        );
        assert!(
            matches!(from_xml(&dataobj), Err(XmlError::UnsupportedElement { name, .. }) if name == "dataObject")
        );

        let dangling = x.replacen("targetRef=\"TK01_I_send_rq\"", "targetRef=\"ghost\"", 1);
        assert_ne!(dangling, x);
        assert!(
            matches!(from_xml(&dangling), Err(XmlError::Dangling { reference, .. }) if reference == "ghost")
        );
    }

    #[test]
    fn invalid_graph_is_refused() {
        let mut g = basic();
        g.message_flows[0].target = g.message_flows[0].source.clone();
        assert!(matches!(
            to_xml(&g, XmlOptions::default()),
            Err(XmlError::InvalidGraph(_))
        ));
        assert!(write_xml(&g, XmlOptions::default()).is_ok());
    }
}
