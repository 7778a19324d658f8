//! DEMO model content consumed by the compiler: transaction kinds and the
//! response links that arrange them into trees.

mod dsl;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use thiserror::Error;

use crate::ctp::{ActKind, CtpState};
use crate::diag::{Diagnostic, Locus};

pub use dsl::{parse_model, parse_model_spanned, serialize_model, SourceSpans};

pub mod rules {
    pub const SYNTAX: &str = "SYNTAX";
    pub const DUP_ID: &str = "DUP_ID";
    pub const REF: &str = "REF";
    pub const CARD: &str = "CARD";
    pub const FOREST: &str = "FOREST";
    pub const ACYCLIC: &str = "ACYCLIC";
    pub const LINK_KIND: &str = "LINK_KIND";
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TransactionKind {
    pub id: String,
    pub name: String,
    pub initiator_role: String,
    pub executor_role: String,
}

impl TransactionKind {
    pub fn new(id: &str, name: &str, initiator_role: &str, executor_role: &str) -> Self {
        TransactionKind {
            id: id.into(),
            name: name.into(),
            initiator_role: initiator_role.into(),
            executor_role: executor_role.into(),
        }
    }
}

/// Letters followed by at least one digit, e.g. `TK01`.
pub fn is_tk_id(s: &str) -> bool {
    let split = s.find(|c: char| c.is_ascii_digit()).unwrap_or(s.len());
    let (prefix, digits) = s.split_at(split);
    !prefix.is_empty()
        && prefix.chars().all(|c| c.is_ascii_alphabetic())
        && !digits.is_empty()
        && digits.chars().all(|c| c.is_ascii_digit())
}

/// Identifier for actor roles: ASCII letter, then letters, digits, `_` or `-`.
pub fn is_role_id(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next().is_some_and(|c| c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

/// `low..high`, with `high == None` for `*`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CardinalityRange {
    pub low: u32,
    pub high: Option<u32>,
}

impl CardinalityRange {
    pub const OPTIONAL: CardinalityRange = CardinalityRange {
        low: 0,
        high: Some(1),
    };
    pub const ONE: CardinalityRange = CardinalityRange {
        low: 1,
        high: Some(1),
    };
    pub const MANY: CardinalityRange = CardinalityRange { low: 1, high: None };
    pub const ANY: CardinalityRange = CardinalityRange { low: 0, high: None };

    pub fn new(low: u32, high: Option<u32>) -> Self {
        CardinalityRange { low, high }
    }

    pub fn is_valid(&self) -> bool {
        match self.high {
            Some(h) => h >= 1 && self.low <= h,
            None => true,
        }
    }

    /// Whether `n` executions fall inside the range.
    pub fn admits(&self, n: u32) -> bool {
        n >= self.low && self.high.is_none_or(|h| n <= h)
    }
}

impl fmt::Display for CardinalityRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.high {
            Some(h) => write!(f, "{}..{}", self.low, h),
            None => write!(f, "{}..*", self.low),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CardinalityError {
    #[error("`{0}` is not of the form N..M or N..*")]
    Malformed(String),
    #[error("`{0}` is empty: low bound exceeds high bound or high bound is 0")]
    Empty(String),
}

impl FromStr for CardinalityRange {
    type Err = CardinalityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let malformed = || CardinalityError::Malformed(s.into());
        let (lo, hi) = s.split_once("..").ok_or_else(malformed)?;
        let digits = |t: &str| !t.is_empty() && t.bytes().all(|b| b.is_ascii_digit());
        if !digits(lo) {
            return Err(malformed());
        }
        let low: u32 = lo.parse().map_err(|_| malformed())?;
        let high = match hi {
            "*" => None,
            h if digits(h) => Some(h.parse().map_err(|_| malformed())?),
            _ => return Err(malformed()),
        };
        let range = CardinalityRange { low, high };
        if range.is_valid() {
            Ok(range)
        } else {
            Err(CardinalityError::Empty(s.into()))
        }
    }
}

/// The parent events a response link may start from.
pub const LINK_EVENTS: [CtpState; 6] = [
    CtpState::Requested,
    CtpState::Promised,
    CtpState::Declared,
    CtpState::Accepted,
    CtpState::Declined,
    CtpState::Rejected,
];

/// Short DSL code for a link event (`pm` for promised, ...).
pub fn event_code(state: CtpState) -> Option<&'static str> {
    LINK_EVENTS
        .contains(&state)
        .then(|| state.caused_by().map(ActKind::code))
        .flatten()
}

pub fn event_from_code(code: &str) -> Option<CtpState> {
    LINK_EVENTS
        .iter()
        .copied()
        .find(|s| event_code(*s) == Some(code))
}

/// Reaching `parent_event` in `parent_tk` initiates `child_tk`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ResponseLink {
    pub parent_tk: String,
    pub parent_event: CtpState,
    pub child_tk: String,
    pub child_act: ActKind,
    pub cardinality: CardinalityRange,
}

impl ResponseLink {
    pub fn new(
        parent_tk: &str,
        parent_event: CtpState,
        child_tk: &str,
        card: CardinalityRange,
    ) -> Self {
        ResponseLink {
            parent_tk: parent_tk.into(),
            parent_event,
            child_tk: child_tk.into(),
            child_act: ActKind::Request,
            cardinality: card,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DemoModel {
    pub transaction_kinds: Vec<TransactionKind>,
    pub response_links: Vec<ResponseLink>,
}

impl DemoModel {
    pub fn is_empty(&self) -> bool {
        self.transaction_kinds.is_empty() && self.response_links.is_empty()
    }

    pub fn transaction(&self, id: &str) -> Option<&TransactionKind> {
        self.transaction_kinds.iter().find(|t| t.id == id)
    }

    /// Links leaving `parent`, in file order.
    pub fn links_from<'a>(
        &'a self,
        parent: &'a str,
    ) -> impl Iterator<Item = &'a ResponseLink> + 'a {
        self.response_links
            .iter()
            .filter(move |l| l.parent_tk == parent)
    }

    /// Transaction kinds of the subtree rooted at `root`, root first,
    /// children in link order.
    pub fn subtree(&self, root: &str) -> Vec<&TransactionKind> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        let mut stack = alloc::vec![root];
        while let Some(id) = stack.pop() {
            if !seen.insert(id) {
                continue;
            }
            if let Some(tk) = self.transaction(id) {
                out.push(tk);
            }
            let children: Vec<&str> = self.links_from(id).map(|l| l.child_tk.as_str()).collect();
            stack.extend(children.into_iter().rev());
        }
        out
    }

    /// The sub-model made of one tree.
    pub fn tree(&self, root: &str) -> DemoModel {
        let ids: BTreeSet<&str> = self.subtree(root).iter().map(|t| t.id.as_str()).collect();
        DemoModel {
            transaction_kinds: self
                .transaction_kinds
                .iter()
                .filter(|t| ids.contains(t.id.as_str()))
                .cloned()
                .collect(),
            response_links: self
                .response_links
                .iter()
                .filter(|l| ids.contains(l.parent_tk.as_str()))
                .cloned()
                .collect(),
        }
    }
}

/// Checks the model invariants. Empty iff the model is a well-formed forest.
pub fn validate_model(model: &DemoModel) -> Vec<Diagnostic> {
    let mut diags = Vec::new();

    let mut ids: BTreeSet<&str> = BTreeSet::new();
    for tk in &model.transaction_kinds {
        if !ids.insert(tk.id.as_str()) {
            diags.push(Diagnostic::error(
                rules::DUP_ID,
                Locus::Element(tk.id.clone()),
                format!("transaction kind {} declared twice", tk.id),
            ));
        }
    }

    let mut parent_of: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, link) in model.response_links.iter().enumerate() {
        for end in [&link.parent_tk, &link.child_tk] {
            if !ids.contains(end.as_str()) {
                diags.push(Diagnostic::error(
                    rules::REF,
                    Locus::Link(i),
                    format!("undeclared transaction kind {end}"),
                ));
            }
        }
        if !link.cardinality.is_valid() {
            diags.push(Diagnostic::error(
                rules::CARD,
                Locus::Link(i),
                format!("empty cardinality range {}", link.cardinality),
            ));
        }
        if link.child_act != ActKind::Request || !LINK_EVENTS.contains(&link.parent_event) {
            diags.push(Diagnostic::error(
                rules::LINK_KIND,
                Locus::Link(i),
                format!(
                    "links run from a C-event to a request; got ({}) -> [{}]",
                    link.parent_event, link.child_act
                ),
            ));
        }
        if let Some(first) = parent_of.insert(link.child_tk.as_str(), i) {
            // keep the first link as the parent
            parent_of.insert(link.child_tk.as_str(), first);
            diags.push(Diagnostic::error(
                rules::FOREST,
                Locus::Link(i),
                format!(
                    "{} already initiated by link #{}; each transaction kind has one parent",
                    link.child_tk,
                    first + 1
                ),
            ));
        }
    }

    for cycle in cycles(model) {
        let first_link = cycle.iter().copied().min().unwrap_or(0);
        let names: Vec<&str> = cycle
            .iter()
            .map(|&i| model.response_links[i].parent_tk.as_str())
            .collect();
        diags.push(Diagnostic::error(
            rules::ACYCLIC,
            Locus::Link(first_link),
            format!("response links form a cycle through {}", names.join(" -> ")),
        ));
    }
    diags
}

/// Elementary cycles of the parent→child relation, one entry per strongly
/// connected component (as its link indices).
fn cycles(model: &DemoModel) -> Vec<Vec<usize>> {
    let mut index_of: BTreeMap<&str, usize> = BTreeMap::new();
    let mut edges: Vec<(usize, usize, usize)> = Vec::new();
    for (i, l) in model.response_links.iter().enumerate() {
        let next = index_of.len();
        let a = *index_of.entry(l.parent_tk.as_str()).or_insert(next);
        let next = index_of.len();
        let b = *index_of.entry(l.child_tk.as_str()).or_insert(next);
        edges.push((a, b, i));
    }
    let n = index_of.len();
    let mut adj = alloc::vec![Vec::new(); n];
    for &(a, b, _) in &edges {
        adj[a].push(b);
    }
    let comps = tarjan(&adj);
    let mut out = Vec::new();
    for comp in comps {
        let members: BTreeSet<usize> = comp.iter().copied().collect();
        let links: Vec<usize> = edges
            .iter()
            .filter(|(a, b, _)| members.contains(a) && members.contains(b))
            .map(|&(_, _, i)| i)
            .collect();
        if comp.len() > 1 || !links.is_empty() {
            out.push(links);
        }
    }
    out.sort();
    out
}

fn tarjan(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    struct State<'a> {
        adj: &'a [Vec<usize>],
        index: Vec<Option<usize>>,
        low: Vec<usize>,
        on_stack: Vec<bool>,
        stack: Vec<usize>,
        next: usize,
        out: Vec<Vec<usize>>,
    }
    fn visit(s: &mut State<'_>, v: usize) {
        s.index[v] = Some(s.next);
        s.low[v] = s.next;
        s.next += 1;
        s.stack.push(v);
        s.on_stack[v] = true;
        for i in 0..s.adj[v].len() {
            let w = s.adj[v][i];
            match s.index[w] {
                None => {
                    visit(s, w);
                    s.low[v] = s.low[v].min(s.low[w]);
                }
                Some(iw) if s.on_stack[w] => s.low[v] = s.low[v].min(iw),
                Some(_) => {}
            }
        }
        if Some(s.low[v]) == s.index[v] {
            let mut comp = Vec::new();
            while let Some(w) = s.stack.pop() {
                s.on_stack[w] = false;
                comp.push(w);
                if w == v {
                    break;
                }
            }
            s.out.push(comp);
        }
    }
    let n = adj.len();
    let mut s = State {
        adj,
        index: alloc::vec![None; n],
        low: alloc::vec![0; n],
        on_stack: alloc::vec![false; n],
        stack: Vec::new(),
        next: 0,
        out: Vec::new(),
    };
    for v in 0..n {
        if s.index[v].is_none() {
            visit(&mut s, v);
        }
    }
    s.out
}

/// Transaction kinds that are never a child, in declaration order.
pub fn roots(model: &DemoModel) -> Vec<&TransactionKind> {
    let children: BTreeSet<&str> = model
        .response_links
        .iter()
        .map(|l| l.child_tk.as_str())
        .collect();
    model
        .transaction_kinds
        .iter()
        .filter(|t| !children.contains(t.id.as_str()))
        .collect()
}

/// The PoliGyn fragment: TK01 optionally initiates TK02 and repeatedly
/// initiates TK03, both from its promised state. Role ids and the names of
/// TK02/TK03 are placeholders.
pub fn poligyn() -> DemoModel {
    DemoModel {
        transaction_kinds: alloc::vec![
            TransactionKind::new("TK01", "patient problem diagnosing", "CA00", "A01"),
            TransactionKind::new("TK02", "enclosed transaction two", "A01", "A02"),
            TransactionKind::new("TK03", "enclosed transaction three", "A01", "A03"),
        ],
        response_links: alloc::vec![
            ResponseLink::new(
                "TK01",
                CtpState::Promised,
                "TK02",
                CardinalityRange::OPTIONAL
            ),
            ResponseLink::new("TK01", CtpState::Promised, "TK03", CardinalityRange::MANY),
        ],
    }
}

impl fmt::Display for DemoModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_model(self))
    }
}

impl ResponseLink {
    /// `(TK01/pm) -> [TK02/rq] 0..1`
    pub fn to_dsl(&self) -> String {
        format!(
            "({}/{}) -> [{}/{}] {}",
            self.parent_tk,
            event_code(self.parent_event).unwrap_or("?"),
            self.child_tk,
            self.child_act.code(),
            self.cardinality
        )
    }
}

impl TransactionKind {
    pub fn to_dsl(&self) -> String {
        let mut name = String::new();
        for c in self.name.chars() {
            if c == '"' || c == '\\' {
                name.push('\\');
            }
            name.push(c);
        }
        format!(
            "transaction {} \"{}\" initiator {} executor {}",
            self.id, name, self.initiator_role, self.executor_role
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diag::count_rule;
    use alloc::string::ToString;

    #[test]
    fn poligyn_is_valid_with_one_root() {
        let m = poligyn();
        assert!(validate_model(&m).is_empty());
        let r: Vec<&str> = roots(&m).iter().map(|t| t.id.as_str()).collect();
        assert_eq!(r, ["TK01"]);
    }

    #[test]
    fn empty_model_has_no_roots() {
        assert!(roots(&DemoModel::default()).is_empty());
        assert!(validate_model(&DemoModel::default()).is_empty());
    }

    #[test]
    fn two_trees_two_roots_in_declaration_order() {
        let mut m = poligyn();
        m.transaction_kinds
            .insert(0, TransactionKind::new("TK10", "other", "R0", "R1"));
        m.transaction_kinds
            .push(TransactionKind::new("TK11", "other child", "R1", "R2"));
        m.response_links.push(ResponseLink::new(
            "TK10",
            CtpState::Accepted,
            "TK11",
            CardinalityRange::ONE,
        ));
        let r: Vec<&str> = roots(&m).iter().map(|t| t.id.as_str()).collect();
        assert_eq!(r, ["TK10", "TK01"]);
    }

    #[test]
    fn two_cycle_is_one_acyclic_finding() {
        let m = DemoModel {
            transaction_kinds: alloc::vec![
                TransactionKind::new("TK01", "a", "R0", "R1"),
                TransactionKind::new("TK02", "b", "R1", "R2"),
            ],
            response_links: alloc::vec![
                ResponseLink::new("TK01", CtpState::Promised, "TK02", CardinalityRange::ONE),
                ResponseLink::new("TK02", CtpState::Promised, "TK01", CardinalityRange::ONE),
            ],
        };
        let d = validate_model(&m);
        assert_eq!(d.len(), 1, "{d:?}");
        assert_eq!(d[0].rule, rules::ACYCLIC);
    }

    #[test]
    fn shared_child_is_one_forest_finding() {
        let mut m = poligyn();
        m.response_links.push(ResponseLink::new(
            "TK02",
            CtpState::Promised,
            "TK03",
            CardinalityRange::ONE,
        ));
        let d = validate_model(&m);
        assert_eq!(count_rule(&d, rules::FOREST), 1);
        assert_eq!(d.len(), 1, "{d:?}");
    }

    #[test]
    fn self_link_is_a_cycle() {
        let mut m = poligyn();
        m.response_links.push(ResponseLink::new(
            "TK03",
            CtpState::Declared,
            "TK03",
            CardinalityRange::ONE,
        ));
        // also a second parent for TK03
        let d = validate_model(&m);
        assert_eq!(count_rule(&d, rules::ACYCLIC), 1);
    }

    #[test]
    fn dangling_and_bad_card() {
        let mut m = poligyn();
        m.response_links.push(ResponseLink::new(
            "TK01",
            CtpState::Promised,
            "TK09",
            CardinalityRange::new(2, Some(1)),
        ));
        let d = validate_model(&m);
        assert_eq!(count_rule(&d, rules::REF), 1);
        assert_eq!(count_rule(&d, rules::CARD), 1);
    }

    #[test]
    fn cardinality_forms() {
        for s in ["0..1", "1..1", "1..*", "0..*", "2..5"] {
            let c: CardinalityRange = s.parse().unwrap();
            assert_eq!(c.to_string(), s);
        }
        assert!("1..0".parse::<CardinalityRange>().is_err());
        assert!("0..0".parse::<CardinalityRange>().is_err());
        assert!("3..2".parse::<CardinalityRange>().is_err());
        assert!("a..b".parse::<CardinalityRange>().is_err());
        assert!("1-2".parse::<CardinalityRange>().is_err());
        assert!(CardinalityRange::MANY.admits(7));
        assert!(!CardinalityRange::OPTIONAL.admits(2));
    }

    #[test]
    fn id_shapes() {
        assert!(is_tk_id("TK01"));
        assert!(is_tk_id("T1"));
        assert!(!is_tk_id("TK"));
        assert!(!is_tk_id("01"));
        assert!(!is_tk_id("TK0a"));
        assert!(is_role_id("CA00"));
        assert!(!is_role_id("0A"));
    }

    #[test]
    fn event_codes() {
        assert_eq!(event_from_code("pm"), Some(CtpState::Promised));
        assert_eq!(event_from_code("dc"), Some(CtpState::Declined));
        assert_eq!(event_from_code("qt"), None);
        assert_eq!(event_code(CtpState::Initiated), None);
    }
}
