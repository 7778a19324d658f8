//! Line-oriented `.demo` syntax.
//!
//! ```text
//! # comment
//! transaction TK01 "patient problem diagnosing" initiator CA00 executor A01
//! (TK01/pm) -> [TK02/rq] 0..1
//! ```

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::{
    event_from_code, is_role_id, is_tk_id, rules, CardinalityError, CardinalityRange, DemoModel,
    ResponseLink, TransactionKind,
};
use crate::ctp::ActKind;
use crate::diag::{Diagnostic, Locus};

/// Source lines of each parsed declaration, parallel to the model's lists.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SourceSpans {
    pub transaction_lines: Vec<u32>,
    pub link_lines: Vec<u32>,
}

impl SourceSpans {
    /// Line and column a model-level diagnostic points at, if known.
    pub fn resolve(&self, model: &DemoModel, locus: &Locus) -> Option<(u32, u32)> {
        match locus {
            Locus::Text { line, col } => Some((*line, *col)),
            Locus::Link(i) => self.link_lines.get(*i).map(|l| (*l, 1)),
            Locus::Element(id) => model
                .transaction_kinds
                .iter()
                .position(|t| &t.id == id)
                .and_then(|i| self.transaction_lines.get(i))
                .map(|l| (*l, 1)),
            Locus::Whole => None,
        }
    }
}

pub fn parse_model(text: &str) -> Result<DemoModel, Vec<Diagnostic>> {
    parse_model_spanned(text).map(|(m, _)| m)
}

/// Parses the DSL, collecting every diagnostic instead of stopping at the
/// first one.
pub fn parse_model_spanned(text: &str) -> Result<(DemoModel, SourceSpans), Vec<Diagnostic>> {
    let mut model = DemoModel::default();
    let mut spans = SourceSpans::default();
    let mut diags = Vec::new();
    let mut ids = BTreeSet::new();

    for (n, raw) in text.lines().enumerate() {
        let line_no = n as u32 + 1;
        let mut cur = Cursor::new(raw, line_no);
        cur.skip_ws();
        if cur.at_end() || cur.peek() == Some('#') {
            continue;
        }
        let result = if cur.peek() == Some('(') {
            parse_link(&mut cur).map(Item::Link)
        } else {
            parse_transaction(&mut cur).map(Item::Transaction)
        };
        match result {
            Ok(Item::Transaction(tk)) => {
                if !ids.insert(tk.id.clone()) {
                    diags.push(Diagnostic::at_line(
                        rules::DUP_ID,
                        line_no,
                        1,
                        format!("transaction kind {} declared twice", tk.id),
                    ));
                    continue;
                }
                model.transaction_kinds.push(tk);
                spans.transaction_lines.push(line_no);
            }
            Ok(Item::Link(link)) => {
                model.response_links.push(link);
                spans.link_lines.push(line_no);
            }
            Err(d) => diags.push(d),
        }
    }

    for (link, &line) in model.response_links.iter().zip(&spans.link_lines) {
        for end in [&link.parent_tk, &link.child_tk] {
            if !ids.contains(end) {
                let col = text
                    .lines()
                    .nth(line as usize - 1)
                    .and_then(|l| l.find(end.as_str()))
                    .map_or(1, |c| c as u32 + 1);
                diags.push(Diagnostic::at_line(
                    rules::REF,
                    line,
                    col,
                    format!("undeclared transaction kind {end}"),
                ));
            }
        }
    }

    if diags.is_empty() {
        Ok((model, spans))
    } else {
        diags.sort_by_key(|d| match d.locus {
            Locus::Text { line, col } => (line, col),
            _ => (0, 0),
        });
        Err(diags)
    }
}

/// Canonical text: declarations first, then links, both in model order.
pub fn serialize_model(model: &DemoModel) -> String {
    let mut out = String::new();
    for tk in &model.transaction_kinds {
        out.push_str(&tk.to_dsl());
        out.push('\n');
    }
    if !model.transaction_kinds.is_empty() && !model.response_links.is_empty() {
        out.push('\n');
    }
    for link in &model.response_links {
        out.push_str(&link.to_dsl());
        out.push('\n');
    }
    out
}

enum Item {
    Transaction(TransactionKind),
    Link(ResponseLink),
}

fn parse_transaction(cur: &mut Cursor<'_>) -> Result<TransactionKind, Diagnostic> {
    cur.keyword("transaction")?;
    let (id, col) = cur.word("transaction id")?;
    if !is_tk_id(id) {
        return Err(cur.error_at(
            col,
            format!("`{id}` is not a transaction id (letters then digits)"),
        ));
    }
    let name = cur.quoted()?;
    cur.keyword("initiator")?;
    let initiator = cur.role()?;
    cur.keyword("executor")?;
    let executor = cur.role()?;
    cur.end()?;
    Ok(TransactionKind {
        id: id.into(),
        name,
        initiator_role: initiator.into(),
        executor_role: executor.into(),
    })
}

fn parse_link(cur: &mut Cursor<'_>) -> Result<ResponseLink, Diagnostic> {
    cur.expect('(')?;
    let (parent, pcol) = cur.ident_until('/')?;
    if !is_tk_id(parent) {
        return Err(cur.error_at(pcol, format!("`{parent}` is not a transaction id")));
    }
    cur.expect('/')?;
    let (evt, ecol) = cur.ident_until(')')?;
    let parent_event = event_from_code(evt).ok_or_else(|| {
        Diagnostic::at_line(
            rules::LINK_KIND,
            cur.line,
            ecol,
            format!("`{evt}` is not a link event (rq, pm, da, ac, dc, rj)"),
        )
    })?;
    cur.expect(')')?;
    cur.skip_ws();
    cur.expect_str("->")?;
    cur.skip_ws();
    cur.expect('[')?;
    let (child, ccol) = cur.ident_until('/')?;
    if !is_tk_id(child) {
        return Err(cur.error_at(ccol, format!("`{child}` is not a transaction id")));
    }
    cur.expect('/')?;
    let (act, acol) = cur.ident_until(']')?;
    if ActKind::from_code(act) != Some(ActKind::Request) {
        return Err(Diagnostic::at_line(
            rules::LINK_KIND,
            cur.line,
            acol,
            format!("links initiate a request; `{act}` is not `rq`"),
        ));
    }
    cur.expect(']')?;
    let (card, kcol) = cur.word("cardinality")?;
    let cardinality: CardinalityRange = card.parse().map_err(|e: CardinalityError| {
        let rule = match e {
            CardinalityError::Malformed(_) | CardinalityError::Empty(_) => rules::CARD,
        };
        Diagnostic::at_line(rule, cur.line, kcol, format!("{e}"))
    })?;
    cur.end()?;
    Ok(ResponseLink {
        parent_tk: parent.into(),
        parent_event,
        child_tk: child.into(),
        child_act: ActKind::Request,
        cardinality,
    })
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
    line: u32,
}

impl<'a> Cursor<'a> {
    fn new(text: &'a str, line: u32) -> Self {
        Cursor { text, pos: 0, line }
    }

    fn rest(&self) -> &'a str {
        &self.text[self.pos..]
    }

    fn col(&self) -> u32 {
        self.text[..self.pos].chars().count() as u32 + 1
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn at_end(&self) -> bool {
        self.rest().is_empty()
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.text.len() - trimmed.len();
    }

    fn error_at(&self, col: u32, msg: String) -> Diagnostic {
        Diagnostic::at_line(rules::SYNTAX, self.line, col, msg)
    }

    fn error(&self, msg: String) -> Diagnostic {
        self.error_at(self.col(), msg)
    }

    fn expect(&mut self, c: char) -> Result<(), Diagnostic> {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            Ok(())
        } else {
            Err(self.error(format!("expected `{c}`")))
        }
    }

    fn expect_str(&mut self, s: &str) -> Result<(), Diagnostic> {
        if self.rest().starts_with(s) {
            self.pos += s.len();
            Ok(())
        } else {
            Err(self.error(format!("expected `{s}`")))
        }
    }

    /// Next whitespace-delimited word.
    fn word(&mut self, what: &str) -> Result<(&'a str, u32), Diagnostic> {
        self.skip_ws();
        let col = self.col();
        let rest = self.rest();
        let len = rest
            .find(|c: char| c.is_whitespace() || c == '#')
            .unwrap_or(rest.len());
        if len == 0 {
            return Err(self.error(format!("expected {what}")));
        }
        self.pos += len;
        Ok((&rest[..len], col))
    }

    fn ident_until(&mut self, stop: char) -> Result<(&'a str, u32), Diagnostic> {
        let col = self.col();
        let rest = self.rest();
        let Some(len) = rest.find(stop) else {
            return Err(self.error(format!("expected `{stop}`")));
        };
        let ident = &rest[..len];
        if ident.is_empty() || ident.contains(char::is_whitespace) {
            return Err(self.error(format!("expected an identifier before `{stop}`")));
        }
        self.pos += len;
        Ok((ident, col))
    }

    fn keyword(&mut self, kw: &str) -> Result<(), Diagnostic> {
        let (w, col) = self.word(kw)?;
        if w == kw {
            Ok(())
        } else {
            Err(self.error_at(col, format!("expected `{kw}`, found `{w}`")))
        }
    }

    fn role(&mut self) -> Result<&'a str, Diagnostic> {
        let (w, col) = self.word("actor role")?;
        if is_role_id(w) {
            Ok(w)
        } else {
            Err(self.error_at(col, format!("`{w}` is not an actor role id")))
        }
    }

    fn quoted(&mut self) -> Result<String, Diagnostic> {
        self.skip_ws();
        self.expect('"')?;
        let mut out = String::new();
        let mut chars = self.rest().char_indices();
        while let Some((i, c)) = chars.next() {
            match c {
                '"' => {
                    self.pos += i + 1;
                    return Ok(out);
                }
                '\\' => match chars.next() {
                    Some((_, e @ ('"' | '\\'))) => out.push(e),
                    _ => return Err(self.error(String::from("bad escape in name"))),
                },
                c => out.push(c),
            }
        }
        Err(self.error(String::from("unterminated name")))
    }

    fn end(&mut self) -> Result<(), Diagnostic> {
        self.skip_ws();
        if self.at_end() || self.peek() == Some('#') {
            Ok(())
        } else {
            Err(self.error(format!("unexpected `{}`", self.rest())))
        }
    }
}
