//! Structured validation findings shared by the model and BPMN validators.

use alloc::string::String;
use core::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Severity {
    Warning,
    Error,
}

/// Where a finding applies.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Locus {
    /// 1-based line and column in a source text.
    Text {
        line: u32,
        col: u32,
    },
    /// A model or diagram element id.
    Element(String),
    /// The n-th response link of a model, 0-based.
    Link(usize),
    Whole,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Diagnostic {
    pub severity: Severity,
    pub rule: &'static str,
    pub locus: Locus,
    pub message: String,
}

impl Diagnostic {
    pub fn error(rule: &'static str, locus: Locus, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Error,
            rule,
            locus,
            message: message.into(),
        }
    }

    pub fn at_line(rule: &'static str, line: u32, col: u32, message: impl Into<String>) -> Self {
        Self::error(rule, Locus::Text { line, col }, message)
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        match &self.locus {
            Locus::Text { line, col } => write!(f, "{line}:{col}: ")?,
            Locus::Element(id) => write!(f, "{id}: ")?,
            Locus::Link(i) => write!(f, "link #{}: ", i + 1)?,
            Locus::Whole => {}
        }
        write!(f, "{sev}[{}]: {}", self.rule, self.message)
    }
}

/// Counts diagnostics carrying `rule`.
pub fn count_rule(diags: &[Diagnostic], rule: &str) -> usize {
    diags.iter().filter(|d| d.rule == rule).count()
}
