//! The `demo-bpmn` command line.
//!
//! Exit status 0 means success, 1 means diagnostics or a failed check, and
//! 2 means the input could not be read or parsed. Diagnostics go to the
//! error stream as `file:line:col: error[RULE]: message`.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use demo_bpmn_core::bpmn::{validate_bpmn, BpmnGraph};
use demo_bpmn_core::compose::{compose, ComposeError};
use demo_bpmn_core::ctp::TraceBounds;
use demo_bpmn_core::expand::{expand_transaction, ExpandOptions};
use demo_bpmn_core::model::{
    parse_model_spanned, roots, rules, validate_model, DemoModel, SourceSpans, TransactionKind,
};
use demo_bpmn_core::sim::{check_conformance, explore, ChoicePolicy, Outcome, Simulator};
use demo_bpmn_core::{Diagnostic, Locus, PatternLevel};

use crate::dot::to_dot;
use crate::json::{exploration_to_json, graph_to_json, model_from_json, report_to_json};
use crate::xml::{from_xml, to_xml, write_xml, XmlError, XmlOptions};

#[derive(Debug, Parser)]
#[command(
    name = "demo-bpmn",
    version,
    about = "Compile DEMO transaction models to BPMN 2.0 and check the result"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Transaction pattern level: basic, standard or complete. Defaults to
    /// standard, or for `conformance` on a .bpmn file, to the level its
    /// messages imply.
    #[arg(long, global = true)]
    pub level: Option<PatternLevel>,
    /// Add an abstract production task after each promise.
    #[arg(long, global = true)]
    pub include_production: bool,
    /// How often each loop may be taken during exploration.
    #[arg(long, global = true, default_value_t = 2)]
    pub loop_bound: u32,
    /// How many revokes a run may contain during exploration.
    #[arg(long, global = true, default_value_t = 2)]
    pub revoke_bound: u32,
    /// Seed for a random simulation run.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output format. Graphs default to xml, reports to text.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Write the main output here instead of standard output.
    #[arg(short = 'o', long = "output", global = true)]
    pub output: Option<PathBuf>,
    /// Transaction kind whose tree is compiled when a model has several.
    #[arg(long, global = true)]
    pub root: Option<String>,
    /// Include diagram-interchange coordinates in XML output.
    #[arg(long, global = true)]
    pub layout: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Xml,
    Dot,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compose a model (.demo or .json) into one collaboration.
    Compile { input: PathBuf },
    /// Expand a single transaction kind into its building block.
    Expand {
        /// Transaction kind id, e.g. TK01.
        tk: String,
        /// Model that declares the transaction kind's name and roles.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Check a model or a .bpmn file and list its diagnostics.
    Validate { input: PathBuf },
    /// Run a .bpmn file (or a compiled model) once and print its trace.
    Simulate {
        input: PathBuf,
        /// Comma-separated guard labels or act codes taken at choices.
        #[arg(long, value_delimiter = ',')]
        script: Vec<String>,
    },
    /// Compare a block's traces with the transaction pattern, or explore a
    /// composed graph for deadlocks and pattern violations.
    Conformance { input: PathBuf },
    /// Read a .bpmn file and write it back; succeeds iff nothing changed.
    Roundtrip { input: PathBuf },
}

/// Why a command did not succeed.
struct Failure {
    code: i32,
    lines: Vec<String>,
}

impl Failure {
    fn usage(line: String) -> Self {
        Failure {
            code: 2,
            lines: vec![line],
        }
    }

    fn check(lines: Vec<String>) -> Self {
        Failure { code: 1, lines }
    }
}

type CmdResult = Result<i32, Failure>;

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match execute(&cli, out, err) {
        Ok(code) => code,
        Err(f) => {
            for l in f.lines {
                let _ = writeln!(err, "{l}");
            }
            f.code
        }
    }
}

fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    match &cli.command {
        Command::Compile { input } => {
            let graph = compile(cli, input)?;
            emit_graph(cli, &graph, out)
        }
        Command::Expand { tk, model } => {
            let kind = match model {
                Some(path) => {
                    let m = load_model(path)?;
                    m.model.transaction(tk).cloned().ok_or_else(|| {
                        Failure::check(vec![format!(
                            "{}: error[{}]: no transaction kind {tk}",
                            path.display(),
                            rules::REF
                        )])
                    })?
                }
                None => TransactionKind::new(tk, tk, "initiator", "executor"),
            };
            let graph = expand_transaction(&kind, &expand_options(cli));
            emit_graph(cli, &graph, out)
        }
        Command::Validate { input } => validate(input, out),
        Command::Simulate { input, script } => simulate(cli, input, script, out, err),
        Command::Conformance { input } => conformance(cli, input, out),
        Command::Roundtrip { input } => roundtrip(cli, input, out),
    }
}

fn expand_options(cli: &Cli) -> ExpandOptions {
    ExpandOptions::new(cli.level.unwrap_or(PatternLevel::Standard))
        .with_production(cli.include_production)
}

/// The least level whose acts cover every message in `graph`.
fn implied_level(graph: &BpmnGraph) -> PatternLevel {
    let code = |name: &str| name.split('(').next().unwrap_or("").to_string();
    let codes: Vec<String> = graph.messages.iter().map(|m| code(&m.name)).collect();
    if codes
        .iter()
        .any(|c| c.starts_with("rv-") || c.starts_with("al-") || c.starts_with("rf-"))
    {
        PatternLevel::Complete
    } else if codes.iter().any(|c| c == "dc" || c == "rj") {
        PatternLevel::Standard
    } else {
        PatternLevel::Basic
    }
}

fn bounds(cli: &Cli) -> TraceBounds {
    TraceBounds {
        loop_bound: cli.loop_bound,
        revoke_bound: cli.revoke_bound,
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("{}: cannot read: {e}", path.display())))
}

fn write_output(cli: &Cli, text: &str, out: &mut dyn Write) -> Result<(), Failure> {
    match &cli.output {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::usage(format!("{}: cannot write: {e}", path.display()))),
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| Failure::usage(format!("cannot write output: {e}"))),
    }
}

fn is_model_path(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()),
        Some("demo" | "json")
    )
}

fn is_json(path: &Path) -> bool {
    path.extension().and_then(|e| e.to_str()) == Some("json")
}

/// 1-based line and column of byte offset `pos`.
fn line_col(text: &str, pos: usize) -> (u32, u32) {
    let before = &text[..pos.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line as u32, col as u32)
}

/// Renders a diagnostic as `file:line:col: ...` when a position is known.
fn render(path: &Path, d: &Diagnostic, pos: Option<(u32, u32)>) -> String {
    let body = match &d.locus {
        Locus::Element(_) | Locus::Link(_) | Locus::Text { .. } if pos.is_some() => {
            let mut plain = d.clone();
            plain.locus = Locus::Whole;
            plain.to_string()
        }
        _ => d.to_string(),
    };
    match pos {
        Some((l, c)) => format!("{}:{l}:{c}: {body}", path.display()),
        None => format!("{}: {body}", path.display()),
    }
}

struct LoadedModel {
    model: DemoModel,
    text: String,
    spans: Option<SourceSpans>,
}

impl LoadedModel {
    fn position(&self, d: &Diagnostic) -> Option<(u32, u32)> {
        if let Some(spans) = &self.spans {
            return spans.resolve(&self.model, &d.locus);
        }
        match &d.locus {
            Locus::Text { line, col } => Some((*line, *col)),
            Locus::Link(i) => self
                .text
                .match_indices("\"parent_tk\"")
                .nth(*i)
                .map(|(p, _)| line_col(&self.text, p)),
            Locus::Element(id) => self
                .text
                .find(&format!("\"{id}\""))
                .map(|p| line_col(&self.text, p)),
            Locus::Whole => None,
        }
    }
}

/// Reads a model file without checking the model invariants.
fn read_model(path: &Path) -> Result<LoadedModel, Failure> {
    let text = read(path)?;
    let parsed = if is_json(path) {
        model_from_json(&text).map(|m| (m, None))
    } else {
        parse_model_spanned(&text).map(|(m, s)| (m, Some(s)))
    };
    match parsed {
        Ok((model, spans)) => Ok(LoadedModel { model, text, spans }),
        Err(diags) => {
            let syntax = diags.iter().any(|d| d.rule == rules::SYNTAX);
            let lines = diags
                .iter()
                .map(|d| {
                    let pos = match &d.locus {
                        Locus::Text { line, col } => Some((*line, *col)),
                        Locus::Link(i) => text
                            .match_indices("\"parent_tk\"")
                            .nth(*i)
                            .map(|(p, _)| line_col(&text, p)),
                        _ => None,
                    };
                    render(path, d, pos)
                })
                .collect();
            Err(Failure {
                code: if syntax { 2 } else { 1 },
                lines,
            })
        }
    }
}

/// Reads a model and requires it to be valid.
fn load_model(path: &Path) -> Result<LoadedModel, Failure> {
    let loaded = read_model(path)?;
    let diags = validate_model(&loaded.model);
    if diags.is_empty() {
        Ok(loaded)
    } else {
        Err(Failure::check(
            diags
                .iter()
                .map(|d| render(path, d, loaded.position(d)))
                .collect(),
        ))
    }
}

fn compile(cli: &Cli, path: &Path) -> Result<BpmnGraph, Failure> {
    let loaded = load_model(path)?;
    let model = match &cli.root {
        Some(r) => {
            if loaded.model.transaction(r).is_none() {
                return Err(Failure::check(vec![format!(
                    "{}: error[{}]: no transaction kind {r}",
                    path.display(),
                    rules::REF
                )]));
            }
            loaded.model.tree(r)
        }
        None => loaded.model.clone(),
    };
    compose(&model, &expand_options(cli)).map_err(|e| {
        let msg = match &e {
            ComposeError::RootCount(n) if *n > 1 => {
                let ids: Vec<&str> = roots(&model).iter().map(|t| t.id.as_str()).collect();
                format!("{e} ({}); pick one with --root", ids.join(", "))
            }
            _ => e.to_string(),
        };
        Failure::check(vec![format!("{}: error: {msg}", path.display())])
    })
}

/// Byte offset of the element declaring `id` in XML text.
fn xml_position(text: &str, id: &str) -> Option<(u32, u32)> {
    text.find(&format!("id=\"{id}\"")).map(|p| {
        let tag = text[..p].rfind('<').unwrap_or(p);
        line_col(text, tag)
    })
}

fn xml_failure(path: &Path, text: &str, e: XmlError) -> Failure {
    match e {
        XmlError::XmlSyntax { line, col, message } => Failure::usage(format!(
            "{}:{line}:{col}: error[XML]: {message}",
            path.display()
        )),
        XmlError::UnsupportedElement { name, line, col } => Failure::usage(format!(
            "{}:{line}:{col}: error[XML]: unsupported element <{name}>",
            path.display()
        )),
        XmlError::Dangling { id, reference } => {
            let pos = xml_position(text, &id).map_or(String::new(), |(l, c)| format!("{l}:{c}:"));
            Failure::check(vec![format!(
                "{}:{pos} error[DANGLING]: {id} refers to missing {reference}",
                path.display()
            )])
        }
        other => Failure::check(vec![format!("{}: error: {other}", path.display())]),
    }
}

fn load_graph(path: &Path) -> Result<(BpmnGraph, String), Failure> {
    let text = read(path)?;
    let graph = from_xml(&text).map_err(|e| xml_failure(path, &text, e))?;
    Ok((graph, text))
}

/// A `.bpmn` file as is, or a model compiled with the current options.
fn graph_input(cli: &Cli, path: &Path) -> Result<BpmnGraph, Failure> {
    if is_model_path(path) {
        compile(cli, path)
    } else {
        load_graph(path).map(|(g, _)| g)
    }
}

fn emit_graph(cli: &Cli, graph: &BpmnGraph, out: &mut dyn Write) -> CmdResult {
    let text = match cli.format.unwrap_or(Format::Xml) {
        Format::Xml => to_xml(graph, XmlOptions { layout: cli.layout }).map_err(|e| match e {
            XmlError::InvalidGraph(diags) => {
                Failure::check(diags.iter().map(|d| d.to_string()).collect())
            }
            other => Failure::check(vec![other.to_string()]),
        })?,
        Format::Dot => to_dot(graph),
        Format::Json => graph_to_json(graph),
    };
    write_output(cli, &text, out)?;
    Ok(0)
}

fn validate(path: &Path, out: &mut dyn Write) -> CmdResult {
    let lines: Vec<String> = if is_model_path(path) {
        let loaded = read_model(path)?;
        validate_model(&loaded.model)
            .iter()
            .map(|d| render(path, d, loaded.position(d)))
            .collect()
    } else {
        let (graph, text) = load_graph(path)?;
        validate_bpmn(&graph)
            .iter()
            .map(|d| {
                let pos = match &d.locus {
                    Locus::Element(id) => xml_position(&text, id),
                    _ => None,
                };
                render(path, d, pos)
            })
            .collect()
    };
    if !lines.is_empty() {
        return Err(Failure::check(lines));
    }
    let _ = writeln!(out, "{}: no diagnostics", path.display());
    Ok(0)
}

fn simulate(
    cli: &Cli,
    path: &Path,
    script: &[String],
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CmdResult {
    let graph = graph_input(cli, path)?;
    let policy = match (script.is_empty(), cli.seed) {
        (false, _) => ChoicePolicy::Scripted(script.to_vec()),
        (true, Some(seed)) => ChoicePolicy::Random { seed },
        (true, None) => ChoicePolicy::Exhaustive,
    };
    let sim = Simulator::new(&graph, bounds(cli));
    let run = sim.run(&policy);
    let mut text = run.message_line();
    text.push('\n');
    write_output(cli, &text, out)?;
    let problem = match &run.outcome {
        Outcome::Completed => return Ok(0),
        Outcome::Deadlock => format!("deadlock: {}", sim.describe_marking(&run.marking)),
        Outcome::BoundExceeded => "every remaining move exceeds a bound".to_string(),
        Outcome::ScriptExhausted => "the script ended before the run did".to_string(),
        Outcome::ScriptMismatch {
            expected,
            available,
        } => {
            format!(
                "script expects {expected}, choices are {}",
                available.join(", ")
            )
        }
    };
    let _ = writeln!(err, "{}: error: {problem}", path.display());
    Ok(1)
}

fn conformance(cli: &Cli, path: &Path, out: &mut dyn Write) -> CmdResult {
    let graph = graph_input(cli, path)?;
    let level = cli.level.unwrap_or_else(|| {
        if is_model_path(path) {
            PatternLevel::Standard
        } else {
            implied_level(&graph)
        }
    });
    let json = cli.format == Some(Format::Json);
    let tks = graph.transaction_ids();
    if tks.len() == 1 {
        let report = check_conformance(&graph, level, bounds(cli));
        let text = if json {
            report_to_json(&report)
        } else {
            format!("{report}\n")
        };
        write_output(cli, &text, out)?;
        return Ok(if report.passed() { 0 } else { 1 });
    }
    let b = bounds(cli);
    let e = explore(&graph, Some(level), b);
    let text = if json {
        exploration_to_json(&e)
    } else {
        let mut s = format!(
            "level: {} (loop bound {}, revoke bound {})\ntransactions: {}\nstates: {} (completed {}, cut {}{})\ndeadlocks: {}\n",
            level,
            b.loop_bound,
            b.revoke_bound,
            tks.join(", "),
            e.states,
            e.completed,
            e.cut,
            if e.truncated { ", truncated" } else { "" },
            e.deadlock_count
        );
        for w in &e.deadlocks {
            s.push_str(&format!("  after {}: {}\n", w.line(), w.detail));
        }
        s.push_str(&format!("violations: {}\n", e.violation_count));
        for w in &e.violations {
            s.push_str(&format!("  after {}: {}\n", w.line(), w.detail));
        }
        s.push_str(&format!(
            "result: {}\n",
            if e.is_sound() { "PASS" } else { "FAIL" }
        ));
        s
    };
    write_output(cli, &text, out)?;
    Ok(if e.is_sound() { 0 } else { 1 })
}

fn roundtrip(cli: &Cli, path: &Path, out: &mut dyn Write) -> CmdResult {
    let (graph, text) = load_graph(path)?;
    let layout = text.contains("BPMNDiagram");
    let again =
        write_xml(&graph, XmlOptions { layout }).map_err(|e| xml_failure(path, &text, e))?;
    if cli.output.is_some() {
        write_output(cli, &again, out)?;
    }
    if again == text {
        let _ = writeln!(out, "{}: identical", path.display());
        return Ok(0);
    }
    let line = text
        .lines()
        .zip(again.lines())
        .position(|(a, b)| a != b)
        .map_or_else(
            || text.lines().count().min(again.lines().count()) + 1,
            |i| i + 1,
        );
    Err(Failure::check(vec![format!(
        "{}:{line}:1: error[ROUNDTRIP]: rewritten document differs from here",
        path.display()
    )]))
}
