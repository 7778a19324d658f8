//! Compiler core that turns DEMO transaction trees into BPMN 2.0
//! collaborations and checks the result against the transaction pattern.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, XML and the
//! command line live in the `demo-bpmn` crate.
//!
//! Pipeline:
//!
//! 1. [`model::parse_model`] reads the `.demo` DSL into a [`model::DemoModel`].
//! 2. [`expand::expand_transaction`] turns one transaction kind into a
//!    two-pool building block at a [`ctp::PatternLevel`].
//! 3. [`compose::compose`] splices child blocks into their parent along the
//!    response links.
//! 4. [`sim`] executes the resulting [`bpmn::BpmnGraph`] with token semantics
//!    and compares its traces with [`ctp::CtpMachine`].

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod bpmn;
pub mod compose;
pub mod ctp;
pub mod diag;
pub mod expand;
pub mod model;
pub mod sim;

pub use ctp::{
    build_ctp, ActKind, Configuration, CtpMachine, CtpState, Party, PatternLevel, Trace,
};
pub use diag::{Diagnostic, Locus, Severity};
