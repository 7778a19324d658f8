//! File formats and the command line of the DEMO to BPMN compiler.

pub mod cli;
pub mod dot;
pub mod json;
pub mod xml;
