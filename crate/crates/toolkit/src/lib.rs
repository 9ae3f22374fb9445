//! File formats, analyzer and chat backends, and the command line for the
//! attributive-clause pre-editing toolkit. The analysis itself lives in
//! `attrclause-core`.

pub mod analysis;
pub mod annotate;
pub mod bundled;
pub mod cli;
pub mod corpus;
pub mod llm;
pub mod report;

pub use attrclause_core as core_api;
