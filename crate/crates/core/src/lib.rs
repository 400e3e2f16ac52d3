//! Benchmark harness for tabular prediction tasks that contain free-text
//! columns.
//!
//! The pipeline runs ingest -> embed -> select -> models -> eval. The
//! [`breaklab`] module builds synthetic text-injection scenarios that probe
//! where each embedder fails, and [`vetting`] holds dataset-curation checks.

pub mod breaklab;
pub mod cli;
pub mod embed;
pub mod eval;
pub mod ingest;
pub mod models;
pub mod rng;
pub mod select;
pub mod table;
pub mod vetting;

pub use table::{Cell, Column, ColumnRole, FoldAssignment, Table, TargetSpec, TaskKind};
