//! Knowledge-graph grounded financial asset recommendation harness.
//!
//! The crate covers the whole desk-scale pipeline:
//!
//! - [`data`]: transaction, price, asset and profile ingestion plus a seeded
//!   synthetic generator.
//! - [`kg`]: Personal and Market Knowledge Graphs, ten-week price summaries,
//!   the joint triple cap and deterministic JSON-LD.
//! - [`prompt`]: chat prompt assembly, completion rendering and response parsing.
//! - [`alignment`]: outcome sets and binary-labelled prompt/completion corpora.
//! - [`federation`]: heterogeneous clients, user assignment, communication
//!   rounds, adapter averaging and communication accounting.
//! - [`trainer`]: the FLAT adapter container, the deterministic mock trainer and
//!   the line-delimited JSON protocol for external trainers.
//! - [`evaluation`]: test instances, Hits@3 metrics and the Random and
//!   Popularity baselines.
//! - [`config`] and [`pipeline`]: run configuration and the command
//!   implementations behind the `finalign` binary.

pub mod alignment;
pub mod config;
pub mod data;
pub mod evaluation;
pub mod federation;
pub mod kg;
pub mod pipeline;
pub mod prompt;
pub mod schedule;
pub mod seed;
pub mod trainer;

pub use alignment::{KtoExample, OutcomeSets};
pub use data::{Asset, CustomerProfile, Dataset, PriceBar, Transaction};
pub use kg::{KnowledgeGraph, Triple};
pub use trainer::AdapterTensors;
