//! Simulated federation: client populations, user assignment, rounds with
//! client sampling and adapter averaging, and communication accounting.

mod clients;
mod comm;
mod rounds;

use thiserror::Error;

pub use clients::{
    assign_users, make_clients, Assignment, ClientMode, ClientProfile, Strata, DEFAULT_CONCENTRATION,
    N_CAPACITY_BUCKETS, N_STRATA,
};
pub use comm::{
    adapter_size, comm_cost, AdapterSize, CommReport, SizeRow, BYTES_PER_MB, DEFAULT_BITS_PER_PARAM, REFERENCE_MODELS,
};
pub use rounds::{
    aggregate, aggregate_weighted, run_rounds, select_clients, train_seed, ClientCorpus, RoundConfig, RoundLog,
    RunOutcome, TrainerFailure, Weighting,
};

#[derive(Debug, Error)]
pub enum FederationError {
    #[error("no client has weight on populated stratum {0}")]
    EmptyStratumSupport(usize),
    #[error("adapter layouts differ: {0}")]
    ShapeMismatch(String),
    #[error("every client corpus is empty")]
    NoCorpus,
    #[error("{0}")]
    Invalid(String),
    #[error("trainer failed in round {} for client {}: {}", .0.round, .0.client, .0.source)]
    TrainerFailure(Box<TrainerFailure>),
    #[error(transparent)]
    Trainer(#[from] crate::trainer::TrainerError),
}
