//! Peer-review scoring and bibliometric counter-evaluation of research
//! institutions.
//!
//! The pipeline runs corpus → impact → credit → indicators → ranklab →
//! funding, with [`synthgen`] producing seeded corpora that stand in for
//! licensed bibliographic data.

pub mod cli;
pub mod corpus;
pub mod credit;
pub mod error;
pub mod funding;
pub mod impact;
pub mod indicators;
pub mod peer_eval;
pub mod pipeline;
pub mod ranklab;
pub mod synthgen;

pub use corpus::{load_corpus, write_corpus, Corpus, CorpusError};
pub use error::ComputeError;
