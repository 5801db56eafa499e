//! News recommendation over an interaction behavior graph.
//!
//! The pipeline: ingest raw logs and indexes, build the heterogeneous behavior
//! graph, derive per-user concentration features from coritivity, learn node
//! and word embeddings with SkipGram over random walks, then train the
//! G-CNN / attention-LSTM six-class behavior model and evaluate it.

pub mod cli;
pub mod config;
pub mod coritivity;
pub mod error;
pub mod eval;
pub mod graph;
pub mod ingest;
pub mod model;
pub mod nn;
pub mod pipeline;
pub mod skipgram;
pub mod train;
pub mod walks;

pub use error::{Error, Result};
