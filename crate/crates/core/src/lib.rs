//! Recurrent language models with frequency-ranked recurrence tensors.
//!
//! The crate covers corpus preparation, the word-to-slice mapping policies,
//! the full model family (s-RNN, RNTN, r-RNTN, m-RNN, GRU, LSTM, r-GRU,
//! r-LSTM) with hand-written truncated BPTT, the two SGD training regimes,
//! perplexity evaluation, parameter accounting, and the checkpoint and
//! run-config formats used by the command-line tool.

pub mod checkpoint;
pub mod config;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod mapping;
pub mod models;
pub mod training;

pub use error::{Error, Result};
