//! biasbeam: corpus analytics for song lyrics.
//!
//! Ingests a lyrics corpus, stratifies it by genre, trains skip-gram
//! embeddings per stratum, discovers topics via PCA + clustering + c-TF-IDF,
//! and scores gender bias with SC-WEAT. See the `cli` module binary for the
//! command-line surface.

pub mod corpus;
pub mod embed;
pub mod error;
pub mod matrix;
pub mod pipeline;
pub mod text;
pub mod config;
pub mod demo;
pub mod report;
pub mod topics;
pub mod weat;

pub use error::{Error, Result};
