//! Named entity recognition posed as extractive question answering.
//!
//! BIO corpora are turned into SQuAD 2.0 data with one question per entity
//! type, span logits from any QA model are decoded back into BIO labels, and
//! few-shot splits are scored with exact-match micro F1.

pub mod config;
pub mod convert;
pub mod corpus;
pub mod decode;
pub mod error;
pub mod eval;
pub mod pipeline;
pub mod prompt;
pub mod scoring;
pub mod squad;
pub mod text;

pub use error::{Error, Result};
