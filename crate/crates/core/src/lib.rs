//! Fixed-budget training-set curation for fine-tuning hosted language models
//! on natural language inference, with synthetic data generation and
//! out-of-distribution evaluation.

pub mod digest;
pub mod domain;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod modelgate;
pub mod select;
pub mod synth;
pub mod transform;

pub use error::{Error, ErrorClass, Result};
