//! Monolingual skip-gram embeddings and linear cross-lingual mapping.
//!
//! The pipeline: [`corpus`] turns text into id sequences, [`phrase`] joins
//! collocations into single tokens, [`trainer`] learns vectors, [`analogy`]
//! scores them on A:B :: C:D questions, and [`xmap`] fits a linear map
//! between two embedding spaces to retrieve translations by cosine
//! similarity.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analogy;
pub mod config;
pub mod corpus;
pub mod digest;
pub mod error;
pub mod manifest;
pub mod phrase;
pub mod rng;
pub mod store;
pub mod trainer;
pub mod xmap;

pub use error::{Error, Result};
