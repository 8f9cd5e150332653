//! Explanation-aware re-ranking for knowledge-graph recommenders.
//!
//! Recommenders that reason over a knowledge graph attach an explanation
//! path to every recommended product. This crate post-processes such
//! output: it scores each path for the recency of its linking interaction,
//! the popularity of its shared entity, and the diversity of explanation
//! types across a list, then re-ranks the explanation paths (and optionally
//! the products themselves) to improve those properties while preserving
//! ranking utility. An evaluation harness reports utility, explanation
//! quality, and demographic-parity gaps for the result.

pub mod candidates;
pub mod config;
pub mod error;
pub mod eval;
pub mod fixtures;
pub mod kg;
pub mod path;
pub mod pipeline;
pub mod props;
pub mod rerank;
pub mod split;
pub mod stats;
pub mod tsv;

pub use error::{Error, Result};
