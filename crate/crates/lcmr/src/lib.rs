//! Memory-attention recommender for implicit feedback.
//!
//! Fuses user-item interactions (globally shared key/value memory blocks)
//! with item text (per-item word memories) through multi-hop attention,
//! trained with a binary cross-entropy objective and evaluated under the
//! leave-one-out protocol with HR@K / NDCG@K.

pub mod corpus;
pub mod error;
pub mod ndgrad;
pub mod rng;

pub use error::{Error, Result};
