//! Minimal differentiable-computation core: dense parameters, the forward
//! operations the recommender is built from, reverse-mode gradient
//! accumulation over a tape, Adam, and a finite-difference checker.

pub mod check;
pub mod math;
pub mod param;
pub mod tape;

pub use check::finite_diff_check;
pub use param::{AdamConfig, ParamId, ParamStore, Parameter};
pub use tape::{MemRef, NodeId, Tape};
