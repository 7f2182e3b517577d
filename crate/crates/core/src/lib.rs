//! Discrete-slot simulator for a downlink power-domain NOMA cell serving
//! video-streaming users, with a QoE-aware drift-plus-penalty scheduler,
//! a max-sum-rate baseline and a QoE demand modeling pipeline.

// Validation is written as `!(x > 0.0)` on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod harness;
pub mod noma;
pub mod qoe;
pub mod rng;
pub mod scheduler;
pub mod video;

pub use error::{Error, Result};
