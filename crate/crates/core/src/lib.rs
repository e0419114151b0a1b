//! Proximity- and load-aware resource allocation for V2V links.
//!
//! The pipeline groups V-UE pairs into zones by spectral clustering over a
//! blend of distance and load dissimilarity, apportions the RB pool across
//! zones by largest remainder, and then lets pairs inside each zone trade
//! RBs through utility-improving swaps. A discrete-time Manhattan-grid
//! simulator drives the pipeline and compares it against fixed equal-area
//! zones with exclusive RB use.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocation;
pub mod baseline;
pub mod channel;
pub mod clustering;
pub mod config;
pub mod engine;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod scenario;
pub mod sweep;

pub use error::{Error, Result};
