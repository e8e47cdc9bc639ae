//! Hop-ranked preference learning on text-attributed graphs.
//!
//! The pipeline builds ranked preference instances from exact-hop
//! neighborhoods, trains a scoring policy with a distance- and rank-weighted
//! DPO objective plus a listwise SFT term, and classifies nodes by voting over
//! rounds of labeled anchors.

pub mod error;
pub mod evalkit;
pub mod graph;
pub mod inference;
pub mod objective;
pub mod pipeline;
pub mod policy;
pub mod sampler;
pub mod seed;
pub mod trainer;

pub use error::{Error, Result};
pub use graph::{ClassId, NodeId, TextGraph};
