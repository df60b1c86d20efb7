//! Data-driven weighting for the dermoscopic 7-point checklist.
//!
//! The pipeline mines a directed, weighted attribute graph from label
//! co-occurrence ([`graph`]), encodes the graph nodes from word vectors
//! ([`embedding`]), runs multi-scale digraph convolution and an
//! attributes-first / diagnosis-second classifier ([`model`]), and compares
//! the learned weighting against the traditional integer score ([`eval`]).

pub mod checklist;
pub mod checkpoint;
pub mod dataset;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod graph;
pub mod model;
pub mod pipeline;
pub mod scoring;
pub mod service;
mod util;

pub use checklist::{Attribute, NodeId, N_ATTRIBUTES, N_NODES};
pub use error::{Error, Result};
