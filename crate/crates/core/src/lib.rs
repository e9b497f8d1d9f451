//! Graph coverings of zero-dimensional systems, supercyclical and marked
//! partitions, rectification, and exact interval embeddings with finite-depth
//! contraction certificates.

pub mod circuits;
pub mod clopen;
pub mod covering;
pub mod dynamics;
pub mod embed;
pub mod error;
pub mod fixtures;
pub mod graph;
pub mod io;
pub mod marking;
pub mod rectify;
pub mod render;
pub mod verify;

pub use error::{Error, Result};
