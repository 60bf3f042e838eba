//! Multi-view semi-supervised node classification.
//!
//! Each view is compressed by its own sparse autoencoder, a fully-connected
//! fusion network learns a shared node representation `H` that reconstructs
//! every view's latent code, and a learnable GCN classifies nodes over an
//! adaptively weighted, shrinkage-refined fusion of per-view KNN graphs.
//! Training alternates over the four parameter groups.

pub mod cli;
pub mod data;
pub mod dense;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod graph;
pub mod lgcn;
pub mod ndmath;
pub mod sparse_ae;
pub mod trainer;

pub use error::{Error, Result};
