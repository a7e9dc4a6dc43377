//! Back-ends for spoofing-aware speaker verification (SASV).
//!
//! The crate works on precomputed embeddings: an ASV (speaker) embedding and a
//! CM (countermeasure) embedding per utterance. On top of those it provides
//!
//! - [`nn`]: a small dense-network engine (forward, backward, losses, Adam/SGD,
//!   finite-difference gradient checking) in double precision,
//! - [`data`]: protocol, trial-list and embedding-store parsing and writing,
//! - [`sampling`]: training pair and triplet construction plus a synthetic
//!   dataset generator,
//! - [`models`]: the score-fusion model with its auxiliary speaker verification
//!   network, the integrated embedding projector, and two baselines,
//! - [`metrics`]: EER computation and the SV / SPF / SASV report.

pub mod data;
pub mod error;
pub mod metrics;
pub mod models;
pub mod nn;
pub mod sampling;
pub mod vector;

pub use error::{Error, Result};
