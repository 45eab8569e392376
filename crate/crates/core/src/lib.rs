//! Weak-supervision training toolkit for cross-domain binary sentiment
//! classification.
//!
//! The pipeline has four stages that map onto the modules below:
//!
//! * [`corpus`] turns raw reviews into weakly labeled (star rating) or fully
//!   labeled datasets, splits them and persists manifests.
//! * [`featurize`] maps review text onto fixed-width inputs, either through a
//!   hashed bag of n-grams or through frozen sentence embeddings.
//! * [`model`] and [`trainer`] hold the softmax classifier and the two-stage
//!   schedule: a low learning rate pass over weak labels followed by training
//!   on clean labels until validation loss stops improving.
//! * [`eval`] scores checkpoints and assembles source x target transfer
//!   matrices.
//!
//! [`cli`] ties these together behind the `xferlab` binary.

pub mod audit;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod eval;
pub mod featurize;
pub mod model;
pub mod synth;
pub mod trainer;

mod error;

pub use error::{Error, Result};
