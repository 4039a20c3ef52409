//! L1-norm two-directional PCA filter cascades for image features.
//!
//! The pipeline runs image patches through two learned filter stages, hashes
//! the binarized responses and pools block histograms into a feature vector.
//! Four filter learners are provided: PCANet, 2DPCANet, L1-PCANet and
//! L1-2D²PCANet.

pub mod classifier;
pub mod dataio;
pub mod error;
pub mod harness;
pub mod imagepatch;
pub mod network;
pub mod subspace;

pub use error::{Error, Result};
