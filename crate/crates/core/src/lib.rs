//! Layer-wise Linear Discriminant Analysis initialization for patch-based
//! convolutional networks, with the tooling to measure it on a synthetic
//! document-segmentation task.
//!
//! The crate is split along the pipeline:
//!
//! - [`linalg`]: dense matrices, SPD inversion and the generalized symmetric
//!   eigensolver used by LDA.
//! - [`lda`]: scatter matrices, the LDA transform and the closed-form
//!   discriminant classifier.
//! - [`network`]: the locally-connected SoftSign network, backprop and SGD.
//! - [`init`]: LDA and random weight initialization.
//! - [`data`]: page I/O, patch sampling and the synthetic page generator.
//! - [`eval`]: confusion matrices, mean IU, overlays and feature tiles.
//! - [`experiment`]: experiment configuration and the end-to-end `repro` run.

pub mod data;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod init;
pub mod lda;
pub mod linalg;
pub mod network;
pub mod rng;

pub use error::{Error, Result};
