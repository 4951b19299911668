//! Explainer-consensus training for tabular classifiers.
//!
//! The crate trains a classifier with an extra loss term that rewards
//! agreement between two gradient-based feature-attribution methods, and
//! provides the pieces needed to measure the effect: a reverse-mode autodiff
//! tape with higher-order gradients, an MLP with AdamW, six attribution
//! methods, exact and soft magnitude ranking, and six agreement metrics.
//!
//! `no_std` with `alloc`; file formats and the CLI live in the `pear` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod autodiff;
pub mod consensus;
pub mod data;
pub mod error;
pub mod explain;
pub mod linalg;
pub mod metrics;
pub mod nn;
pub mod probe;
pub mod rank;
pub mod tensor;

pub use autodiff::{Graph, Var};
pub use error::{Error, Result};
pub use tensor::{Shape, Tensor};
