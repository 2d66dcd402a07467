//! Masked Gram-matrix federation for kernel methods on horizontally
//! partitioned data.
//!
//! Input parties multiply their samples by a shared random mask and a
//! party-private left inverse; the function party only sees the masked rows
//! yet recovers the exact Gram matrix and trains a kernel SVM on it.

pub mod data;
mod error;
pub mod experiment;
pub mod gram;
pub mod kernel;
pub mod linalg;
pub mod masking;
pub mod protocol;
mod party;
pub mod svm;

pub use error::{Error, Result};
pub use party::{PartyId, PARTY_ID_LEN};

pub use data::DataMatrix;
pub use gram::{GramMatrix, PayloadStore};
pub use kernel::KernelSpec;
pub use linalg::{MaskDims, Matrix};
pub use masking::{MaskContext, MaskedMatrix};
pub use svm::{CvReport, GridSpec, TrainedModel};
