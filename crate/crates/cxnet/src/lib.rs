//! Complex-valued neural networks for comparing image patches.
//!
//! The crate provides, from the ground up:
//!
//! - [`ctensor`]: a dense complex tensor type (planar real/imaginary storage),
//!   elementwise arithmetic, shape ops, a 2D DFT, and a binary container format;
//! - [`autograd`]: a tape-based reverse-mode differentiation engine over real
//!   tensors (a complex tensor differentiates as its two real parts), with SGD
//!   and Adam optimizers and a checkpoint format;
//! - [`layers`]: complex convolution, two complex batch-norm variants, CRelu,
//!   complex max-pooling, complex fully-connected, complex L2 normalization,
//!   and the complex residual block, plus the real stem/head layers;
//! - [`models`]: the Complex Channel Net (pair similarity) and Complex Triple
//!   Net (complex descriptors) assembled from those layers;
//! - [`objectives`]: the complex-vector distance, the complexified SoftPN
//!   triplet loss, MSE pair loss, and FPR95/ROC evaluation;
//! - [`data`]: Photo-Tour and HPatches ingestion, pair/triplet samplers, and a
//!   synthetic patch generator for desk-scale experiments;
//! - [`verify`]: independent oracle suites (finite differences, naive
//!   convolution/DFT, brute-force FPR95) runnable from tests or the CLI;
//! - [`cli`]: the train / eval / describe / verify entry points used by the
//!   `cxnet` binary.

pub mod autograd;
pub mod cli;
pub mod ctensor;
pub mod data;
mod error;
pub mod layers;
pub mod models;
pub mod objectives;
mod randext;
pub mod verify;

pub use error::{Error, Result};
