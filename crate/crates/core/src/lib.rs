//! Sign retrieval for 8×8 block-DCT coefficients.
//!
//! Quantized DCT levels are split into amplitudes and signs, the amplitudes
//! are repacked into 64 sub-band slices, and a small convolutional network
//! predicts the AC signs from those slices. The codec stores only the XOR
//! between true and predicted signs, entropy coded per sub-band.
//!
//! Module map:
//!
//! - [`transform`]: block DCT, quantization, amplitude/sign split.
//! - [`subband`]: 4D block layout to 3D sub-band layout and back.
//! - [`network`]: the CNN, its loss, backpropagation, Adam and training.
//! - [`codec`]: residual signs, binary arithmetic coder, container format.
//! - [`metrics`]: recovery rate, per-block heat maps, bit accounting, timing.
//! - [`dataset`]: crops and training examples.
//! - [`pgm`]: binary PGM input and output.
//! - [`synthetic`]: procedural test images.

#![allow(clippy::needless_range_loop)]

pub mod codec;
pub mod dataset;
pub mod error;
pub mod metrics;
pub mod network;
pub mod pgm;
pub mod subband;
pub mod synthetic;
pub mod transform;

pub use error::{Error, Result};
