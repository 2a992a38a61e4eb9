//! Core library for the echotrain pipeline.
//!
//! Synthetic microphone-array scenes are beamformed into multispectral
//! acoustic images, compressed to MFCC volumes, and used as privileged
//! supervision to distill single-microphone audio classifiers, which are
//! then evaluated across acoustic scenarios and on a held-out-class
//! feature-transfer benchmark.
//!
//! Modules follow the data path:
//!
//! - [`sim`]: scene synthesis (recordings with geometry and labels)
//! - [`beamform`]: frequency-domain filter-and-sum acoustic imaging
//! - [`featurize`]: MFCC volumes, spectrograms, synchronized records, splits
//! - [`graph`]: dense tensors with reverse-mode differentiation and Adam
//! - [`models`]: the teacher and student architectures
//! - [`distill`]: supervised and teacher-student training
//! - [`eval`]: cross-scenario, confusion, and feature-transfer evaluation
//! - [`io`]: the on-disk formats (multichannel WAV, AIR1, AIP1, ASL1)

pub mod beamform;
pub mod distill;
pub mod error;
pub mod eval;
pub mod featurize;
pub mod graph;
pub mod io;
pub mod linalg;
pub mod models;
pub mod pipeline;
pub mod rng;
pub mod sim;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;
