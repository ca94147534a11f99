//! Octree generating networks on the CPU.
//!
//! The crate provides, bottom to top:
//!
//! - [`octree`]: Z-order keys, hash-table octrees, lossless voxel-grid
//!   conversion, and a binary file format;
//! - [`tensor`]: dense `f64` tensors with hand-written layer gradients
//!   (convolutions, transposed convolutions, fully connected, ReLU, softmax
//!   cross-entropy, Adam, trilinear resampling, finite-difference checks);
//! - [`layers`]: the sparse decoder layers — hash-table convolution via
//!   gather/matmul/scatter, per-cell three-way classification, multi-level
//!   structure loss, and feature propagation with receptive-field halos;
//! - [`model`]: declarative network configs, forward/backward tapes, training
//!   schedules and regimes, checkpoints, and the dense decoder baseline;
//! - [`data`]: binvox and graymap parsing, interior filling, procedural toy
//!   solids, and dataset manifests;
//! - [`eval`]: IoU with resolution reconciliation, scaling benchmarks with
//!   log-log slope fits, and the shift-robustness harness.

pub mod data;
pub mod error;
pub mod eval;
pub mod hash;
pub mod layers;
pub mod model;
pub mod octree;
pub mod parallel;
pub mod tensor;

pub use error::{Error, Result};
pub use octree::{CellState, Octree, OctreeKey, VoxelGrid};
pub use tensor::DenseTensor;
