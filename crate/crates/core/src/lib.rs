//! Point cloud upsampling with multi-scale feature attention.
//!
//! A sparse patch of `N` points is lifted to `r·N` points in two stages: a
//! coarse generator proposes offsets from duplicated input points, and a
//! refiner adds corrections computed by cross-attention between multi-scale
//! point-transformer features and global features of the coarse cloud.

pub mod error;
pub mod geometry;
pub mod layers;
pub mod metrics;
pub mod network;
pub mod pipeline;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;
