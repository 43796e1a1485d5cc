pub mod error;
pub mod geometry;
pub mod image;
pub mod metrics;
pub mod nerf;
pub mod pointcloud;
pub mod scene;
pub mod voxel;

pub use error::{Error, Result};
