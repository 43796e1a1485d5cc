//! Built-in ray tracer standing in for a physics simulator's camera: it loads
//! the object mesh and renders RGB, depth and silhouette captures.

pub mod assets;
mod bvh;
mod dataset;
mod mesh;
mod render;

pub use bvh::Bvh;
pub use dataset::{CaptureFrame, Dataset};
pub use mesh::{load_mesh, parse_obj, Hit, TriangleMesh, CHECKER_COLORS};
pub use render::{build_dataset, light_direction, render_frame, Scene, AMBIENT};
