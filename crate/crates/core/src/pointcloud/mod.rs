//! Point-cloud representation: depth back-projection, merging, statistical
//! outlier removal and binary PLY I/O.

mod knn;
mod ply;

use rayon::prelude::*;

use crate::scene::{CaptureFrame, Dataset};
use crate::{Error, Result};

pub use knn::{KdTree, Neighbor};
pub use ply::{load_ply, save_ply, PLY_BYTES_PER_POINT};

pub const DEFAULT_K: usize = 20;
pub const DEFAULT_STD_RATIO: f64 = 2.0;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<[f32; 3]>,
    /// RGB in [0, 1], parallel to `points`.
    pub colors: Vec<[f32; 3]>,
}

impl PointCloud {
    pub fn new(points: Vec<[f32; 3]>, colors: Vec<[f32; 3]>) -> Result<Self> {
        if points.len() != colors.len() {
            return Err(Error::Shape(format!(
                "{} points but {} colors",
                points.len(),
                colors.len()
            )));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Validation("point cloud has non-finite coordinates".into()));
        }
        Ok(Self { points, colors })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Lifts every silhouette pixel to `origin + depth · direction` along its pixel ray.
pub fn backproject(frame: &CaptureFrame) -> PointCloud {
    let lifted: Vec<Option<([f32; 3], [f32; 3])>> = (0..frame.mask.len())
        .into_par_iter()
        .map(|i| {
            if !frame.mask[i] {
                return None;
            }
            let p = frame.pixel_ray(i).at(frame.depth[i] as f64);
            Some(([p.x as f32, p.y as f32, p.z as f32], frame.rgb.pixel(i)))
        })
        .collect();
    let (points, colors) = lifted.into_iter().flatten().unzip();
    PointCloud { points, colors }
}

/// Concatenates clouds in order.
pub fn merge(clouds: &[PointCloud]) -> PointCloud {
    let total = clouds.iter().map(PointCloud::len).sum();
    let mut out = PointCloud {
        points: Vec::with_capacity(total),
        colors: Vec::with_capacity(total),
    };
    for c in clouds {
        out.points.extend_from_slice(&c.points);
        out.colors.extend_from_slice(&c.colors);
    }
    out
}

/// Back-projects and merges every frame of a dataset.
pub fn from_dataset(dataset: &Dataset) -> PointCloud {
    let clouds: Vec<PointCloud> = dataset.frames.iter().map(backproject).collect();
    merge(&clouds)
}

/// Mean distance from each point to its `k` nearest other points.
pub fn mean_neighbor_distances(points: &[[f32; 3]], k: usize) -> Vec<f64> {
    let tree = KdTree::build(points);
    (0..points.len())
        .into_par_iter()
        .map(|i| {
            let nn = tree.nearest_excluding(i, k);
            nn.iter().map(|n| n.dist_sq.sqrt()).sum::<f64>() / nn.len() as f64
        })
        .collect()
}

/// Statistical outlier removal: keeps a point iff its mean distance to its
/// `k` nearest neighbours is at most `mean + std_ratio · std` of that
/// statistic over the whole cloud (sample standard deviation). Survivors keep
/// their order. Clouds with at most `k` points are returned unchanged.
pub fn filter_outliers(cloud: &PointCloud, k: usize, std_ratio: f64) -> Result<PointCloud> {
    if k == 0 {
        return Err(Error::Validation("outlier filter needs k ≥ 1".into()));
    }
    if !(std_ratio > 0.0) {
        return Err(Error::Validation(format!(
            "outlier filter needs std_ratio > 0, got {std_ratio}"
        )));
    }
    if cloud.len() < k + 1 {
        log::warn!(
            "outlier filter skipped: {} points is fewer than k + 1 = {}",
            cloud.len(),
            k + 1
        );
        return Ok(cloud.clone());
    }
    let stats = mean_neighbor_distances(&cloud.points, k);
    let n = stats.len() as f64;
    let mean = stats.iter().sum::<f64>() / n;
    let var = stats.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0);
    let threshold = mean + std_ratio * var.sqrt();
    let mut out = PointCloud::default();
    for (i, &d) in stats.iter().enumerate() {
        if d <= threshold {
            out.points.push(cloud.points[i]);
            out.colors.push(cloud.colors[i]);
        }
    }
    Ok(out)
}
