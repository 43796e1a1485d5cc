use rayon::prelude::*;

use crate::geometry::{PinholeCamera, PoseSet, Transform, Vec3};
use crate::image::RgbImage;
use crate::{Error, Result};

use super::bvh::Bvh;
use super::mesh::{Hit, TriangleMesh};
use super::{CaptureFrame, Dataset};

/// Minimum Lambert factor so faces turned away from the light keep some of their color.
pub const AMBIENT: f64 = 0.2;

/// Unit vector towards the directional light, fixed in world space so that
/// a surface point has the same radiance from every viewpoint.
pub fn light_direction() -> Vec3 {
    Vec3::new(-1.0, -2.0, 3.0).normalize()
}

/// A mesh together with its acceleration structure.
#[derive(Debug, Clone)]
pub struct Scene {
    pub mesh: TriangleMesh,
    bvh: Bvh,
}

impl Scene {
    pub fn new(mesh: TriangleMesh) -> Self {
        let bvh = Bvh::build(&mesh);
        Self { mesh, bvh }
    }

    pub fn intersect(&self, ray: &crate::geometry::Ray) -> Option<Hit> {
        self.bvh.intersect(ray, &self.mesh)
    }
}

/// Ray-casts one capture: flat surface color under a fixed directional light,
/// Euclidean hit distance as depth, hit flag as mask.
pub fn render_frame(scene: &Scene, cam: &PinholeCamera, pose: &Transform, background: [f32; 3]) -> Result<CaptureFrame> {
    cam.validate()?;
    let width = cam.width as usize;
    let light = light_direction();
    let rows: Vec<Vec<(f32, [f32; 3])>> = (0..cam.height)
        .into_par_iter()
        .map(|row| {
            (0..cam.width)
                .map(|col| {
                    let ray = cam.pixel_ray(pose, col, row);
                    match scene.intersect(&ray) {
                        Some(hit) => {
                            let mut n = scene.mesh.face_normal(hit.triangle as usize);
                            // shade the side facing the camera whatever the winding
                            if n.dot(&ray.direction) > 0.0 {
                                n = -n;
                            }
                            let shade = n.dot(&light).max(AMBIENT) as f32;
                            let c = scene.mesh.color_at(&hit);
                            (hit.distance as f32, [c[0] * shade, c[1] * shade, c[2] * shade])
                        }
                        None => (f32::INFINITY, background),
                    }
                })
                .collect()
        })
        .collect();

    let mut rgb = RgbImage::new(cam.width, cam.height);
    let mut depth = Vec::with_capacity(cam.pixel_count());
    let mut mask = Vec::with_capacity(cam.pixel_count());
    for (row, values) in rows.into_iter().enumerate() {
        for (col, (d, c)) in values.into_iter().enumerate() {
            rgb.set_pixel(row * width + col, c);
            depth.push(d);
            mask.push(d.is_finite());
        }
    }
    Ok(CaptureFrame {
        rgb,
        depth,
        mask,
        pose: *pose,
        cam: *cam,
    })
}

/// Renders one frame per pose, in pose order.
pub fn build_dataset(
    scene: &Scene,
    cam: &PinholeCamera,
    poses: &PoseSet,
    background: [f32; 3],
    mesh_path: &str,
) -> Result<Dataset> {
    if poses.poses.is_empty() {
        return Err(Error::Validation("dataset needs at least one pose".into()));
    }
    let frames = poses
        .poses
        .par_iter()
        .map(|pose| render_frame(scene, cam, pose, background))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        frames,
        background,
        mesh_path: mesh_path.to_string(),
    })
}
