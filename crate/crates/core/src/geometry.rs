//! Rigid poses, pinhole cameras, per-pixel rays and capture-pose sampling.
//!
//! Cameras follow the OpenGL convention: the camera looks down its local −Z
//! axis with +Y up and +X right. Image row 0 is the top of the image.

use nalgebra::{Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type Vec3 = Vector3<f64>;

const ORTHONORMAL_TOL: f64 = 1e-6;

/// Camera-to-world rigid transform `[[R, p], [0, 1]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform {
    pub r: Matrix3<f64>,
    pub p: Vec3,
}

impl Transform {
    pub fn identity() -> Self {
        Self {
            r: Matrix3::identity(),
            p: Vec3::zeros(),
        }
    }

    pub fn as_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.r);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.p);
        m
    }

    /// Splits a 4×4 homogeneous matrix back into rotation and translation.
    pub fn from_matrix(m: &Matrix4<f64>) -> Result<Self> {
        let bottom = [m[(3, 0)], m[(3, 1)], m[(3, 2)], m[(3, 3)]];
        if bottom != [0.0, 0.0, 0.0, 1.0] {
            return Err(Error::Validation(format!(
                "bottom row must be (0,0,0,1), got {bottom:?}"
            )));
        }
        compose_transform(
            m.fixed_view::<3, 3>(0, 0).into_owned(),
            m.fixed_view::<3, 1>(0, 3).into_owned(),
        )
    }

    pub fn row_major(&self) -> [f64; 16] {
        let m = self.as_matrix();
        let mut out = [0.0; 16];
        for row in 0..4 {
            for col in 0..4 {
                out[row * 4 + col] = m[(row, col)];
            }
        }
        out
    }

    pub fn from_row_major(values: &[f64]) -> Result<Self> {
        if values.len() != 16 {
            return Err(Error::Validation(format!(
                "pose needs 16 values, got {}",
                values.len()
            )));
        }
        Self::from_matrix(&Matrix4::from_row_slice(values))
    }

    pub fn transform_point(&self, x: &Vec3) -> Vec3 {
        self.r * x + self.p
    }

    pub fn transform_vector(&self, v: &Vec3) -> Vec3 {
        self.r * v
    }

    /// Maps a world point into this camera's local frame.
    pub fn inverse_transform_point(&self, x: &Vec3) -> Vec3 {
        self.r.transpose() * (x - self.p)
    }

    /// The direction the camera looks along (its local −Z axis) in world space.
    pub fn forward(&self) -> Vec3 {
        -self.r.column(2).into_owned()
    }
}

impl Serialize for Transform {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.row_major().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Transform {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let values = Vec::<f64>::deserialize(d)?;
        Transform::from_row_major(&values).map_err(serde::de::Error::custom)
    }
}

/// Builds `[[r, p], [0, 1]]`, rejecting rotations that are not orthonormal.
pub fn compose_transform(r: Matrix3<f64>, p: Vec3) -> Result<Transform> {
    let defect = (r.transpose() * r - Matrix3::identity()).abs().max();
    if !(defect < ORTHONORMAL_TOL) {
        return Err(Error::Validation(format!(
            "rotation is not orthonormal: ‖RᵀR − I‖∞ = {defect:e} (limit {ORTHONORMAL_TOL:e})"
        )));
    }
    let det = r.determinant();
    if !((det - 1.0).abs() < ORTHONORMAL_TOL) {
        return Err(Error::Validation(format!(
            "rotation is not proper: det(R) = {det} (expected 1 ± {ORTHONORMAL_TOL:e})"
        )));
    }
    if !p.iter().all(|v| v.is_finite()) {
        return Err(Error::Validation(format!("position is not finite: {p:?}")));
    }
    Ok(Transform { r, p })
}

/// Camera-to-world pose at `eye` looking at `target`.
pub fn look_at(eye: Vec3, target: Vec3, up: Vec3) -> Result<Transform> {
    let to_target = target - eye;
    let dist = to_target.norm();
    if !(dist > 0.0) || !dist.is_finite() {
        return Err(Error::Validation(format!(
            "look_at: eye {eye:?} coincides with target"
        )));
    }
    let forward = to_target / dist;
    let side = forward.cross(&up);
    let up_norm = up.norm();
    if !(side.norm() > 1e-9 * up_norm.max(1e-300)) {
        return Err(Error::Validation(format!(
            "look_at: up vector {up:?} is degenerate or parallel to the view direction"
        )));
    }
    let right = side.normalize();
    let true_up = right.cross(&forward);
    let r = Matrix3::from_columns(&[right, true_up, -forward]);
    compose_transform(r, eye)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PinholeCamera {
    /// Vertical field of view in degrees.
    pub fov_y: f64,
    pub width: u32,
    pub height: u32,
    pub near: f64,
    pub far: f64,
}

impl Default for PinholeCamera {
    fn default() -> Self {
        Self {
            fov_y: 17.70,
            width: 100,
            height: 100,
            near: 0.1,
            far: 100.0,
        }
    }
}

impl PinholeCamera {
    pub fn new(fov_y: f64, width: u32, height: u32, near: f64, far: f64) -> Result<Self> {
        let cam = Self {
            fov_y,
            width,
            height,
            near,
            far,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fov_y > 0.0 && self.fov_y < 180.0) {
            return Err(Error::Validation(format!(
                "fov_y must lie in (0, 180) degrees, got {}",
                self.fov_y
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::Validation(format!(
                "image size must be at least 1×1, got {}×{}",
                self.width, self.height
            )));
        }
        if !(self.near > 0.0 && self.near < self.far) {
            return Err(Error::Validation(format!(
                "need 0 < near < far, got near={} far={}",
                self.near, self.far
            )));
        }
        Ok(())
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    fn tan_half_fov_y(&self) -> f64 {
        (self.fov_y.to_radians() * 0.5).tan()
    }

    fn tan_half_fov_x(&self) -> f64 {
        self.tan_half_fov_y() * self.width as f64 / self.height as f64
    }

    /// Unnormalized camera-space direction through the center of pixel (col, row).
    pub fn pixel_direction(&self, col: u32, row: u32) -> Vec3 {
        let x = (2.0 * (col as f64 + 0.5) / self.width as f64 - 1.0) * self.tan_half_fov_x();
        let y = (1.0 - 2.0 * (row as f64 + 0.5) / self.height as f64) * self.tan_half_fov_y();
        Vec3::new(x, y, -1.0)
    }

    /// World-space ray through the center of pixel (col, row).
    pub fn pixel_ray(&self, pose: &Transform, col: u32, row: u32) -> Ray {
        let d = pose.transform_vector(&self.pixel_direction(col, row));
        Ray::new(pose.p, d)
    }

    /// Continuous image coordinates (x right, y down, in pixels) of a world
    /// point, or `None` when the point is not in front of the camera.
    pub fn project(&self, pose: &Transform, x: &Vec3) -> Option<(f64, f64)> {
        let c = pose.inverse_transform_point(x);
        if !(c.z < 0.0) {
            return None;
        }
        let u = c.x / -c.z;
        let v = c.y / -c.z;
        let px = (u / self.tan_half_fov_x() + 1.0) * 0.5 * self.width as f64;
        let py = (1.0 - v / self.tan_half_fov_y()) * 0.5 * self.height as f64;
        Some((px, py))
    }

    /// Pixel (col, row) containing the projection of `x`, if it lands in the image.
    pub fn project_to_pixel(&self, pose: &Transform, x: &Vec3) -> Option<(u32, u32)> {
        let (px, py) = self.project(pose, x)?;
        if px >= 0.0 && py >= 0.0 && px < self.width as f64 && py < self.height as f64 {
            Some((px as u32, py as u32))
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    /// Unit length.
    pub direction: Vec3,
}

impl Ray {
    pub fn new(origin: Vec3, direction: Vec3) -> Self {
        Self {
            origin,
            direction: direction.normalize(),
        }
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

/// One ray per pixel, row-major with row 0 at the top of the image.
pub fn generate_rays(cam: &PinholeCamera, pose: &Transform) -> Vec<Ray> {
    let mut rays = Vec::with_capacity(cam.pixel_count());
    for row in 0..cam.height {
        for col in 0..cam.width {
            rays.push(cam.pixel_ray(pose, col, row));
        }
    }
    rays
}

/// Ordered camera-to-world poses sharing the OpenGL camera convention.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PoseSet {
    pub poses: Vec<Transform>,
}

#[derive(Serialize, Deserialize)]
struct PoseSetDoc {
    convention: String,
    poses: Vec<Transform>,
}

impl PoseSet {
    pub fn count(&self) -> usize {
        self.poses.len()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&PoseSetDoc {
            convention: "opengl".into(),
            poses: self.poses.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: PoseSetDoc = serde_json::from_str(text)?;
        if doc.convention != "opengl" {
            return Err(Error::Validation(format!(
                "unsupported camera convention {:?}",
                doc.convention
            )));
        }
        Ok(Self { poses: doc.poses })
    }
}

impl Serialize for PoseSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PoseSetDoc {
            convention: "opengl".into(),
            poses: self.poses.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PoseSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = PoseSetDoc::deserialize(d)?;
        if doc.convention != "opengl" {
            return Err(serde::de::Error::custom(format!(
                "unsupported camera convention {:?}",
                doc.convention
            )));
        }
        Ok(Self { poses: doc.poses })
    }
}

/// `n` poses on a Fibonacci lattice over the sphere (or its z ≥ 0 half) of
/// the given radius around `target`, each looking at `target`.
///
/// Lattice point i has height z_i = 1 − i/n on the hemisphere and
/// z_i = 1 − 2i/(n−1) on the full sphere, and azimuth i·(golden angle).
/// Point 0 is always the +Z pole. Cameras keep world +Z as their up hint,
/// switching to +Y where the view direction is nearly vertical.
pub fn sample_capture_poses(n: usize, radius: f64, target: Vec3, hemisphere: bool) -> Result<PoseSet> {
    if n == 0 {
        return Err(Error::Validation("pose count must be at least 1".into()));
    }
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::Validation(format!(
            "capture radius must be positive, got {radius}"
        )));
    }
    let golden_angle = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let mut poses = Vec::with_capacity(n);
    for i in 0..n {
        let z = if hemisphere {
            1.0 - i as f64 / n as f64
        } else if n == 1 {
            1.0
        } else {
            1.0 - 2.0 * i as f64 / (n - 1) as f64
        };
        let ring = (1.0 - z * z).max(0.0).sqrt();
        let phi = golden_angle * i as f64;
        let dir = Vec3::new(ring * phi.cos(), ring * phi.sin(), z).normalize();
        let eye = target + dir * radius;
        poses.push(look_at(eye, target, up_hint(&dir))?);
    }
    Ok(PoseSet { poses })
}

fn up_hint(view_from_target: &Vec3) -> Vec3 {
    if view_from_target.z.abs() > 0.999 {
        Vec3::y()
    } else {
        Vec3::z()
    }
}

/// Pose on the axis through `target` along `axis`, at `radius`, looking back at `target`.
pub fn axis_pose(axis: Vec3, radius: f64, target: Vec3) -> Result<Transform> {
    let dir = axis.normalize();
    look_at(target + dir * radius, target, up_hint(&dir))
}
