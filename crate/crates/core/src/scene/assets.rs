//! Procedural generators for the two meshes shipped under `assets/`.
//!
//! `icosphere4.obj` is a level-4 unit icosphere painted with a
//! latitude/longitude checkerboard in vertex colors; `robot_arm.obj` is a multi-part
//! articulated arm with per-part vertex colors, used as the object of
//! interest for the benchmark. The files are regenerated with
//! `cargo run -p reconbench-bench -- assets --out crates/core/assets`.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};
use std::path::PathBuf;

use nalgebra::{Rotation3, Vector3};

use crate::geometry::{sample_capture_poses, PinholeCamera, Vec3};
use crate::scene::{build_dataset, load_mesh, Dataset, Scene, TriangleMesh, CHECKER_COLORS};
use crate::Result;

pub const SPHERE_FILE: &str = "icosphere4.obj";
/// Views in the sphere dataset; the last one is held out for evaluation.
pub const SPHERE_VIEWS: usize = 21;
pub const SPHERE_IMAGE_SIZE: u32 = 64;
pub const CAPTURE_RADIUS: f64 = 8.0;
/// Subdivision level of the shipped sphere; faces lie within 1.2e-3 of the unit sphere.
pub const SPHERE_SUBDIVISIONS: u32 = 4;
/// Checker cell size of the shipped sphere, in degrees of latitude and longitude.
pub const SPHERE_CHECKER_DEGREES: f64 = 30.0;
pub const ARM_FILE: &str = "robot_arm.obj";

/// Directory holding the shipped meshes.
pub fn asset_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("assets")
}

pub fn sphere_path() -> PathBuf {
    asset_dir().join(SPHERE_FILE)
}

pub fn arm_path() -> PathBuf {
    asset_dir().join(ARM_FILE)
}

/// Renders the sphere dataset: upper-hemisphere views of the shipped sphere at
/// 64×64 on a black background.
pub fn sphere_dataset() -> Result<Dataset> {
    let path = sphere_path();
    let scene = Scene::new(load_mesh(&path)?);
    let cam = PinholeCamera {
        width: SPHERE_IMAGE_SIZE,
        height: SPHERE_IMAGE_SIZE,
        ..Default::default()
    };
    let poses = sample_capture_poses(SPHERE_VIEWS, CAPTURE_RADIUS, Vec3::zeros(), true)?;
    build_dataset(&scene, &cam, &poses, [0.0; 3], &path.to_string_lossy())
}

/// Unit icosphere: an icosahedron with every face split into four,
/// `subdivisions` times, vertices projected onto the sphere.
pub fn icosphere(subdivisions: u32) -> TriangleMesh {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = [
        (-1.0, phi, 0.0),
        (1.0, phi, 0.0),
        (-1.0, -phi, 0.0),
        (1.0, -phi, 0.0),
        (0.0, -1.0, phi),
        (0.0, 1.0, phi),
        (0.0, -1.0, -phi),
        (0.0, 1.0, -phi),
        (phi, 0.0, -1.0),
        (phi, 0.0, 1.0),
        (-phi, 0.0, -1.0),
        (-phi, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoints: HashMap<(u32, u32), u32> = HashMap::new();
        let mut midpoint = |a: u32, b: u32, vertices: &mut Vec<Vec3>| -> u32 {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                let m = ((vertices[a as usize] + vertices[b as usize]) * 0.5).normalize();
                vertices.push(m);
                vertices.len() as u32 - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    TriangleMesh::new(vertices, faces, None).expect("icosphere is well formed")
}

/// The shipped sphere: a unit icosphere whose vertices take one of the two
/// [`CHECKER_COLORS`] by latitude/longitude cell parity.
pub fn checkered_sphere() -> TriangleMesh {
    let mut mesh = icosphere(SPHERE_SUBDIVISIONS);
    let cell = SPHERE_CHECKER_DEGREES.to_radians();
    let colors = mesh
        .vertices
        .iter()
        .map(|v| {
            let lon = v.y.atan2(v.x);
            let lat = v.z.clamp(-1.0, 1.0).asin();
            let parity = ((lon / cell).floor() + (lat / cell).floor()) as i64;
            CHECKER_COLORS[parity.rem_euclid(2) as usize]
        })
        .collect();
    mesh.colors = Some(colors);
    mesh
}

#[derive(Default)]
struct Builder {
    vertices: Vec<Vec3>,
    colors: Vec<[f32; 3]>,
    triangles: Vec<[u32; 3]>,
}

impl Builder {
    fn push_grid(
        &mut self,
        rows: usize,
        cols: usize,
        wrap: bool,
        color: [f32; 3],
        point: impl Fn(f64, f64) -> Vec3,
    ) {
        let base = self.vertices.len() as u32;
        let ring = if wrap { cols } else { cols + 1 };
        for i in 0..=rows {
            for j in 0..ring {
                self.vertices
                    .push(point(i as f64 / rows as f64, j as f64 / cols as f64));
                self.colors.push(color);
            }
        }
        for i in 0..rows {
            for j in 0..cols {
                let jn = if wrap { (j + 1) % cols } else { j + 1 };
                let a = base + (i * ring + j) as u32;
                let b = base + (i * ring + jn) as u32;
                let c = base + ((i + 1) * ring + jn) as u32;
                let d = base + ((i + 1) * ring + j) as u32;
                self.triangles.push([a, b, c]);
                self.triangles.push([a, c, d]);
            }
        }
    }

    fn cylinder(&mut self, frame: &Frame, radius: f64, length: f64, segments: usize, rings: usize, color: [f32; 3]) {
        self.push_grid(rings, segments, true, color, |s, u| {
            let a = u * TAU;
            frame.apply(Vec3::new(radius * a.cos(), radius * a.sin(), s * length))
        });
        let cap_rings = rings.div_ceil(4).max(2);
        for (z, flip) in [(0.0, true), (length, false)] {
            self.push_grid(cap_rings, segments, true, color, |s, u| {
                let a = if flip { -u * TAU } else { u * TAU };
                let r = radius * (1.0 - s).max(1e-3);
                frame.apply(Vec3::new(r * a.cos(), r * a.sin(), z))
            });
        }
    }

    fn sphere(&mut self, frame: &Frame, radius: f64, segments: usize, rings: usize, color: [f32; 3]) {
        self.push_grid(rings, segments, true, color, |s, u| {
            // keep clear of the poles so no ring collapses to a point
            let polar = PI * (0.002 + 0.996 * s);
            let a = u * TAU;
            frame.apply(Vec3::new(
                radius * polar.sin() * a.cos(),
                radius * polar.sin() * a.sin(),
                radius * polar.cos(),
            ))
        });
    }

    fn cuboid(&mut self, frame: &Frame, half: Vec3, steps: usize, color: [f32; 3]) {
        // (normal axis, sign, u axis, v axis) for each face, wound outward
        let faces = [
            (0, 1.0, 1, 2),
            (0, -1.0, 2, 1),
            (1, 1.0, 2, 0),
            (1, -1.0, 0, 2),
            (2, 1.0, 0, 1),
            (2, -1.0, 1, 0),
        ];
        for (axis, sign, ua, va) in faces {
            self.push_grid(steps, steps, false, color, |s, u| {
                let mut p = Vec3::zeros();
                p[axis] = sign * half[axis];
                p[ua] = (2.0 * u - 1.0) * half[ua];
                p[va] = (2.0 * s - 1.0) * half[va];
                frame.apply(p)
            });
        }
    }

    fn finish(self) -> TriangleMesh {
        let round = |v: f64| (v * 1e6).round() / 1e6;
        let vertices = self.vertices.iter().map(|v| v.map(round)).collect();
        TriangleMesh::new(vertices, self.triangles, Some(self.colors)).expect("arm mesh is well formed")
    }
}

/// Local frame: rotation then translation.
#[derive(Clone, Copy)]
struct Frame {
    rot: Rotation3<f64>,
    origin: Vec3,
}

impl Frame {
    fn at(origin: Vec3) -> Self {
        Self {
            rot: Rotation3::identity(),
            origin,
        }
    }

    /// Frame whose local +Z points along `dir`.
    fn along(origin: Vec3, dir: Vec3) -> Self {
        let rot = Rotation3::rotation_between(&Vector3::z(), &dir).unwrap_or_else(Rotation3::identity);
        Self { rot, origin }
    }

    fn apply(&self, p: Vec3) -> Vec3 {
        self.rot * p + self.origin
    }
}

/// Articulated arm: pedestal, turntable, two links with spherical joints,
/// a wrist and a two-finger gripper. Z is up.
pub fn articulated_arm() -> TriangleMesh {
    let mut b = Builder::default();
    let steel = [0.55, 0.57, 0.62];
    let orange = [0.95, 0.48, 0.08];
    let dark = [0.16, 0.17, 0.2];
    let blue = [0.12, 0.36, 0.82];
    let red = [0.85, 0.12, 0.12];

    let segs = 56;
    b.cylinder(&Frame::at(Vec3::new(0.0, 0.0, 0.0)), 0.8, 0.25, segs, 16, dark);
    b.cylinder(&Frame::at(Vec3::new(0.0, 0.0, 0.25)), 0.6, 0.25, segs, 16, steel);
    b.cylinder(&Frame::at(Vec3::new(0.0, 0.0, 0.5)), 0.36, 0.3, segs, 20, orange);

    let shoulder = Vec3::new(0.0, 0.0, 0.95);
    b.sphere(&Frame::at(shoulder), 0.38, segs, 40, dark);
    let upper_dir = Vec3::new(0.55, 0.2, 0.8).normalize();
    let upper_len = 0.95;
    let upper = Frame::along(shoulder + upper_dir * (upper_len * 0.5), upper_dir);
    b.cuboid(&upper, Vec3::new(0.26, 0.3, upper_len * 0.5), 28, orange);

    let elbow = shoulder + upper_dir * upper_len;
    b.sphere(&Frame::at(elbow), 0.32, segs, 40, dark);
    let fore_dir = Vec3::new(0.75, 0.25, -0.45).normalize();
    let fore_len = 0.85;
    b.cylinder(&Frame::along(elbow, fore_dir), 0.24, fore_len, segs, 40, blue);

    let wrist = elbow + fore_dir * fore_len;
    b.sphere(&Frame::at(wrist), 0.24, segs, 32, steel);
    let hand_dir = Vec3::new(0.35, 0.1, -0.93).normalize();
    b.cylinder(&Frame::along(wrist, hand_dir), 0.2, 0.16, segs, 10, dark);
    let palm_center = wrist + hand_dir * 0.24;
    let palm = Frame::along(palm_center, hand_dir);
    b.cuboid(&palm, Vec3::new(0.26, 0.1, 0.08), 12, steel);

    let side = hand_dir.cross(&Vec3::z()).normalize();
    for sign in [-1.0, 1.0] {
        let finger_center = palm_center + hand_dir * 0.25 + side * (sign * 0.17);
        let finger = Frame::along(finger_center, hand_dir);
        b.cuboid(&finger, Vec3::new(0.05, 0.08, 0.18), 12, red);
    }
    b.finish()
}
