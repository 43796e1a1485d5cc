use std::fmt::Write as _;
use std::path::Path;

use crate::geometry::{Ray, Vec3};
use crate::{Error, Result};

const MIN_TRIANGLE_AREA: f64 = 1e-12;

/// Colors used for meshes without per-vertex colors, alternating by triangle index.
pub const CHECKER_COLORS: [[f32; 3]; 2] = [[0.92, 0.74, 0.26], [0.18, 0.42, 0.86]];

#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
    /// Optional per-vertex RGB in [0, 1].
    pub colors: Option<Vec<[f32; 3]>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub distance: f64,
    pub triangle: u32,
    /// Weights of the triangle's three vertices; they sum to one.
    pub barycentrics: [f64; 3],
}

impl TriangleMesh {
    pub fn new(
        vertices: Vec<Vec3>,
        triangles: Vec<[u32; 3]>,
        colors: Option<Vec<[f32; 3]>>,
    ) -> Result<Self> {
        if let Some(c) = &colors {
            if c.len() != vertices.len() {
                return Err(Error::Validation(format!(
                    "{} vertex colors for {} vertices",
                    c.len(),
                    vertices.len()
                )));
            }
        }
        if let Some(v) = vertices.iter().find(|v| !v.iter().all(|x| x.is_finite())) {
            return Err(Error::Validation(format!("non-finite vertex {v:?}")));
        }
        let n = vertices.len() as u32;
        if let Some(t) = triangles.iter().find(|t| t.iter().any(|&i| i >= n)) {
            return Err(Error::Validation(format!(
                "triangle {t:?} references a vertex beyond {n}"
            )));
        }
        Ok(Self {
            vertices,
            triangles,
            colors,
        })
    }

    pub fn triangle_vertices(&self, tri: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[tri];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn triangle_area(&self, tri: usize) -> f64 {
        let [a, b, c] = self.triangle_vertices(tri);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    /// Unit face normal following the triangle's winding.
    pub fn face_normal(&self, tri: usize) -> Vec3 {
        let [a, b, c] = self.triangle_vertices(tri);
        (b - a).cross(&(c - a)).normalize()
    }

    pub fn bounding_radius(&self) -> f64 {
        self.vertices.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Surface color at a hit point.
    pub fn color_at(&self, hit: &Hit) -> [f32; 3] {
        match &self.colors {
            Some(colors) => {
                let tri = self.triangles[hit.triangle as usize];
                let mut out = [0.0f32; 3];
                for (corner, &w) in tri.iter().zip(&hit.barycentrics) {
                    let c = colors[*corner as usize];
                    for k in 0..3 {
                        out[k] += w as f32 * c[k];
                    }
                }
                out
            }
            None => CHECKER_COLORS[hit.triangle as usize % 2],
        }
    }

    /// Möller–Trumbore test against one triangle; hits closer than 1e-6 are ignored.
    pub fn intersect_triangle(&self, ray: &Ray, tri: usize) -> Option<Hit> {
        let [a, b, c] = self.triangle_vertices(tri);
        let e1 = b - a;
        let e2 = c - a;
        let pvec = ray.direction.cross(&e2);
        let det = e1.dot(&pvec);
        if det.abs() < 1e-14 * e1.norm() * e2.norm() || det == 0.0 {
            return None;
        }
        let inv_det = 1.0 / det;
        let tvec = ray.origin - a;
        let u = tvec.dot(&pvec) * inv_det;
        if !(0.0..=1.0).contains(&u) {
            return None;
        }
        let qvec = tvec.cross(&e1);
        let v = ray.direction.dot(&qvec) * inv_det;
        if v < 0.0 || u + v > 1.0 {
            return None;
        }
        let t = e2.dot(&qvec) * inv_det;
        if !(t > 1e-6) {
            return None;
        }
        Some(Hit {
            distance: t,
            triangle: tri as u32,
            barycentrics: [1.0 - u - v, u, v],
        })
    }

    /// Drops triangles with area ≤ 1e-12, returning how many were removed.
    pub fn drop_degenerate(&mut self) -> usize {
        let before = self.triangles.len();
        let keep: Vec<[u32; 3]> = (0..before)
            .filter(|&t| self.triangle_area(t) > MIN_TRIANGLE_AREA)
            .map(|t| self.triangles[t])
            .collect();
        self.triangles = keep;
        before - self.triangles.len()
    }

    /// Centers the bounding box on the origin and scales into the unit sphere.
    pub fn normalize(&mut self) {
        if self.vertices.is_empty() {
            return;
        }
        let mut lo = self.vertices[0];
        let mut hi = self.vertices[0];
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        let center = (lo + hi) * 0.5;
        let radius = self
            .vertices
            .iter()
            .map(|v| (v - center).norm())
            .fold(0.0, f64::max);
        let scale = if radius > 0.0 { 1.0 / radius } else { 1.0 };
        for v in &mut self.vertices {
            *v = (*v - center) * scale;
        }
    }

    /// Wavefront OBJ text; vertex colors are written as `v x y z r g b`.
    pub fn to_obj(&self) -> String {
        let mut out = String::with_capacity(self.vertices.len() * 64 + self.triangles.len() * 24);
        for (i, v) in self.vertices.iter().enumerate() {
            match &self.colors {
                Some(c) => {
                    let c = c[i];
                    writeln!(out, "v {} {} {} {} {} {}", v.x, v.y, v.z, c[0], c[1], c[2]).unwrap()
                }
                None => writeln!(out, "v {} {} {}", v.x, v.y, v.z).unwrap(),
            }
        }
        for t in &self.triangles {
            writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1).unwrap();
        }
        out
    }
}

/// Parses Wavefront OBJ geometry. Polygons are fan-triangulated; texture
/// coordinates, normals, groups and materials are ignored.
pub fn parse_obj(text: &str, path: &Path) -> Result<TriangleMesh> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut vertices = Vec::new();
    let mut colors: Vec<[f32; 3]> = Vec::new();
    let mut colored = 0usize;
    let mut triangles = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut parts = line.split_whitespace();
        let Some(tag) = parts.next() else { continue };
        match tag {
            "v" => {
                let values: Vec<f64> = parts
                    .map(|s| s.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| err(line_no, format!("bad vertex coordinate: {e}")))?;
                match values.len() {
                    3 | 4 => colors.push([1.0; 3]),
                    6 | 7 => {
                        colored += 1;
                        colors.push([values[3] as f32, values[4] as f32, values[5] as f32]);
                    }
                    n => return Err(err(line_no, format!("vertex has {n} values"))),
                }
                let v = Vec3::new(values[0], values[1], values[2]);
                if !v.iter().all(|x| x.is_finite()) {
                    return Err(err(line_no, "non-finite vertex coordinate".into()));
                }
                vertices.push(v);
            }
            "f" => {
                let mut corners = Vec::new();
                for token in parts {
                    let first = token.split('/').next().unwrap_or("");
                    let index: i64 = first
                        .parse()
                        .map_err(|_| err(line_no, format!("bad face index {token:?}")))?;
                    let resolved = if index > 0 {
                        index - 1
                    } else if index < 0 {
                        vertices.len() as i64 + index
                    } else {
                        -1
                    };
                    if resolved < 0 || resolved >= vertices.len() as i64 {
                        return Err(err(
                            line_no,
                            format!("face index {index} out of range ({} vertices)", vertices.len()),
                        ));
                    }
                    corners.push(resolved as u32);
                }
                if corners.len() < 3 {
                    return Err(err(line_no, format!("face has {} corners", corners.len())));
                }
                for k in 1..corners.len() - 1 {
                    triangles.push([corners[0], corners[k], corners[k + 1]]);
                }
            }
            "vt" | "vn" | "vp" | "o" | "g" | "s" | "usemtl" | "mtllib" | "l" => {}
            other => log::debug!("{}:{line_no}: ignoring OBJ statement {other:?}", path.display()),
        }
    }
    if colored != 0 && colored != vertices.len() {
        return Err(err(
            text.lines().count(),
            format!("{colored} of {} vertices carry colors", vertices.len()),
        ));
    }
    TriangleMesh::new(vertices, triangles, (colored > 0).then_some(colors))
}

/// Loads an OBJ file, drops degenerate triangles and normalizes into the unit sphere.
pub fn load_mesh(path: &Path) -> Result<TriangleMesh> {
    let text = std::fs::read_to_string(path).map_err(Error::io(format!("read {}", path.display())))?;
    let mut mesh = parse_obj(&text, path)?;
    mesh.normalize();
    let dropped = mesh.drop_degenerate();
    if dropped > 0 {
        log::warn!("{}: dropped {dropped} degenerate triangles", path.display());
    }
    if mesh.triangles.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: text.lines().count(),
            message: "mesh has no usable triangles".into(),
        });
    }
    Ok(mesh)
}
