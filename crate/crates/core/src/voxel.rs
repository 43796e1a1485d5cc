//! Solid voxel representation built by silhouette carving.
//!
//! A voxel is tested by projecting its eight corners: it is cleared when the
//! bounding rectangle of the projection lies inside the image and touches
//! only background (mask = false) pixels. Voxels reaching outside the image
//! or behind the camera are left alone, since the view holds no evidence
//! that they are empty.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::geometry::{PinholeCamera, Transform, Vec3};
use crate::scene::{CaptureFrame, Dataset};
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"VOXC";
/// Occupancy packed one bit per voxel.
pub const VERSION_BITS: u32 = 1;
/// Occupancy stored one byte (0 or 1) per voxel.
pub const VERSION_DENSE: u32 = 2;
/// magic + version + 3×f64 origin + f64 voxel size + 3×u32 dims.
pub const HEADER_BYTES: usize = 4 + 4 + 24 + 8 + 12;

pub const DEFAULT_RESOLUTION: u32 = 64;
pub const DEFAULT_PADDING: f64 = 0.05;

const BRICK: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Self { min, max }
    }

    /// Cube of half-width `half` centered on the origin.
    pub fn cube(half: f64) -> Self {
        Self::new(Vec3::repeat(-half), Vec3::repeat(half))
    }

    /// Grows every side by `fraction` of the box's extent along that axis.
    pub fn inflated(&self, fraction: f64) -> Self {
        let pad = (self.max - self.min) * fraction * 0.5;
        Self::new(self.min - pad, self.max + pad)
    }

    pub fn of_points<'a>(points: impl IntoIterator<Item = &'a Vec3>) -> Option<Self> {
        let mut it = points.into_iter();
        let first = *it.next()?;
        let mut b = Self::new(first, first);
        for p in it {
            b.min = b.min.inf(p);
            b.max = b.max.sup(p);
        }
        Some(b)
    }
}

/// Axis-aligned occupancy grid. Voxel (x, y, z) has linear index
/// `x + nx·(y + ny·z)` and spans `origin + [x, x+1)·voxel_size` per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    pub origin: Vec3,
    pub voxel_size: f64,
    pub dims: [u32; 3],
    pub occupancy: Vec<bool>,
}

impl VoxelGrid {
    pub fn len(&self) -> usize {
        self.dims.iter().map(|&d| d as usize).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] as usize * (y + self.dims[1] as usize * z)
    }

    pub fn coords(&self, index: usize) -> [usize; 3] {
        let nx = self.dims[0] as usize;
        let ny = self.dims[1] as usize;
        [index % nx, (index / nx) % ny, index / (nx * ny)]
    }

    /// Lattice point `origin + (x, y, z)·voxel_size`; voxel (x, y, z) spans
    /// `corner(x, y, z)` to `corner(x + 1, y + 1, z + 1)`.
    pub fn corner(&self, x: usize, y: usize, z: usize) -> Vec3 {
        self.origin + Vec3::new(x as f64, y as f64, z as f64) * self.voxel_size
    }

    pub fn center(&self, x: usize, y: usize, z: usize) -> Vec3 {
        self.origin + Vec3::new(x as f64 + 0.5, y as f64 + 0.5, z as f64 + 0.5) * self.voxel_size
    }

    pub fn occupied_count(&self) -> usize {
        self.occupancy.iter().filter(|&&o| o).count()
    }

    pub fn occupied_fraction(&self) -> f64 {
        self.occupied_count() as f64 / self.len() as f64
    }

    fn validate(&self) -> Result<()> {
        if !(self.voxel_size > 0.0) || !self.voxel_size.is_finite() {
            return Err(Error::Validation(format!(
                "voxel size must be positive, got {}",
                self.voxel_size
            )));
        }
        if self.dims.contains(&0) {
            return Err(Error::Validation(format!("grid dims must be ≥ 1, got {:?}", self.dims)));
        }
        if self.occupancy.len() != self.len() {
            return Err(Error::Shape(format!(
                "occupancy has {} cells for dims {:?}",
                self.occupancy.len(),
                self.dims
            )));
        }
        Ok(())
    }
}

/// Fully occupied grid covering `bounds`, with `resolution` voxels along its longest side.
pub fn init_grid(bounds: &Aabb, resolution: u32) -> Result<VoxelGrid> {
    let extent = bounds.max - bounds.min;
    if !(extent.min() > 0.0) || !extent.iter().all(|e| e.is_finite()) {
        return Err(Error::Validation(format!(
            "grid bounds need positive extent, got {extent:?}"
        )));
    }
    if resolution == 0 {
        return Err(Error::Validation("grid resolution must be ≥ 1".into()));
    }
    let voxel_size = extent.max() / resolution as f64;
    let mut dims = [0u32; 3];
    for axis in 0..3 {
        let cells = (extent[axis] / voxel_size * (1.0 - 1e-12)).ceil().max(1.0);
        dims[axis] = (cells as u32).min(resolution);
    }
    let n = dims.iter().map(|&d| d as usize).product();
    Ok(VoxelGrid {
        origin: bounds.min,
        voxel_size,
        dims,
        occupancy: vec![true; n],
    })
}

/// Default carving grid for a unit-sphere-normalized mesh.
pub fn default_grid(resolution: u32) -> Result<VoxelGrid> {
    init_grid(&Aabb::cube(1.0).inflated(DEFAULT_PADDING), resolution)
}

/// Pixel rectangle `[c0, c1) × [r0, r1)` touched by the projection of the box
/// `[min, max]`, or `None` when part of the box is behind the camera or
/// projects outside the image. `slack` widens the rectangle by that many pixels.
fn footprint(cam: &PinholeCamera, pose: &Transform, min: &Vec3, max: &Vec3, slack: f64) -> Option<[usize; 4]> {
    let mut lo = (f64::INFINITY, f64::INFINITY);
    let mut hi = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for corner in 0..8 {
        let p = Vec3::new(
            if corner & 1 == 0 { min.x } else { max.x },
            if corner & 2 == 0 { min.y } else { max.y },
            if corner & 4 == 0 { min.z } else { max.z },
        );
        let (px, py) = cam.project(pose, &p)?;
        lo = (lo.0.min(px), lo.1.min(py));
        hi = (hi.0.max(px), hi.1.max(py));
    }
    let (x0, y0, x1, y1) = (lo.0 - slack, lo.1 - slack, hi.0 + slack, hi.1 + slack);
    if !(x0 >= 0.0 && y0 >= 0.0 && x1 < cam.width as f64 && y1 < cam.height as f64) {
        return None;
    }
    Some([x0 as usize, y0 as usize, x1 as usize + 1, y1 as usize + 1])
}

/// Verdict for the box `[min, max]` against one view: kept unless its whole
/// projection lies inside the image and covers only background pixels.
pub fn keeps_box(cam: &PinholeCamera, pose: &Transform, mask: &[bool], min: &Vec3, max: &Vec3) -> bool {
    let width = cam.width as usize;
    match footprint(cam, pose, min, max, 0.0) {
        Some([c0, r0, c1, r1]) => (r0..r1).any(|r| mask[r * width + c0..r * width + c1].iter().any(|&m| m)),
        None => true,
    }
}

/// Inclusive-exclusive prefix sums of the mask for O(1) rectangle counts.
struct MaskTable {
    width: usize,
    sums: Vec<u32>,
}

impl MaskTable {
    fn new(width: usize, height: usize, mask: &[bool]) -> Self {
        let stride = width + 1;
        let mut sums = vec![0u32; stride * (height + 1)];
        for row in 0..height {
            let mut run = 0;
            for col in 0..width {
                run += mask[row * width + col] as u32;
                sums[(row + 1) * stride + col + 1] = sums[row * stride + col + 1] + run;
            }
        }
        Self { width, sums }
    }

    /// True pixels in columns [c0, c1) × rows [r0, r1).
    fn count(&self, c0: usize, r0: usize, c1: usize, r1: usize) -> u32 {
        let s = self.width + 1;
        self.sums[r1 * s + c1] + self.sums[r0 * s + c0] - self.sums[r0 * s + c1] - self.sums[r1 * s + c0]
    }
}

enum BrickVerdict {
    KeepAll,
    ClearAll,
    PerVoxel,
}

fn classify_brick(
    grid: &VoxelGrid,
    frame: &CaptureFrame,
    table: &MaskTable,
    lo: [usize; 3],
    hi: [usize; 3],
) -> BrickVerdict {
    let min = grid.corner(lo[0], lo[1], lo[2]);
    let max = grid.corner(hi[0], hi[1], hi[2]);
    // slack absorbs rounding between brick and voxel corner projections
    let Some([c0, r0, c1, r1]) = footprint(&frame.cam, &frame.pose, &min, &max, 1e-6) else {
        return BrickVerdict::PerVoxel;
    };
    let inside = table.count(c0, r0, c1, r1);
    if inside == 0 {
        BrickVerdict::ClearAll
    } else if inside as usize == (c1 - c0) * (r1 - r0) {
        BrickVerdict::KeepAll
    } else {
        BrickVerdict::PerVoxel
    }
}

/// Clears occupied voxels whose projection lies inside the image on background pixels only.
///
/// Work is organized in 8³ bricks: a brick whose projected footprint is
/// entirely foreground or entirely background is decided at once, others
/// voxel by voxel. The result equals the plain per-voxel test.
pub fn carve(grid: &VoxelGrid, frame: &CaptureFrame) -> Result<VoxelGrid> {
    grid.validate()?;
    frame.validate()?;
    let mut out = grid.clone();
    carve_in_place(&mut out, frame);
    Ok(out)
}

fn carve_in_place(grid: &mut VoxelGrid, frame: &CaptureFrame) {
    let [nx, ny, nz] = grid.dims.map(|d| d as usize);
    let table = MaskTable::new(frame.cam.width as usize, frame.cam.height as usize, &frame.mask);
    let slab = nx * ny * BRICK;
    let geometry = VoxelGrid {
        occupancy: Vec::new(),
        ..*grid
    };
    let shared = &geometry;
    grid.occupancy
        .par_chunks_mut(slab)
        .enumerate()
        .for_each(|(slab_index, cells)| {
            let z0 = slab_index * BRICK;
            let z1 = (z0 + BRICK).min(nz);
            for y0 in (0..ny).step_by(BRICK) {
                let y1 = (y0 + BRICK).min(ny);
                for x0 in (0..nx).step_by(BRICK) {
                    let x1 = (x0 + BRICK).min(nx);
                    let local = |x: usize, y: usize, z: usize| x + nx * (y + ny * (z - z0));
                    let any = (z0..z1).any(|z| (y0..y1).any(|y| (x0..x1).any(|x| cells[local(x, y, z)])));
                    if !any {
                        continue;
                    }
                    match classify_brick(shared, frame, &table, [x0, y0, z0], [x1, y1, z1]) {
                        BrickVerdict::KeepAll => {}
                        BrickVerdict::ClearAll => {
                            for z in z0..z1 {
                                for y in y0..y1 {
                                    for x in x0..x1 {
                                        cells[local(x, y, z)] = false;
                                    }
                                }
                            }
                        }
                        BrickVerdict::PerVoxel => {
                            for z in z0..z1 {
                                for y in y0..y1 {
                                    for x in x0..x1 {
                                        let cell = &mut cells[local(x, y, z)];
                                        if *cell {
                                            let (min, max) = (shared.corner(x, y, z), shared.corner(x + 1, y + 1, z + 1));
                                            *cell = match footprint(&frame.cam, &frame.pose, &min, &max, 0.0) {
                                                Some([c0, r0, c1, r1]) => table.count(c0, r0, c1, r1) > 0,
                                                None => true,
                                            };
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        });
}

/// Carves by every frame in turn. Carving is an intersection, so the result
/// does not depend on frame order.
pub fn carve_all(grid: &VoxelGrid, dataset: &Dataset) -> Result<VoxelGrid> {
    if dataset.frames.is_empty() {
        return Err(Error::Validation("carving needs at least one frame".into()));
    }
    grid.validate()?;
    let mut out = grid.clone();
    for frame in &dataset.frames {
        frame.validate()?;
        carve_in_place(&mut out, frame);
    }
    Ok(out)
}

fn write_grid(grid: &VoxelGrid, path: &Path, version: u32) -> Result<()> {
    grid.validate()?;
    let mut bytes = Vec::with_capacity(HEADER_BYTES + grid.len());
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&version.to_le_bytes());
    for v in grid.origin.iter() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    bytes.extend_from_slice(&grid.voxel_size.to_le_bytes());
    for d in grid.dims {
        bytes.extend_from_slice(&d.to_le_bytes());
    }
    if version == VERSION_BITS {
        let mut packed = vec![0u8; grid.len().div_ceil(8)];
        for (i, &o) in grid.occupancy.iter().enumerate() {
            packed[i / 8] |= (o as u8) << (i % 8);
        }
        bytes.extend_from_slice(&packed);
    } else {
        bytes.extend(grid.occupancy.iter().map(|&o| o as u8));
    }
    let file = File::create(path).map_err(Error::io(format!("create {}", path.display())))?;
    let mut w = BufWriter::new(file);
    w.write_all(&bytes)
        .and_then(|_| w.flush())
        .map_err(Error::io(format!("write {}", path.display())))
}

/// Bit-packed grid file: `VOXC`, u32 version 1, origin, voxel size, dims,
/// then occupancy bits LSB-first; little-endian throughout.
pub fn save_grid(grid: &VoxelGrid, path: &Path) -> Result<()> {
    write_grid(grid, path, VERSION_BITS)
}

/// Same header with version 2 and one byte per voxel.
pub fn save_grid_dense(grid: &VoxelGrid, path: &Path) -> Result<()> {
    write_grid(grid, path, VERSION_DENSE)
}

pub fn load_grid(path: &Path) -> Result<VoxelGrid> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(Error::io(format!("read {}", path.display())))?;
    let bad = |offset: usize, message: String| Error::Binary {
        path: path.to_path_buf(),
        offset: offset as u64,
        message,
    };
    if bytes.len() < HEADER_BYTES {
        return Err(bad(bytes.len(), format!("file shorter than the {HEADER_BYTES}-byte header")));
    }
    if &bytes[0..4] != MAGIC {
        return Err(bad(0, "bad magic, expected VOXC".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u32_at(4);
    if version != VERSION_BITS && version != VERSION_DENSE {
        return Err(bad(4, format!("unsupported version {version}")));
    }
    let origin = Vec3::new(f64_at(8), f64_at(16), f64_at(24));
    let voxel_size = f64_at(32);
    let dims = [u32_at(40), u32_at(44), u32_at(48)];
    let n: usize = dims.iter().map(|&d| d as usize).product();
    let body = &bytes[HEADER_BYTES..];
    let expected = if version == VERSION_BITS { n.div_ceil(8) } else { n };
    if body.len() != expected {
        return Err(bad(
            bytes.len(),
            format!("occupancy has {} bytes, expected {expected}", body.len()),
        ));
    }
    let occupancy = if version == VERSION_BITS {
        (0..n).map(|i| body[i / 8] >> (i % 8) & 1 == 1).collect()
    } else {
        body.iter().map(|&b| b != 0).collect()
    };
    let grid = VoxelGrid {
        origin,
        voxel_size,
        dims,
        occupancy,
    };
    grid.validate().map_err(|e| bad(8, e.to_string()))?;
    Ok(grid)
}
