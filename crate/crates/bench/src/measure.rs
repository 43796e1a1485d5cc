use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use rand::SeedableRng;
use reconbench::metrics::{evaluate, QualityReport};
use reconbench::nerf::{render_view, save_model, split_frames, train, EncodingConfig, RenderConfig, TrainConfig};
use reconbench::pointcloud::{filter_outliers, from_dataset, save_ply, DEFAULT_K, DEFAULT_STD_RATIO};
use reconbench::scene::Dataset;
use reconbench::voxel::{carve_all, default_grid, save_grid, save_grid_dense};
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    Mesh,
    PointCloud,
    Voxel,
    Implicit,
}

impl Representation {
    pub const ALL: [Representation; 4] = [
        Representation::Mesh,
        Representation::PointCloud,
        Representation::Voxel,
        Representation::Implicit,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Representation::Mesh => "mesh",
            Representation::PointCloud => "pointcloud",
            Representation::Voxel => "voxel",
            Representation::Implicit => "implicit",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub name: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub representation: Representation,
    pub build_time_s: f64,
    /// Serialized size in MB (bytes / 1e6).
    pub size_mb: f64,
    /// One byte per voxel, reported next to the bit-packed size.
    pub dense_size_mb: Option<f64>,
    pub steps: Vec<Step>,
    pub quality: Option<QualityReport>,
    pub files: Vec<PathBuf>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub k: usize,
    pub std_ratio: f64,
    pub voxel_resolution: u32,
    pub n_freqs: u32,
    pub include_identity: bool,
    pub train: TrainConfig,
    pub render: RenderConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            std_ratio: DEFAULT_STD_RATIO,
            voxel_resolution: 256,
            n_freqs: 9,
            include_identity: true,
            train: TrainConfig {
                seed: 2057,
                learning_rate: 5e-4,
                n_iters: 300,
                rays_per_batch: 1024,
                eval_every: 100,
                holdout_last: true,
            },
            render: RenderConfig {
                n_samples: 32,
                ..Default::default()
            },
        }
    }
}

struct Timer {
    steps: Vec<Step>,
}

impl Timer {
    fn new() -> Self {
        Self { steps: Vec::new() }
    }

    fn time<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.steps.push(Step {
            name: name.to_string(),
            seconds: start.elapsed().as_secs_f64(),
        });
        out
    }

    /// Build time excludes serialization.
    fn build_seconds(&self) -> f64 {
        self.steps.iter().filter(|s| s.name != "write").map(|s| s.seconds).sum()
    }
}

fn file_mb(path: &Path) -> Result<f64> {
    let bytes = std::fs::metadata(path).map_err(BenchError::io(path))?.len();
    Ok(bytes as f64 / 1e6)
}

fn record(representation: Representation, timer: Timer, files: Vec<PathBuf>) -> Result<BenchRecord> {
    let size_mb = file_mb(&files[0])?;
    let dense_size_mb = files.get(1).map(|p| file_mb(p)).transpose()?;
    Ok(BenchRecord {
        representation,
        build_time_s: timer.build_seconds(),
        size_mb,
        dense_size_mb,
        steps: timer.steps,
        quality: None,
        files,
        error: None,
    })
}

fn build_mesh(mesh_path: &Path, out_dir: &Path) -> Result<BenchRecord> {
    let mut timer = Timer::new();
    let dest = out_dir.join("mesh.obj");
    timer
        .time("copy", || std::fs::copy(mesh_path, &dest))
        .map_err(BenchError::io(mesh_path))?;
    record(Representation::Mesh, timer, vec![dest])
}

fn build_pointcloud(dataset: &Dataset, cfg: &BenchConfig, out_dir: &Path) -> Result<BenchRecord> {
    let mut timer = Timer::new();
    let merged = timer.time("backproject+merge", || from_dataset(dataset));
    let filtered = timer.time("filter", || filter_outliers(&merged, cfg.k, cfg.std_ratio))?;
    info!("point cloud: {} of {} points kept", filtered.len(), merged.len());
    let path = out_dir.join("pointcloud.ply");
    timer.time("write", || save_ply(&filtered, &path))?;
    record(Representation::PointCloud, timer, vec![path])
}

fn build_voxel(dataset: &Dataset, cfg: &BenchConfig, out_dir: &Path) -> Result<BenchRecord> {
    let mut timer = Timer::new();
    let grid = timer.time("init", || default_grid(cfg.voxel_resolution))?;
    let carved = timer.time("carve", || carve_all(&grid, dataset))?;
    info!("voxels: {:.4} of the grid occupied", carved.occupied_fraction());
    let bits = out_dir.join("voxels.vox");
    let dense = out_dir.join("voxels_dense.vox");
    timer.time("write", || save_grid(&carved, &bits).and_then(|_| save_grid_dense(&carved, &dense)))?;
    record(Representation::Voxel, timer, vec![bits, dense])
}

fn build_implicit(dataset: &Dataset, cfg: &BenchConfig, out_dir: &Path) -> Result<BenchRecord> {
    let mut timer = Timer::new();
    let encoding = EncodingConfig {
        n_freqs: cfg.n_freqs,
        include_identity: cfg.include_identity,
    };
    let outcome = timer.time("train", || train(dataset, encoding, &cfg.train, &cfg.render))?;
    let path = out_dir.join("implicit.tnrf");
    timer.time("write", || save_model(&outcome.model, &path))?;
    let mut rec = record(Representation::Implicit, timer, vec![path])?;
    let (_, held_out) = split_frames(dataset, cfg.train.holdout_last)?;
    let render_cfg = cfg.render.deterministic();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    let img = render_view(&outcome.model, &held_out.cam, &held_out.pose, &render_cfg, &mut rng)?;
    rec.quality = evaluate(&img, &held_out.rgb).ok();
    Ok(rec)
}

/// Builds each requested representation from the same captures, writes it to
/// `out_dir` and records build time (excluding serialization) and on-disk size.
/// A failing representation is recorded with its error; the others still run.
pub fn build_and_measure(
    dataset: &Dataset,
    mesh_path: &Path,
    which: &[Representation],
    cfg: &BenchConfig,
    out_dir: &Path,
) -> Result<Vec<BenchRecord>> {
    std::fs::create_dir_all(out_dir).map_err(BenchError::io(out_dir))?;
    let mut records = Vec::new();
    for &rep in which {
        info!("building {}", rep.name());
        let built = match rep {
            Representation::Mesh => build_mesh(mesh_path, out_dir),
            Representation::PointCloud => build_pointcloud(dataset, cfg, out_dir),
            Representation::Voxel => build_voxel(dataset, cfg, out_dir),
            Representation::Implicit => build_implicit(dataset, cfg, out_dir),
        };
        records.push(match built {
            Ok(r) => {
                info!("{}: {:.3} s, {:.4} MB", rep.name(), r.build_time_s, r.size_mb);
                r
            }
            Err(e) => {
                warn!("{} failed: {e}", rep.name());
                BenchRecord {
                    representation: rep,
                    build_time_s: f64::NAN,
                    size_mb: f64::NAN,
                    dense_size_mb: None,
                    steps: Vec::new(),
                    quality: None,
                    files: Vec::new(),
                    error: Some(e.to_string()),
                }
            }
        });
    }
    Ok(records)
}
