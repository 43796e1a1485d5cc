use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;
use rand::SeedableRng;
use reconbench::geometry::{sample_capture_poses, PinholeCamera, Vec3};
use reconbench::nerf::{
    load_model, render_view, save_model, train, EncodingConfig, RenderConfig, TrainConfig,
};
use reconbench::pointcloud::{filter_outliers, from_dataset, save_ply};
use reconbench::scene::{assets, build_dataset, load_mesh, Dataset, Scene};
use reconbench::voxel::{carve_all, default_grid, save_grid, save_grid_dense};
use serde::Serialize;
use serde_json::json;

use crate::error::{BenchError, Result};
use crate::grid::{run_grid, GridCellResult, GridSettings, GridSpec};
use crate::measure::{build_and_measure, BenchConfig, BenchRecord, Representation};
use crate::report::emit_report;

pub const GRID_JSON: &str = "grid.json";
pub const BENCH_JSON: &str = "bench.json";

#[derive(Debug, Parser)]
#[command(name = "reconbench", version, about = "Compare mesh, point cloud, voxel and neural reconstructions")]
pub struct Cli {
    /// Base directory for every relative path.
    #[arg(long, global = true, default_value = ".")]
    pub workdir: PathBuf,
    /// Worker threads.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render RGB, depth and mask captures of a mesh.
    Dataset(DatasetArgs),
    /// Back-project, merge and filter a point cloud.
    Pointcloud(PointcloudArgs),
    /// Carve an occupancy grid from silhouettes.
    Voxelize(VoxelizeArgs),
    /// Fit the neural field to a dataset.
    Train(TrainArgs),
    /// Render a trained model from a dataset pose.
    Render(RenderArgs),
    /// Run the seed × learning rate × frequency search.
    Grid(GridArgs),
    /// Build every representation and measure time and size.
    Bench(BenchArgs),
    /// Re-emit CSV and Markdown tables from saved results.
    Report(ReportArgs),
    /// Regenerate the shipped meshes.
    Assets(AssetsArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct DatasetArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    #[arg(long, default_value_t = 106)]
    pub poses: usize,
    #[arg(long, default_value_t = 8.0)]
    pub radius: f64,
    /// Image size as WIDTHxHEIGHT.
    #[arg(long, default_value = "100x100")]
    pub size: String,
    /// Vertical field of view in degrees.
    #[arg(long, default_value_t = 17.70)]
    pub fov: f64,
    /// Restrict cameras to the upper hemisphere.
    #[arg(long)]
    pub hemisphere: bool,
    /// Background color as R,G,B in [0,1].
    #[arg(long, default_value = "0,0,0")]
    pub background: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct PointcloudArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value_t = reconbench::pointcloud::DEFAULT_K)]
    pub k: usize,
    #[arg(long, default_value_t = reconbench::pointcloud::DEFAULT_STD_RATIO)]
    pub std_ratio: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct VoxelizeArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value_t = reconbench::voxel::DEFAULT_RESOLUTION)]
    pub resolution: u32,
    /// Write one byte per voxel instead of packed bits.
    #[arg(long)]
    pub dense: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize, Clone)]
pub struct ModelArgs {
    /// Samples per ray.
    #[arg(long, default_value_t = 64)]
    pub samples: usize,
    /// Near bound; defaults to the capture radius minus 1.25.
    #[arg(long)]
    pub near: Option<f64>,
    /// Far bound; defaults to the capture radius plus 1.25.
    #[arg(long)]
    pub far: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value_t = 2057)]
    pub seed: u64,
    #[arg(long, default_value_t = 5e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = reconbench::nerf::DEFAULT_FREQS)]
    pub freqs: u32,
    #[arg(long, default_value_t = 5000)]
    pub iters: usize,
    /// Rays per iteration; 0 uses the whole image.
    #[arg(long, default_value_t = 0)]
    pub rays: usize,
    #[arg(long, default_value_t = 100)]
    pub eval_every: usize,
    /// Drop the raw coordinates from the encoding.
    #[arg(long)]
    pub no_identity: bool,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct RenderArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Dataset providing the camera and poses.
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub pose_index: usize,
    #[arg(long, default_value_t = 64)]
    pub samples: usize,
    #[arg(long)]
    pub near: Option<f64>,
    #[arg(long)]
    pub far: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct GridArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// JSON with "seeds", "lrs" and "freqs"; defaults to the 36-cell search.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    pub iters: usize,
    #[arg(long, default_value_t = 0)]
    pub rays: usize,
    #[arg(long, default_value_t = 16)]
    pub samples: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct BenchArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub mesh: PathBuf,
    #[arg(long, default_value_t = 256)]
    pub resolution: u32,
    #[arg(long, default_value_t = 300)]
    pub iters: usize,
    #[arg(long, default_value_t = 1024)]
    pub rays: usize,
    #[arg(long, default_value_t = 32)]
    pub samples: usize,
    #[arg(long, default_value_t = reconbench::nerf::DEFAULT_FREQS)]
    pub freqs: u32,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    /// Directory holding grid.json and/or bench.json.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct AssetsArgs {
    #[arg(long)]
    pub out: PathBuf,
}

struct Context {
    workdir: PathBuf,
    threads: usize,
}

impl Context {
    fn path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.workdir.join(p)
        }
    }
}

fn sidecar_for_file(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".config.json");
    out.with_file_name(name)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(BenchError::io(parent))?;
    }
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(BenchError::io(path))
}

fn parse_size(s: &str) -> Result<(u32, u32)> {
    let bad = || BenchError::Validation(format!("--size must look like 100x100, got {s:?}"));
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((w.trim().parse().map_err(|_| bad())?, h.trim().parse().map_err(|_| bad())?))
}

fn parse_color(s: &str) -> Result<[f32; 3]> {
    let bad = || BenchError::Validation(format!("--background must be R,G,B in [0,1], got {s:?}"));
    let parts: Vec<f32> = s
        .split(',')
        .map(|p| p.trim().parse::<f32>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    match parts[..] {
        [r, g, b] if parts.iter().all(|v| (0.0..=1.0).contains(v)) => Ok([r, g, b]),
        _ => Err(bad()),
    }
}

fn load_dataset(ctx: &Context, dir: &Path) -> Result<Dataset> {
    let dir = ctx.path(dir);
    if !dir.join("dataset.json").is_file() {
        return Err(BenchError::Validation(format!(
            "--dataset {} does not contain dataset.json",
            dir.display()
        )));
    }
    Ok(Dataset::load(&dir)?)
}

/// Capture radius estimated as the mean camera distance from the origin.
fn capture_radius(dataset: &Dataset) -> f64 {
    let n = dataset.frames.len().max(1) as f64;
    dataset.frames.iter().map(|f| f.pose.p.norm()).sum::<f64>() / n
}

fn render_config(dataset: &Dataset, samples: usize, near: Option<f64>, far: Option<f64>) -> Result<RenderConfig> {
    let white_background = match dataset.background {
        [0.0, 0.0, 0.0] => false,
        [1.0, 1.0, 1.0] => true,
        other => {
            return Err(BenchError::Validation(format!(
                "the neural renderer composites over black or white, dataset background is {other:?}"
            )))
        }
    };
    let radius = capture_radius(dataset);
    let cfg = RenderConfig {
        n_samples: samples,
        near: near.unwrap_or((radius - 1.25).max(0.0)),
        far: far.unwrap_or(radius + 1.25),
        stratified: true,
        white_background,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_dataset(ctx: &Context, a: &DatasetArgs) -> Result<()> {
    let (width, height) = parse_size(&a.size)?;
    let background = parse_color(&a.background)?;
    let cam = PinholeCamera::new(a.fov, width, height, 0.1, 100.0)?;
    if !(a.radius > 1.0) {
        return Err(BenchError::Validation("--radius must exceed the unit object radius".into()));
    }
    let poses = sample_capture_poses(a.poses, a.radius, Vec3::zeros(), a.hemisphere)?;
    let mesh_path = ctx.path(&a.mesh);
    let mesh = load_mesh(&mesh_path)?;
    let scene = Scene::new(mesh);
    let dataset = build_dataset(&scene, &cam, &poses, background, &mesh_path.to_string_lossy())?;
    let out = ctx.path(&a.out);
    dataset.save(&out)?;
    write_json(&out.join("config.json"), &json!({ "command": "dataset", "args": a, "camera": cam }))?;
    info!("wrote {} frames to {}", dataset.frames.len(), out.display());
    Ok(())
}

fn cmd_pointcloud(ctx: &Context, a: &PointcloudArgs) -> Result<()> {
    let dataset = load_dataset(ctx, &a.dataset)?;
    let merged = from_dataset(&dataset);
    let cloud = filter_outliers(&merged, a.k, a.std_ratio)?;
    let out = ctx.path(&a.out);
    save_ply(&cloud, &out)?;
    write_json(
        &sidecar_for_file(&out),
        &json!({ "command": "pointcloud", "args": a, "points_before": merged.len(), "points": cloud.len() }),
    )
}

fn cmd_voxelize(ctx: &Context, a: &VoxelizeArgs) -> Result<()> {
    let dataset = load_dataset(ctx, &a.dataset)?;
    let grid = carve_all(&default_grid(a.resolution)?, &dataset)?;
    let out = ctx.path(&a.out);
    if a.dense {
        save_grid_dense(&grid, &out)?;
    } else {
        save_grid(&grid, &out)?;
    }
    write_json(
        &sidecar_for_file(&out),
        &json!({ "command": "voxelize", "args": a, "occupied_fraction": grid.occupied_fraction() }),
    )
}

fn cmd_train(ctx: &Context, a: &TrainArgs) -> Result<()> {
    let dataset = load_dataset(ctx, &a.dataset)?;
    let render = render_config(&dataset, a.model.samples, a.model.near, a.model.far)?;
    let encoding = EncodingConfig {
        n_freqs: a.freqs,
        include_identity: !a.no_identity,
    };
    let cfg = TrainConfig {
        seed: a.seed,
        learning_rate: a.lr,
        n_iters: a.iters,
        rays_per_batch: a.rays,
        eval_every: a.eval_every,
        holdout_last: true,
    };
    let out = ctx.path(&a.out);
    let sidecar = json!({
        "command": "train", "args": a, "encoding": encoding, "train": cfg, "render": render,
    });
    write_json(&sidecar_for_file(&out), &sidecar)?;
    let outcome = train(&dataset, encoding, &cfg, &render)?;
    save_model(&outcome.model, &out)?;
    let mut history = out.clone().into_os_string();
    history.push(".history.json");
    write_json(Path::new(&history), &outcome.history)?;
    if let Some(h) = outcome.final_entry() {
        info!("held-out loss {:.4}, {:.4} dB", h.loss, h.psnr);
    }
    Ok(())
}

fn cmd_render(ctx: &Context, a: &RenderArgs) -> Result<()> {
    let dataset = load_dataset(ctx, &a.dataset)?;
    let model_path = ctx.path(&a.model);
    let model = load_model(&model_path)?;
    let frame = dataset.frames.get(a.pose_index).ok_or_else(|| {
        BenchError::Validation(format!(
            "--pose-index {} out of range, dataset has {} poses",
            a.pose_index,
            dataset.frames.len()
        ))
    })?;
    let render = render_config(&dataset, a.samples, a.near, a.far)?.deterministic();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    let img = render_view(&model, &frame.cam, &frame.pose, &render, &mut rng)?;
    let out = ctx.path(&a.out);
    img.save_png(&out)?;
    let quality = reconbench::metrics::evaluate(&img, &frame.rgb).ok();
    write_json(
        &sidecar_for_file(&out),
        &json!({ "command": "render", "args": a, "render": render, "quality": quality }),
    )
}

fn cmd_grid(ctx: &Context, a: &GridArgs) -> Result<()> {
    let dataset = load_dataset(ctx, &a.dataset)?;
    let spec = match &a.spec {
        Some(p) => GridSpec::load(&ctx.path(p))?,
        None => GridSpec::default(),
    };
    if a.iters == 0 {
        return Err(BenchError::Validation("--iters must be positive for a grid run".into()));
    }
    let settings = GridSettings {
        train: TrainConfig {
            n_iters: a.iters,
            rays_per_batch: a.rays,
            eval_every: a.iters,
            ..Default::default()
        },
        render: render_config(&dataset, a.samples, None, None)?,
        include_identity: true,
        threads: ctx.threads,
    };
    let out = ctx.path(&a.out);
    write_json(
        &out.join("config.json"),
        &json!({ "command": "grid", "args": a, "spec": spec, "settings": settings }),
    )?;
    let results = run_grid(&dataset, &spec, &settings)?;
    write_json(&out.join(GRID_JSON), &results)?;
    emit_report(&results, &[], &out)?;
    Ok(())
}

fn cmd_bench(ctx: &Context, a: &BenchArgs) -> Result<()> {
    let dataset = load_dataset(ctx, &a.dataset)?;
    let defaults = BenchConfig::default();
    let cfg = BenchConfig {
        voxel_resolution: a.resolution,
        n_freqs: a.freqs,
        train: TrainConfig {
            n_iters: a.iters,
            rays_per_batch: a.rays,
            eval_every: a.iters.max(1),
            ..defaults.train.clone()
        },
        render: render_config(&dataset, a.samples, None, None)?,
        ..defaults
    };
    let out = ctx.path(&a.out);
    write_json(
        &out.join("config.json"),
        &json!({ "command": "bench", "args": a, "config": cfg, "threads": ctx.threads }),
    )?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(ctx.threads.max(1)).build()?;
    let records = pool.install(|| build_and_measure(&dataset, &ctx.path(&a.mesh), &Representation::ALL, &cfg, &out))?;
    write_json(&out.join(BENCH_JSON), &records)?;
    emit_report(&[], &records, &out)?;
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Option<T>> {
    if !path.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(path).map_err(BenchError::io(path))?;
    Ok(Some(serde_json::from_str(&text)?))
}

fn cmd_report(ctx: &Context, a: &ReportArgs) -> Result<()> {
    let input = ctx.path(&a.input);
    let results: Option<Vec<GridCellResult>> = read_json(&input.join(GRID_JSON))?;
    let records: Option<Vec<BenchRecord>> = read_json(&input.join(BENCH_JSON))?;
    if results.is_none() && records.is_none() {
        return Err(BenchError::Validation(format!(
            "--in {} holds neither {GRID_JSON} nor {BENCH_JSON}",
            input.display()
        )));
    }
    let out = ctx.path(&a.out);
    emit_report(&results.unwrap_or_default(), &records.unwrap_or_default(), &out)?;
    write_json(&out.join("config.json"), &json!({ "command": "report", "args": a }))
}

fn cmd_assets(ctx: &Context, a: &AssetsArgs) -> Result<()> {
    let out = ctx.path(&a.out);
    std::fs::create_dir_all(&out).map_err(BenchError::io(&out))?;
    for (name, mesh) in [
        (assets::SPHERE_FILE, assets::checkered_sphere()),
        (assets::ARM_FILE, assets::articulated_arm()),
    ] {
        let path = out.join(name);
        std::fs::write(&path, mesh.to_obj()).map_err(BenchError::io(&path))?;
    }
    write_json(&out.join("assets.config.json"), &json!({ "command": "assets", "args": a }))
}

pub fn execute(cli: &Cli) -> Result<()> {
    if cli.threads == 0 {
        return Err(BenchError::Validation("--threads must be at least 1".into()));
    }
    let ctx = Context {
        workdir: cli.workdir.clone(),
        threads: cli.threads,
    };
    match &cli.command {
        Command::Dataset(a) => cmd_dataset(&ctx, a),
        Command::Pointcloud(a) => cmd_pointcloud(&ctx, a),
        Command::Voxelize(a) => cmd_voxelize(&ctx, a),
        Command::Train(a) => cmd_train(&ctx, a),
        Command::Render(a) => cmd_render(&ctx, a),
        Command::Grid(a) => cmd_grid(&ctx, a),
        Command::Bench(a) => cmd_bench(&ctx, a),
        Command::Report(a) => cmd_report(&ctx, a),
        Command::Assets(a) => cmd_assets(&ctx, a),
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).parse_default_env().try_init();
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
