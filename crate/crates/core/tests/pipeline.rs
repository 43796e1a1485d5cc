use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use reconbench::nerf::{load_model, render_view, save_model, train, EncodingConfig, RenderConfig, TrainConfig};
use reconbench::pointcloud::{filter_outliers, from_dataset, load_ply, save_ply};
use reconbench::scene::{assets, Dataset};
use reconbench::voxel::{carve_all, default_grid, load_grid, save_grid, save_grid_dense};

#[test]
fn sphere_dataset_survives_disk_and_feeds_every_representation() {
    let dir = tempfile::tempdir().unwrap();
    let ds = assets::sphere_dataset().unwrap();
    ds.save(&dir.path().join("sphere")).unwrap();
    let loaded = Dataset::load(&dir.path().join("sphere")).unwrap();
    assert_eq!(loaded.frames.len(), ds.frames.len());
    for (a, b) in loaded.frames.iter().zip(&ds.frames) {
        assert_eq!(a.mask, b.mask);
        assert_eq!(a.pose, b.pose);
        // 8-bit PNG storage
        for (x, y) in a.rgb.data.iter().zip(&b.rgb.data) {
            assert!((x - y).abs() <= 0.5 / 255.0 + 1e-6);
        }
    }

    let cloud = filter_outliers(&from_dataset(&loaded), 20, 2.0).unwrap();
    let ply = dir.path().join("sphere.ply");
    save_ply(&cloud, &ply).unwrap();
    assert_eq!(load_ply(&ply).unwrap().points, cloud.points);

    let grid = carve_all(&default_grid(32).unwrap(), &loaded).unwrap();
    let (bits, dense) = (dir.path().join("a.vox"), dir.path().join("b.vox"));
    save_grid(&grid, &bits).unwrap();
    save_grid_dense(&grid, &dense).unwrap();
    assert_eq!(load_grid(&bits).unwrap(), grid);
    assert_eq!(load_grid(&dense).unwrap(), grid);
    assert!(std::fs::metadata(&dense).unwrap().len() > std::fs::metadata(&bits).unwrap().len());

    let cfg = TrainConfig {
        n_iters: 3,
        rays_per_batch: 64,
        eval_every: 3,
        ..Default::default()
    };
    let render = RenderConfig {
        n_samples: 8,
        near: 6.75,
        far: 9.25,
        ..Default::default()
    };
    let out = train(&loaded, EncodingConfig::new(4), &cfg, &render).unwrap();
    assert_eq!(out.history.len(), 1);
    let path = dir.path().join("m.tnrf");
    save_model(&out.model, &path).unwrap();
    let back = load_model(&path).unwrap();
    assert_eq!(back, out.model);
    let frame = &loaded.frames[0];
    let view = |m| render_view(m, &frame.cam, &frame.pose, &render.deterministic(), &mut ChaCha8Rng::seed_from_u64(0));
    assert_eq!(view(&back).unwrap(), view(&out.model).unwrap());
}
