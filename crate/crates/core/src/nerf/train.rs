use log::{debug, info};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::encoding::EncodingConfig;
use super::linalg::Real;
use super::mlp::{Gradients, MlpModel, OUTPUT_DIM};
use super::render::{chunk_rays, composite, composite_backward, evaluate_rays, render_view, RenderConfig};
use crate::geometry::Ray;
use crate::image::RgbImage;
use crate::metrics::{mse, psnr};
use crate::scene::{CaptureFrame, Dataset};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub seed: u64,
    pub learning_rate: f64,
    pub n_iters: usize,
    /// Rays drawn per iteration from one random training view; 0 uses every pixel.
    pub rays_per_batch: usize,
    pub eval_every: usize,
    /// Keep the last frame out of training and evaluate on it.
    pub holdout_last: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 2057,
            learning_rate: 5e-4,
            n_iters: 5000,
            rays_per_batch: 0,
            eval_every: 100,
            holdout_last: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Validation(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.eval_every == 0 {
            return Err(Error::Validation("eval_every must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub iteration: usize,
    /// MSE of the held-out view.
    pub loss: f64,
    pub psnr: f64,
    /// Photometric loss of the last training batch.
    pub train_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: MlpModel<f32>,
    pub history: Vec<HistoryEntry>,
}

impl TrainOutcome {
    pub fn final_entry(&self) -> Option<&HistoryEntry> {
        self.history.last()
    }
}

/// Splits a dataset into training frames and the evaluation frame.
pub fn split_frames<'a>(dataset: &'a Dataset, holdout_last: bool) -> Result<(&'a [CaptureFrame], &'a CaptureFrame)> {
    match dataset.frames.len() {
        0 => Err(Error::Validation("dataset has no frames".into())),
        1 => Ok((&dataset.frames[..], &dataset.frames[0])),
        n if holdout_last => Ok((&dataset.frames[..n - 1], &dataset.frames[n - 1])),
        _ => Ok((&dataset.frames[..], &dataset.frames[0])),
    }
}

/// Photometric loss: mean over all pixels and channels of the squared difference.
pub fn loss_mse(pred: &RgbImage, target: &RgbImage) -> Result<f64> {
    mse(pred, target)
}

/// Photometric MSE of `rays` against `targets` and its parameter gradient.
///
/// Samples are drawn from `rng`, so reseeding it reproduces the same points.
pub fn loss_and_gradients<T: Real, R: Rng + ?Sized>(
    model: &MlpModel<T>,
    rays: &[Ray],
    targets: &[[f32; 3]],
    cfg: &RenderConfig,
    rng: &mut R,
) -> Result<(f64, Gradients<T>)> {
    assert_eq!(rays.len(), targets.len());
    let mut grads = model.zero_gradients();
    let bg = cfg.background().map(T::from_f64);
    let scale = 2.0 / (3 * rays.len()) as f64;
    let mut sq = 0.0;
    let stride = cfg.n_samples * OUTPUT_DIM;
    for (chunk, tchunk) in rays.chunks(chunk_rays(cfg)).zip(targets.chunks(chunk_rays(cfg))) {
        let batch = evaluate_rays(model, chunk, cfg, rng)?;
        let mut d_raw = vec![T::zero(); chunk.len() * stride];
        for (r, target) in tchunk.iter().enumerate() {
            let c = composite(batch.raw(r), batch.delta(r), bg);
            let mut g = [T::zero(); 3];
            for k in 0..3 {
                let e = c.rgb[k].as_f64() - target[k] as f64;
                sq += e * e;
                g[k] = T::from_f64(scale * e);
            }
            composite_backward(
                batch.raw(r),
                batch.delta(r),
                bg,
                g,
                &mut d_raw[r * stride..(r + 1) * stride],
            );
        }
        model.backward(&batch.cache, &d_raw, &mut grads);
    }
    Ok((sq / (3 * rays.len()) as f64, grads))
}

fn evaluate(model: &MlpModel<f32>, frame: &CaptureFrame, cfg: &RenderConfig) -> Result<(f64, f64)> {
    let img = render_view(model, &frame.cam, &frame.pose, &cfg.deterministic(), &mut ChaCha8Rng::seed_from_u64(0))?;
    let m = mse(&img, &frame.rgb)?;
    Ok((m, psnr(m)?))
}

/// Fits the reference network to a dataset with Adam on photometric MSE.
///
/// `n_iters == 0` returns the initial model and an empty history. A non-finite
/// loss or activation aborts with [`Error::Diverged`].
pub fn train(
    dataset: &Dataset,
    encoding: EncodingConfig,
    cfg: &TrainConfig,
    render: &RenderConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    render.validate()?;
    let (train_frames, eval_frame) = split_frames(dataset, cfg.holdout_last)?;
    let mut model = MlpModel::<f32>::new(encoding, cfg.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut adam = Adam::new(&model, cfg.learning_rate);
    let mut history = Vec::new();
    let diverged = |iteration: usize, reason: String| Error::Diverged {
        iteration,
        learning_rate: cfg.learning_rate,
        n_freqs: encoding.n_freqs,
        reason,
    };
    info!(
        "training L={} lr={} seed={} for {} iterations on {} views",
        encoding.n_freqs,
        cfg.learning_rate,
        cfg.seed,
        cfg.n_iters,
        train_frames.len()
    );

    for it in 0..cfg.n_iters {
        let frame = &train_frames[rng.gen_range(0..train_frames.len())];
        let n_pix = frame.rgb.pixel_count();
        let pixels: Vec<usize> = if cfg.rays_per_batch == 0 || cfg.rays_per_batch >= n_pix {
            (0..n_pix).collect()
        } else {
            (0..cfg.rays_per_batch).map(|_| rng.gen_range(0..n_pix)).collect()
        };
        let rays: Vec<Ray> = pixels.iter().map(|&p| frame.pixel_ray(p)).collect();
        let targets: Vec<[f32; 3]> = pixels.iter().map(|&p| frame.rgb.pixel(p)).collect();
        let (loss, grads) = match loss_and_gradients(&model, &rays, &targets, render, &mut rng) {
            Ok(v) => v,
            Err(Error::NonFinite { layer }) => {
                return Err(diverged(it, format!("non-finite activation in layer {layer}")))
            }
            Err(e) => return Err(e),
        };
        if !loss.is_finite() {
            return Err(diverged(it, format!("loss is {loss}")));
        }
        adam.update(&mut model, &grads);

        let done = it + 1;
        if done % cfg.eval_every == 0 || done == cfg.n_iters {
            let (m, p) = match evaluate(&model, eval_frame, render) {
                Ok(v) => v,
                Err(Error::NonFinite { layer }) => {
                    return Err(diverged(done, format!("non-finite activation in layer {layer}")))
                }
                Err(e) => return Err(e),
            };
            debug!("iter {done}: train {loss:.5} held-out {m:.5} ({p:.2} dB)");
            history.push(HistoryEntry {
                iteration: done,
                loss: m,
                psnr: p,
                train_loss: loss,
            });
        }
    }
    Ok(TrainOutcome { model, history })
}

/// PSNR of the per-channel mean color of the training views against `target`.
pub fn mean_color_baseline(train_frames: &[CaptureFrame], target: &RgbImage) -> Result<f64> {
    let mut sum = [0.0f64; 3];
    let mut n = 0usize;
    for f in train_frames {
        for px in f.rgb.data.chunks_exact(3) {
            for c in 0..3 {
                sum[c] += px[c] as f64;
            }
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::Validation("no training pixels".into()));
    }
    let mean = sum.map(|s| (s / n as f64) as f32);
    let constant = RgbImage::filled(target.width, target.height, mean);
    psnr(mse(&constant, target)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{PinholeCamera, Vec3};
    use crate::nerf::render::RenderConfig;

    fn relative_error(a: f64, n: f64) -> f64 {
        (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
    }

    /// Central differences on every parameter of a tiny network, in f64.
    fn max_gradient_error(seed: u64) -> f64 {
        let enc = EncodingConfig::new(2);
        let model = MlpModel::<f64>::with_widths(enc, &[8, 8, 8], seed);
        let cfg = RenderConfig {
            n_samples: 3,
            near: 1.0,
            far: 3.0,
            stratified: true,
            white_background: seed % 2 == 0,
        };
        let mut r = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        let rays: Vec<Ray> = (0..4)
            .map(|_| {
                Ray::new(
                    Vec3::new(r.gen_range(-0.3..0.3), r.gen_range(-0.3..0.3), 2.0),
                    Vec3::new(r.gen_range(-0.2..0.2), r.gen_range(-0.2..0.2), -1.0),
                )
            })
            .collect();
        let targets: Vec<[f32; 3]> = (0..4).map(|_| [r.gen(), r.gen(), r.gen()]).collect();
        let sample_rng = || ChaCha8Rng::seed_from_u64(seed);
        let loss = |m: &MlpModel<f64>| loss_and_gradients(m, &rays, &targets, &cfg, &mut sample_rng()).unwrap().0;
        let (_, grads) = loss_and_gradients(&model, &rays, &targets, &cfg, &mut sample_rng()).unwrap();
        let h = 1e-5;
        let mut worst = 0.0f64;
        for li in 0..model.layers.len() {
            let n_w = model.layers[li].weights.len();
            for pi in 0..n_w + model.layers[li].bias.len() {
                let bump = |delta: f64| {
                    let mut m = model.clone();
                    if pi < n_w {
                        m.layers[li].weights[pi] += delta;
                    } else {
                        m.layers[li].bias[pi - n_w] += delta;
                    }
                    loss(&m)
                };
                let (up, mid, down) = (bump(h), bump(0.0), bump(-h));
                let numeric = (up - down) / (2.0 * h);
                let analytic = if pi < n_w {
                    grads[li].weights[pi]
                } else {
                    grads[li].bias[pi - n_w]
                };
                let (fwd, bwd) = ((up - mid) / h, (mid - down) / h);
                let e = if relative_error(fwd, bwd) < 1e-2 {
                    if analytic.abs().max(numeric.abs()) < 1e-7 {
                        continue;
                    }
                    relative_error(analytic, numeric)
                } else {
                    // A ReLU switches inside [-h, h]: the analytic value is one of the one-sided slopes.
                    relative_error(analytic, fwd).min(relative_error(analytic, bwd))
                };
                worst = worst.max(e);
            }
        }
        worst
    }

    #[test]
    fn gradients_match_central_differences_across_seeds() {
        for seed in 0..20 {
            let e = max_gradient_error(seed);
            assert!(e < 1e-4, "seed {seed}: max relative error {e}");
        }
    }

    #[test]
    fn loss_mse_examples() {
        let zeros = RgbImage::filled(4, 3, [0.0; 3]);
        let ones = RgbImage::filled(4, 3, [1.0; 3]);
        assert_eq!(loss_mse(&zeros, &zeros).unwrap(), 0.0);
        assert_eq!(loss_mse(&zeros, &ones).unwrap(), 1.0);
        assert!(loss_mse(&zeros, &RgbImage::new(3, 4)).is_err());
    }

    fn tiny_dataset(n_frames: usize) -> Dataset {
        use crate::geometry::look_at;
        let cam = PinholeCamera {
            fov_y: 40.0,
            width: 8,
            height: 8,
            near: 1.0,
            far: 5.0,
        };
        let frames = (0..n_frames)
            .map(|i| {
                let a = i as f64;
                let eye = Vec3::new(3.0 * a.cos(), 3.0 * a.sin(), 0.5);
                let pose = look_at(eye, Vec3::zeros(), Vec3::z()).unwrap();
                let data = (0..64).flat_map(|p| [(p % 8) as f32 / 8.0, 0.5, (i as f32) / 4.0]).collect();
                CaptureFrame {
                    rgb: RgbImage::from_data(8, 8, data).unwrap(),
                    depth: vec![f32::INFINITY; 64],
                    mask: vec![false; 64],
                    pose,
                    cam,
                }
            })
            .collect();
        Dataset {
            frames,
            background: [0.0; 3],
            mesh_path: String::new(),
        }
    }

    fn quick_cfg(n_iters: usize, lr: f64) -> (TrainConfig, RenderConfig) {
        (
            TrainConfig {
                seed: 3,
                learning_rate: lr,
                n_iters,
                rays_per_batch: 16,
                eval_every: 2,
                holdout_last: true,
            },
            RenderConfig {
                n_samples: 4,
                near: 2.0,
                far: 4.0,
                stratified: true,
                white_background: false,
            },
        )
    }

    #[test]
    fn zero_iterations_returns_initial_model() {
        let ds = tiny_dataset(3);
        let (t, r) = quick_cfg(0, 5e-4);
        let out = train(&ds, EncodingConfig::new(2), &t, &r).unwrap();
        assert!(out.history.is_empty());
        assert_eq!(out.model, MlpModel::<f32>::new(EncodingConfig::new(2), 3));
    }

    #[test]
    fn training_is_deterministic_and_records_history() {
        let ds = tiny_dataset(3);
        let (t, r) = quick_cfg(5, 5e-4);
        let a = train(&ds, EncodingConfig::new(2), &t, &r).unwrap();
        let b = train(&ds, EncodingConfig::new(2), &t, &r).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.history, b.history);
        let iters: Vec<usize> = a.history.iter().map(|h| h.iteration).collect();
        assert_eq!(iters, vec![2, 4, 5]);
        for h in &a.history {
            assert!((h.psnr - psnr(h.loss).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_configuration() {
        let ds = tiny_dataset(2);
        let (mut t, r) = quick_cfg(1, 0.0);
        assert!(matches!(train(&ds, EncodingConfig::new(1), &t, &r), Err(Error::Validation(_))));
        t.learning_rate = 1e-3;
        let empty = Dataset {
            frames: vec![],
            ..tiny_dataset(1)
        };
        assert!(train(&empty, EncodingConfig::new(1), &t, &r).is_err());
    }

    #[test]
    fn baseline_of_constant_views_is_infinite() {
        let ds = tiny_dataset(1);
        let mut flat = ds.frames[0].clone();
        flat.rgb = RgbImage::filled(8, 8, [0.25, 0.5, 0.75]);
        let p = mean_color_baseline(std::slice::from_ref(&flat), &flat.rgb).unwrap();
        assert_eq!(p, f64::INFINITY);
    }
}
