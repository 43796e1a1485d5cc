use rand::Rng;
use serde::{Deserialize, Serialize};

use super::encoding::encode_into;
use super::linalg::Real;
use super::mlp::{ForwardCache, MlpModel, OUTPUT_DIM};
use crate::geometry::{generate_rays, PinholeCamera, Ray, Transform, Vec3};
use crate::image::RgbImage;
use crate::{Error, Result};

/// Network rows evaluated per forward call.
pub const CHUNK_ROWS: usize = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenderConfig {
    pub n_samples: usize,
    pub near: f64,
    pub far: f64,
    /// Jitter samples within their bins; otherwise use bin midpoints.
    pub stratified: bool,
    pub white_background: bool,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            n_samples: 64,
            near: 6.75,
            far: 9.25,
            stratified: true,
            white_background: false,
        }
    }
}

impl RenderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::Validation("n_samples must be positive".into()));
        }
        if !(self.near >= 0.0 && self.far > self.near && self.far.is_finite()) {
            return Err(Error::Validation(format!(
                "need 0 ≤ near < far, got near={} far={}",
                self.near, self.far
            )));
        }
        Ok(())
    }

    pub fn background(&self) -> [f64; 3] {
        if self.white_background {
            [1.0; 3]
        } else {
            [0.0; 3]
        }
    }

    pub fn deterministic(&self) -> Self {
        Self {
            stratified: false,
            ..*self
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RaySamples {
    pub points: Vec<Vec3>,
    pub t: Vec<f64>,
    pub delta: Vec<f64>,
}

/// One sample per equal bin of `[near, far]`; the last interval runs to `far`.
pub fn sample_ray<R: Rng + ?Sized>(ray: &Ray, cfg: &RenderConfig, rng: &mut R) -> RaySamples {
    let n = cfg.n_samples;
    let span = cfg.far - cfg.near;
    let t: Vec<f64> = (0..n)
        .map(|i| {
            let u = if cfg.stratified { rng.gen::<f64>() } else { 0.5 };
            cfg.near + span * (i as f64 + u) / n as f64
        })
        .collect();
    let mut delta: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
    if let Some(&last) = t.last() {
        delta.push(cfg.far - last);
    }
    let points = t.iter().map(|&ti| ray.at(ti)).collect();
    RaySamples { points, t, delta }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Composite<T> {
    pub rgb: [T; 3],
    pub weights: Vec<T>,
    /// Transmittance left after the last sample.
    pub residual: T,
}

fn sigmoid<T: Real>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

fn relu<T: Real>(x: T) -> T {
    if x > T::zero() {
        x
    } else {
        T::zero()
    }
}

/// Alpha-composites raw outputs (`n×4`: RGB logits, density logit) front to back.
pub fn composite<T: Real>(raw: &[T], delta: &[T], background: [T; 3]) -> Composite<T> {
    let n = delta.len();
    assert_eq!(raw.len(), n * OUTPUT_DIM);
    let mut trans = T::one();
    let mut rgb = [T::zero(); 3];
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        let s = &raw[i * OUTPUT_DIM..(i + 1) * OUTPUT_DIM];
        let alpha = -(-relu(s[3]) * delta[i]).exp_m1();
        let w = trans * alpha;
        for c in 0..3 {
            rgb[c] = rgb[c] + w * sigmoid(s[c]);
        }
        weights.push(w);
        trans = trans * (T::one() - alpha);
    }
    for c in 0..3 {
        rgb[c] = rgb[c] + trans * background[c];
    }
    Composite {
        rgb,
        weights,
        residual: trans,
    }
}

/// Gradient of `⟨grad_rgb, composite(raw)⟩` with respect to `raw`, written to `d_raw`.
pub fn composite_backward<T: Real>(
    raw: &[T],
    delta: &[T],
    background: [T; 3],
    grad_rgb: [T; 3],
    d_raw: &mut [T],
) {
    let n = delta.len();
    assert_eq!(raw.len(), n * OUTPUT_DIM);
    assert_eq!(d_raw.len(), n * OUTPUT_DIM);
    // trans[i] is the transmittance reaching sample i; trans[n] is the residual.
    let mut trans = Vec::with_capacity(n + 1);
    let mut alpha = Vec::with_capacity(n);
    trans.push(T::one());
    for i in 0..n {
        let a = -(-relu(raw[i * OUTPUT_DIM + 3]) * delta[i]).exp_m1();
        alpha.push(a);
        trans.push(trans[i] * (T::one() - a));
    }
    // Radiance arriving from behind sample i.
    let mut behind = [T::zero(); 3];
    for c in 0..3 {
        behind[c] = trans[n] * background[c];
    }
    for i in (0..n).rev() {
        let s = &raw[i * OUTPUT_DIM..(i + 1) * OUTPUT_DIM];
        let w = trans[i] * alpha[i];
        let mut d_sigma = T::zero();
        let mut col = [T::zero(); 3];
        for c in 0..3 {
            col[c] = sigmoid(s[c]);
            d_raw[i * OUTPUT_DIM + c] = grad_rgb[c] * w * col[c] * (T::one() - col[c]);
            d_sigma = d_sigma + grad_rgb[c] * (trans[i + 1] * col[c] - behind[c]);
        }
        d_raw[i * OUTPUT_DIM + 3] = if s[3] > T::zero() { d_sigma * delta[i] } else { T::zero() };
        for c in 0..3 {
            behind[c] = behind[c] + w * col[c];
        }
    }
}

/// Samples, encodes and evaluates a batch of rays.
pub(crate) struct RayBatch<T> {
    pub cache: ForwardCache<T>,
    pub deltas: Vec<T>,
    pub n_samples: usize,
}

impl<T: Real> RayBatch<T> {
    pub fn raw(&self, ray: usize) -> &[T] {
        let s = self.n_samples * OUTPUT_DIM;
        &self.cache.output[ray * s..(ray + 1) * s]
    }

    pub fn delta(&self, ray: usize) -> &[T] {
        &self.deltas[ray * self.n_samples..(ray + 1) * self.n_samples]
    }
}

pub(crate) fn evaluate_rays<T: Real, R: Rng + ?Sized>(
    model: &MlpModel<T>,
    rays: &[Ray],
    cfg: &RenderConfig,
    rng: &mut R,
) -> Result<RayBatch<T>> {
    let dim = model.encoding.dim();
    let rows = rays.len() * cfg.n_samples;
    let mut input = vec![T::zero(); rows * dim];
    let mut deltas = Vec::with_capacity(rows);
    let mut row = 0;
    for ray in rays {
        let s = sample_ray(ray, cfg, rng);
        for p in &s.points {
            encode_into(p, &model.encoding, &mut input[row * dim..(row + 1) * dim]);
            row += 1;
        }
        deltas.extend(s.delta.iter().map(|&d| T::from_f64(d)));
    }
    Ok(RayBatch {
        cache: model.forward(input, rows)?,
        deltas,
        n_samples: cfg.n_samples,
    })
}

fn rays_per_chunk(cfg: &RenderConfig) -> usize {
    (CHUNK_ROWS / cfg.n_samples).max(1)
}

/// Renders a full view; samples are drawn from `rng` when stratified.
pub fn render_view<T: Real, R: Rng + ?Sized>(
    model: &MlpModel<T>,
    cam: &PinholeCamera,
    pose: &Transform,
    cfg: &RenderConfig,
    rng: &mut R,
) -> Result<RgbImage> {
    cfg.validate()?;
    model.validate()?;
    let rays = generate_rays(cam, pose);
    let bg = cfg.background().map(T::from_f64);
    let mut data = Vec::with_capacity(rays.len() * 3);
    for chunk in rays.chunks(rays_per_chunk(cfg)) {
        let batch = evaluate_rays(model, chunk, cfg, rng)?;
        for r in 0..chunk.len() {
            let c = composite(batch.raw(r), batch.delta(r), bg);
            data.extend(c.rgb.iter().map(|v| v.as_f64() as f32));
        }
    }
    RgbImage::from_data(cam.width, cam.height, data)
}

pub(crate) fn chunk_rays(cfg: &RenderConfig) -> usize {
    rays_per_chunk(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(n: usize, near: f64, far: f64, stratified: bool) -> RenderConfig {
        RenderConfig {
            n_samples: n,
            near,
            far,
            stratified,
            white_background: false,
        }
    }

    #[test]
    fn midpoint_samples() {
        let ray = Ray::new(Vec3::zeros(), Vec3::new(0.0, 0.0, -1.0));
        let s = sample_ray(&ray, &cfg(2, 0.0, 2.0, false), &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(s.t, vec![0.5, 1.5]);
        assert_eq!(s.delta, vec![1.0, 0.5]);
        assert_eq!(s.points[1], Vec3::new(0.0, 0.0, -1.5));
    }

    #[test]
    fn stratified_samples_stay_in_their_bins() {
        let ray = Ray::new(Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0));
        let c = cfg(16, 2.0, 6.0, true);
        let s = sample_ray(&ray, &c, &mut ChaCha8Rng::seed_from_u64(5));
        for (i, &t) in s.t.iter().enumerate() {
            assert!(t >= 2.0 + 0.25 * i as f64 && t < 2.0 + 0.25 * (i + 1) as f64);
        }
        assert!(s.delta.iter().all(|&d| d > 0.0));
        assert!((s.t.last().unwrap() + s.delta.last().unwrap() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn opaque_first_sample_hides_the_rest() {
        let raw = [10.0f64, -10.0, 0.0, 1e4, -10.0, 10.0, 0.0, 1e4];
        let c = composite(&raw, &[1.0, 1.0], [1.0, 1.0, 1.0]);
        assert!((c.rgb[0] - 1.0).abs() < 1e-4);
        assert!(c.rgb[1] < 1e-4);
        assert!((c.rgb[2] - 0.5).abs() < 1e-12);
        assert_eq!(c.weights[1], 0.0);
        assert_eq!(c.residual, 0.0);
    }

    #[test]
    fn empty_space_shows_background() {
        let raw = [3.0, 3.0, 3.0, -2.0, 1.0, 1.0, 1.0, 0.0];
        let c = composite(&raw, &[0.5, 0.5], [0.2, 0.4, 0.6]);
        assert_eq!(c.rgb, [0.2, 0.4, 0.6]);
        assert_eq!(c.residual, 1.0);
    }

    #[test]
    fn two_unit_density_samples() {
        let (c1, c2) = ([0.9, 0.1, 0.4], [0.2, 0.7, 0.5]);
        let logit = |v: f64| (v / (1.0 - v)).ln();
        let raw: Vec<f64> = [c1, c2]
            .iter()
            .flat_map(|c| [logit(c[0]), logit(c[1]), logit(c[2]), 1.0])
            .collect();
        let c = composite(&raw, &[1.0, 1.0], [0.0; 3]);
        let a = 1.0 - (-1.0f64).exp();
        assert!((c.weights[0] - 0.63212).abs() < 5e-6);
        assert!((c.weights[1] - 0.23254).abs() < 5e-6);
        for k in 0..3 {
            let want = a * c1[k] + (-1.0f64).exp() * a * c2[k];
            assert!((c.rgb[k] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_intervals_leave_the_density_head_unused() {
        let raw = [0.3, -0.2, 0.9, 1.5, -1.0, 0.4, 0.1, 2.0];
        let mut d = [1.0; 8];
        composite_backward(&raw, &[0.0, 0.0], [0.5; 3], [1.0, -1.0, 0.5], &mut d);
        assert_eq!(d, [0.0; 8]);
    }

    #[test]
    fn zero_weight_model_renders_black() {
        use crate::nerf::EncodingConfig;
        let mut model = MlpModel::<f32>::with_widths(EncodingConfig::new(2), &[8], 0);
        for l in &mut model.layers {
            l.weights.iter_mut().for_each(|w| *w = 0.0);
        }
        let cam = PinholeCamera {
            width: 5,
            height: 4,
            ..Default::default()
        };
        let pose = crate::geometry::look_at(Vec3::new(0.0, 0.0, 8.0), Vec3::zeros(), Vec3::y()).unwrap();
        let img = render_view(&model, &cam, &pose, &RenderConfig::default(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(img.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn render_is_bounded_and_reproducible() {
        use crate::nerf::EncodingConfig;
        let model = MlpModel::<f32>::with_widths(EncodingConfig::new(3), &[16, 16], 9);
        let cam = PinholeCamera {
            width: 6,
            height: 6,
            ..Default::default()
        };
        let pose = crate::geometry::look_at(Vec3::new(1.0, 2.0, 7.5), Vec3::zeros(), Vec3::z()).unwrap();
        let cfg = RenderConfig {
            white_background: true,
            ..Default::default()
        };
        let a = render_view(&model, &cam, &pose, &cfg, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let b = render_view(&model, &cam, &pose, &cfg, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(a, b);
        assert!(a.data.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    fn loss(raw: &[f64], delta: &[f64], bg: [f64; 3], g: [f64; 3]) -> f64 {
        let c = composite(raw, delta, bg);
        (0..3).map(|k| c.rgb[k] * g[k]).sum()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn weights_and_residual_sum_to_one(
            raw in prop::collection::vec(-5.0f64..5.0, 4 * 12),
            delta in prop::collection::vec(1e-3f64..2.0, 12),
        ) {
            let c = composite(&raw, &delta, [0.0; 3]);
            let total: f64 = c.weights.iter().sum::<f64>() + c.residual;
            prop_assert!((total - 1.0).abs() < 1e-9);
            prop_assert!(c.weights.iter().all(|&w| (0.0..=1.0).contains(&w)));
        }

        #[test]
        fn raising_density_never_lowers_own_weight(
            raw in prop::collection::vec(-4.0f64..4.0, 4 * 8),
            delta in prop::collection::vec(0.0f64..1.5, 8),
            i in 0usize..8,
            bump in 0.0f64..5.0,
        ) {
            let before = composite(&raw, &delta, [0.0; 3]).weights[i];
            let mut denser = raw.clone();
            denser[4 * i + 3] += bump;
            let after = composite(&denser, &delta, [0.0; 3]).weights[i];
            prop_assert!(after >= before);
        }

        #[test]
        fn composite_gradient_matches_finite_differences(
            raw in prop::collection::vec(-3.0f64..3.0, 4 * 6),
            delta in prop::collection::vec(0.05f64..0.8, 6),
            bg in prop::array::uniform3(0.0f64..1.0),
            g in prop::array::uniform3(-1.0f64..1.0),
        ) {
            let mut d = vec![0.0; raw.len()];
            composite_backward(&raw, &delta, bg, g, &mut d);
            let h = 1e-6;
            for i in 0..raw.len() {
                // skip the ReLU kink
                if i % 4 == 3 && raw[i].abs() < 1e-3 {
                    continue;
                }
                let mut p = raw.clone();
                p[i] += h;
                let mut n = raw.clone();
                n[i] -= h;
                let fd = (loss(&p, &delta, bg, g) - loss(&n, &delta, bg, g)) / (2.0 * h);
                prop_assert!((fd - d[i]).abs() < 1e-6, "i={} fd={} an={}", i, fd, d[i]);
            }
        }
    }
}
