use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::encoding::EncodingConfig;
use super::linalg::{gemm, Operand, Real};
use crate::{Error, Result};

/// Hidden widths of the reference network: six 256-wide layers then a 64-wide bottleneck.
pub const HIDDEN_WIDTHS: [usize; 7] = [256, 256, 256, 256, 256, 256, 64];
/// RGB logits plus a density logit.
pub const OUTPUT_DIM: usize = 4;

/// Dense layer mapping `rows` inputs to `cols` outputs; weights are row-major `rows×cols`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> Layer<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            weights: vec![T::zero(); rows * cols],
            bias: vec![T::zero(); cols],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel<T = f32> {
    pub encoding: EncodingConfig,
    pub layers: Vec<Layer<T>>,
}

/// Gradients share the parameter layout.
pub type Gradients<T> = Vec<Layer<T>>;

/// Activations kept for the backward pass: `inputs[l]` feeds layer `l`.
#[derive(Debug)]
pub struct ForwardCache<T> {
    pub rows: usize,
    pub inputs: Vec<Vec<T>>,
    pub output: Vec<T>,
}

impl<T: Real> MlpModel<T> {
    /// Reference architecture with Xavier-uniform weights and zero biases.
    pub fn new(encoding: EncodingConfig, seed: u64) -> Self {
        Self::with_widths(encoding, &HIDDEN_WIDTHS, seed)
    }

    pub fn with_widths(encoding: EncodingConfig, hidden: &[usize], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dims = vec![encoding.dim()];
        dims.extend_from_slice(hidden);
        dims.push(OUTPUT_DIM);
        let layers = dims
            .windows(2)
            .map(|d| {
                let (rows, cols) = (d[0], d[1]);
                let limit = (6.0 / (rows + cols) as f64).sqrt();
                let mut layer = Layer::zeros(rows, cols);
                for w in &mut layer.weights {
                    *w = T::from_f64(rng.gen_range(-limit..limit));
                }
                layer
            })
            .collect();
        Self { encoding, layers }
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].rows
    }

    pub fn zero_gradients(&self) -> Gradients<T> {
        self.layers.iter().map(|l| Layer::zeros(l.rows, l.cols)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Shape("model has no layers".into()));
        }
        if self.input_dim() != self.encoding.dim() {
            return Err(Error::Shape(format!(
                "first layer takes {} inputs but the encoding yields {}",
                self.input_dim(),
                self.encoding.dim()
            )));
        }
        for (i, pair) in self.layers.windows(2).enumerate() {
            if pair[0].cols != pair[1].rows {
                return Err(Error::Shape(format!(
                    "layer {i} outputs {} values but layer {} takes {}",
                    pair[0].cols,
                    i + 1,
                    pair[1].rows
                )));
            }
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.weights.len() != l.rows * l.cols || l.bias.len() != l.cols {
                return Err(Error::Shape(format!("layer {i} storage does not match {}×{}", l.rows, l.cols)));
            }
        }
        if self.layers.last().unwrap().cols != OUTPUT_DIM {
            return Err(Error::Shape(format!("network must output {OUTPUT_DIM} values")));
        }
        Ok(())
    }

    /// Forward pass over `rows` encoded samples; ReLU on every layer but the last.
    pub fn forward(&self, input: Vec<T>, rows: usize) -> Result<ForwardCache<T>> {
        if input.len() != rows * self.input_dim() {
            return Err(Error::Shape(format!(
                "input has {} values, expected {rows}×{}",
                input.len(),
                self.input_dim()
            )));
        }
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut current = input;
        for (li, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(rows * layer.cols);
            for _ in 0..rows {
                out.extend_from_slice(&layer.bias);
            }
            gemm(
                Operand::plain(&current, rows, layer.rows),
                Operand::plain(&layer.weights, layer.rows, layer.cols),
                T::one(),
                &mut out,
            );
            if out.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { layer: li });
            }
            if li != last {
                for v in &mut out {
                    if *v < T::zero() {
                        *v = T::zero();
                    }
                }
            }
            inputs.push(current);
            current = out;
        }
        Ok(ForwardCache {
            rows,
            inputs,
            output: current,
        })
    }

    /// Adds the parameter gradients for upstream gradient `d_out` (rows×4) into `grads`.
    pub fn backward(&self, cache: &ForwardCache<T>, d_out: &[T], grads: &mut Gradients<T>) {
        let rows = cache.rows;
        assert_eq!(d_out.len(), rows * OUTPUT_DIM);
        let mut dz = d_out.to_vec();
        for li in (0..self.layers.len()).rev() {
            let layer = &self.layers[li];
            let a = &cache.inputs[li];
            let g = &mut grads[li];
            gemm(
                Operand::transposed(a, rows, layer.rows),
                Operand::plain(&dz, rows, layer.cols),
                T::one(),
                &mut g.weights,
            );
            for r in 0..rows {
                for (b, &d) in g.bias.iter_mut().zip(&dz[r * layer.cols..(r + 1) * layer.cols]) {
                    *b = *b + d;
                }
            }
            if li == 0 {
                break;
            }
            let mut da = vec![T::zero(); rows * layer.rows];
            gemm(
                Operand::plain(&dz, rows, layer.cols),
                Operand::transposed(&layer.weights, layer.rows, layer.cols),
                T::zero(),
                &mut da,
            );
            // `a` is the ReLU output of the previous layer, positive exactly where it was active.
            for (d, &v) in da.iter_mut().zip(a) {
                if v <= T::zero() {
                    *d = T::zero();
                }
            }
            dz = da;
        }
    }

    pub fn cast<U: Real>(&self) -> MlpModel<U> {
        MlpModel {
            encoding: self.encoding,
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    rows: l.rows,
                    cols: l.cols,
                    weights: l.weights.iter().map(|v| U::from_f64(v.as_f64())).collect(),
                    bias: l.bias.iter().map(|v| U::from_f64(v.as_f64())).collect(),
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_parameter_count() {
        let m = MlpModel::<f32>::new(EncodingConfig::new(9), 0);
        assert_eq!(m.param_count(), 360_516);
        assert_eq!(m.layers.len(), 8);
        assert_eq!(m.layers[0].rows, 57);
        m.validate().unwrap();
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = MlpModel::<f32>::new(EncodingConfig::new(6), 7);
        let b = MlpModel::<f32>::new(EncodingConfig::new(6), 7);
        let c = MlpModel::<f32>::new(EncodingConfig::new(6), 8);
        assert_eq!(a, b);
        assert_ne!(a, c);
        for l in &a.layers {
            let limit = (6.0 / (l.rows + l.cols) as f32).sqrt();
            assert!(l.weights.iter().all(|w| w.abs() <= limit));
            assert!(l.bias.iter().all(|&b| b == 0.0));
        }
    }

    fn naive_forward(m: &MlpModel<f64>, x: &[f64]) -> Vec<f64> {
        let mut cur = x.to_vec();
        for (li, l) in m.layers.iter().enumerate() {
            let mut out = l.bias.clone();
            for j in 0..l.cols {
                for i in 0..l.rows {
                    out[j] += cur[i] * l.weights[i * l.cols + j];
                }
            }
            if li + 1 < m.layers.len() {
                out.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            cur = out;
        }
        cur
    }

    #[test]
    fn forward_matches_naive_loops() {
        let m = MlpModel::<f64>::with_widths(EncodingConfig::new(2), &[8, 5], 3);
        let rows = 4;
        let x: Vec<f64> = (0..rows * 15).map(|i| ((i * 7919) % 23) as f64 / 11.0 - 1.0).collect();
        let cache = m.forward(x.clone(), rows).unwrap();
        for r in 0..rows {
            let want = naive_forward(&m, &x[r * 15..(r + 1) * 15]);
            for (a, b) in cache.output[r * 4..(r + 1) * 4].iter().zip(&want) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let m = MlpModel::<f64>::with_widths(EncodingConfig::new(1), &[6, 5], 11);
        let rows = 3;
        let x: Vec<f64> = (0..rows * 9).map(|i| ((i * 31) % 17) as f64 / 8.0 - 1.0).collect();
        let up: Vec<f64> = (0..rows * 4).map(|i| (i as f64 * 0.37).sin()).collect();
        let objective = |m: &MlpModel<f64>| -> f64 {
            let c = m.forward(x.clone(), rows).unwrap();
            c.output.iter().zip(&up).map(|(a, b)| a * b).sum()
        };
        let cache = m.forward(x.clone(), rows).unwrap();
        let mut g = m.zero_gradients();
        m.backward(&cache, &up, &mut g);
        let h = 1e-6;
        for li in 0..m.layers.len() {
            for wi in 0..m.layers[li].weights.len() {
                let mut p = m.clone();
                p.layers[li].weights[wi] += h;
                let mut n = m.clone();
                n.layers[li].weights[wi] -= h;
                let fd = (objective(&p) - objective(&n)) / (2.0 * h);
                assert!((fd - g[li].weights[wi]).abs() < 1e-6, "layer {li} w{wi}");
            }
            for bi in 0..m.layers[li].bias.len() {
                let mut p = m.clone();
                p.layers[li].bias[bi] += h;
                let mut n = m.clone();
                n.layers[li].bias[bi] -= h;
                let fd = (objective(&p) - objective(&n)) / (2.0 * h);
                assert!((fd - g[li].bias[bi]).abs() < 1e-6, "layer {li} b{bi}");
            }
        }
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_gradients() {
        let m = MlpModel::<f32>::with_widths(EncodingConfig::new(2), &[8, 8], 5);
        let cache = m.forward(vec![0.3; 2 * 15], 2).unwrap();
        let mut g = m.zero_gradients();
        m.backward(&cache, &[0.0; 8], &mut g);
        assert_eq!(g, m.zero_gradients());
    }

    #[test]
    fn non_finite_input_is_reported() {
        let m = MlpModel::<f32>::with_widths(EncodingConfig::new(0), &[4], 0);
        let err = m.forward(vec![f32::NAN, 0.0, 0.0], 1).unwrap_err();
        assert!(matches!(err, Error::NonFinite { layer: 0 }));
    }
}
