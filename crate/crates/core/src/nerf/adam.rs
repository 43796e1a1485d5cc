use super::linalg::Real;
use super::mlp::{Gradients, MlpModel};

#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    m: Gradients<T>,
    v: Gradients<T>,
}

impl<T: Real> Adam<T> {
    pub fn new(model: &MlpModel<T>, learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: model.zero_gradients(),
            v: model.zero_gradients(),
        }
    }

    pub fn update(&mut self, model: &mut MlpModel<T>, grads: &Gradients<T>) {
        self.step += 1;
        let t = self.step as i32;
        let b1 = T::from_f64(self.beta1);
        let b2 = T::from_f64(self.beta2);
        let one = T::one();
        let c1 = T::from_f64(1.0 - self.beta1.powi(t));
        let c2 = T::from_f64(1.0 - self.beta2.powi(t));
        let lr = T::from_f64(self.learning_rate);
        let eps = T::from_f64(self.epsilon);
        let apply = |p: &mut [T], g: &[T], m: &mut [T], v: &mut [T]| {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (one - b1) * g[i];
                v[i] = b2 * v[i] + (one - b2) * g[i] * g[i];
                let mh = m[i] / c1;
                let vh = v[i] / c2;
                p[i] = p[i] - lr * mh / (vh.sqrt() + eps);
            }
        };
        for (li, layer) in model.layers.iter_mut().enumerate() {
            let (m, v) = (&mut self.m[li], &mut self.v[li]);
            apply(&mut layer.weights, &grads[li].weights, &mut m.weights, &mut v.weights);
            apply(&mut layer.bias, &grads[li].bias, &mut m.bias, &mut v.bias);
        }
    }
}
