use serde::{Deserialize, Serialize};

use super::linalg::Real;
use crate::geometry::Vec3;

/// Frequency count used by the grid search's best cell.
pub const DEFAULT_FREQS: u32 = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodingConfig {
    /// Number of octaves L; frequencies are 2⁰ … 2^(L−1).
    pub n_freqs: u32,
    pub include_identity: bool,
}

impl Default for EncodingConfig {
    fn default() -> Self {
        Self {
            n_freqs: DEFAULT_FREQS,
            include_identity: true,
        }
    }
}

impl EncodingConfig {
    pub fn new(n_freqs: u32) -> Self {
        Self {
            n_freqs,
            include_identity: true,
        }
    }

    pub fn dim(&self) -> usize {
        6 * self.n_freqs as usize + if self.include_identity { 3 } else { 0 }
    }
}

/// `[p, sin(2⁰p), cos(2⁰p), …, sin(2^(L−1)p), cos(2^(L−1)p)]`, each block componentwise.
pub fn positional_encode(p: &Vec3, cfg: &EncodingConfig) -> Vec<f64> {
    let mut out = vec![0.0; cfg.dim()];
    encode_into(p, cfg, &mut out);
    out
}

pub(crate) fn encode_into<T: Real>(p: &Vec3, cfg: &EncodingConfig, out: &mut [T]) {
    let mut o = 0;
    if cfg.include_identity {
        for axis in 0..3 {
            out[axis] = T::from_f64(p[axis]);
        }
        o = 3;
    }
    let mut freq = 1.0f64;
    for _ in 0..cfg.n_freqs {
        for axis in 0..3 {
            let (s, c) = (freq * p[axis]).sin_cos();
            out[o + axis] = T::from_f64(s);
            out[o + 3 + axis] = T::from_f64(c);
        }
        o += 6;
        freq *= 2.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn origin_with_nine_octaves() {
        let e = positional_encode(&Vec3::zeros(), &EncodingConfig::new(9));
        assert_eq!(e.len(), 57);
        assert_eq!(&e[..3], &[0.0; 3]);
        for block in e[3..].chunks(6) {
            assert_eq!(&block[..3], &[0.0; 3]);
            assert_eq!(&block[3..], &[1.0; 3]);
        }
    }

    #[test]
    fn zero_octaves_is_identity() {
        let p = Vec3::new(0.25, -1.5, 3.0);
        assert_eq!(positional_encode(&p, &EncodingConfig::new(0)), vec![0.25, -1.5, 3.0]);
    }

    #[test]
    fn quarter_turn_single_octave() {
        let e = positional_encode(&Vec3::new(FRAC_PI_2, 0.0, 0.0), &EncodingConfig::new(1));
        assert_eq!(e.len(), 9);
        assert_eq!(&e[..3], &[FRAC_PI_2, 0.0, 0.0]);
        assert_eq!(&e[3..6], &[1.0, 0.0, 0.0]);
        assert!(e[6].abs() < 1e-15);
        assert_eq!(&e[7..], &[1.0, 1.0]);
    }

    #[test]
    fn dimension_formula() {
        for l in [0, 6, 9, 10, 12] {
            let with = EncodingConfig::new(l);
            let without = EncodingConfig {
                n_freqs: l,
                include_identity: false,
            };
            let p = Vec3::new(0.1, 0.2, 0.3);
            assert_eq!(positional_encode(&p, &with).len(), 3 + 6 * l as usize);
            assert_eq!(with.dim(), 3 + 6 * l as usize);
            assert_eq!(positional_encode(&p, &without).len(), 6 * l as usize);
        }
    }
}
