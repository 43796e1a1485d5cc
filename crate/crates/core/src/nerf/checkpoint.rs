//! Binary model format: `"TNRF"`, u32 version, u32 L, u8 identity flag, u32 layer
//! count, then per layer u32 rows, u32 cols, row-major f32 weights and f32 biases.
//! All integers and floats are little-endian.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::encoding::EncodingConfig;
use super::linalg::Real;
use super::mlp::{Layer, MlpModel};
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"TNRF";
pub const VERSION: u32 = 1;
pub const PREAMBLE_BYTES: usize = 17;

pub fn checkpoint_size(model: &MlpModel<impl Real>) -> usize {
    PREAMBLE_BYTES + model.layers.len() * 8 + model.param_count() * 4
}

pub fn save_model<T: Real>(model: &MlpModel<T>, path: &Path) -> Result<()> {
    model.validate()?;
    let mut buf = Vec::with_capacity(checkpoint_size(model));
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&model.encoding.n_freqs.to_le_bytes());
    buf.push(model.encoding.include_identity as u8);
    buf.extend_from_slice(&(model.layers.len() as u32).to_le_bytes());
    for l in &model.layers {
        buf.extend_from_slice(&(l.rows as u32).to_le_bytes());
        buf.extend_from_slice(&(l.cols as u32).to_le_bytes());
        for v in l.weights.iter().chain(&l.bias) {
            buf.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
    }
    let file = File::create(path).map_err(Error::io(format!("create {}", path.display())))?;
    let mut w = BufWriter::new(file);
    w.write_all(&buf)
        .and_then(|_| w.flush())
        .map_err(Error::io(format!("write {}", path.display())))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl Cursor<'_> {
    fn err(&self, offset: usize, message: impl Into<String>) -> Error {
        Error::Binary {
            path: self.path.to_path_buf(),
            offset: offset as u64,
            message: message.into(),
        }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&[u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.err(self.pos, format!("truncated while reading {what}")));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize, what: &str) -> Result<Vec<f32>> {
        let at = self.pos;
        let raw = self.take(n * 4, what)?;
        let v: Vec<f32> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if let Some(i) = v.iter().position(|x| !x.is_finite()) {
            return Err(self.err(at + 4 * i, format!("non-finite value in {what}")));
        }
        Ok(v)
    }
}

pub fn load_model(path: &Path) -> Result<MlpModel<f32>> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(Error::io(format!("read {}", path.display())))?;
    let mut cur = Cursor {
        bytes: &bytes,
        pos: 0,
        path,
    };
    if cur.take(4, "magic")? != MAGIC {
        return Err(cur.err(0, "not a TNRF checkpoint"));
    }
    let version = cur.u32("version")?;
    if version != VERSION {
        return Err(cur.err(4, format!("unsupported version {version}")));
    }
    let n_freqs = cur.u32("frequency count")?;
    let flag_at = cur.pos;
    let include_identity = match cur.take(1, "identity flag")?[0] {
        0 => false,
        1 => true,
        b => return Err(cur.err(flag_at, format!("identity flag must be 0 or 1, got {b}"))),
    };
    let encoding = EncodingConfig {
        n_freqs,
        include_identity,
    };
    let count_at = cur.pos;
    let n_layers = cur.u32("layer count")? as usize;
    if n_layers == 0 || n_layers > 64 {
        return Err(cur.err(count_at, format!("implausible layer count {n_layers}")));
    }
    let mut layers = Vec::with_capacity(n_layers);
    let mut expected_rows = encoding.dim();
    for li in 0..n_layers {
        let at = cur.pos;
        let rows = cur.u32("layer rows")? as usize;
        let cols = cur.u32("layer cols")? as usize;
        if rows != expected_rows || cols == 0 || cols > 1 << 16 {
            return Err(cur.err(
                at,
                format!("layer {li} is {rows}×{cols}, expected {expected_rows} rows"),
            ));
        }
        let weights = cur.f32s(rows * cols, "weights")?;
        let bias = cur.f32s(cols, "biases")?;
        layers.push(Layer {
            rows,
            cols,
            weights,
            bias,
        });
        expected_rows = cols;
    }
    if cur.pos != bytes.len() {
        return Err(cur.err(cur.pos, format!("{} trailing bytes", bytes.len() - cur.pos)));
    }
    let model = MlpModel { encoding, layers };
    model
        .validate()
        .map_err(|e| cur.err(count_at, e.to_string()))?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_model_size_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.tnrf");
        let model = MlpModel::<f32>::new(EncodingConfig::new(9), 2057);
        save_model(&model, &path).unwrap();
        let size = std::fs::metadata(&path).unwrap().len() as usize;
        assert_eq!(size, 17 + 8 * 8 + 360_516 * 4);
        assert_eq!(size, checkpoint_size(&model));
        // within 10% of 1.5 MB
        assert!((size as f64 - 1.5e6).abs() <= 0.1 * 1.5e6);
        assert_eq!(load_model(&path).unwrap(), model);
    }

    #[test]
    fn corrupt_files_report_offsets() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.tnrf");
        let model = MlpModel::<f32>::with_widths(EncodingConfig::new(1), &[3], 0);
        save_model(&model, &path).unwrap();
        let good = std::fs::read(&path).unwrap();

        let mut bad = good.clone();
        bad[0] = b'X';
        std::fs::write(&path, &bad).unwrap();
        assert!(matches!(load_model(&path), Err(Error::Binary { offset: 0, .. })));

        std::fs::write(&path, &good[..good.len() - 2]).unwrap();
        assert!(matches!(load_model(&path), Err(Error::Binary { .. })));

        let mut bad = good.clone();
        bad[8] = 2; // L=2 no longer matches the first layer's rows
        std::fs::write(&path, &bad).unwrap();
        match load_model(&path).unwrap_err() {
            Error::Binary { offset, .. } => assert_eq!(offset, 17),
            e => panic!("unexpected {e}"),
        }

        let mut bad = good.clone();
        bad[12] = 7;
        std::fs::write(&path, &bad).unwrap();
        assert!(matches!(load_model(&path), Err(Error::Binary { offset: 12, .. })));
    }
}
