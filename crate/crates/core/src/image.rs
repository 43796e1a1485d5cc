//! Float RGB images plus the PNG and PFM codecs used by capture datasets.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::{Error, Result};

/// Row-major interleaved RGB image, row 0 at the top, values nominally in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<f32>,
}

impl RgbImage {
    pub fn new(width: u32, height: u32) -> Self {
        Self::filled(width, height, [0.0; 3])
    }

    pub fn filled(width: u32, height: u32, rgb: [f32; 3]) -> Self {
        let n = width as usize * height as usize;
        let mut data = Vec::with_capacity(n * 3);
        for _ in 0..n {
            data.extend_from_slice(&rgb);
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn from_data(width: u32, height: u32, data: Vec<f32>) -> Result<Self> {
        let expected = width as usize * height as usize * 3;
        if data.len() != expected {
            return Err(Error::Shape(format!(
                "{}×{} RGB image needs {expected} values, got {}",
                width,
                height,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn same_shape(&self, other: &RgbImage) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn pixel(&self, index: usize) -> [f32; 3] {
        let o = index * 3;
        [self.data[o], self.data[o + 1], self.data[o + 2]]
    }

    pub fn set_pixel(&mut self, index: usize, rgb: [f32; 3]) {
        self.data[index * 3..index * 3 + 3].copy_from_slice(&rgb);
    }

    /// Rec. 601 luma, one value per pixel.
    pub fn luma(&self) -> Vec<f64> {
        self.data
            .chunks_exact(3)
            .map(|c| 0.299 * c[0] as f64 + 0.587 * c[1] as f64 + 0.114 * c[2] as f64)
            .collect()
    }

    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.data.chunks_exact(3).map(|p| p[c] as f64).collect()
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let bytes: Vec<u8> = self.data.iter().map(|&v| quantize(v)).collect();
        write_png(path, self.width, self.height, png::ColorType::Rgb, &bytes)
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        let (width, height, bytes) = read_png(path, png::ColorType::Rgb)?;
        Ok(Self {
            width,
            height,
            data: bytes.iter().map(|&b| b as f32 / 255.0).collect(),
        })
    }
}

fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub(crate) fn write_png(
    path: &Path,
    width: u32,
    height: u32,
    color: png::ColorType,
    bytes: &[u8],
) -> Result<()> {
    let file = File::create(path).map_err(Error::io(format!("create {}", path.display())))?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), width, height);
    encoder.set_color(color);
    encoder.set_depth(png::BitDepth::Eight);
    encoder.set_compression(png::Compression::Default);
    encoder.set_filter(png::FilterType::NoFilter);
    encoder.set_adaptive_filter(png::AdaptiveFilterType::NonAdaptive);
    let mut writer = encoder
        .write_header()
        .map_err(|e| Error::Png(format!("{}: {e}", path.display())))?;
    writer
        .write_image_data(bytes)
        .map_err(|e| Error::Png(format!("{}: {e}", path.display())))?;
    writer
        .finish()
        .map_err(|e| Error::Png(format!("{}: {e}", path.display())))
}

pub(crate) fn read_png(path: &Path, expect: png::ColorType) -> Result<(u32, u32, Vec<u8>)> {
    let file = File::open(path).map_err(Error::io(format!("open {}", path.display())))?;
    let decoder = png::Decoder::new(file);
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::Png(format!("{}: {e}", path.display())))?;
    let mut buf = vec![0; reader.output_buffer_size()];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::Png(format!("{}: {e}", path.display())))?;
    if info.color_type != expect || info.bit_depth != png::BitDepth::Eight {
        return Err(Error::Png(format!(
            "{}: expected 8-bit {:?}, found {:?} {:?}",
            path.display(),
            expect,
            info.bit_depth,
            info.color_type
        )));
    }
    buf.truncate(info.buffer_size());
    Ok((info.width, info.height, buf))
}

/// Writes a boolean mask as an 8-bit gray PNG (0 / 255).
pub fn save_mask_png(path: &Path, width: u32, height: u32, mask: &[bool]) -> Result<()> {
    let bytes: Vec<u8> = mask.iter().map(|&m| if m { 255 } else { 0 }).collect();
    write_png(path, width, height, png::ColorType::Grayscale, &bytes)
}

pub fn load_mask_png(path: &Path) -> Result<(u32, u32, Vec<bool>)> {
    let (w, h, bytes) = read_png(path, png::ColorType::Grayscale)?;
    Ok((w, h, bytes.iter().map(|&b| b >= 128).collect()))
}

/// Writes a single-channel little-endian Portable Float Map.
///
/// Values are given row-major with row 0 at the top; PFM stores rows bottom
/// to top, so the order is flipped on disk.
pub fn save_pfm(path: &Path, width: u32, height: u32, values: &[f32]) -> Result<()> {
    let mut out = Vec::with_capacity(values.len() * 4 + 32);
    out.extend_from_slice(format!("Pf\n{width} {height}\n-1.0\n").as_bytes());
    for row in (0..height as usize).rev() {
        let start = row * width as usize;
        for v in &values[start..start + width as usize] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut file = File::create(path).map_err(Error::io(format!("create {}", path.display())))?;
    file.write_all(&out)
        .map_err(Error::io(format!("write {}", path.display())))
}

pub fn load_pfm(path: &Path) -> Result<(u32, u32, Vec<f32>)> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(Error::io(format!("read {}", path.display())))?;
    let bad = |offset: usize, message: &str| Error::Binary {
        path: path.to_path_buf(),
        offset: offset as u64,
        message: message.to_string(),
    };
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad(pos, "truncated PFM header"));
        }
        fields.push((start, std::str::from_utf8(&bytes[start..pos]).unwrap_or("")));
    }
    // exactly one whitespace byte separates the scale from the raster
    pos += 1;
    if fields[0].1 != "Pf" {
        return Err(bad(fields[0].0, "expected single-channel 'Pf' magic"));
    }
    let width: u32 = fields[1].1.parse().map_err(|_| bad(fields[1].0, "bad width"))?;
    let height: u32 = fields[2].1.parse().map_err(|_| bad(fields[2].0, "bad height"))?;
    let scale: f32 = fields[3].1.parse().map_err(|_| bad(fields[3].0, "bad scale"))?;
    let n = width as usize * height as usize;
    if bytes.len() < pos + n * 4 {
        return Err(bad(bytes.len(), "raster shorter than header dimensions"));
    }
    let mut values = vec![0.0f32; n];
    for (disk_row, row) in (0..height as usize).rev().enumerate() {
        for col in 0..width as usize {
            let o = pos + (disk_row * width as usize + col) * 4;
            let raw: [u8; 4] = bytes[o..o + 4].try_into().unwrap();
            values[row * width as usize + col] = if scale < 0.0 {
                f32::from_le_bytes(raw)
            } else {
                f32::from_be_bytes(raw)
            };
        }
    }
    Ok((width, height, values))
}
