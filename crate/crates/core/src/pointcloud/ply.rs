use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::PointCloud;
use crate::{Error, Result};

/// Three float32 coordinates plus three 8-bit color channels.
pub const PLY_BYTES_PER_POINT: usize = 15;

const PROPERTIES: [&str; 6] = [
    "property float x",
    "property float y",
    "property float z",
    "property uchar red",
    "property uchar green",
    "property uchar blue",
];

fn header(count: usize) -> String {
    let mut h = format!("ply\nformat binary_little_endian 1.0\nelement vertex {count}\n");
    for p in PROPERTIES {
        h.push_str(p);
        h.push('\n');
    }
    h.push_str("end_header\n");
    h
}

pub fn save_ply(cloud: &PointCloud, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(Error::io(format!("create {}", path.display())))?;
    let mut w = BufWriter::new(file);
    let mut body = Vec::with_capacity(cloud.len() * PLY_BYTES_PER_POINT);
    for (p, c) in cloud.points.iter().zip(&cloud.colors) {
        for v in p {
            body.extend_from_slice(&v.to_le_bytes());
        }
        for v in c {
            body.push((v.clamp(0.0, 1.0) * 255.0).round() as u8);
        }
    }
    w.write_all(header(cloud.len()).as_bytes())
        .and_then(|_| w.write_all(&body))
        .and_then(|_| w.flush())
        .map_err(Error::io(format!("write {}", path.display())))
}

/// Reads the exact layout written by [`save_ply`].
pub fn load_ply(path: &Path) -> Result<PointCloud> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(Error::io(format!("read {}", path.display())))?;
    let bad = |offset: usize, message: String| Error::Binary {
        path: path.to_path_buf(),
        offset: offset as u64,
        message,
    };

    let mut offset = 0;
    let next_line = |offset: &mut usize| -> Result<(usize, String)> {
        let start = *offset;
        let end = bytes[start..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| bad(start, "unterminated header line".into()))?;
        *offset = start + end + 1;
        let text = std::str::from_utf8(&bytes[start..start + end])
            .map_err(|_| bad(start, "header is not UTF-8".into()))?;
        Ok((start, text.trim_end_matches('\r').to_string()))
    };

    let (at, magic) = next_line(&mut offset)?;
    if magic != "ply" {
        return Err(bad(at, format!("expected 'ply' magic, found {magic:?}")));
    }
    let (at, format) = next_line(&mut offset)?;
    if format != "format binary_little_endian 1.0" {
        return Err(bad(at, format!("unsupported format line {format:?}")));
    }
    let mut count = None;
    let mut props = Vec::new();
    loop {
        let (at, line) = next_line(&mut offset)?;
        if line == "end_header" {
            break;
        }
        if line.starts_with("comment") || line.starts_with("obj_info") {
            continue;
        }
        if let Some(rest) = line.strip_prefix("element vertex ") {
            if count.is_some() {
                return Err(bad(at, "duplicate vertex element".into()));
            }
            count = Some(
                rest.trim()
                    .parse::<usize>()
                    .map_err(|_| bad(at, format!("bad vertex count {rest:?}")))?,
            );
        } else if line.starts_with("property") && count.is_some() {
            props.push((at, line));
        } else {
            return Err(bad(at, format!("unsupported header line {line:?}")));
        }
    }
    let count = count.ok_or_else(|| bad(offset, "missing 'element vertex'".into()))?;
    if props.len() != PROPERTIES.len() || props.iter().zip(PROPERTIES).any(|((_, a), b)| a != b) {
        let at = props.first().map_or(offset, |p| p.0);
        return Err(bad(at, "expected float x,y,z and uchar red,green,blue properties".into()));
    }
    let body = offset;
    let expected = count * PLY_BYTES_PER_POINT;
    if bytes.len() - body != expected {
        return Err(bad(
            bytes.len(),
            format!("body has {} bytes, expected {expected}", bytes.len() - body),
        ));
    }
    let mut cloud = PointCloud {
        points: Vec::with_capacity(count),
        colors: Vec::with_capacity(count),
    };
    for rec in bytes[body..].chunks_exact(PLY_BYTES_PER_POINT) {
        let f = |i: usize| f32::from_le_bytes(rec[i * 4..i * 4 + 4].try_into().unwrap());
        cloud.points.push([f(0), f(1), f(2)]);
        cloud
            .colors
            .push([rec[12] as f32 / 255.0, rec[13] as f32 / 255.0, rec[14] as f32 / 255.0]);
    }
    if let Some(i) = cloud.points.iter().position(|p| p.iter().any(|v| !v.is_finite())) {
        return Err(bad(body + i * PLY_BYTES_PER_POINT, "non-finite coordinate".into()));
    }
    Ok(cloud)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_cloud_is_valid_ply() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.ply");
        save_ply(&PointCloud::default(), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("element vertex 0\n"));
        assert!(load_ply(&path).unwrap().is_empty());
    }

    #[test]
    fn round_trip_and_size() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.ply");
        let cloud = PointCloud::new(
            vec![[0.1, -2.5, 3.0e-7], [1e6, -0.0, 7.25], [f32::MIN_POSITIVE, 1.0, -1.0]],
            vec![[0.0, 1.0, 128.0 / 255.0], [1.0, 0.0, 0.0], [3.0 / 255.0, 0.5, 1.0]],
        )
        .unwrap();
        save_ply(&cloud, &path).unwrap();
        let size = std::fs::metadata(&path).unwrap().len() as usize;
        assert_eq!(size, header(3).len() + 15 * 3);
        let back = load_ply(&path).unwrap();
        assert_eq!(back.points, cloud.points);
        assert_eq!(back.colors[0], cloud.colors[0]);
        assert_eq!(back.colors[2][0], cloud.colors[2][0]);
    }

    #[test]
    fn truncated_body_reports_offset() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.ply");
        let mut bytes = header(2).into_bytes();
        bytes.extend_from_slice(&[0u8; 20]);
        std::fs::write(&path, &bytes).unwrap();
        match load_ply(&path).unwrap_err() {
            Error::Binary { offset, .. } => assert_eq!(offset as usize, bytes.len()),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn ascii_ply_is_rejected_at_format_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.ply");
        std::fs::write(&path, "ply\nformat ascii 1.0\nelement vertex 0\nend_header\n").unwrap();
        match load_ply(&path).unwrap_err() {
            Error::Binary { offset, .. } => assert_eq!(offset, 4),
            e => panic!("unexpected {e}"),
        }
    }
}
