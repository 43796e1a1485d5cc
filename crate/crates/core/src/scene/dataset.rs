use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geometry::{PinholeCamera, PoseSet, Ray, Transform};
use crate::image::{self, RgbImage};
use crate::{Error, Result};

/// One simulated capture from a single pose.
#[derive(Debug, Clone, PartialEq)]
pub struct CaptureFrame {
    pub rgb: RgbImage,
    /// Euclidean distance from the camera center to the hit, `+∞` on a miss.
    pub depth: Vec<f32>,
    pub mask: Vec<bool>,
    pub pose: Transform,
    pub cam: PinholeCamera,
}

impl CaptureFrame {
    pub fn pixel_ray(&self, index: usize) -> Ray {
        let w = self.cam.width as usize;
        self.cam
            .pixel_ray(&self.pose, (index % w) as u32, (index / w) as u32)
    }

    pub fn mask_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.cam.pixel_count();
        if self.rgb.pixel_count() != n || self.depth.len() != n || self.mask.len() != n {
            return Err(Error::Shape(format!(
                "frame buffers do not match the {}×{} camera",
                self.cam.width, self.cam.height
            )));
        }
        if let Some(i) = (0..n).find(|&i| self.mask[i] != self.depth[i].is_finite()) {
            return Err(Error::Validation(format!(
                "mask and depth disagree at pixel {i}"
            )));
        }
        Ok(())
    }
}

/// Ordered captures of one object, all taken with the same camera.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub frames: Vec<CaptureFrame>,
    pub background: [f32; 3],
    pub mesh_path: String,
}

#[derive(Serialize, Deserialize)]
struct DatasetDoc {
    camera: PinholeCamera,
    background: [f32; 3],
    mesh_path: String,
    poses: PoseSet,
}

fn frame_stem(i: usize) -> String {
    format!("frame_{i:04}")
}

impl Dataset {
    pub fn camera(&self) -> PinholeCamera {
        self.frames.first().map(|f| f.cam).unwrap_or_default()
    }

    pub fn poses(&self) -> PoseSet {
        PoseSet {
            poses: self.frames.iter().map(|f| f.pose).collect(),
        }
    }

    /// Writes `dataset.json` plus per-frame PNG color, PFM depth and PNG mask files.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(Error::io(format!("create {}", dir.display())))?;
        let doc = DatasetDoc {
            camera: self.camera(),
            background: self.background,
            mesh_path: self.mesh_path.clone(),
            poses: self.poses(),
        };
        let json = serde_json::to_string_pretty(&doc)?;
        std::fs::write(dir.join("dataset.json"), json)
            .map_err(Error::io(format!("write {}", dir.join("dataset.json").display())))?;
        for (i, frame) in self.frames.iter().enumerate() {
            let stem = frame_stem(i);
            let (w, h) = (frame.cam.width, frame.cam.height);
            frame.rgb.save_png(&dir.join(format!("{stem}.png")))?;
            image::save_pfm(&dir.join(format!("{stem}.pfm")), w, h, &frame.depth)?;
            image::save_mask_png(&dir.join(format!("{stem}_mask.png")), w, h, &frame.mask)?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let json_path = dir.join("dataset.json");
        let text = std::fs::read_to_string(&json_path)
            .map_err(Error::io(format!("read {}", json_path.display())))?;
        let doc: DatasetDoc = serde_json::from_str(&text)?;
        doc.camera.validate()?;
        let (w, h) = (doc.camera.width, doc.camera.height);
        let mut frames = Vec::with_capacity(doc.poses.count());
        for (i, pose) in doc.poses.poses.iter().enumerate() {
            let stem = frame_stem(i);
            let rgb = RgbImage::load_png(&dir.join(format!("{stem}.png")))?;
            let (dw, dh, depth) = image::load_pfm(&dir.join(format!("{stem}.pfm")))?;
            let (mw, mh, mask) = image::load_mask_png(&dir.join(format!("{stem}_mask.png")))?;
            if (rgb.width, rgb.height) != (w, h) || (dw, dh) != (w, h) || (mw, mh) != (w, h) {
                return Err(Error::Shape(format!(
                    "{stem}: image sizes do not match the {w}×{h} camera"
                )));
            }
            let frame = CaptureFrame {
                rgb,
                depth,
                mask,
                pose: *pose,
                cam: doc.camera,
            };
            frame.validate()?;
            frames.push(frame);
        }
        Ok(Self {
            frames,
            background: doc.background,
            mesh_path: doc.mesh_path,
        })
    }
}
