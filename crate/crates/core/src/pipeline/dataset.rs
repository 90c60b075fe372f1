//! On-disk simulated survey: sonar frame files plus a JSON index.
//!
//! ```text
//! dataset/
//!   index.json           poses, DVL ranges and frame file names
//!   manifest.json        seed, config hash, counts, content hash
//!   frames/NNNNNN.sapg   one sonar frame each
//! ```
//!
//! Frame body: `index u64, timestamp f64, n_range_bins u32, n_beams u32`,
//! then the raw `u8` levels in `(range_bin, beam)` row-major order.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::container::{self, PayloadType};
use crate::error::{Error, Result};
use crate::geometry::{Pose, Vec3};
use crate::sim::{DvlConfig, SonarConfig, SonarImage};

pub fn write_frame(path: &Path, index: usize, image: &SonarImage) -> Result<()> {
    let io = |e| Error::io(path, e);
    let cfg = image.config();
    let mut w = container::create(path, PayloadType::SonarFrame)?;
    w.u64(index as u64).map_err(io)?;
    w.f64(image.timestamp).map_err(io)?;
    w.u32(cfg.n_range_bins as u32).map_err(io)?;
    w.u32(cfg.n_beams as u32).map_err(io)?;
    w.bytes(image.levels()).map_err(io)?;
    w.finish().map_err(io)?;
    Ok(())
}

/// Reads a frame written for a sonar with configuration `cfg`.
pub fn read_frame(path: &Path, cfg: &SonarConfig) -> Result<(usize, SonarImage)> {
    let mut r = container::open(path, PayloadType::SonarFrame)?;
    let index = r.u64()? as usize;
    let timestamp = r.f64()?;
    let rows = r.u32()? as usize;
    let cols = r.u32()? as usize;
    if rows != cfg.n_range_bins || cols != cfg.n_beams {
        return Err(Error::Format(format!(
            "frame {} is {rows}x{cols}, sonar config expects {}x{}",
            path.display(),
            cfg.n_range_bins,
            cfg.n_beams
        )));
    }
    let levels = r.bytes(rows * cols)?;
    r.expect_end()?;
    Ok((index, SonarImage::from_levels(levels, cfg.clone(), timestamp)?))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub index: usize,
    pub time: f64,
    /// Relative to the dataset directory.
    pub file: String,
    /// Vehicle body to world.
    pub pose: Pose,
    pub dvl_ranges: [Option<f64>; 4],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetIndex {
    pub frames: Vec<FrameRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub seed: u64,
    pub config_hash: String,
    pub pose_count: usize,
    pub frame_count: usize,
    pub duration: f64,
    /// SHA-256 over the index and all frame files, in frame order.
    pub content_hash: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Eval,
    All,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Eval => "eval",
            Split::All => "all",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "eval" => Ok(Split::Eval),
            "all" => Ok(Split::All),
            _ => Err(Error::Config(format!("unknown split {s:?} (train, eval, all)"))),
        }
    }
}

impl DatasetIndex {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("index.json");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Frames sorted by timestamp; train is the first half, eval the rest.
    pub fn split(&self, split: Split) -> Vec<&FrameRecord> {
        let mut frames: Vec<&FrameRecord> = self.frames.iter().collect();
        frames.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.index.cmp(&b.index)));
        let half = frames.len() / 2;
        match split {
            Split::Train => frames.truncate(half),
            Split::Eval => {
                frames.drain(..half);
            }
            Split::All => {}
        }
        frames
    }
}

impl FrameRecord {
    pub fn path(&self, dir: &Path) -> PathBuf {
        dir.join(&self.file)
    }

    /// World-frame origin and unit direction of each DVL beam with a return.
    pub fn dvl_beams(&self, dvl: &DvlConfig) -> Vec<(Vec3, Vec3, f64)> {
        let origin = *self.pose.translation();
        (0..4)
            .filter_map(|k| self.dvl_ranges[k].map(|r| (origin, self.pose.transform_vector(&dvl.beam(k)), r)))
            .collect()
    }

    /// Beam endpoints `origin + range · direction`.
    pub fn dvl_endpoints(&self, dvl: &DvlConfig) -> Vec<Vec3> {
        self.dvl_beams(dvl).into_iter().map(|(o, d, r)| o + d * r).collect()
    }
}
