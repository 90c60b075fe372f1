//! JSON pipeline configuration and seed derivation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::nn::TrainConfig;
use crate::sim::{generate_trajectory, DvlConfig, SceneSpec, SonarConfig, TrajectorySpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

/// Grid resolution plus explicit bounds; without bounds the grid covers the
/// trajectory bounding box expanded by the sonar reach.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub cell_size: f64,
    #[serde(default)]
    pub bounds: Option<Bounds>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    F32,
    F64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub seed: u64,
    pub scene: SceneSpec,
    pub trajectory: TrajectorySpec,
    pub sonar: SonarConfig,
    pub dvl: DvlConfig,
    pub grid: GridConfig,
    /// Angle bins per axis of the feature vector.
    pub feature_resolution: usize,
    /// Truncation band τ in meters.
    pub truncation: f64,
    pub classifier: TrainConfig,
    pub regressor: TrainConfig,
    pub threshold: f64,
    #[serde(default = "default_precision")]
    pub precision: Precision,
    #[serde(default)]
    pub sweep_cell_sizes: Vec<f64>,
    pub output_dir: PathBuf,
}

fn default_precision() -> Precision {
    Precision::F32
}

/// Minimum number of in-band samples required to train.
pub const MIN_POSITIVES: usize = 100;

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.truncation > 0.0) || !self.truncation.is_finite() {
            return Err(Error::Config(format!("truncation must be positive, got {}", self.truncation)));
        }
        if self.feature_resolution < 8 {
            return Err(Error::Config(format!(
                "feature resolution must be >= 8, got {}",
                self.feature_resolution
            )));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Config("classifier threshold must lie in (0, 1)".into()));
        }
        if !(self.grid.cell_size > 0.0) || self.sweep_cell_sizes.iter().any(|c| !(*c > 0.0)) {
            return Err(Error::Config("cell sizes must be positive".into()));
        }
        self.sonar.validate()?;
        self.dvl.validate()?;
        self.classifier.validate()?;
        self.regressor.validate()?;
        self.trajectory.path_length()?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON serialization.
    /// Digest of every setting except the output location, so relocated runs compare equal.
    pub fn hash(&self) -> Result<String> {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        Ok(hex::encode(Sha256::digest(serde_json::to_vec(&c)?)))
    }

    /// Grid for the configured resolution.
    pub fn grid_spec(&self) -> Result<GridSpec> {
        self.grid_spec_at(self.grid.cell_size)
    }

    pub fn grid_spec_at(&self, cell_size: f64) -> Result<GridSpec> {
        let bounds = match &self.grid.bounds {
            Some(b) => b.clone(),
            None => self.auto_bounds()?,
        };
        GridSpec::from_bounds(bounds.min, bounds.max, cell_size)
    }

    /// Trajectory bounding box expanded by `r_max` horizontally. Vertically it
    /// reaches as far below the track as the lower edge of the tilted fan does
    /// at `r_max`, and as far above as its upper edge, each plus τ.
    pub fn auto_bounds(&self) -> Result<Bounds> {
        let poses = generate_trajectory(&self.trajectory)?;
        if poses.is_empty() {
            return Err(Error::Config("trajectory has no poses".into()));
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &poses {
            for a in 0..3 {
                lo[a] = lo[a].min(p.pose.translation()[a]);
                hi[a] = hi[a].max(p.pose.translation()[a]);
            }
        }
        let s = &self.sonar;
        let half = 0.5 * s.elevation_fov;
        let down = (s.mount_pitch + half).clamp(0.0, std::f64::consts::FRAC_PI_2).sin() * s.r_max;
        let up = (half - s.mount_pitch).clamp(0.0, std::f64::consts::FRAC_PI_2).sin() * s.r_max;
        Ok(Bounds {
            min: [lo[0] - s.r_max, lo[1] - s.r_max, lo[2] - down - self.truncation],
            max: [hi[0] + s.r_max, hi[1] + s.r_max, hi[2] + up + self.truncation],
        })
    }
}

/// Stage seed: the first eight bytes of SHA-256 over the root seed (LE) and a label.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(label.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}
