//! Spatial acoustic feature grid.
//!
//! Every cell accumulates the sonar intensities observed at its center,
//! binned separately by the angle between the cell-to-sonar ray and each
//! world axis. Intensities are integrated as 8-bit levels into integer sums,
//! which keeps integration exact and independent of frame order.

use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use crate::container::{self, PayloadType};
use crate::error::{Error, Result};
use crate::geometry::{cell_to_sonar, Pose, Vec3};
use crate::grid::GridSpec;
use crate::sim::SonarImage;

/// Default number of viewing-angle bins per axis.
pub const DEFAULT_RESOLUTION: usize = 100;

/// Axis order of the per-cell arrays.
pub const AXES: [usize; 3] = [0, 1, 2];

/// Bin of a folded viewing angle in `[0, π/2]`.
pub fn angle_bin(gamma: f64, n: usize) -> Result<usize> {
    if n == 0 {
        return Err(Error::Domain("angle resolution must be >= 1".into()));
    }
    if !(0.0..=FRAC_PI_2).contains(&gamma) {
        return Err(Error::Domain(format!("angle {gamma} outside [0, π/2]")));
    }
    Ok(angle_bin_unchecked(gamma, n))
}

#[inline]
fn angle_bin_unchecked(gamma: f64, n: usize) -> usize {
    ((gamma / FRAC_PI_2 * n as f64).floor() as usize).min(n - 1)
}

/// One in-FOV observation of a cell: the image level and the bin per axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Observation {
    pub level: u8,
    pub bins: [usize; 3],
}

/// Projects a world point into the image; `None` when outside the sonar's
/// range window or field of view.
pub fn observe(point: &Vec3, image: &SonarImage, pose: &Pose, n: usize) -> Option<Observation> {
    let cfg = image.config();
    let p_l = cell_to_sonar(pose, point);
    let range = p_l.norm();
    if !(range >= cfg.r_min && range <= cfg.r_max) || range == 0.0 {
        return None;
    }
    let azimuth = p_l.y.atan2(p_l.x);
    if azimuth.abs() > 0.5 * cfg.azimuth_fov {
        return None;
    }
    let elevation = p_l.z.atan2(p_l.x.hypot(p_l.y));
    if !cfg.in_elevation(elevation) {
        return None;
    }
    let level = image.lookup_level(range, azimuth)?;
    let r_hat = (pose.translation() - point) / range;
    let mut bins = [0usize; 3];
    for a in AXES {
        bins[a] = angle_bin_unchecked(r_hat[a].abs().min(1.0).acos(), n);
    }
    Some(Observation { level, bins })
}

/// Read-only view of one cell's accumulators, `[axis][bin]` with axes x, y, z.
#[derive(Clone, Copy, Debug)]
pub struct FeatureCell<'a> {
    n: usize,
    level_sums: &'a [u32],
    counts: &'a [u32],
}

impl<'a> FeatureCell<'a> {
    pub fn resolution(&self) -> usize {
        self.n
    }

    /// Intensity sum of `bin` along `axis`.
    pub fn sum(&self, axis: usize, bin: usize) -> f64 {
        self.level_sums[axis * self.n + bin] as f64 / 255.0
    }

    pub fn count(&self, axis: usize, bin: usize) -> u32 {
        self.counts[axis * self.n + bin]
    }

    pub fn level_sums(&self) -> &'a [u32] {
        self.level_sums
    }

    pub fn counts(&self) -> &'a [u32] {
        self.counts
    }

    /// Number of observations integrated (each adds one count per axis).
    pub fn observations(&self) -> u64 {
        self.counts[..self.n].iter().map(|&c| c as u64).sum()
    }

    pub fn is_observed(&self) -> bool {
        self.counts[..self.n].iter().any(|&c| c > 0)
    }
}

/// Network input of one cell: per-bin means ordered `[x_z | x_y | x_x]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    /// Whether each bin was observed at least once.
    pub mask: Vec<bool>,
}

pub fn feature_vector(cell: &FeatureCell<'_>) -> FeatureVector {
    let n = cell.n;
    let mut values = Vec::with_capacity(3 * n);
    let mut mask = Vec::with_capacity(3 * n);
    for axis in [2, 1, 0] {
        for bin in 0..n {
            let c = cell.count(axis, bin);
            if c > 0 {
                values.push(cell.level_sums[axis * n + bin] as f64 / (255.0 * c as f64));
                mask.push(true);
            } else {
                values.push(0.0);
                mask.push(false);
            }
        }
    }
    FeatureVector { values, mask }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureGrid {
    spec: GridSpec,
    n: usize,
    level_sums: Vec<u32>,
    counts: Vec<u32>,
}

impl FeatureGrid {
    pub fn new(spec: GridSpec, n: usize) -> Result<Self> {
        spec.validate()?;
        if n == 0 {
            return Err(Error::Config("feature resolution must be >= 1".into()));
        }
        let len = spec.cell_count() * 3 * n;
        Ok(Self {
            spec,
            n,
            level_sums: vec![0; len],
            counts: vec![0; len],
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn resolution(&self) -> usize {
        self.n
    }

    pub fn cell(&self, idx: usize) -> FeatureCell<'_> {
        let stride = 3 * self.n;
        let r = idx * stride..(idx + 1) * stride;
        FeatureCell {
            n: self.n,
            level_sums: &self.level_sums[r.clone()],
            counts: &self.counts[r],
        }
    }

    pub fn feature_vector(&self, idx: usize) -> FeatureVector {
        feature_vector(&self.cell(idx))
    }

    /// Linear indices of all cells with at least one observation.
    pub fn observed_cells(&self) -> Vec<usize> {
        (0..self.spec.cell_count())
            .filter(|&i| self.cell(i).is_observed())
            .collect()
    }

    /// Adds one sonar frame. Cells outside the frame's field of view are untouched.
    pub fn integrate_frame(&mut self, image: &SonarImage, pose_sonar_in_world: &Pose) {
        let stride = 3 * self.n;
        let n = self.n;
        let Some(bx) = self
            .spec
            .index_box(pose_sonar_in_world.translation(), image.config().r_max)
        else {
            return;
        };
        for k in bx[2][0]..=bx[2][1] {
            for j in bx[1][0]..=bx[1][1] {
                for i in bx[0][0]..=bx[0][1] {
                    let center = self.spec.center(i, j, k);
                    let Some(obs) = observe(&center, image, pose_sonar_in_world, n) else {
                        continue;
                    };
                    let base = self.spec.index(i, j, k) * stride;
                    for a in AXES {
                        let slot = base + a * n + obs.bins[a];
                        self.level_sums[slot] += obs.level as u32;
                        self.counts[slot] += 1;
                    }
                }
            }
        }
    }

    /// Largest per-bin level sum that survives the f32 file encoding exactly.
    const MAX_EXACT_LEVEL_SUM: u32 = 1 << 22;

    /// Writes the grid: GridSpec, `n`, then per cell `3n` f32 intensity sums
    /// followed by `3n` u32 counts (axis order x, y, z).
    pub fn save(&self, path: &Path) -> Result<()> {
        if self.level_sums.iter().any(|&s| s >= Self::MAX_EXACT_LEVEL_SUM) {
            return Err(Error::Format("feature sums exceed the exact f32 range".into()));
        }
        let io = |e| Error::io(path, e);
        let mut w = container::create(path, PayloadType::FeatureGrid)?;
        self.spec.write(&mut w).map_err(io)?;
        w.u32(self.n as u32).map_err(io)?;
        let stride = 3 * self.n;
        for cell in 0..self.spec.cell_count() {
            let r = cell * stride..(cell + 1) * stride;
            for &s in &self.level_sums[r.clone()] {
                w.f32((s as f64 / 255.0) as f32).map_err(io)?;
            }
            for &c in &self.counts[r] {
                w.u32(c).map_err(io)?;
            }
        }
        w.finish().map_err(io)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = container::open(path, PayloadType::FeatureGrid)?;
        let spec = GridSpec::read(&mut r)?;
        let n = r.u32()? as usize;
        let mut grid = Self::new(spec, n).map_err(|e| Error::Format(e.to_string()))?;
        let stride = 3 * n;
        for cell in 0..spec.cell_count() {
            for s in &mut grid.level_sums[cell * stride..(cell + 1) * stride] {
                let v = r.f32()? as f64 * 255.0;
                if !(v >= 0.0) || v.round() >= Self::MAX_EXACT_LEVEL_SUM as f64 {
                    return Err(Error::Format(format!("invalid feature sum {v}")));
                }
                *s = v.round() as u32;
            }
            for c in &mut grid.counts[cell * stride..(cell + 1) * stride] {
                *c = r.u32()?;
            }
        }
        r.expect_end()?;
        Ok(grid)
    }
}
