//! Dense truncated signed distance grid.
//!
//! Each cell keeps the sum of its clamped distance observations and their
//! total weight, so fusion with unit weights is a running average whose
//! result does not depend on update order.

use std::path::Path;

use crate::container::{self, PayloadType};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::grid::GridSpec;

#[derive(Clone, Debug, PartialEq)]
pub struct TsdfGrid {
    spec: GridSpec,
    truncation: f64,
    sums: Vec<f64>,
    weights: Vec<f64>,
    gradients: Vec<Option<Vec3>>,
}

impl TsdfGrid {
    pub fn new(spec: GridSpec, truncation: f64) -> Result<Self> {
        spec.validate()?;
        if !(truncation > 0.0) || !truncation.is_finite() {
            return Err(Error::Config(format!("truncation {truncation} must be positive")));
        }
        let n = spec.cell_count();
        Ok(Self {
            spec,
            truncation,
            sums: vec![0.0; n],
            weights: vec![0.0; n],
            gradients: vec![None; n],
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn truncation(&self) -> f64 {
        self.truncation
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.iter().all(|&w| w == 0.0)
    }

    pub fn weight(&self, idx: usize) -> f64 {
        self.weights[idx]
    }

    /// Fused distance of a cell, 0 when unobserved.
    pub fn distance(&self, idx: usize) -> f64 {
        let w = self.weights[idx];
        if w > 0.0 {
            self.sums[idx] / w
        } else {
            0.0
        }
    }

    pub fn gradient(&self, idx: usize) -> Option<Vec3> {
        self.gradients[idx]
    }

    pub fn set_gradient(&mut self, idx: usize, g: Option<Vec3>) {
        self.gradients[idx] = g;
    }

    /// Fuses one distance observation with unit weight, clamped to `±τ`.
    pub fn update(&mut self, idx: usize, distance: f64) {
        let d = distance.clamp(-self.truncation, self.truncation);
        self.sums[idx] += d;
        self.weights[idx] += 1.0;
    }

    pub fn observed_cells(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&i| self.weights[i] > 0.0)
    }

    /// Record per cell: sum f64, weight f64, gradient flag u8, gradient 3×f64.
    pub fn save(&self, path: &Path) -> Result<()> {
        let io = |e| Error::io(path, e);
        let mut w = container::create(path, PayloadType::Tsdf)?;
        self.spec.write(&mut w).map_err(io)?;
        w.f64(self.truncation).map_err(io)?;
        for i in 0..self.len() {
            w.f64(self.sums[i]).map_err(io)?;
            w.f64(self.weights[i]).map_err(io)?;
            match self.gradients[i] {
                Some(g) => {
                    w.u8(1).map_err(io)?;
                    for a in 0..3 {
                        w.f64(g[a]).map_err(io)?;
                    }
                }
                None => w.u8(0).map_err(io)?,
            }
        }
        w.finish().map_err(io)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = container::open(path, PayloadType::Tsdf)?;
        let spec = GridSpec::read(&mut r)?;
        let truncation = r.f64()?;
        let mut grid = Self::new(spec, truncation).map_err(|e| Error::Format(e.to_string()))?;
        for i in 0..grid.len() {
            grid.sums[i] = r.f64()?;
            grid.weights[i] = r.f64()?;
            grid.gradients[i] = match r.u8()? {
                0 => None,
                1 => Some(Vec3::new(r.f64()?, r.f64()?, r.f64()?)),
                f => return Err(Error::Format(format!("invalid gradient flag {f}"))),
            };
        }
        r.expect_end()?;
        Ok(grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn running_average_and_clamp() {
        let spec = GridSpec::new([0.0; 3], 1.0, [2, 1, 1]).unwrap();
        let mut t = TsdfGrid::new(spec, 1.0).unwrap();
        t.update(0, 0.2);
        t.update(0, 0.6);
        assert!((t.distance(0) - 0.4).abs() < 1e-15);
        assert_eq!(t.weight(0), 2.0);
        t.update(1, -7.0);
        assert_eq!(t.distance(1), -1.0);
        assert!(TsdfGrid::new(spec, 0.0).is_err());
    }

    #[test]
    fn save_load_roundtrip() {
        let spec = GridSpec::new([1.0, 2.0, 3.0], 0.3, [3, 2, 2]).unwrap();
        let mut t = TsdfGrid::new(spec, 0.8).unwrap();
        for i in 0..t.len() {
            if i % 3 != 0 {
                t.update(i, (i as f64 * 0.37).sin());
            }
        }
        t.set_gradient(4, Some(Vec3::new(0.6, 0.0, 0.8)));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.sapg");
        t.save(&p).unwrap();
        assert_eq!(TsdfGrid::load(&p).unwrap(), t);
    }
}
