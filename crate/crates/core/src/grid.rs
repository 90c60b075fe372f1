//! Axis-aligned voxel grid geometry shared by feature and distance grids.

use serde::{Deserialize, Serialize};

use crate::container::{Reader, Writer};
use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// `origin` is the minimum corner of cell `(0, 0, 0)`; cell centers sit at
/// `origin + (i + 0.5) * cell_size`. Linear indices are x-fastest.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin: [f64; 3],
    pub cell_size: f64,
    pub dims: [usize; 3],
}

impl GridSpec {
    pub fn new(origin: [f64; 3], cell_size: f64, dims: [usize; 3]) -> Result<Self> {
        let spec = Self {
            origin,
            cell_size,
            dims,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Smallest grid of `cell_size` cells covering `[min, max]`.
    pub fn from_bounds(min: [f64; 3], max: [f64; 3], cell_size: f64) -> Result<Self> {
        if !(cell_size > 0.0) {
            return Err(Error::Config("cell size must be positive".into()));
        }
        let mut dims = [0usize; 3];
        for a in 0..3 {
            if !(max[a] > min[a]) {
                return Err(Error::Config(format!("empty grid bounds on axis {a}")));
            }
            dims[a] = ((max[a] - min[a]) / cell_size - 1e-9).ceil().max(1.0) as usize;
        }
        Self::new(min, cell_size, dims)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cell_size > 0.0) || !self.cell_size.is_finite() {
            return Err(Error::Config(format!("cell size {} must be positive", self.cell_size)));
        }
        if self.dims.iter().any(|&d| d == 0) {
            return Err(Error::Config(format!("grid dims {:?} must be >= 1", self.dims)));
        }
        if self.origin.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("grid origin must be finite".into()));
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.dims[0];
        let j = (idx / self.dims[0]) % self.dims[1];
        let k = idx / (self.dims[0] * self.dims[1]);
        [i, j, k]
    }

    pub fn center(&self, i: usize, j: usize, k: usize) -> Vec3 {
        Vec3::new(
            self.origin[0] + (i as f64 + 0.5) * self.cell_size,
            self.origin[1] + (j as f64 + 0.5) * self.cell_size,
            self.origin[2] + (k as f64 + 0.5) * self.cell_size,
        )
    }

    pub fn center_of(&self, idx: usize) -> Vec3 {
        let [i, j, k] = self.coords(idx);
        self.center(i, j, k)
    }

    /// Cell containing `p`, if inside the grid.
    pub fn locate(&self, p: &Vec3) -> Option<[usize; 3]> {
        let mut out = [0usize; 3];
        for a in 0..3 {
            let f = ((p[a] - self.origin[a]) / self.cell_size).floor();
            if !(f >= 0.0 && f < self.dims[a] as f64) {
                return None;
            }
            out[a] = f as usize;
        }
        Some(out)
    }

    pub fn max_corner(&self) -> [f64; 3] {
        [
            self.origin[0] + self.dims[0] as f64 * self.cell_size,
            self.origin[1] + self.dims[1] as f64 * self.cell_size,
            self.origin[2] + self.dims[2] as f64 * self.cell_size,
        ]
    }

    /// Inclusive index range of cells whose centers may lie within `radius` of `p`.
    pub fn index_box(&self, p: &Vec3, radius: f64) -> Option<[[usize; 2]; 3]> {
        let mut out = [[0usize; 2]; 3];
        for a in 0..3 {
            let lo = ((p[a] - radius - self.origin[a]) / self.cell_size - 0.5).floor();
            let hi = ((p[a] + radius - self.origin[a]) / self.cell_size - 0.5).ceil();
            let lo = lo.max(0.0);
            let hi = hi.min(self.dims[a] as f64 - 1.0);
            if hi < lo {
                return None;
            }
            out[a] = [lo as usize, hi as usize];
        }
        Some(out)
    }

    pub(crate) fn write<W: std::io::Write>(&self, w: &mut Writer<W>) -> std::io::Result<()> {
        for v in self.origin {
            w.f64(v)?;
        }
        w.f64(self.cell_size)?;
        for d in self.dims {
            w.u32(d as u32)?;
        }
        Ok(())
    }

    pub(crate) fn read<R: std::io::Read>(r: &mut Reader<R>) -> Result<Self> {
        let origin = [r.f64()?, r.f64()?, r.f64()?];
        let cell_size = r.f64()?;
        let dims = [r.u32()? as usize, r.u32()? as usize, r.u32()? as usize];
        Self::new(origin, cell_size, dims).map_err(|e| Error::Format(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_roundtrip_and_centers() {
        let g = GridSpec::new([-1.0, 0.0, 2.0], 0.5, [3, 4, 5]).unwrap();
        for idx in 0..g.cell_count() {
            let [i, j, k] = g.coords(idx);
            assert_eq!(g.index(i, j, k), idx);
            assert_eq!(g.locate(&g.center(i, j, k)), Some([i, j, k]));
        }
        assert_eq!(g.index(1, 0, 0), 1);
        assert_eq!(g.center(0, 0, 0), Vec3::new(-0.75, 0.25, 2.25));
        assert!(g.locate(&Vec3::new(-1.1, 0.0, 2.0)).is_none());
    }

    #[test]
    fn bounds_and_validation() {
        let g = GridSpec::from_bounds([0.0; 3], [1.0, 2.0, 0.3], 0.2).unwrap();
        assert_eq!(g.dims, [5, 10, 2]);
        assert!(GridSpec::new([0.0; 3], 0.0, [1, 1, 1]).is_err());
        assert!(GridSpec::new([0.0; 3], 1.0, [1, 0, 1]).is_err());
    }
}
