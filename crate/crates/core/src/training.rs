//! Training labels from DVL ranges.
//!
//! Every DVL beam is widened into a cone of nine rays. Cells crossed by a ray
//! up to `range + τ` receive the projective signed distance of their center,
//! clamped to `±τ`, which also carves the free space in front of the surface.
//! A 3D Sobel pass then estimates distance gradients for label directions.

use std::f64::consts::TAU;
use std::path::Path;

use crate::container::{self, PayloadType};
use crate::error::{Error, Result};
use crate::feature_grid::{FeatureGrid, FeatureVector};
use crate::geometry::{log_map, TangentDelta, Vec3};
use crate::grid::GridSpec;
use crate::tsdf::TsdfGrid;

/// Number of outer rays placed around each beam axis.
pub const CONE_RAYS: usize = 8;

/// Sobel responses below this norm are treated as absent.
pub const GRADIENT_EPS: f64 = 1e-9;

/// Unit vectors `(u, v)` completing `dir` to a right-handed orthonormal basis.
pub fn perpendicular_basis(dir: &Vec3) -> (Vec3, Vec3) {
    let reference = if dir.z.abs() < 0.9 { Vec3::z() } else { Vec3::x() };
    let u = dir.cross(&reference).normalize();
    let v = dir.cross(&u);
    (u, v)
}

/// Central ray followed by the outer rays at azimuths `2πk/8` on the cone of
/// half-angle `opening_angle / 2`.
pub fn cone_rays(dir: &Vec3, opening_angle: f64) -> [Vec3; CONE_RAYS + 1] {
    let (u, v) = perpendicular_basis(dir);
    let half = 0.5 * opening_angle;
    let mut rays = [*dir; CONE_RAYS + 1];
    for (k, ray) in rays.iter_mut().enumerate().skip(1) {
        let phi = TAU * (k - 1) as f64 / CONE_RAYS as f64;
        *ray = (dir * half.cos() + (u * phi.cos() + v * phi.sin()) * half.sin()).normalize();
    }
    rays
}

/// Visits, in order, every cell crossed by `origin + s·dir` for `s ∈ [s0, s1]`.
pub fn traverse_cells(spec: &GridSpec, origin: &Vec3, dir: &Vec3, s0: f64, s1: f64, mut visit: impl FnMut(usize)) {
    let hi = spec.max_corner();
    let (mut t0, mut t1) = (s0, s1);
    for a in 0..3 {
        if dir[a].abs() < 1e-15 {
            if origin[a] < spec.origin[a] || origin[a] >= hi[a] {
                return;
            }
        } else {
            let ta = (spec.origin[a] - origin[a]) / dir[a];
            let tb = (hi[a] - origin[a]) / dir[a];
            t0 = t0.max(ta.min(tb));
            t1 = t1.min(ta.max(tb));
        }
    }
    if !(t0 < t1) {
        return;
    }
    let cs = spec.cell_size;
    let entry = origin + dir * t0;
    let mut cell = [0i64; 3];
    let mut step = [0i64; 3];
    let mut t_max = [f64::INFINITY; 3];
    let mut t_delta = [f64::INFINITY; 3];
    for a in 0..3 {
        let f = ((entry[a] - spec.origin[a]) / cs).floor() as i64;
        cell[a] = f.clamp(0, spec.dims[a] as i64 - 1);
        if dir[a].abs() >= 1e-15 {
            step[a] = if dir[a] > 0.0 { 1 } else { -1 };
            let boundary = spec.origin[a] + (cell[a] + (step[a] > 0) as i64) as f64 * cs;
            t_max[a] = (boundary - origin[a]) / dir[a];
            t_delta[a] = cs / dir[a].abs();
        }
    }
    loop {
        visit(spec.index(cell[0] as usize, cell[1] as usize, cell[2] as usize));
        let a = (0..3)
            .min_by(|&x, &y| t_max[x].total_cmp(&t_max[y]))
            .unwrap_or(0);
        if t_max[a] >= t1 {
            return;
        }
        cell[a] += step[a];
        if cell[a] < 0 || cell[a] >= spec.dims[a] as i64 {
            return;
        }
        t_max[a] += t_delta[a];
    }
}

/// Fuses one DVL beam (origin, unit direction, measured range) into `tsdf`.
/// Each of the nine rays updates every cell it crosses at most once.
pub fn integrate_range_beam(tsdf: &mut TsdfGrid, origin: &Vec3, direction: &Vec3, range: f64, opening_angle: f64) {
    let spec = *tsdf.spec();
    let tau = tsdf.truncation();
    for ray in cone_rays(direction, opening_angle) {
        traverse_cells(&spec, origin, &ray, 0.0, range + tau, |idx| {
            let along = (spec.center_of(idx) - origin).dot(&ray);
            tsdf.update(idx, range - along);
        });
    }
}

/// Normalized 3D Sobel gradient for every cell whose 3×3×3 neighborhood is
/// fully observed; all other cells lose their gradient.
pub fn sobel_gradients(tsdf: &mut TsdfGrid) {
    const SMOOTH: [f64; 3] = [1.0, 2.0, 1.0];
    const DERIV: [f64; 3] = [-1.0, 0.0, 1.0];
    let spec = *tsdf.spec();
    let [nx, ny, nz] = spec.dims;
    let mut out = vec![None; tsdf.len()];
    for k in 1..nz.saturating_sub(1) {
        for j in 1..ny.saturating_sub(1) {
            'cell: for i in 1..nx.saturating_sub(1) {
                let mut g = Vec3::zeros();
                for c in 0..3 {
                    for b in 0..3 {
                        for a in 0..3 {
                            let idx = spec.index(i + a - 1, j + b - 1, k + c - 1);
                            if tsdf.weight(idx) <= 0.0 {
                                continue 'cell;
                            }
                            let d = tsdf.distance(idx);
                            g.x += d * DERIV[a] * SMOOTH[b] * SMOOTH[c];
                            g.y += d * SMOOTH[a] * DERIV[b] * SMOOTH[c];
                            g.z += d * SMOOTH[a] * SMOOTH[b] * DERIV[c];
                        }
                    }
                }
                let norm = g.norm();
                if norm >= GRADIENT_EPS {
                    out[spec.index(i, j, k)] = Some(g / norm);
                }
            }
        }
    }
    for (idx, g) in out.into_iter().enumerate() {
        tsdf.set_gradient(idx, g);
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegressionTarget {
    pub distance: f64,
    pub delta: TangentDelta,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSample {
    /// Linear index of the source cell.
    pub cell: usize,
    pub features: FeatureVector,
    /// Cell lies within the truncation band.
    pub y_b: bool,
    pub y_d: Option<RegressionTarget>,
}

/// Whether a fused distance lies strictly inside the truncation band.
pub fn in_band(distance: f64, truncation: f64) -> bool {
    distance.abs() < truncation * (1.0 - 1e-9)
}

/// One sample per cell with both a feature observation and TSDF weight.
/// Regression targets are attached to in-band cells that have a gradient
/// not antipodal to ê_z.
pub fn make_samples(tsdf: &TsdfGrid, features: &FeatureGrid) -> Result<Vec<TrainingSample>> {
    if tsdf.spec() != features.spec() {
        return Err(Error::Config(format!(
            "TSDF grid {:?} and feature grid {:?} differ",
            tsdf.spec(),
            features.spec()
        )));
    }
    let tau = tsdf.truncation();
    let mut out = Vec::new();
    for idx in tsdf.observed_cells() {
        let cell = features.cell(idx);
        if !cell.is_observed() {
            continue;
        }
        let d = tsdf.distance(idx);
        let y_b = in_band(d, tau);
        let y_d = if y_b {
            tsdf.gradient(idx).and_then(|g| log_map(&g).ok()).map(|delta| RegressionTarget { distance: d, delta })
        } else {
            None
        };
        out.push(TrainingSample {
            cell: idx,
            features: features.feature_vector(idx),
            y_b,
            y_d,
        });
    }
    Ok(out)
}

/// Writes samples for inspection: `n`, count, then per sample the cell index,
/// `3n` f32 feature values, `y_b`, a target flag and `(d, u, v)` as f64.
pub fn save_samples(samples: &[TrainingSample], n: usize, path: &Path) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut w = container::create(path, PayloadType::TrainingSamples)?;
    w.u32(n as u32).map_err(io)?;
    w.u64(samples.len() as u64).map_err(io)?;
    for s in samples {
        if s.features.values.len() != 3 * n {
            return Err(Error::Shape(format!(
                "sample has {} features, expected {}",
                s.features.values.len(),
                3 * n
            )));
        }
        w.u64(s.cell as u64).map_err(io)?;
        for &v in &s.features.values {
            w.f32(v as f32).map_err(io)?;
        }
        w.u8(s.y_b as u8).map_err(io)?;
        match s.y_d {
            Some(t) => {
                w.u8(1).map_err(io)?;
                for v in [t.distance, t.delta.u, t.delta.v] {
                    w.f64(v).map_err(io)?;
                }
            }
            None => w.u8(0).map_err(io)?,
        }
    }
    w.finish().map_err(io)?;
    Ok(())
}

/// Sample record as read back from a sample file.
#[derive(Clone, Debug, PartialEq)]
pub struct StoredSample {
    pub cell: usize,
    pub features: Vec<f32>,
    pub y_b: bool,
    pub y_d: Option<RegressionTarget>,
}

pub fn load_samples(path: &Path) -> Result<(usize, Vec<StoredSample>)> {
    let mut r = container::open(path, PayloadType::TrainingSamples)?;
    let n = r.u32()? as usize;
    let count = r.u64()? as usize;
    let mut out = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let cell = r.u64()? as usize;
        let features = (0..3 * n).map(|_| r.f32()).collect::<Result<Vec<_>>>()?;
        let y_b = r.u8()? != 0;
        let y_d = match r.u8()? {
            0 => None,
            _ => {
                let distance = r.f64()?;
                let delta = TangentDelta::new(r.f64()?, r.f64()?);
                Some(RegressionTarget { distance, delta })
            }
        };
        out.push(StoredSample {
            cell,
            features,
            y_b,
            y_d,
        });
    }
    r.expect_end()?;
    Ok((n, out))
}
