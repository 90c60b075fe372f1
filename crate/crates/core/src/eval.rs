//! Point-to-mesh error against range-measurement endpoints.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::reconstruction::TriangleMesh;

/// Closest point to `p` on triangle `abc` (Voronoi-region walk).
pub fn closest_point_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && d4 - d3 >= 0.0 && d5 - d6 >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}

pub fn point_triangle_distance(p: &Vec3, tri: &[Vec3; 3]) -> f64 {
    (p - closest_point_on_triangle(p, &tri[0], &tri[1], &tri[2])).norm()
}

/// Exhaustive scan over all triangles.
pub fn brute_force_distance(p: &Vec3, mesh: &TriangleMesh) -> Result<f64> {
    if mesh.is_empty() {
        return Err(Error::Domain("distance to an empty mesh".into()));
    }
    Ok((0..mesh.triangles.len())
        .map(|t| point_triangle_distance(p, &mesh.triangle(t)))
        .fold(f64::INFINITY, f64::min))
}

/// Upper bound on the number of bins of a [`MeshIndex`].
const MAX_BINS: usize = 1 << 21;

/// Uniform binning of triangles by bounding box.
pub struct MeshIndex<'a> {
    mesh: &'a TriangleMesh,
    tris: Vec<[Vec3; 3]>,
    origin: Vec3,
    bin: f64,
    dims: [usize; 3],
    bins: Vec<Vec<u32>>,
}

impl<'a> MeshIndex<'a> {
    /// Bins have the median edge length, enlarged if the grid would get too fine.
    pub fn new(mesh: &'a TriangleMesh) -> Result<Self> {
        if mesh.is_empty() {
            return Err(Error::Domain("cannot index an empty mesh".into()));
        }
        mesh.validate()?;
        let tris: Vec<[Vec3; 3]> = (0..mesh.triangles.len()).map(|t| mesh.triangle(t)).collect();
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        let mut edges: Vec<f64> = Vec::with_capacity(3 * tris.len());
        for t in &tris {
            for k in 0..3 {
                lo = lo.inf(&t[k]);
                hi = hi.sup(&t[k]);
                edges.push((t[k] - t[(k + 1) % 3]).norm());
            }
        }
        edges.sort_by(f64::total_cmp);
        let extent = hi - lo;
        let mut bin = edges[edges.len() / 2].max(1e-9 * (1.0 + extent.amax()));
        let dims_for = |bin: f64| -> [usize; 3] {
            let mut d = [1usize; 3];
            for a in 0..3 {
                d[a] = ((extent[a] / bin).floor() as usize + 1).max(1);
            }
            d
        };
        let mut dims = dims_for(bin);
        while dims.iter().product::<usize>() > MAX_BINS {
            bin *= 1.5;
            dims = dims_for(bin);
        }
        let mut index = Self {
            mesh,
            tris,
            origin: lo,
            bin,
            dims,
            bins: vec![Vec::new(); dims.iter().product()],
        };
        for t in 0..index.tris.len() {
            let tri = index.tris[t];
            let a = index.bin_of(&tri[0].inf(&tri[1]).inf(&tri[2]));
            let b = index.bin_of(&tri[0].sup(&tri[1]).sup(&tri[2]));
            for z in a[2]..=b[2] {
                for y in a[1]..=b[1] {
                    for x in a[0]..=b[0] {
                        let i = index.flat([x, y, z]);
                        index.bins[i].push(t as u32);
                    }
                }
            }
        }
        Ok(index)
    }

    pub fn mesh(&self) -> &TriangleMesh {
        self.mesh
    }

    fn bin_of(&self, p: &Vec3) -> [usize; 3] {
        let mut out = [0usize; 3];
        for a in 0..3 {
            let f = ((p[a] - self.origin[a]) / self.bin).floor();
            out[a] = f.clamp(0.0, (self.dims[a] - 1) as f64) as usize;
        }
        out
    }

    fn flat(&self, b: [usize; 3]) -> usize {
        b[0] + self.dims[0] * (b[1] + self.dims[1] * b[2])
    }

    /// Exact distance from `p` to the mesh: bins are searched in growing
    /// Chebyshev rings until no unvisited bin can hold a closer triangle.
    pub fn distance(&self, p: &Vec3) -> f64 {
        let c = self.bin_of(p);
        let mut best = f64::INFINITY;
        let max_ring = *self.dims.iter().max().expect("three dims");
        for r in 0..max_ring {
            let lo: [i64; 3] = std::array::from_fn(|a| c[a] as i64 - r as i64);
            let hi: [i64; 3] = std::array::from_fn(|a| c[a] as i64 + r as i64);
            for z in lo[2].max(0)..=hi[2].min(self.dims[2] as i64 - 1) {
                for y in lo[1].max(0)..=hi[1].min(self.dims[1] as i64 - 1) {
                    for x in lo[0].max(0)..=hi[0].min(self.dims[0] as i64 - 1) {
                        let on_shell = [x, y, z].iter().enumerate().any(|(a, &v)| v == lo[a] || v == hi[a]);
                        if !on_shell {
                            continue;
                        }
                        for &t in &self.bins[self.flat([x as usize, y as usize, z as usize])] {
                            best = best.min(point_triangle_distance(p, &self.tris[t as usize]));
                        }
                    }
                }
            }
            // Everything not yet visited lies beyond one of the block faces
            // that does not coincide with the grid boundary.
            let mut bound = f64::INFINITY;
            for a in 0..3 {
                if lo[a] > 0 {
                    let face = self.origin[a] + lo[a] as f64 * self.bin;
                    bound = bound.min((p[a] - face).max(0.0));
                }
                if hi[a] < self.dims[a] as i64 - 1 {
                    let face = self.origin[a] + (hi[a] + 1) as f64 * self.bin;
                    bound = bound.min((face - p[a]).max(0.0));
                }
            }
            if best <= bound {
                break;
            }
        }
        best
    }
}

pub fn point_to_mesh_distance(p: &Vec3, mesh: &TriangleMesh) -> Result<f64> {
    Ok(MeshIndex::new(mesh)?.distance(p))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub distances: Vec<f64>,
    pub mse: f64,
    pub point_count: usize,
    pub triangle_count: usize,
    pub cell_size: f64,
}

impl EvalReport {
    pub fn rmse(&self) -> f64 {
        self.mse.sqrt()
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// One row per point: index, endpoint coordinates, distance.
    pub fn write_csv(&self, points: &[Vec3], path: &Path) -> Result<()> {
        if points.len() != self.distances.len() {
            return Err(Error::Data("point list does not match report".into()));
        }
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["index", "x", "y", "z", "distance"])?;
        for (i, (p, d)) in points.iter().zip(&self.distances).enumerate() {
            w.write_record([i.to_string(), p.x.to_string(), p.y.to_string(), p.z.to_string(), d.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

pub fn evaluate(mesh: &TriangleMesh, points: &[Vec3], cell_size: f64) -> Result<EvalReport> {
    if points.is_empty() {
        return Err(Error::Data("no ground-truth points to evaluate".into()));
    }
    let index = MeshIndex::new(mesh)?;
    let distances: Vec<f64> = points.iter().map(|p| index.distance(p)).collect();
    let mse = distances.iter().map(|d| d * d).sum::<f64>() / distances.len() as f64;
    Ok(EvalReport {
        point_count: distances.len(),
        distances,
        mse,
        triangle_count: mesh.triangles.len(),
        cell_size,
    })
}

/// Fraction of the horizontal columns (of width `cell_size`) holding a
/// ground-truth point that have a mesh vertex in the same or an adjacent column.
pub fn footprint_coverage(mesh: &TriangleMesh, points: &[Vec3], cell_size: f64) -> f64 {
    let column = |p: &Vec3| ((p.x / cell_size).floor() as i64, (p.y / cell_size).floor() as i64);
    let occupied: HashSet<(i64, i64)> = mesh.vertices.iter().map(column).collect();
    let footprint: HashSet<(i64, i64)> = points.iter().map(column).collect();
    if footprint.is_empty() {
        return 0.0;
    }
    let covered = footprint
        .iter()
        .filter(|&&(x, y)| (-1..=1).any(|dx| (-1..=1).any(|dy| occupied.contains(&(x + dx, y + dy)))))
        .count();
    covered as f64 / footprint.len() as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub cell_size: f64,
    pub mse: f64,
    pub point_count: usize,
    pub triangle_count: usize,
}

impl From<&EvalReport> for SweepRow {
    fn from(r: &EvalReport) -> Self {
        Self {
            cell_size: r.cell_size,
            mse: r.mse,
            point_count: r.point_count,
            triangle_count: r.triangle_count,
        }
    }
}

pub fn write_sweep_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Number of adjacent pairs where the MSE decreases as cells grow.
pub fn sweep_inversions(rows: &[SweepRow]) -> usize {
    let mut sorted: Vec<&SweepRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.cell_size.total_cmp(&b.cell_size));
    sorted.windows(2).filter(|w| w[1].mse < w[0].mse).count()
}
