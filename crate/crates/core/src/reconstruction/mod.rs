//! Surface reconstruction from learned per-cell predictions.
//!
//! Observed cells are classified as in-band or not; in-band cells get a
//! predicted signed distance and surface direction, which are traced into a
//! fresh TSDF. The zero level set of that TSDF is meshed by marching cubes.

pub mod mesh;
mod tables;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature_grid::FeatureGrid;
use crate::geometry::{exp_map, TangentDelta, Vec3};
use crate::nn::{Model, Scalar};
use crate::tsdf::TsdfGrid;

pub use mesh::{export_ply, import_ply, PlyFormat, TriangleMesh};

/// Distance and unit gradient predicted for an in-band cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfacePrediction {
    pub distance: f64,
    pub normal: Vec3,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellPrediction {
    pub cell: [usize; 3],
    pub inlier_prob: f64,
    /// Present iff `inlier_prob` reached the decision threshold.
    pub surface: Option<SurfacePrediction>,
}

/// Cells per network call.
const PREDICT_CHUNK: usize = 4096;

/// Runs the classifier over every observed cell and the regressor over the
/// cells it accepts. Regressed distances are clamped into the open band
/// `(−τ, τ)` and tangent deltas longer than π are shortened to π.
pub fn predict_cells<T: Scalar>(
    features: &FeatureGrid,
    classifier: &Model<T>,
    regressor: &Model<T>,
    threshold: f64,
    truncation: f64,
) -> Result<Vec<CellPrediction>> {
    let len = 3 * features.resolution();
    for (name, m, out) in [("classifier", classifier, 1), ("regressor", regressor, 3)] {
        if m.input_shape() != (1, len) {
            return Err(Error::Config(format!(
                "{name} expects input {:?}, feature grid provides (1, {len})",
                m.input_shape()
            )));
        }
        if m.output_len() != out {
            return Err(Error::Config(format!("{name} must have {out} outputs")));
        }
    }
    let spec = *features.spec();
    let cells = features.observed_cells();
    let limit = truncation * (1.0 - 1e-6);
    let mut out = Vec::with_capacity(cells.len());
    for chunk in cells.chunks(PREDICT_CHUNK) {
        let mut x = Vec::with_capacity(chunk.len() * len);
        for &c in chunk {
            x.extend(features.feature_vector(c).values.iter().map(|&v| T::of(v)));
        }
        let probs = classifier.predict(&x, chunk.len())?;
        let accepted: Vec<usize> = (0..chunk.len()).filter(|&i| probs[i].f64() >= threshold).collect();
        let mut xr = Vec::with_capacity(accepted.len() * len);
        for &i in &accepted {
            xr.extend_from_slice(&x[i * len..(i + 1) * len]);
        }
        let reg = regressor.predict(&xr, accepted.len())?;
        let mut surfaces = vec![None; chunk.len()];
        for (r, &i) in accepted.iter().enumerate() {
            let distance = reg[3 * r].f64().clamp(-limit, limit);
            let mut delta = TangentDelta::new(reg[3 * r + 1].f64(), reg[3 * r + 2].f64());
            let norm = delta.norm();
            if norm > std::f64::consts::PI {
                let s = std::f64::consts::PI / norm;
                delta = TangentDelta::new(delta.u * s, delta.v * s);
            }
            let normal = exp_map(&delta)?;
            surfaces[i] = Some(SurfacePrediction { distance, normal });
        }
        for (i, &c) in chunk.iter().enumerate() {
            out.push(CellPrediction {
                cell: spec.coords(c),
                inlier_prob: probs[i].f64(),
                surface: surfaces[i],
            });
        }
    }
    Ok(out)
}

/// Traces one prediction into `tsdf`: the surface point lies at
/// `center − d̃·n̂`, and samples `center − s·n̂` for `s ∈ [d̃ − τ, d̃ + τ]`
/// at half-cell steps select the cells to update. Each selected cell fuses
/// the signed distance of its own center to the predicted tangent plane,
/// positive on the side `n̂` points to.
pub fn fuse_prediction(tsdf: &mut TsdfGrid, cell_center: &Vec3, distance: f64, normal: &Vec3) {
    let spec = *tsdf.spec();
    let tau = tsdf.truncation();
    let step = 0.5 * spec.cell_size;
    let steps = (2.0 * tau / step + 1e-9).floor() as usize;
    let mut last = None;
    for k in 0..=steps {
        let s = distance - tau + k as f64 * step;
        let p = cell_center - normal * s;
        let Some([i, j, l]) = spec.locate(&p) else {
            continue;
        };
        let idx = spec.index(i, j, l);
        if last == Some(idx) {
            continue;
        }
        last = Some(idx);
        let q = spec.center(i, j, l);
        tsdf.update(idx, distance + (q - cell_center).dot(normal));
    }
}

/// Fuses every in-band prediction into a fresh TSDF over the feature grid.
pub fn fuse_predictions(features: &FeatureGrid, predictions: &[CellPrediction], truncation: f64) -> Result<TsdfGrid> {
    let spec = *features.spec();
    let mut tsdf = TsdfGrid::new(spec, truncation)?;
    for p in predictions {
        if let Some(s) = p.surface {
            let [i, j, k] = p.cell;
            fuse_prediction(&mut tsdf, &spec.center(i, j, k), s.distance, &s.normal);
        }
    }
    Ok(tsdf)
}

/// Edge interpolation parameters this close to 0 or 1 snap to the corner.
const SNAP: f64 = 1e-9;

/// Triangles with at most this area are dropped.
const MIN_AREA: f64 = 1e-12;

/// Marching cubes over the cubes spanned by cell centers whose eight corners
/// are all observed. Vertices are shared between cubes and triangles face
/// toward increasing distance.
pub fn marching_cubes(tsdf: &TsdfGrid, iso: f64) -> TriangleMesh {
    let spec = *tsdf.spec();
    let [nx, ny, nz] = spec.dims;
    let mut mesh = TriangleMesh::default();
    if nx < 2 || ny < 2 || nz < 2 {
        return mesh;
    }
    let mut ids: HashMap<usize, usize> = HashMap::new();
    for k in 0..nz - 1 {
        for j in 0..ny - 1 {
            'cube: for i in 0..nx - 1 {
                let mut idx = [0usize; 8];
                let mut val = [0f64; 8];
                let mut case = 0usize;
                for (c, off) in tables::CORNERS.iter().enumerate() {
                    let g = spec.index(i + off[0], j + off[1], k + off[2]);
                    if tsdf.weight(g) <= 0.0 {
                        continue 'cube;
                    }
                    idx[c] = g;
                    val[c] = tsdf.distance(g);
                    if val[c] < iso {
                        case |= 1 << c;
                    }
                }
                if case == 0 || case == 255 {
                    continue;
                }
                let row = &tables::TRIANGLES[case];
                let mut vertex = |e: usize, mesh: &mut TriangleMesh| -> usize {
                    let [mut a, mut b] = tables::EDGES[e];
                    if idx[a] > idx[b] {
                        std::mem::swap(&mut a, &mut b);
                    }
                    let t = (iso - val[a]) / (val[b] - val[a]);
                    let axis = (0..3).find(|&x| tables::CORNERS[a][x] != tables::CORNERS[b][x]).unwrap_or(0);
                    let (key, pos) = if t <= SNAP {
                        (4 * idx[a] + 3, spec.center_of(idx[a]))
                    } else if t >= 1.0 - SNAP {
                        (4 * idx[b] + 3, spec.center_of(idx[b]))
                    } else {
                        let pa = spec.center_of(idx[a]);
                        let pb = spec.center_of(idx[b]);
                        (4 * idx[a] + axis, pa + (pb - pa) * t)
                    };
                    *ids.entry(key).or_insert_with(|| {
                        mesh.vertices.push(pos);
                        mesh.vertices.len() - 1
                    })
                };
                for tri in row.chunks_exact(3) {
                    if tri[0] < 0 {
                        break;
                    }
                    let v0 = vertex(tri[0] as usize, &mut mesh);
                    let v1 = vertex(tri[1] as usize, &mut mesh);
                    let v2 = vertex(tri[2] as usize, &mut mesh);
                    if v0 == v1 || v1 == v2 || v0 == v2 {
                        continue;
                    }
                    mesh.triangles.push([v0, v2, v1]);
                    if mesh.area(mesh.triangles.len() - 1) <= MIN_AREA {
                        mesh.triangles.pop();
                    }
                }
            }
        }
    }
    mesh
}

/// Counts reported alongside a reconstruction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionSummary {
    pub cell_count: usize,
    pub observed_cells: usize,
    pub inlier_cells: usize,
    pub fused_cells: usize,
    pub vertex_count: usize,
    pub triangle_count: usize,
}

pub struct Reconstruction {
    pub predictions: Vec<CellPrediction>,
    pub tsdf: TsdfGrid,
    pub mesh: TriangleMesh,
    pub summary: ReconstructionSummary,
}

/// Predicts, fuses and meshes a feature grid.
pub fn reconstruct<T: Scalar>(
    features: &FeatureGrid,
    classifier: &Model<T>,
    regressor: &Model<T>,
    threshold: f64,
    truncation: f64,
) -> Result<Reconstruction> {
    let predictions = predict_cells(features, classifier, regressor, threshold, truncation)?;
    let tsdf = fuse_predictions(features, &predictions, truncation)?;
    let mesh = marching_cubes(&tsdf, 0.0);
    let summary = ReconstructionSummary {
        cell_count: features.spec().cell_count(),
        observed_cells: predictions.len(),
        inlier_cells: predictions.iter().filter(|p| p.surface.is_some()).count(),
        fused_cells: tsdf.observed_cells().count(),
        vertex_count: mesh.vertices.len(),
        triangle_count: mesh.triangles.len(),
    };
    Ok(Reconstruction {
        predictions,
        tsdf,
        mesh,
        summary,
    })
}
