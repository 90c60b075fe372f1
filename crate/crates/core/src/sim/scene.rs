//! Synthetic seafloor scenes with a signed-distance query.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// Isotropic Gaussian mound on the seafloor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianBump {
    pub center: [f64; 2],
    pub height: f64,
    pub sigma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TerrainSpec {
    Flat {
        #[serde(default)]
        height: f64,
    },
    Bumps {
        #[serde(default)]
        base_height: f64,
        bumps: Vec<GaussianBump>,
    },
    /// Sampled heights, `heights[row][col]` at `origin + (col, row) * spacing`.
    Grid {
        origin: [f64; 2],
        spacing: f64,
        heights: Vec<Vec<f64>>,
    },
}

/// Axis-aligned box resting in the scene (structure mockup).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxSpec {
    pub center: [f64; 3],
    pub size: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extent {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

/// JSON scene description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    #[serde(default)]
    pub terrain: Option<TerrainSpec>,
    #[serde(default)]
    pub boxes: Vec<BoxSpec>,
    pub extent: Extent,
}

#[derive(Clone, Debug)]
enum Terrain {
    Flat(f64),
    Bumps { base: f64, bumps: Vec<GaussianBump> },
    Grid(HeightGrid),
}

#[derive(Clone, Debug)]
struct HeightGrid {
    origin: [f64; 2],
    spacing: f64,
    rows: usize,
    cols: usize,
    heights: Vec<f64>,
}

impl HeightGrid {
    /// Bilinear height and its gradient, clamped at the grid border.
    fn sample(&self, x: f64, y: f64) -> (f64, [f64; 2]) {
        let fx = ((x - self.origin[0]) / self.spacing).clamp(0.0, (self.cols - 1) as f64);
        let fy = ((y - self.origin[1]) / self.spacing).clamp(0.0, (self.rows - 1) as f64);
        let c0 = (fx.floor() as usize).min(self.cols.saturating_sub(2));
        let r0 = (fy.floor() as usize).min(self.rows.saturating_sub(2));
        let c1 = (c0 + 1).min(self.cols - 1);
        let r1 = (r0 + 1).min(self.rows - 1);
        let tx = fx - c0 as f64;
        let ty = fy - r0 as f64;
        let h = |r: usize, c: usize| self.heights[r * self.cols + c];
        let (h00, h01, h10, h11) = (h(r0, c0), h(r0, c1), h(r1, c0), h(r1, c1));
        let top = h00 + (h01 - h00) * tx;
        let bottom = h10 + (h11 - h10) * tx;
        let height = top + (bottom - top) * ty;
        let dx = ((h01 - h00) * (1.0 - ty) + (h11 - h10) * ty) / self.spacing;
        let dy = (bottom - top) / self.spacing;
        (height, [dx, dy])
    }
}

impl Terrain {
    fn height_and_gradient(&self, x: f64, y: f64) -> (f64, [f64; 2]) {
        match self {
            Terrain::Flat(h) => (*h, [0.0, 0.0]),
            Terrain::Bumps { base, bumps } => {
                let mut h = *base;
                let mut g = [0.0, 0.0];
                for b in bumps {
                    let dx = x - b.center[0];
                    let dy = y - b.center[1];
                    let s2 = b.sigma * b.sigma;
                    let e = b.height * (-(dx * dx + dy * dy) / (2.0 * s2)).exp();
                    h += e;
                    g[0] -= e * dx / s2;
                    g[1] -= e * dy / s2;
                }
                (h, g)
            }
            Terrain::Grid(grid) => grid.sample(x, y),
        }
    }

    /// First-order distance to the height surface, positive above it.
    fn signed_distance(&self, p: &Vec3) -> f64 {
        let (h, g) = self.height_and_gradient(p.x, p.y);
        (p.z - h) / (1.0 + g[0] * g[0] + g[1] * g[1]).sqrt()
    }
}

/// Immutable synthetic scene.
#[derive(Clone, Debug)]
pub struct Scene {
    terrain: Option<Terrain>,
    boxes: Vec<BoxSpec>,
    extent: Extent,
}

impl Scene {
    pub fn from_spec(spec: &SceneSpec) -> Result<Self> {
        let terrain = match &spec.terrain {
            None => None,
            Some(TerrainSpec::Flat { height }) => {
                if !height.is_finite() {
                    return Err(Error::Config("flat terrain height must be finite".into()));
                }
                Some(Terrain::Flat(*height))
            }
            Some(TerrainSpec::Bumps { base_height, bumps }) => {
                for b in bumps {
                    if !(b.sigma > 0.0) || !b.height.is_finite() {
                        return Err(Error::Config(format!("invalid bump {b:?}")));
                    }
                }
                Some(Terrain::Bumps {
                    base: *base_height,
                    bumps: bumps.clone(),
                })
            }
            Some(TerrainSpec::Grid {
                origin,
                spacing,
                heights,
            }) => {
                let rows = heights.len();
                let cols = heights.first().map_or(0, Vec::len);
                if rows < 2 || cols < 2 || heights.iter().any(|r| r.len() != cols) {
                    return Err(Error::Config(
                        "height grid must be rectangular with at least 2x2 samples".into(),
                    ));
                }
                if !(*spacing > 0.0) {
                    return Err(Error::Config("height grid spacing must be positive".into()));
                }
                let flat: Vec<f64> = heights.iter().flatten().copied().collect();
                if flat.iter().any(|h| !h.is_finite()) {
                    return Err(Error::Config("height grid contains non-finite values".into()));
                }
                Some(Terrain::Grid(HeightGrid {
                    origin: *origin,
                    spacing: *spacing,
                    rows,
                    cols,
                    heights: flat,
                }))
            }
        };
        for b in &spec.boxes {
            if b.size.iter().any(|s| !(*s > 0.0)) {
                return Err(Error::Config(format!("box sizes must be positive: {b:?}")));
            }
        }
        Ok(Self {
            terrain,
            boxes: spec.boxes.clone(),
            extent: spec.extent.clone(),
        })
    }

    pub fn flat(height: f64, half_extent: f64) -> Self {
        Self {
            terrain: Some(Terrain::Flat(height)),
            boxes: Vec::new(),
            extent: Extent {
                min: [-half_extent, -half_extent],
                max: [half_extent, half_extent],
            },
        }
    }

    pub fn extent(&self) -> &Extent {
        &self.extent
    }

    pub fn is_empty(&self) -> bool {
        self.terrain.is_none() && self.boxes.is_empty()
    }

    /// Seafloor height at `(x, y)`, if the scene has terrain.
    pub fn terrain_height(&self, x: f64, y: f64) -> Option<f64> {
        self.terrain.as_ref().map(|t| t.height_and_gradient(x, y).0)
    }

    /// Negative inside solids, positive in water; `+∞` for an empty scene.
    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        let mut d = self
            .terrain
            .as_ref()
            .map_or(f64::INFINITY, |t| t.signed_distance(p));
        for b in &self.boxes {
            d = d.min(box_sdf(b, p));
        }
        d
    }

    /// Outward surface normal from central differences of the distance.
    pub fn normal(&self, p: &Vec3) -> Vec3 {
        const H: f64 = 1e-4;
        let g = Vec3::new(
            self.signed_distance(&(p + Vec3::x() * H)) - self.signed_distance(&(p - Vec3::x() * H)),
            self.signed_distance(&(p + Vec3::y() * H)) - self.signed_distance(&(p - Vec3::y() * H)),
            self.signed_distance(&(p + Vec3::z() * H)) - self.signed_distance(&(p - Vec3::z() * H)),
        );
        let n = g.norm();
        if n > 0.0 && n.is_finite() {
            g / n
        } else {
            Vec3::z()
        }
    }

    /// Distance along a unit ray to the first surface crossing, up to `max_range`.
    ///
    /// Steps by at least `step`, skipping ahead by the (Lipschitz) distance
    /// bound where it is larger, and refines the crossing by bisection.
    pub fn raycast(&self, origin: &Vec3, dir: &Vec3, max_range: f64, step: f64) -> Option<f64> {
        let sdf = |t: f64| self.signed_distance(&(origin + dir * t));
        let mut t = 0.0;
        let mut d = sdf(t);
        if d <= 0.0 {
            return Some(0.0);
        }
        if !d.is_finite() {
            return None;
        }
        while t < max_range {
            let next = (t + (0.9 * d).max(step)).min(max_range);
            let dn = sdf(next);
            if dn <= 0.0 {
                let (mut lo, mut hi) = (t, next);
                for _ in 0..40 {
                    let mid = 0.5 * (lo + hi);
                    if sdf(mid) > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                return Some(0.5 * (lo + hi));
            }
            t = next;
            d = dn;
        }
        None
    }
}

fn box_sdf(b: &BoxSpec, p: &Vec3) -> f64 {
    let q = Vec3::new(
        (p.x - b.center[0]).abs() - 0.5 * b.size[0],
        (p.y - b.center[1]).abs() - 0.5 * b.size[1],
        (p.z - b.center[2]).abs() - 0.5 * b.size[2],
    );
    let outside = Vec3::new(q.x.max(0.0), q.y.max(0.0), q.z.max(0.0)).norm();
    let inside = q.x.max(q.y).max(q.z).min(0.0);
    outside + inside
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bump_scene() -> Scene {
        Scene::from_spec(&SceneSpec {
            terrain: Some(TerrainSpec::Bumps {
                base_height: 0.0,
                bumps: vec![GaussianBump {
                    center: [0.0, 0.0],
                    height: 1.5,
                    sigma: 3.0,
                }],
            }),
            boxes: vec![BoxSpec {
                center: [6.0, 0.0, 1.4],
                size: [2.0, 2.0, 2.8],
            }],
            extent: Extent {
                min: [-10.0, -10.0],
                max: [10.0, 10.0],
            },
        })
        .unwrap()
    }

    #[test]
    fn flat_floor_distances() {
        let s = Scene::flat(0.0, 10.0);
        assert!((s.signed_distance(&Vec3::new(0.0, 0.0, 2.0)) - 2.0).abs() < 1e-12);
        assert!((s.signed_distance(&Vec3::new(0.0, 0.0, -1.0)) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn bump_distance_close_to_dense_sampling() {
        let s = bump_scene();
        // Dense sampling of the bump surface (terrain only, away from the box).
        let mut surface = Vec::new();
        let step = 0.05;
        let mut x = -8.0;
        while x <= 3.0 {
            let mut y = -8.0;
            while y <= 8.0 {
                surface.push(Vec3::new(x, y, s.terrain_height(x, y).unwrap()));
                y += step;
            }
            x += step;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..40 {
            let (x, y) = (rng.gen_range(-3.0..0.0), rng.gen_range(-3.0..3.0));
            let p = Vec3::new(x, y, s.terrain_height(x, y).unwrap() + rng.gen_range(0.3..4.0));
            let brute = surface.iter().map(|q| (p - q).norm()).fold(f64::INFINITY, f64::min);
            let d = s.signed_distance(&p);
            assert!(d > 0.0);
            assert!(d <= 1.5 * brute + 1e-9 && brute <= 1.5 * d + step, "sdf {d} vs brute {brute}");
        }
    }

    #[test]
    fn sdf_is_lipschitz() {
        let s = bump_scene();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..2000 {
            let a = Vec3::new(rng.gen_range(-9.0..9.0), rng.gen_range(-9.0..9.0), rng.gen_range(-2.0..5.0));
            let b = a + Vec3::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
            let lhs = (s.signed_distance(&a) - s.signed_distance(&b)).abs();
            assert!(lhs <= (a - b).norm() * 1.02 + 1e-9);
        }
    }

    #[test]
    fn box_sdf_inside_and_outside() {
        let b = BoxSpec {
            center: [0.0, 0.0, 0.0],
            size: [2.0, 2.0, 2.0],
        };
        assert!((box_sdf(&b, &Vec3::new(0.0, 0.0, 0.0)) + 1.0).abs() < 1e-12);
        assert!((box_sdf(&b, &Vec3::new(3.0, 0.0, 0.0)) - 2.0).abs() < 1e-12);
        assert!((box_sdf(&b, &Vec3::new(2.0, 2.0, 1.0)) - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn grid_terrain_bilinear() {
        let s = Scene::from_spec(&SceneSpec {
            terrain: Some(TerrainSpec::Grid {
                origin: [0.0, 0.0],
                spacing: 1.0,
                heights: vec![vec![0.0, 1.0], vec![0.0, 1.0]],
            }),
            boxes: vec![],
            extent: Extent {
                min: [0.0, 0.0],
                max: [1.0, 1.0],
            },
        })
        .unwrap();
        assert!((s.terrain_height(0.25, 0.5).unwrap() - 0.25).abs() < 1e-12);
        let d = s.signed_distance(&Vec3::new(0.5, 0.5, 0.5));
        assert!(d.abs() < 1e-12);
        assert!(Scene::from_spec(&SceneSpec {
            terrain: Some(TerrainSpec::Grid {
                origin: [0.0, 0.0],
                spacing: 1.0,
                heights: vec![vec![0.0, 1.0], vec![0.0]],
            }),
            boxes: vec![],
            extent: Extent { min: [0.0, 0.0], max: [1.0, 1.0] },
        })
        .is_err());
    }

    #[test]
    fn raycast_hits_floor() {
        let s = Scene::flat(0.0, 10.0);
        let t = s
            .raycast(&Vec3::new(0.0, 0.0, 5.0), &-Vec3::z(), 20.0, 0.05)
            .unwrap();
        assert!((t - 5.0).abs() < 1e-6);
        assert!(s.raycast(&Vec3::new(0.0, 0.0, 5.0), &Vec3::z(), 20.0, 0.05).is_none());
    }
}
