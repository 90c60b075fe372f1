//! Independent reference computations shared by the integration tests.

use std::collections::HashMap;

use acoustic_projection::feature_grid::FeatureGrid;
use acoustic_projection::geometry::{Pose, Vec3};
use acoustic_projection::grid::GridSpec;
use acoustic_projection::nn::{LayerSpec, Loss, Model};
use acoustic_projection::reconstruction::{marching_cubes, TriangleMesh};
use acoustic_projection::sim::{
    generate_trajectory, simulate_sonar, DvlConfig, Extent, GaussianBump, Scene, SceneSpec, SonarConfig, SonarImage,
    TerrainSpec, TrajectorySpec,
};
use acoustic_projection::training::integrate_range_beam;
use acoustic_projection::tsdf::TsdfGrid;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_inputs(rng: &mut ChaCha8Rng, count: usize, len: usize) -> Vec<f64> {
    (0..count * len).map(|_| rng.gen_range(0.0..1.0)).collect()
}

/// Largest relative error between analytic and central-difference gradients
/// over `samples` randomly chosen parameters.
pub fn max_fd_error(model: &Model<f64>, loss: Loss, batch: usize, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (c, l) = model.input_shape();
    let x = random_inputs(&mut rng, batch, c * l);
    let out = model.output_len();
    let y: Vec<f64> = match loss {
        Loss::Bce => (0..batch).map(|_| if rng.gen_bool(0.5) { 1.0 } else { 0.0 }).collect(),
        Loss::LogCosh => (0..batch * out).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    };
    let (_, grad) = model.gradients(&x, &y, batch, loss).unwrap();
    let loss_at = |i: usize, delta: f64| {
        let mut m = model.clone();
        m.params_mut()[i] += delta;
        m.gradients(&x, &y, batch, loss).unwrap().0
    };
    let central = |i: usize, h: f64| (loss_at(i, h) - loss_at(i, -h)) / (2.0 * h);
    let h = 1e-4;
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let mut kinks = 0;
    while checked < samples {
        let i = rng.gen_range(0..model.param_count());
        let fd = central(i, h);
        // A ReLU switching state inside [θ − h, θ + h] makes the loss
        // non-differentiable there; such draws are detected by comparing
        // with a ten times smaller step and replaced.
        let fine = central(i, h / 10.0);
        if (fd - fine).abs() > 1e-3 * fd.abs().max(fine.abs()).max(1e-6) {
            kinks += 1;
            assert!(kinks <= samples / 10, "too many non-differentiable draws");
            continue;
        }
        let err = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-6);
        worst = worst.max(err);
        checked += 1;
    }
    worst
}

pub fn randomize_biases(model: &mut Model<f64>, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = model.layers().to_vec();
    for layer in layers {
        let start = layer.offset + layer.n_weights;
        for p in &mut model.params_mut()[start..start + layer.n_biases] {
            *p = rng.gen_range(-0.1..0.1);
        }
    }
}

pub fn isolated(kind: LayerSpec) -> Vec<LayerSpec> {
    let conv = LayerSpec::conv_same(3, 3, 1);
    match kind {
        LayerSpec::Conv1d { .. } => vec![kind, LayerSpec::Flatten, LayerSpec::Dense { out_units: 2 }],
        LayerSpec::Dense { .. } => vec![LayerSpec::Flatten, kind],
        LayerSpec::Flatten => vec![conv, kind, LayerSpec::Dense { out_units: 2 }],
        LayerSpec::GlobalAveragePool => vec![conv, kind, LayerSpec::Dense { out_units: 2 }],
        LayerSpec::Relu | LayerSpec::Sigmoid => vec![conv, kind, LayerSpec::Flatten, LayerSpec::Dense { out_units: 2 }],
    }
}

pub fn sonar() -> SonarConfig {
    SonarConfig {
        r_min: 0.5,
        r_max: 8.0,
        n_range_bins: 96,
        azimuth_fov: 80f64.to_radians(),
        n_beams: 48,
        elevation_fov: 20f64.to_radians(),
        n_elevation_samples: 12,
        noise_sigma: 0.05,
        mount_pitch: 40f64.to_radians(),
        ray_step: 0.1,
    }
}

/// 200 frames along a line over a bumpy floor.
pub fn run() -> (GridSpec, Vec<(SonarImage, Pose)>) {
    let scene = Scene::from_spec(&SceneSpec {
        terrain: Some(TerrainSpec::Bumps {
            base_height: 0.0,
            bumps: vec![GaussianBump {
                center: [8.0, 1.0],
                height: 1.5,
                sigma: 2.0,
            }],
        }),
        boxes: vec![],
        extent: Extent {
            min: [-10.0, -10.0],
            max: [30.0, 10.0],
        },
    })
    .unwrap();
    let cfg = sonar();
    let poses = generate_trajectory(&TrajectorySpec::Line {
        length: 20.0,
        altitude: 4.0,
        speed: 1.0,
        sample_rate: 10.0,
        start: [0.0, 0.0],
        heading: 0.1,
    })
    .unwrap();
    assert_eq!(poses.len(), 200);
    let frames = poses
        .iter()
        .enumerate()
        .map(|(i, tp)| {
            let pose = tp.pose.compose(&cfg.mount());
            (simulate_sonar(&scene, &pose, &cfg, i as u64).unwrap(), pose)
        })
        .collect();
    let spec = GridSpec::new([-2.0, -6.0, -1.0], 0.5, [56, 24, 10]).unwrap();
    (spec, frames)
}

/// Independent projection: sensor-frame coordinates from the inverse pose,
/// range window, aperture tests and nearest-bin lookup written out directly.
pub fn oracle_observation(cfg: &SonarConfig, image: &SonarImage, pose: &Pose, c: &Vec3, n: usize) -> Option<(u8, [usize; 3])> {
    let local = pose.rotation().transpose() * (c - pose.translation());
    let r = local.norm();
    if r < cfg.r_min || r > cfg.r_max || r == 0.0 {
        return None;
    }
    let az = local.y.atan2(local.x);
    let el = local.z.atan2(local.x.hypot(local.y));
    if az.abs() > cfg.azimuth_fov / 2.0 || el.abs() > cfg.elevation_fov / 2.0 {
        return None;
    }
    let rb = (((r - cfg.r_min) / cfg.range_bin_width()).floor() as usize).min(cfg.n_range_bins - 1);
    let bb = (((az + cfg.azimuth_fov / 2.0) / cfg.beam_width()).floor() as usize).min(cfg.n_beams - 1);
    let level = image.levels()[rb * cfg.n_beams + bb];
    let dir = (pose.translation() - c) / r;
    let mut bins = [0; 3];
    for a in 0..3 {
        let gamma = dir[a].abs().min(1.0).acos();
        bins[a] = ((gamma / std::f64::consts::FRAC_PI_2 * n as f64) as usize).min(n - 1);
    }
    Some((level, bins))
}

pub fn integrate(spec: GridSpec, n: usize, frames: &[&(SonarImage, Pose)]) -> FeatureGrid {
    let mut g = FeatureGrid::new(spec, n).unwrap();
    for (img, pose) in frames {
        g.integrate_frame(img, pose);
    }
    g
}

/// Janus beams from a lawnmower of poses over the floor `z = 0`, with exact ranges.
pub fn floor_beams(altitude: f64, step: f64) -> Vec<(Vec3, Vec3, f64)> {
    let dvl = DvlConfig::janus(25f64.to_radians(), 4f64.to_radians(), 30.0);
    let mut beams = Vec::new();
    let mut y = 1.0;
    while y <= 9.0 {
        let mut x = 1.0;
        while x <= 9.0 {
            let pose = Pose::from_euler(0.0, 0.0, 0.3, Vec3::new(x, y, altitude));
            for k in 0..4 {
                let d = pose.transform_vector(&dvl.beam(k));
                beams.push((*pose.translation(), d, -altitude / d.z));
            }
            x += step;
        }
        y += 2.0 * step;
    }
    beams
}

/// Parametric interval of a ray inside the box of cell `idx`.
pub fn slab(spec: &GridSpec, idx: usize, o: &Vec3, d: &Vec3) -> (f64, f64) {
    let [i, j, k] = spec.coords(idx);
    let lo = [
        spec.origin[0] + i as f64 * spec.cell_size,
        spec.origin[1] + j as f64 * spec.cell_size,
        spec.origin[2] + k as f64 * spec.cell_size,
    ];
    let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
    for a in 0..3 {
        let hi = lo[a] + spec.cell_size;
        if d[a] == 0.0 {
            if o[a] < lo[a] || o[a] >= hi {
                return (1.0, 0.0);
            }
            continue;
        }
        let ta = (lo[a] - o[a]) / d[a];
        let tb = (hi - o[a]) / d[a];
        t0 = t0.max(ta.min(tb));
        t1 = t1.min(ta.max(tb));
    }
    (t0, t1)
}

pub fn sampled(spec: GridSpec, tau: f64, f: impl Fn(&Vec3) -> f64) -> TsdfGrid {
    let mut t = TsdfGrid::new(spec, tau).unwrap();
    for i in 0..t.len() {
        t.update(i, f(&spec.center_of(i)));
    }
    t
}

pub fn sphere_mesh() -> TriangleMesh {
    let spec = GridSpec::new([-2.6, -2.6, -2.6], 0.1, [52, 52, 52]).unwrap();
    let t = sampled(spec, 100.0, |p| p.norm() - 2.0);
    marching_cubes(&t, 0.0)
}

pub fn edge_uses(mesh: &TriangleMesh) -> HashMap<(usize, usize), usize> {
    let mut uses = HashMap::new();
    for t in &mesh.triangles {
        for e in 0..3 {
            let (a, b) = (t[e], t[(e + 1) % 3]);
            *uses.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
    }
    uses
}

pub fn segment_distance(p: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Plane projection when it lands inside the triangle, else nearest edge.
pub fn oracle_distance(p: &Vec3, t: &[Vec3; 3]) -> f64 {
    let n = (t[1] - t[0]).cross(&(t[2] - t[0]));
    let n = n / n.norm();
    let q = p - n * (p - t[0]).dot(&n);
    let inside = (0..3).all(|k| (t[(k + 1) % 3] - t[k]).cross(&(q - t[k])).dot(&n) >= 0.0);
    if inside {
        return (p - q).norm();
    }
    (0..3).map(|k| segment_distance(p, &t[k], &t[(k + 1) % 3])).fold(f64::INFINITY, f64::min)
}

pub fn random_mesh(rng: &mut ChaCha8Rng, tris: usize) -> TriangleMesh {
    let mut mesh = TriangleMesh::default();
    for _ in 0..tris {
        let c = Vec3::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-2.0..2.0));
        let s = rng.gen_range(0.05..1.5);
        let base = mesh.vertices.len();
        for _ in 0..3 {
            let o = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            mesh.vertices.push(c + o * s);
        }
        mesh.triangles.push([base, base + 1, base + 2]);
    }
    mesh
}

/// RMS error against the plane SDF over in-band cells of a swept flat floor, with the cell size.
pub fn swept_floor_rms() -> (usize, f64, f64) {
    let tau = 1.0;
    let spec = GridSpec::new([0.0, 0.0, -1.6], 0.2, [50, 50, 16]).unwrap();
    let mut tsdf = TsdfGrid::new(spec, tau).unwrap();
    for (o, d, r) in floor_beams(4.0, 0.1) {
        integrate_range_beam(&mut tsdf, &o, &d, r, 4f64.to_radians());
    }
    let mut sq = 0.0;
    let mut count = 0usize;
    for idx in tsdf.observed_cells() {
        let truth = spec.center_of(idx).z;
        if truth.abs() < tau {
            sq += (tsdf.distance(idx) - truth).powi(2);
            count += 1;
        }
    }
    (count, (sq / count.max(1) as f64).sqrt(), spec.cell_size)
}
