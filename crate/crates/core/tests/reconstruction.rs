mod common;


use acoustic_projection::feature_grid::FeatureGrid;
use acoustic_projection::geometry::{Pose, Vec3};
use acoustic_projection::grid::GridSpec;
use acoustic_projection::nn::{build_classifier, build_regressor};
use acoustic_projection::reconstruction::{
    export_ply, fuse_prediction, import_ply, marching_cubes, predict_cells, PlyFormat,
};
use acoustic_projection::sim::{SonarConfig, SonarImage};
use acoustic_projection::tsdf::TsdfGrid;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use common::oracles::*;

#[test]
fn sphere_is_watertight_and_accurate() {
    let mesh = sphere_mesh();
    assert!(!mesh.is_empty());
    mesh.validate().unwrap();
    let uses = edge_uses(&mesh);
    assert!(uses.values().all(|&n| n == 2), "open or non-manifold edges");
    let sq: f64 = mesh.vertices.iter().map(|v| (v.norm() - 2.0).powi(2)).sum();
    let rms = (sq / mesh.vertices.len() as f64).sqrt();
    assert!(rms <= 0.05, "rms {rms}");
    assert!(mesh.vertices.iter().all(|v| (v.norm() - 2.0).abs() <= 0.1));
    // Normals point toward positive distance, i.e. outward.
    for t in 0..mesh.triangles.len() {
        let [a, b, c] = mesh.triangle(t);
        assert!(mesh.face_normal(t).dot(&((a + b + c) / 3.0)) > 0.0);
    }
    for t in 0..mesh.triangles.len() {
        assert!(mesh.area(t) > 1e-12);
    }
}

#[test]
fn affine_fields_mesh_onto_their_plane() {
    let spec = GridSpec::new([-1.0, -1.0, -1.0], 0.2, [10, 10, 10]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let n = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)).normalize();
        let off: f64 = rng.gen_range(-0.3..0.3);
        let t = sampled(spec, 100.0, |p| n.dot(p) - off);
        let mesh = marching_cubes(&t, 0.0);
        assert!(!mesh.is_empty());
        for v in &mesh.vertices {
            assert!((n.dot(v) - off).abs() <= 0.1 + 1e-9);
        }
        for k in 0..mesh.triangles.len() {
            assert!(mesh.face_normal(k).dot(&n) > 0.0);
        }
    }
    let flat = sampled(spec, 1.0, |p| p.z);
    let mesh = marching_cubes(&flat, 0.0);
    assert!(mesh.vertices.iter().all(|v| v.z.abs() <= 0.1));
}

#[test]
fn unobserved_tsdf_gives_empty_mesh() {
    let spec = GridSpec::new([0.0; 3], 0.5, [4, 4, 4]).unwrap();
    assert!(marching_cubes(&TsdfGrid::new(spec, 1.0).unwrap(), 0.0).is_empty());
    // A crossing next to an unobserved corner is skipped.
    let mut t = sampled(spec, 1.0, |p| p.z - 1.0);
    let mut partial = TsdfGrid::new(spec, 1.0).unwrap();
    for i in 0..t.len() {
        if spec.coords(i)[0] != 2 {
            partial.update(i, t.distance(i));
        }
    }
    let full = marching_cubes(&t, 0.0).triangles.len();
    let part = marching_cubes(&partial, 0.0).triangles.len();
    assert!(part < full && part > 0);
    t.update(0, 0.0);
}

#[test]
fn sphere_ply_roundtrip() {
    let mesh = sphere_mesh();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("sphere.ply");
    export_ply(&mesh, &p, PlyFormat::BinaryLittleEndian).unwrap();
    let back = import_ply(&p).unwrap();
    assert_eq!(back, mesh);
    let p2 = dir.path().join("sphere2.ply");
    export_ply(&back, &p2, PlyFormat::BinaryLittleEndian).unwrap();
    assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(&p2).unwrap());
}

fn column() -> TsdfGrid {
    TsdfGrid::new(GridSpec::new([-0.05, -0.05, -1.05], 0.1, [1, 1, 21]).unwrap(), 0.5).unwrap()
}

#[test]
fn fuse_sign_convention() {
    let mut t = column();
    let spec = *t.spec();
    let c = spec.center(0, 0, 10);
    assert!(c.norm() < 1e-12);
    fuse_prediction(&mut t, &c, 0.0, &Vec3::z());
    assert!(t.distance(spec.index(0, 0, 10)).abs() < 1e-12);
    assert!((t.distance(spec.index(0, 0, 11)) - 0.1).abs() < 1e-12);
    assert!((t.distance(spec.index(0, 0, 9)) + 0.1).abs() < 1e-12);
    // Samples reach ±τ around the surface and no further.
    assert_eq!(t.weight(spec.index(0, 0, 15)), 1.0);
    assert_eq!(t.weight(spec.index(0, 0, 16)), 0.0);
    assert_eq!(t.weight(spec.index(0, 0, 4)), 0.0);
}

#[test]
fn agreeing_predictions_average_to_either() {
    let mut one = column();
    let mut two = column();
    let spec = *one.spec();
    // Cells 10 and 12 both see the surface at z = -0.03.
    fuse_prediction(&mut one, &spec.center(0, 0, 10), 0.03, &Vec3::z());
    fuse_prediction(&mut two, &spec.center(0, 0, 10), 0.03, &Vec3::z());
    fuse_prediction(&mut two, &spec.center(0, 0, 12), 0.23, &Vec3::z());
    for i in 0..one.len() {
        if one.weight(i) > 0.0 && two.weight(i) > 0.0 {
            assert!((one.distance(i) - two.distance(i)).abs() < 1e-9);
        }
    }
}

fn plane_predictions(spec: GridSpec, n: Vec3, off: f64) -> Vec<(Vec3, f64)> {
    (0..spec.cell_count())
        .map(|i| spec.center_of(i))
        .map(|c| (c, n.dot(&c) - off))
        .filter(|(_, d)| d.abs() < 0.45)
        .collect()
}

#[test]
fn plane_predictions_mesh_onto_plane_in_any_order() {
    let spec = GridSpec::new([-1.0, -1.0, -1.0], 0.1, [20, 20, 20]).unwrap();
    let n = Vec3::new(0.2, -0.3, 1.0).normalize();
    let mut preds = plane_predictions(spec, n, 0.07);
    let mut a = TsdfGrid::new(spec, 0.5).unwrap();
    for (c, d) in &preds {
        fuse_prediction(&mut a, c, *d, &n);
    }
    preds.shuffle(&mut ChaCha8Rng::seed_from_u64(1));
    let mut b = TsdfGrid::new(spec, 0.5).unwrap();
    for (c, d) in &preds {
        fuse_prediction(&mut b, c, *d, &n);
    }
    for i in 0..a.len() {
        assert_eq!(a.weight(i), b.weight(i));
        assert!((a.distance(i) - b.distance(i)).abs() < 1e-9);
    }
    let mesh = marching_cubes(&a, 0.0);
    assert!(!mesh.is_empty());
    for v in &mesh.vertices {
        assert!((n.dot(v) - 0.07).abs() <= 0.05 + 1e-9);
    }
}

#[test]
fn predictions_cover_exactly_the_observed_cells() {
    let spec = GridSpec::new([1.0, -1.0, -1.0], 0.25, [8, 8, 8]).unwrap();
    let mut fg = FeatureGrid::new(spec, 8).unwrap();
    let cfg = SonarConfig::default();
    let img = SonarImage::from_levels(vec![90; cfg.n_range_bins * cfg.n_beams], cfg, 0.0).unwrap();
    fg.integrate_frame(&img, &Pose::identity());
    let observed = (0..spec.cell_count()).filter(|&i| fg.cell(i).is_observed()).count();
    assert!(observed > 0 && observed < spec.cell_count());
    let c = build_classifier::<f32>(8, 1).unwrap();
    let r = build_regressor::<f32>(8, 2).unwrap();
    let all = predict_cells(&fg, &c, &r, 0.0, 1.0).unwrap();
    assert_eq!(all.len(), observed);
    assert!(all.iter().all(|p| p.surface.is_some()));
    let none = predict_cells(&fg, &c, &r, 1.1, 1.0).unwrap();
    assert!(none.iter().all(|p| p.surface.is_none()));
    for p in &all {
        let s = p.surface.unwrap();
        assert!((s.normal.norm() - 1.0).abs() < 1e-9 && s.distance.abs() < 1.0);
    }
    let wrong = build_classifier::<f32>(9, 1).unwrap();
    assert!(predict_cells(&fg, &wrong, &r, 0.5, 1.0).is_err());
}
