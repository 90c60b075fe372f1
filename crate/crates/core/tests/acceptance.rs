//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

mod common;

use std::collections::HashMap;
use std::time::{Duration, Instant};

use acoustic_projection::eval::{brute_force_distance, MeshIndex};
use acoustic_projection::geometry::{exp_map, log_map, TangentDelta, Vec3};
use acoustic_projection::grid::GridSpec;
use acoustic_projection::nn::{build_classifier, build_regressor, LayerSpec, Loss, Model};
use acoustic_projection::pipeline::{self, PipelineConfig, Split};
use acoustic_projection::reconstruction::marching_cubes;
use acoustic_projection::training::sobel_gradients;
use acoustic_projection::tsdf::TsdfGrid;
use common::oracles::*;
use common::{repo_config, snapshot, tiny_config};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn gradients() -> Outcome {
    let start = Instant::now();
    let kinds = [
        LayerSpec::Conv1d {
            out_channels: 4,
            kernel_size: 3,
            stride: 2,
            padding: 1,
        },
        LayerSpec::Dense { out_units: 5 },
        LayerSpec::Relu,
        LayerSpec::Sigmoid,
        LayerSpec::GlobalAveragePool,
        LayerSpec::Flatten,
    ];
    let mut worst: f64 = 0.0;
    for (k, kind) in kinds.into_iter().enumerate() {
        let mut m = Model::<f64>::new((2, 9), &isolated(kind), 10 + k as u64).map_err(|e| e.to_string())?;
        randomize_biases(&mut m, k as u64);
        worst = worst.max(max_fd_error(&m, Loss::LogCosh, 3, 100, k as u64));
    }
    let mut c = build_classifier::<f64>(16, 5).map_err(|e| e.to_string())?;
    randomize_biases(&mut c, 1);
    worst = worst.max(max_fd_error(&c, Loss::Bce, 4, 100, 7));
    let mut r = build_regressor::<f64>(16, 6).map_err(|e| e.to_string())?;
    randomize_biases(&mut r, 2);
    worst = worst.max(max_fd_error(&r, Loss::LogCosh, 4, 100, 8));
    let elapsed = start.elapsed();
    check(
        worst < 1e-4 && elapsed < Duration::from_secs(30),
        format!("max relative error {worst:.2e}, {:.1} s", elapsed.as_secs_f64()),
    )
}

fn exp_log() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let z: f64 = rng.gen_range(-1.0..1.0);
        let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let s = (1.0 - z * z).sqrt();
        let v = Vec3::new(s * phi.cos(), s * phi.sin(), z);
        let back = exp_map(&log_map(&v).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        worst = worst.max((back - v).norm());
        let r: f64 = rng.gen_range(0.0..std::f64::consts::PI - 1e-6);
        let d = TangentDelta::new(r * phi.cos(), r * phi.sin());
        let back = log_map(&exp_map(&d).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        worst = worst.max((back.u - d.u).abs().max((back.v - d.v).abs()));
    }
    check(worst <= 1e-9, format!("max roundtrip error {worst:.2e} over 1000 cases"))
}

fn sobel() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let spec = GridSpec::new([0.0, 0.0, 0.0], 0.1, [6, 5, 7]).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let g = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let c: f64 = rng.gen_range(-0.2..0.2);
        let mut tsdf = TsdfGrid::new(spec, 10.0).map_err(|e| e.to_string())?;
        for idx in 0..spec.cell_count() {
            tsdf.update(idx, g.dot(&spec.center_of(idx)) + c);
        }
        sobel_gradients(&mut tsdf);
        let want = g.normalize();
        for idx in 0..spec.cell_count() {
            if let Some(got) = tsdf.gradient(idx) {
                worst = worst.max((got - want).norm());
            }
        }
    }
    check(worst <= 1e-9, format!("max normal error {worst:.2e} over 100 fields"))
}

fn meshing() -> Outcome {
    let start = Instant::now();
    let mesh = sphere_mesh();
    let watertight = !mesh.is_empty() && edge_uses(&mesh).values().all(|&n| n == 2);
    let sq: f64 = mesh.vertices.iter().map(|v| (v.norm() - 2.0).powi(2)).sum();
    let rms = (sq / mesh.vertices.len().max(1) as f64).sqrt();
    let spec = GridSpec::new([-1.0, -1.0, -1.0], 0.2, [10, 10, 10]).map_err(|e| e.to_string())?;
    let n = Vec3::new(0.3, -0.5, 0.8).normalize();
    let plane = marching_cubes(&sampled(spec, 100.0, |p| n.dot(p) - 0.1), 0.0);
    let plane_err = plane.vertices.iter().map(|v| (n.dot(v) - 0.1).abs()).fold(0.0, f64::max);
    let elapsed = start.elapsed();
    check(
        watertight && rms <= 0.05 && !plane.is_empty() && plane_err <= 0.05 && elapsed < Duration::from_secs(10),
        format!(
            "sphere watertight {watertight}, rms {rms:.4}; plane max error {plane_err:.2e}; {:.1} s",
            elapsed.as_secs_f64()
        ),
    )
}

fn feature_grid() -> Outcome {
    let n = 24;
    let (spec, frames) = run();
    let all: Vec<_> = frames.iter().collect();
    let grid = integrate(spec, n, &all);
    let mut log: HashMap<(usize, usize, usize), (u32, u32)> = HashMap::new();
    for (img, pose) in &frames {
        for idx in 0..spec.cell_count() {
            if let Some((level, bins)) = oracle_observation(img.config(), img, pose, &spec.center_of(idx), n) {
                for a in 0..3 {
                    let e = log.entry((idx, a, bins[a])).or_default();
                    e.0 += level as u32;
                    e.1 += 1;
                }
            }
        }
    }
    let mut mismatches = 0;
    for idx in 0..spec.cell_count() {
        let cell = grid.cell(idx);
        for a in 0..3 {
            for b in 0..n {
                let (sum, count) = log.get(&(idx, a, b)).copied().unwrap_or((0, 0));
                if cell.count(a, b) != count || cell.level_sums()[a * n + b] != sum {
                    mismatches += 1;
                }
            }
        }
    }
    let mut shuffled = all.clone();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(4));
    let invariant = integrate(spec, n, &shuffled) == grid;
    check(
        mismatches == 0 && invariant && frames.len() == 200 && log.len() > 10_000,
        format!(
            "{} frames, grid {:?}, {} observed bins, {mismatches} mismatches, order invariant {invariant}",
            frames.len(),
            spec.dims,
            log.len()
        ),
    )
}

fn swept_floor() -> Outcome {
    let (count, rms, cell) = swept_floor_rms();
    check(count > 5000 && rms <= cell / 2.0, format!("rms {rms:.4} over {count} in-band cells (bound {})", cell / 2.0))
}

/// Runs the repository configuration end to end; returns the config and outcome.
fn end_to_end(dir: &std::path::Path) -> (Option<PipelineConfig>, Outcome) {
    let run = || -> Result<(PipelineConfig, String, bool), String> {
        let mut cfg = PipelineConfig::load(&repo_config("desk.json")).map_err(|e| e.to_string())?;
        cfg.output_dir = dir.to_path_buf();
        let start = Instant::now();
        pipeline::simulate(&cfg).map_err(|e| e.to_string())?;
        pipeline::build(&cfg, Split::Train).map_err(|e| e.to_string())?;
        pipeline::build(&cfg, Split::Eval).map_err(|e| e.to_string())?;
        let ts = pipeline::train_models(&cfg).map_err(|e| e.to_string())?;
        pipeline::reconstruct(&cfg, Split::Eval).map_err(|e| e.to_string())?;
        let ev = pipeline::evaluate(&cfg, None, Split::Eval).map_err(|e| e.to_string())?;
        let elapsed = start.elapsed().as_secs_f64();
        let acc = ts.classifier.best.val_accuracy.unwrap_or(0.0);
        let mse = ts.regressor.best.val_mse.unwrap_or(f64::INFINITY);
        let ok = acc >= 0.9 && mse <= 0.06 && ev.mse <= 0.08 && ev.coverage >= 0.8 && elapsed <= 900.0;
        let detail = format!(
            "classifier accuracy {acc:.4}, regressor mse {mse:.4}, mesh mse {:.4} m^2, coverage {:.3}, {elapsed:.0} s",
            ev.mse, ev.coverage
        );
        Ok((cfg, detail, ok))
    };
    match run() {
        Ok((cfg, detail, ok)) => (Some(cfg), check(ok, detail)),
        Err(e) => (None, Err(e)),
    }
}

fn sweep(cfg: Option<&PipelineConfig>) -> Outcome {
    let cfg = cfg.ok_or("end-to-end run did not complete")?;
    let s = pipeline::sweep(cfg, &cfg.sweep_cell_sizes).map_err(|e| e.to_string())?;
    let rows: Vec<String> = s.rows.iter().map(|r| format!("{}: {:.4}", r.cell_size, r.mse)).collect();
    check(
        s.rows.len() >= 3 && s.inversions <= 1,
        format!("{} inversions; {}", s.inversions, rows.join(", ")),
    )
}

fn determinism() -> Outcome {
    let stages = |dir: &std::path::Path| -> Result<_, String> {
        let cfg = tiny_config(dir);
        let e = |e: acoustic_projection::error::Error| e.to_string();
        pipeline::simulate(&cfg).map_err(e)?;
        pipeline::build(&cfg, Split::Train).map_err(e)?;
        pipeline::build(&cfg, Split::Eval).map_err(e)?;
        pipeline::train_models(&cfg).map_err(e)?;
        pipeline::reconstruct(&cfg, Split::Eval).map_err(e)?;
        pipeline::evaluate(&cfg, None, Split::Eval).map_err(e)?;
        pipeline::sweep(&cfg, &cfg.sweep_cell_sizes).map_err(e)?;
        Ok(snapshot(dir))
    };
    let (a, b) = (tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?);
    let first = stages(a.path())?;
    let second = stages(b.path())?;
    let differing: Vec<String> = first
        .iter()
        .zip(&second)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.display().to_string())
        .collect();
    check(
        first.len() == second.len() && differing.is_empty(),
        format!("{} files compared, differing: {:?}", first.len(), differing),
    )
}

fn index_fuzz() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for case in 0..1000 {
        let count = rng.gen_range(1..60);
        let mesh = random_mesh(&mut rng, count);
        let index = MeshIndex::new(&mesh).map_err(|e| e.to_string())?;
        let r = if case % 4 == 0 { 30.0 } else { 6.0 };
        let p = Vec3::new(rng.gen_range(-r..r), rng.gen_range(-r..r), rng.gen_range(-r..r));
        let slow = brute_force_distance(&p, &mesh).map_err(|e| e.to_string())?;
        worst = worst.max((index.distance(&p) - slow).abs());
    }
    check(worst <= 1e-9, format!("max deviation {worst:.2e} over 1000 cases"))
}

fn report(failed: &mut usize, name: &str, outcome: Outcome) {
    match outcome {
        Ok(d) => println!("PASS criterion {name}: {d}"),
        Err(d) => {
            *failed += 1;
            println!("FAIL criterion {name}: {d}");
        }
    }
}

fn main() {
    let e2e_dir = tempfile::tempdir().expect("temp dir");
    let mut failed = 0;
    report(&mut failed, "1 gradient check", gradients());
    report(&mut failed, "2 exp/log roundtrip", exp_log());
    report(&mut failed, "3 sobel normals", sobel());
    report(&mut failed, "4 marching cubes", meshing());
    report(&mut failed, "5 feature grid", feature_grid());
    report(&mut failed, "6 training tsdf", swept_floor());
    let (cfg, e2e) = end_to_end(e2e_dir.path());
    report(&mut failed, "7 end to end", e2e);
    report(&mut failed, "8 resolution sweep", sweep(cfg.as_ref()));
    report(&mut failed, "9 determinism", determinism());
    report(&mut failed, "10 mesh index", index_fuzz());
    println!("{} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
