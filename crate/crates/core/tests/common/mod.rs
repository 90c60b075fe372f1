#![allow(dead_code)]

pub mod oracles;

use std::path::{Path, PathBuf};

use acoustic_projection::nn::TrainConfig;
use acoustic_projection::pipeline::{Bounds, GridConfig, PipelineConfig, Precision};
use acoustic_projection::sim::{BoxSpec, DvlConfig, Extent, GaussianBump, SceneSpec, SonarConfig, TerrainSpec, TrajectorySpec};

/// Small, fast configuration: a short line over a bump and a box.
pub fn tiny_config(out: &Path) -> PipelineConfig {
    PipelineConfig {
        seed: 3,
        scene: SceneSpec {
            terrain: Some(TerrainSpec::Bumps {
                base_height: 0.0,
                bumps: vec![GaussianBump {
                    center: [3.0, 0.5],
                    height: 0.8,
                    sigma: 1.5,
                }],
            }),
            boxes: vec![BoxSpec {
                center: [6.0, -1.0, 0.5],
                size: [1.0, 1.0, 1.0],
            }],
            extent: Extent {
                min: [-10.0, -10.0],
                max: [20.0, 10.0],
            },
        },
        trajectory: TrajectorySpec::Line {
            length: 8.0,
            altitude: 3.0,
            speed: 1.0,
            sample_rate: 8.0,
            start: [0.0, 0.0],
            heading: 0.0,
        },
        sonar: SonarConfig {
            r_max: 6.0,
            n_range_bins: 60,
            n_beams: 32,
            n_elevation_samples: 12,
            ..SonarConfig::default()
        },
        dvl: DvlConfig::janus(25f64.to_radians(), 24f64.to_radians(), 20.0),
        grid: GridConfig {
            cell_size: 0.4,
            bounds: Some(Bounds {
                min: [-2.0, -3.2, -1.2],
                max: [12.0, 3.2, 2.4],
            }),
        },
        feature_resolution: 8,
        truncation: 1.0,
        classifier: TrainConfig {
            learning_rate: 1e-3,
            max_epochs: 2,
            ..TrainConfig::default()
        },
        regressor: TrainConfig {
            learning_rate: 1e-3,
            max_epochs: 2,
            ..TrainConfig::default()
        },
        threshold: 0.5,
        precision: Precision::F32,
        sweep_cell_sizes: vec![0.4, 0.6],
        output_dir: out.to_path_buf(),
    }
}

/// Repository-level example configuration.
pub fn repo_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

/// Every file under `dir`, relative path with contents, sorted by path.
pub fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}
