//! Artifact-driven pipeline stages: simulate, build, train, reconstruct,
//! evaluate and the resolution sweep.
//!
//! Every stage reads its inputs from and writes its outputs under the
//! configured output directory:
//!
//! ```text
//! dataset/                 frames, index.json, manifest.json
//! build/<split>/           features.sapg, training_tsdf.sapg, samples.sapg
//! train/                   classifier.sapg, regressor.sapg, history.csv
//! reconstruct/<split>/     mesh.ply, tsdf.sapg
//! evaluate/<split>/        report.json, distances.csv
//! sweep/                   sweep.csv
//! ```
//!
//! and a `summary.json` plus a `manifest.json` with output hashes per stage.

pub mod config;
pub mod dataset;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::eval::{evaluate as eval_points, footprint_coverage, sweep_inversions, write_sweep_csv, EvalReport, SweepRow};
use crate::feature_grid::FeatureGrid;
use crate::geometry::Vec3;
use crate::grid::GridSpec;
use crate::nn::{
    build_classifier, build_regressor, load_checkpoint, save_checkpoint, train, CheckpointHeader, Dataset,
    EpochRecord, Loss, Model, Scalar, TrainConfig, TrainResult,
};
use crate::reconstruction::{export_ply, import_ply, reconstruct as reconstruct_grid, PlyFormat, ReconstructionSummary};
use crate::sim::{generate_trajectory, simulate_dvl, simulate_sonar, Scene};
use crate::training::{integrate_range_beam, load_samples, make_samples, save_samples, sobel_gradients};
use crate::tsdf::TsdfGrid;

pub use config::{derive_seed, Bounds, GridConfig, PipelineConfig, Precision, MIN_POSITIVES};
pub use dataset::{read_frame, write_frame, DatasetIndex, DatasetManifest, FrameRecord, Split};

/// Artifact locations below an output directory.
#[derive(Clone, Debug)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn dataset(&self) -> PathBuf {
        self.root.join("dataset")
    }

    pub fn build(&self, split: Split) -> PathBuf {
        self.root.join("build").join(split.name())
    }

    pub fn train(&self) -> PathBuf {
        self.root.join("train")
    }

    pub fn reconstruct(&self, split: Split) -> PathBuf {
        self.root.join("reconstruct").join(split.name())
    }

    pub fn evaluate(&self, split: Split) -> PathBuf {
        self.root.join("evaluate").join(split.name())
    }

    pub fn sweep(&self) -> PathBuf {
        self.root.join("sweep")
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn require(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::io(path, std::io::Error::new(std::io::ErrorKind::NotFound, "required input missing")))
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageManifest {
    pub stage: String,
    pub seed: u64,
    pub config_hash: String,
    /// SHA-256 per output file name.
    pub outputs: BTreeMap<String, String>,
}

fn write_manifest(dir: &Path, stage: &str, cfg: &PipelineConfig, files: &[&str]) -> Result<()> {
    let mut outputs = BTreeMap::new();
    for f in files {
        outputs.insert(f.to_string(), file_sha256(&dir.join(f))?);
    }
    let manifest = StageManifest {
        stage: stage.to_string(),
        seed: cfg.seed,
        config_hash: cfg.hash()?,
        outputs,
    };
    write_json(&dir.join("manifest.json"), &manifest)
}

/// Simulates the survey: one sonar frame per trajectory pose and the DVL
/// ranges at that pose.
pub fn simulate(cfg: &PipelineConfig) -> Result<DatasetManifest> {
    cfg.validate()?;
    let dir = Layout::new(&cfg.output_dir).dataset();
    create_dir(&dir.join("frames"))?;
    let scene = Scene::from_spec(&cfg.scene)?;
    let poses = generate_trajectory(&cfg.trajectory)?;
    let mount = cfg.sonar.mount();
    let sonar_seed = derive_seed(cfg.seed, "sonar");
    let mut frames = Vec::with_capacity(poses.len());
    let mut content = Sha256::new();
    for (i, tp) in poses.iter().enumerate() {
        let sonar_pose = tp.pose.compose(&mount);
        let mut image = simulate_sonar(&scene, &sonar_pose, &cfg.sonar, derive_seed(sonar_seed, &i.to_string()))?;
        image.timestamp = tp.time;
        let file = format!("frames/{i:06}.sapg");
        write_frame(&dir.join(&file), i, &image)?;
        frames.push(FrameRecord {
            index: i,
            time: tp.time,
            file,
            pose: tp.pose,
            dvl_ranges: simulate_dvl(&scene, &tp.pose, &cfg.dvl)?,
        });
    }
    let index = DatasetIndex { frames };
    write_json(&dir.join("index.json"), &index)?;
    content.update(std::fs::read(dir.join("index.json")).map_err(|e| Error::io(dir.join("index.json"), e))?);
    for f in &index.frames {
        let p = f.path(&dir);
        content.update(std::fs::read(&p).map_err(|e| Error::io(&p, e))?);
    }
    let manifest = DatasetManifest {
        seed: cfg.seed,
        config_hash: cfg.hash()?,
        pose_count: poses.len(),
        frame_count: index.frames.len(),
        duration: poses.last().map_or(0.0, |p| p.time),
        content_hash: hex::encode(content.finalize()),
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    log::info!("simulated {} frames into {}", manifest.frame_count, dir.display());
    Ok(manifest)
}

/// Integrates the sonar frames of a split into a feature grid.
pub fn build_feature_grid(cfg: &PipelineConfig, spec: GridSpec, split: Split) -> Result<FeatureGrid> {
    let dir = Layout::new(&cfg.output_dir).dataset();
    let index = DatasetIndex::load(&dir)?;
    let mount = cfg.sonar.mount();
    let mut grid = FeatureGrid::new(spec, cfg.feature_resolution)?;
    for f in index.split(split) {
        let (_, image) = read_frame(&f.path(&dir), &cfg.sonar)?;
        grid.integrate_frame(&image, &f.pose.compose(&mount));
    }
    Ok(grid)
}

/// Fuses the DVL beams of a split into a training TSDF with Sobel gradients.
pub fn build_training_tsdf(cfg: &PipelineConfig, spec: GridSpec, split: Split) -> Result<TsdfGrid> {
    let index = DatasetIndex::load(&Layout::new(&cfg.output_dir).dataset())?;
    let mut tsdf = TsdfGrid::new(spec, cfg.truncation)?;
    for f in index.split(split) {
        for (origin, dir, range) in f.dvl_beams(&cfg.dvl) {
            integrate_range_beam(&mut tsdf, &origin, &dir, range, cfg.dvl.opening_angle);
        }
    }
    sobel_gradients(&mut tsdf);
    Ok(tsdf)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildSummary {
    pub split: Split,
    pub frames: usize,
    pub grid: GridSpec,
    pub cell_count: usize,
    pub feature_cells: usize,
    pub tsdf_cells: usize,
    pub samples: usize,
    pub positives: usize,
    pub regression_targets: usize,
}

pub fn build(cfg: &PipelineConfig, split: Split) -> Result<BuildSummary> {
    cfg.validate()?;
    let layout = Layout::new(&cfg.output_dir);
    require(&layout.dataset().join("index.json"))?;
    let spec = cfg.grid_spec()?;
    let frames = DatasetIndex::load(&layout.dataset())?.split(split).len();
    let features = build_feature_grid(cfg, spec, split)?;
    let tsdf = build_training_tsdf(cfg, spec, split)?;
    let samples = make_samples(&tsdf, &features)?;
    let dir = layout.build(split);
    create_dir(&dir)?;
    features.save(&dir.join("features.sapg"))?;
    tsdf.save(&dir.join("training_tsdf.sapg"))?;
    save_samples(&samples, cfg.feature_resolution, &dir.join("samples.sapg"))?;
    let summary = BuildSummary {
        split,
        frames,
        grid: spec,
        cell_count: spec.cell_count(),
        feature_cells: features.observed_cells().len(),
        tsdf_cells: tsdf.observed_cells().count(),
        samples: samples.len(),
        positives: samples.iter().filter(|s| s.y_b).count(),
        regression_targets: samples.iter().filter(|s| s.y_d.is_some()).count(),
    };
    write_json(&dir.join("summary.json"), &summary)?;
    write_manifest(
        &dir,
        "build",
        cfg,
        &["features.sapg", "training_tsdf.sapg", "samples.sapg", "summary.json"],
    )?;
    log::info!("built {} split: {summary:?}", split.name());
    Ok(summary)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub samples: usize,
    pub parameters: usize,
    pub epochs: usize,
    pub best_epoch: usize,
    pub best: EpochRecord,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub positives: usize,
    pub negatives: usize,
    pub classifier: ModelSummary,
    pub regressor: ModelSummary,
}

fn checkpoint_header<T: Scalar>(model: &Model<T>, n: usize, seed: u64, result: &TrainResult<T>) -> CheckpointHeader {
    let best = result.best();
    let mut metrics = BTreeMap::from([("train_loss".to_string(), best.train_loss), ("val_loss".to_string(), best.val_loss)]);
    if let Some(a) = best.val_accuracy {
        metrics.insert("val_accuracy".into(), a);
    }
    if let Some(m) = best.val_mse {
        metrics.insert("val_mse".into(), m);
    }
    CheckpointHeader {
        arch: model.specs(),
        input: model.input_shape(),
        n,
        seed,
        epoch: result.best_epoch,
        metrics,
        dtype: T::DTYPE.to_string(),
    }
}

fn train_typed<T: Scalar>(cfg: &PipelineConfig, samples_path: &Path, dir: &Path) -> Result<TrainSummary> {
    let (n, samples) = load_samples(samples_path)?;
    if n != cfg.feature_resolution {
        return Err(Error::Config(format!(
            "samples were built with n = {n}, config has n = {}",
            cfg.feature_resolution
        )));
    }
    let len = 3 * n;
    let positives = samples.iter().filter(|s| s.y_b).count();
    let negatives = samples.len() - positives;
    let targets = samples.iter().filter(|s| s.y_d.is_some()).count();
    if positives < MIN_POSITIVES || targets < MIN_POSITIVES {
        return Err(Error::Data(format!(
            "insufficient training data: {positives} in-band samples, {negatives} out-of-band, \
             {targets} with regression targets (need >= {MIN_POSITIVES})"
        )));
    }
    let mut cls_data = Dataset::<T>::new(len, 1);
    let mut reg_data = Dataset::<T>::new(len, 3);
    let mut x = Vec::with_capacity(len);
    for s in &samples {
        x.clear();
        x.extend(s.features.iter().map(|&v| T::of(v as f64)));
        cls_data.push(&x, &[T::of(if s.y_b { 1.0 } else { 0.0 })]);
        if let Some(t) = s.y_d {
            reg_data.push(&x, &[T::of(t.distance), T::of(t.delta.u), T::of(t.delta.v)]);
        }
    }
    drop(samples);

    let mut history = csv::Writer::from_path(dir.join("history.csv"))?;
    history.write_record(["model", "epoch", "train_loss", "val_loss", "val_accuracy", "val_mse"])?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
    let mut run = |name: &str,
                   model: Model<T>,
                   data: &Dataset<T>,
                   tc: &TrainConfig,
                   loss: Loss,
                   init_seed: u64|
     -> Result<ModelSummary> {
        let tc = TrainConfig {
            rng_seed: derive_seed(cfg.seed, &format!("{name}/train")),
            ..tc.clone()
        };
        let parameters = model.param_count();
        log::info!("training {name}: {} samples, {parameters} parameters", data.len());
        let result = train(model, data, &tc, loss)?;
        for r in &result.history {
            history.write_record([
                name.to_string(),
                r.epoch.to_string(),
                r.train_loss.to_string(),
                r.val_loss.to_string(),
                opt(r.val_accuracy),
                opt(r.val_mse),
            ])?;
        }
        let header = checkpoint_header(&result.model, n, init_seed, &result);
        save_checkpoint(&result.model, &header, &dir.join(format!("{name}.sapg")))?;
        log::info!("{name}: best epoch {} of {}: {:?}", result.best_epoch, result.history.len(), result.best());
        Ok(ModelSummary {
            samples: data.len(),
            parameters,
            epochs: result.history.len(),
            best_epoch: result.best_epoch,
            best: result.best().clone(),
        })
    };
    let cls_seed = derive_seed(cfg.seed, "classifier/init");
    let classifier = run(
        "classifier",
        build_classifier::<T>(n, cls_seed)?,
        &cls_data,
        &cfg.classifier,
        Loss::Bce,
        cls_seed,
    )?;
    drop(cls_data);
    let reg_seed = derive_seed(cfg.seed, "regressor/init");
    let regressor = run(
        "regressor",
        build_regressor::<T>(n, reg_seed)?,
        &reg_data,
        &cfg.regressor,
        Loss::LogCosh,
        reg_seed,
    )?;
    history.flush().map_err(|e| Error::io(dir.join("history.csv"), e))?;
    Ok(TrainSummary {
        positives,
        negatives,
        classifier,
        regressor,
    })
}

/// Trains the classifier and then the regressor on the train split samples.
pub fn train_models(cfg: &PipelineConfig) -> Result<TrainSummary> {
    cfg.validate()?;
    let layout = Layout::new(&cfg.output_dir);
    let samples = layout.build(Split::Train).join("samples.sapg");
    require(&samples)?;
    let dir = layout.train();
    create_dir(&dir)?;
    let summary = match cfg.precision {
        Precision::F32 => train_typed::<f32>(cfg, &samples, &dir)?,
        Precision::F64 => train_typed::<f64>(cfg, &samples, &dir)?,
    };
    write_json(&dir.join("summary.json"), &summary)?;
    write_manifest(
        &dir,
        "train",
        cfg,
        &["classifier.sapg", "regressor.sapg", "history.csv", "summary.json"],
    )?;
    Ok(summary)
}

fn load_models<T: Scalar>(cfg: &PipelineConfig) -> Result<(Model<T>, Model<T>)> {
    let dir = Layout::new(&cfg.output_dir).train();
    let mut out = Vec::new();
    for name in ["classifier", "regressor"] {
        let path = dir.join(format!("{name}.sapg"));
        require(&path)?;
        let (model, header) = load_checkpoint::<T>(&path)?;
        if header.n != cfg.feature_resolution {
            return Err(Error::Config(format!(
                "{name} checkpoint was trained for n = {}, config has n = {}",
                header.n, cfg.feature_resolution
            )));
        }
        out.push(model);
    }
    let regressor = out.pop().expect("two models");
    let classifier = out.pop().expect("two models");
    Ok((classifier, regressor))
}

fn reconstruct_features(cfg: &PipelineConfig, features: &FeatureGrid, threshold: f64) -> Result<crate::reconstruction::Reconstruction> {
    if features.resolution() != cfg.feature_resolution {
        return Err(Error::Config(format!(
            "feature grid has n = {}, config has n = {}",
            features.resolution(),
            cfg.feature_resolution
        )));
    }
    match cfg.precision {
        Precision::F32 => {
            let (c, r) = load_models::<f32>(cfg)?;
            reconstruct_grid(features, &c, &r, threshold, cfg.truncation)
        }
        Precision::F64 => {
            let (c, r) = load_models::<f64>(cfg)?;
            reconstruct_grid(features, &c, &r, threshold, cfg.truncation)
        }
    }
}

/// Predicts, fuses and meshes the feature grid of a split.
pub fn reconstruct(cfg: &PipelineConfig, split: Split) -> Result<ReconstructionSummary> {
    cfg.validate()?;
    let layout = Layout::new(&cfg.output_dir);
    let features_path = layout.build(split).join("features.sapg");
    require(&features_path)?;
    let features = FeatureGrid::load(&features_path)?;
    let rec = reconstruct_features(cfg, &features, cfg.threshold)?;
    let dir = layout.reconstruct(split);
    create_dir(&dir)?;
    export_ply(&rec.mesh, &dir.join("mesh.ply"), PlyFormat::BinaryLittleEndian)?;
    rec.tsdf.save(&dir.join("tsdf.sapg"))?;
    write_json(&dir.join("summary.json"), &rec.summary)?;
    write_manifest(&dir, "reconstruct", cfg, &["mesh.ply", "tsdf.sapg", "summary.json"])?;
    log::info!("reconstructed {} split: {:?}", split.name(), rec.summary);
    Ok(rec.summary)
}

/// DVL beam endpoints of a split, the ground truth for evaluation.
pub fn ground_truth_points(cfg: &PipelineConfig, split: Split) -> Result<Vec<Vec3>> {
    let index = DatasetIndex::load(&Layout::new(&cfg.output_dir).dataset())?;
    Ok(index.split(split).iter().flat_map(|f| f.dvl_endpoints(&cfg.dvl)).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub mse: f64,
    pub rmse: f64,
    pub point_count: usize,
    pub triangle_count: usize,
    pub cell_size: f64,
    /// Fraction of ground-truth footprint columns reached by the mesh.
    pub coverage: f64,
}

/// Scores a mesh against the DVL endpoints of `split`. The mesh defaults to
/// the reconstruction of the same split.
pub fn evaluate(cfg: &PipelineConfig, mesh: Option<&Path>, split: Split) -> Result<EvalSummary> {
    cfg.validate()?;
    let layout = Layout::new(&cfg.output_dir);
    let mesh_path = mesh.map_or_else(|| layout.reconstruct(split).join("mesh.ply"), Path::to_path_buf);
    require(&mesh_path)?;
    let mesh = import_ply(&mesh_path)?;
    let points = ground_truth_points(cfg, split)?;
    let report = eval_points(&mesh, &points, cfg.grid.cell_size)?;
    let summary = EvalSummary {
        mse: report.mse,
        rmse: report.rmse(),
        point_count: report.point_count,
        triangle_count: report.triangle_count,
        cell_size: report.cell_size,
        coverage: footprint_coverage(&mesh, &points, cfg.grid.cell_size),
    };
    let dir = layout.evaluate(split);
    create_dir(&dir)?;
    report.write_json(&dir.join("report.json"))?;
    report.write_csv(&points, &dir.join("distances.csv"))?;
    write_json(&dir.join("summary.json"), &summary)?;
    write_manifest(&dir, "evaluate", cfg, &["report.json", "distances.csv", "summary.json"])?;
    log::info!("evaluated {} split: {summary:?}", split.name());
    Ok(summary)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub rows: Vec<SweepRow>,
    pub inversions: usize,
}

/// Rebuilds the eval-split feature grid at each cell size, reconstructs it
/// with the trained models and evaluates it against the eval-split endpoints.
pub fn sweep(cfg: &PipelineConfig, cell_sizes: &[f64]) -> Result<SweepSummary> {
    cfg.validate()?;
    if cell_sizes.is_empty() {
        return Err(Error::Config("resolution sweep needs at least one cell size".into()));
    }
    let layout = Layout::new(&cfg.output_dir);
    require(&layout.dataset().join("index.json"))?;
    let points = ground_truth_points(cfg, Split::Eval)?;
    let mut rows = Vec::with_capacity(cell_sizes.len());
    for &cell in cell_sizes {
        if !(cell > 0.0) {
            return Err(Error::Config(format!("invalid sweep cell size {cell}")));
        }
        let features = build_feature_grid(cfg, cfg.grid_spec_at(cell)?, Split::Eval)?;
        let rec = reconstruct_features(cfg, &features, cfg.threshold)?;
        drop(features);
        let report: EvalReport = eval_points(&rec.mesh, &points, cell)?;
        log::info!("sweep cell {cell}: mse {} over {} triangles", report.mse, report.triangle_count);
        rows.push(SweepRow::from(&report));
    }
    let dir = layout.sweep();
    create_dir(&dir)?;
    write_sweep_csv(&rows, &dir.join("sweep.csv"))?;
    let summary = SweepSummary {
        inversions: sweep_inversions(&rows),
        rows,
    };
    write_json(&dir.join("summary.json"), &summary)?;
    write_manifest(&dir, "sweep", cfg, &["sweep.csv", "summary.json"])?;
    Ok(summary)
}
