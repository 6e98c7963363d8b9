//! Dataset generation, training and model inspection.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use slabnop::grf::{generate_dataset, GrfSpec, TrainingDataset};
use slabnop::neural::{
    load_model, save_model, train, DeepONet, DeepONetConfig, Fno, FnoConfig, NeuralModel, TrainConfig, TrainState,
};
use slabnop::{gauss_legendre, Grid1D, ReferenceParams};

use crate::error::{config_err, Result};
use crate::output::write_loss_csv;
use crate::paths::Paths;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub output: PathBuf,
    #[serde(default = "default_samples")]
    pub n_samples: usize,
    #[serde(default = "default_grid")]
    pub grid: Grid1D,
    #[serde(default = "default_order")]
    pub quadrature_order: usize,
    #[serde(default)]
    pub reference: ReferenceParams,
    #[serde(default)]
    pub grf: GrfSpec,
    #[serde(default = "default_data_tolerance")]
    pub tolerance: f64,
}

fn default_samples() -> usize {
    1000
}

fn default_grid() -> Grid1D {
    Grid1D::new(10.0, 100).expect("valid grid")
}

fn default_order() -> usize {
    32
}

fn default_data_tolerance() -> f64 {
    1e-10
}

#[derive(Debug, Clone)]
pub struct DataSummary {
    pub path: PathBuf,
    pub manifest: PathBuf,
    pub dataset: TrainingDataset,
}

impl DataSummary {
    pub fn text(&self) -> String {
        let st = &self.dataset.stats;
        let mut s = String::new();
        let _ = writeln!(s, "wrote {} samples to {}", self.dataset.n_samples(), self.path.display());
        let _ = writeln!(s, "manifest: {}", self.manifest.display());
        let _ = writeln!(
            s,
            "reference: sigma_t {}, sigma_s0 {}",
            self.dataset.reference.sigma_t, self.dataset.reference.sigma_s0
        );
        let _ = writeln!(s, "raw source mean: {:.6e}", st.raw_mean);
        let _ = writeln!(s, "negative source points: {} of {}", st.negative_points, st.total_points);
        let _ = writeln!(s, "flux mean: {:.6e}, max: {:.6e}", st.flux_mean, st.flux_max);
        let mut hist = BTreeMap::new();
        for &it in &st.solve_iterations {
            *hist.entry(it).or_insert(0usize) += 1;
        }
        let _ = writeln!(s, "solve iterations (count x samples):");
        for (it, n) in hist {
            let _ = writeln!(s, "  {it:>6} x {n}");
        }
        s
    }
}

pub fn generate_data(cfg: &DataConfig, paths: &Paths) -> Result<DataSummary> {
    let quad = gauss_legendre(cfg.quadrature_order)?;
    let dataset = generate_dataset(cfg.n_samples, &cfg.grf, &cfg.grid, &quad, cfg.reference, cfg.tolerance)?;
    let path = paths.output(&cfg.output);
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let manifest = dataset.save(&path)?;
    Ok(DataSummary {
        path,
        manifest,
        dataset,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "architecture", rename_all = "snake_case")]
pub enum ArchSpec {
    Fno(FnoConfig),
    #[serde(rename = "deeponet")]
    DeepONet(DeepONetConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainJob {
    pub dataset: PathBuf,
    pub output: PathBuf,
    pub model: ArchSpec,
    /// Seed of the weight initialisation.
    #[serde(default)]
    pub init_seed: u64,
    #[serde(default)]
    pub train: TrainConfig,
}

/// `<model>.adam`: optimizer state for `--resume`.
pub fn state_path(model: &Path) -> PathBuf {
    let mut s = model.as_os_str().to_owned();
    s.push(".adam");
    PathBuf::from(s)
}

/// `<model>.loss.csv`: per-epoch mean loss.
pub fn loss_path(model: &Path) -> PathBuf {
    let mut s = model.as_os_str().to_owned();
    s.push(".loss.csv");
    PathBuf::from(s)
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub model_path: PathBuf,
    pub loss_path: PathBuf,
    pub first_epoch: u64,
    pub epochs_done: u64,
    pub history: Vec<f64>,
    pub reached_target: bool,
}

impl TrainSummary {
    pub fn text(&self) -> String {
        let last = self.history.last().copied().unwrap_or(f64::NAN);
        let min = self.history.iter().copied().fold(f64::INFINITY, f64::min);
        format!(
            "trained epochs {}..{} (total {}), final loss {last:.4e}, best {min:.4e}{}\nmodel: {}\nloss history: {}\n",
            self.first_epoch + 1,
            self.epochs_done,
            self.epochs_done,
            if self.reached_target { ", target reached" } else { "" },
            self.model_path.display(),
            self.loss_path.display()
        )
    }
}

fn fresh_model(job: &TrainJob, dataset: &TrainingDataset) -> Result<NeuralModel> {
    let grid = dataset.grid()?;
    Ok(match &job.model {
        ArchSpec::Fno(c) => NeuralModel::Fno(Fno::new(c.clone(), grid, dataset.reference, job.init_seed)?),
        ArchSpec::DeepONet(c) => {
            NeuralModel::DeepONet(DeepONet::new(c.clone(), grid, dataset.reference, job.init_seed)?)
        }
    })
}

fn same_architecture(model: &NeuralModel, spec: &ArchSpec) -> bool {
    match (model, spec) {
        (NeuralModel::Fno(f), ArchSpec::Fno(c)) => f.config() == c,
        (NeuralModel::DeepONet(d), ArchSpec::DeepONet(c)) => d.config() == c,
        _ => false,
    }
}

/// Trains from scratch, or continues the model and optimizer state saved at
/// the job's output path when `resume` is set.
pub fn run_train(job: &TrainJob, paths: &Paths, resume: bool) -> Result<TrainSummary> {
    let data_path = paths.input(&job.dataset);
    let dataset =
        TrainingDataset::load(&data_path).map_err(|e| config_err(format!("{}: {e}", data_path.display())))?;
    let model_path = paths.output(&job.output);
    let sidecar = state_path(&model_path);
    let (mut model, state) = if resume {
        let loaded = load_model(&model_path)?;
        if !same_architecture(&loaded.model, &job.model) {
            return Err(config_err("model file does not match the configured architecture"));
        }
        let state = TrainState::from_bytes(&fs::read(&sidecar)?)?;
        (loaded.model, Some(state))
    } else {
        (fresh_model(job, &dataset)?, None)
    };
    if model.reference() != dataset.reference {
        return Err(config_err("dataset reference parameters differ from the model's"));
    }
    let first_epoch = state.as_ref().map_or(0, |s| s.epochs_done);
    let (outcome, state) = train(model.network_mut(), &dataset, &job.train, state)?;
    if let Some(dir) = model_path.parent() {
        fs::create_dir_all(dir)?;
    }
    save_model(&model, &job.train.digest(), &model_path)?;
    fs::write(&sidecar, state.to_bytes())?;
    let loss = loss_path(&model_path);
    write_loss_csv(&loss, first_epoch, &outcome.history, resume)?;
    Ok(TrainSummary {
        model_path,
        loss_path: loss,
        first_epoch,
        epochs_done: state.epochs_done,
        history: outcome.history,
        reached_target: outcome.reached_target,
    })
}

pub fn inspect_model(path: &Path) -> Result<String> {
    let loaded = load_model(path)?;
    let m = &loaded.model;
    let config = match m {
        NeuralModel::Fno(f) => serde_json::to_string(f.config()),
        NeuralModel::DeepONet(d) => serde_json::to_string(d.config()),
    }
    .map_err(slabnop::Error::from)?;
    let r = m.reference();
    let mut s = String::new();
    let _ = writeln!(s, "file: {}", path.display());
    let _ = writeln!(s, "architecture: {}", m.architecture());
    let _ = writeln!(s, "config: {config}");
    let _ = writeln!(s, "reference: sigma_t {}, sigma_s0 {}", r.sigma_t, r.sigma_s0);
    let _ = writeln!(s, "grid: {} cm, {} cells", m.grid().length(), m.grid().n_cells());
    let _ = writeln!(s, "parameters: {}", m.network().params().len());
    let _ = writeln!(s, "training config digest: {}", hex::encode(loaded.train_digest));
    let _ = writeln!(s, "checksum: ok");
    Ok(s)
}
