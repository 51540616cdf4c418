use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::config::PipelineConfig;
use crate::error::Result;
use crate::model::{evaluate, read_weights, train, write_weights, Evaluation, TrainReport, Weights};
use crate::synth::{build_dataset, read_dataset, split_dataset, write_dataset, Dataset};

/// Loaded weights plus the hash of the file they came from.
#[derive(Debug, Clone)]
pub struct ModelFile {
    pub weights: Weights,
    pub sha256: String,
    pub path: PathBuf,
}

pub fn load_model(path: &Path) -> Result<ModelFile> {
    let bytes = std::fs::read(path)?;
    let weights = read_weights(bytes.as_slice())?;
    Ok(ModelFile { weights, sha256: hex::encode(Sha256::digest(&bytes)), path: path.to_path_buf() })
}

fn configured_dataset(cfg: &PipelineConfig) -> Result<Dataset> {
    build_dataset(cfg.train.n_per_class, cfg.train.data_seed)
}

/// Build the configured synthetic dataset and write it to `out`.
pub fn run_synth(cfg: &PipelineConfig, out: &Path) -> Result<Dataset> {
    let d = configured_dataset(cfg)?;
    write_dataset(&d, File::create(out)?)?;
    Ok(d)
}

/// Train on the configured dataset (or `data`), then write the weights to
/// `cfg.model_path` and the report to `cfg.train.report_path`.
pub fn run_train(cfg: &PipelineConfig, data: Option<&Path>) -> Result<TrainReport> {
    cfg.validate()?;
    let d = match data {
        Some(p) => read_dataset(File::open(p)?)?,
        None => configured_dataset(cfg)?,
    };
    let (tr, va) = split_dataset(&d, cfg.train.train_fraction, cfg.train.split_seed)?;
    let (w, report) = train(&tr, &va, &cfg.model, &cfg.train.train_config())?;
    write_weights(&w, File::create(&cfg.model_path)?)?;
    serde_json::to_writer_pretty(BufWriter::new(File::create(&cfg.train.report_path)?), &report)?;
    Ok(report)
}

/// Evaluate the model at `cfg.model_path` on `data`, or on the validation
/// split of the configured dataset.
pub fn run_eval(cfg: &PipelineConfig, data: Option<&Path>) -> Result<Evaluation> {
    let model = load_model(&cfg.model_path)?;
    let d = match data {
        Some(p) => read_dataset(File::open(p)?)?,
        None => {
            let d = configured_dataset(cfg)?;
            split_dataset(&d, cfg.train.train_fraction, cfg.train.split_seed)?.1
        }
    };
    evaluate(&model.weights, &d)
}
