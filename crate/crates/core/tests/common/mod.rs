#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::OnceLock;

use psyframe::model::TrainReport;
use psyframe::pipeline::{load_model, run_train, ModelFile, PipelineConfig};

pub struct Trained {
    pub dir: tempfile::TempDir,
    pub cfg: PipelineConfig,
    pub model: ModelFile,
    pub report: TrainReport,
    pub seconds: f64,
}

/// Default-config model, trained once per test binary.
pub fn trained() -> &'static Trained {
    static CELL: OnceLock<Trained> = OnceLock::new();
    CELL.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = PipelineConfig::default();
        cfg.model_path = dir.path().join("model.jsonl");
        cfg.train.report_path = dir.path().join("report.json");
        let t = std::time::Instant::now();
        let report = run_train(&cfg, None).unwrap();
        let seconds = t.elapsed().as_secs_f64();
        let model = load_model(&cfg.model_path).unwrap();
        Trained { dir, cfg, model, report, seconds }
    })
}

pub fn tmp_path(name: &str) -> PathBuf {
    trained().dir.path().join(name)
}
