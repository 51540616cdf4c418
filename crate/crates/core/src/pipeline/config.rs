use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::command::IntegratorParams;
use crate::error::{Error, Result};
use crate::model::{AdamConfig, ModelConfig, TrainConfig};
use crate::robot::DEFAULT_SERVO_K;
use crate::signal::DEFAULT_AMP_LIMIT_UV;
use crate::synth::{ClassLabel, DEFAULT_N_PER_CLASS};

/// Where decode windows come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceConfig {
    /// Fresh synthetic window per hop, class chosen by the schedule.
    Synth { seed: u64 },
    /// Windows read in order from a dataset file.
    Replay { path: PathBuf },
}

/// Class held for `hops` hops starting at hop `start`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleEntry {
    pub start: u64,
    pub hops: u64,
    pub class: ClassLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub n_per_class: usize,
    pub data_seed: u64,
    pub train_fraction: f64,
    pub split_seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub lr: f64,
    pub rest_fraction: f64,
    pub report_path: PathBuf,
}

impl Default for TrainSection {
    fn default() -> Self {
        let tc = TrainConfig::default();
        Self {
            n_per_class: DEFAULT_N_PER_CLASS,
            data_seed: 0,
            train_fraction: 0.8,
            split_seed: 0,
            epochs: tc.epochs,
            batch_size: tc.batch_size,
            seed: tc.seed,
            lr: tc.adam.lr,
            rest_fraction: tc.rest_fraction,
            report_path: PathBuf::from("psyframe-train-report.json"),
        }
    }
}

impl TrainSection {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: self.seed,
            adam: AdamConfig { lr: self.lr, ..AdamConfig::default() },
            rest_fraction: self.rest_fraction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeSection {
    /// Wall-clock pause between hops; 0 runs as fast as possible.
    pub pace_ms: u64,
    /// Per-client tick backlog before the oldest ticks are dropped.
    pub tick_buffer: usize,
    /// Optional session log written while serving.
    pub log_path: Option<PathBuf>,
}

impl Default for ServeSection {
    fn default() -> Self {
        Self { pace_ms: 250, tick_buffer: 64, log_path: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub window_seconds: u64,
    pub hop_ms: u64,
    pub robot_dt_ms: u64,
    /// Hops produced by `run`.
    pub hops: u64,
    pub amp_limit_uv: f64,
    pub servo_k: f64,
    pub model_path: PathBuf,
    pub service_port: u16,
    pub integrator: IntegratorParams,
    pub source: SourceConfig,
    pub schedule: Vec<ScheduleEntry>,
    pub model: ModelConfig,
    pub train: TrainSection,
    pub serve: ServeSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            window_seconds: 2,
            hop_ms: 250,
            robot_dt_ms: 20,
            hops: 40,
            amp_limit_uv: DEFAULT_AMP_LIMIT_UV,
            servo_k: DEFAULT_SERVO_K,
            model_path: PathBuf::from("psyframe-model.jsonl"),
            service_port: 7878,
            integrator: IntegratorParams::default(),
            source: SourceConfig::Synth { seed: 0 },
            schedule: Vec::new(),
            model: ModelConfig::default(),
            train: TrainSection::default(),
            serve: ServeSection::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.window_seconds == 0 {
            return bad("window_seconds must be positive".into());
        }
        if self.robot_dt_ms == 0 || self.hop_ms < self.robot_dt_ms {
            return bad(format!(
                "need 0 < robot_dt_ms <= hop_ms, got {} and {}",
                self.robot_dt_ms, self.hop_ms
            ));
        }
        if (self.window_seconds * 1000) % self.hop_ms != 0 {
            return bad(format!(
                "window of {} s is not a multiple of hop_ms {}",
                self.window_seconds, self.hop_ms
            ));
        }
        if !(self.amp_limit_uv > 0.0) || !(self.servo_k > 0.0) {
            return bad("amp_limit_uv and servo_k must be positive".into());
        }
        if !(self.train.train_fraction > 0.0 && self.train.train_fraction < 1.0) {
            return bad(format!("train_fraction {} not in (0,1)", self.train.train_fraction));
        }
        self.integrator.validate()?;
        self.model.validate()
    }

    pub fn window_samples(&self) -> usize {
        self.window_seconds as usize * crate::signal::FS_HZ
    }

    /// Scheduled class at hop `tick`; later entries win on overlap.
    pub fn scheduled_class(&self, tick: u64) -> Option<ClassLabel> {
        self.schedule
            .iter()
            .rev()
            .find(|e| tick >= e.start && tick < e.start + e.hops)
            .map(|e| e.class)
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Format(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
