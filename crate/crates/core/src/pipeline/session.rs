use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::config::PipelineConfig;
use super::control::Control;
use super::stages::{load_model, ModelFile};
use super::{Decoder, TickReport};
use crate::error::{Error, Result};
use crate::features::LAYOUT_ID;

pub const SESSION_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename = "session")]
pub struct SessionHeader {
    pub v: u32,
    pub layout_id: String,
    pub weights_sha256: String,
    pub config: PipelineConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename = "control")]
struct ControlRecord {
    v: u32,
    tick: u64,
    msg: Control,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SessionRecord {
    Header(SessionHeader),
    /// Control applied before hop `tick`.
    Control { tick: u64, msg: Control },
    /// A report and the exact line it was logged as.
    Tick { report: TickReport, line: String },
}

/// JSON-lines session log: header, then control and tick records in the
/// order they happened.
pub struct SessionWriter {
    out: BufWriter<File>,
}

impl SessionWriter {
    pub fn create(path: &Path, cfg: &PipelineConfig, model: &ModelFile) -> Result<Self> {
        let mut w = Self { out: BufWriter::new(File::create(path)?) };
        let header = SessionHeader {
            v: SESSION_FORMAT_VERSION,
            layout_id: LAYOUT_ID.into(),
            weights_sha256: model.sha256.clone(),
            config: cfg.clone(),
        };
        w.line(&serde_json::to_string(&header)?)?;
        Ok(w)
    }

    fn line(&mut self, s: &str) -> Result<()> {
        self.out.write_all(s.as_bytes())?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    pub fn control(&mut self, tick: u64, msg: &Control) -> Result<()> {
        let rec = ControlRecord { v: SESSION_FORMAT_VERSION, tick, msg: msg.clone() };
        self.line(&serde_json::to_string(&rec)?)
    }

    pub fn tick(&mut self, r: &TickReport) -> Result<()> {
        self.line(&serde_json::to_string(r)?)
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

pub fn read_session(path: &Path) -> Result<Vec<SessionRecord>> {
    let mut records = Vec::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v: Value = serde_json::from_str(&line)?;
        let kind = v.get("type").and_then(Value::as_str).unwrap_or_default().to_string();
        let rec = match (i, kind.as_str()) {
            (0, "session") => {
                let h: SessionHeader = serde_json::from_value(v)?;
                if h.v != SESSION_FORMAT_VERSION {
                    return Err(Error::Format(format!("unsupported session version {}", h.v)));
                }
                SessionRecord::Header(h)
            }
            (0, _) => return Err(Error::Format("session log must start with a header".into())),
            (_, "control") => {
                let c: ControlRecord = serde_json::from_value(v)?;
                SessionRecord::Control { tick: c.tick, msg: c.msg }
            }
            (_, "tick") => SessionRecord::Tick { report: serde_json::from_value(v)?, line },
            (_, other) => {
                return Err(Error::Format(format!("line {}: unknown record type {other:?}", i + 1)))
            }
        };
        records.push(rec);
    }
    if records.is_empty() {
        return Err(Error::Format("empty session log".into()));
    }
    Ok(records)
}

/// Scripted headless run of `cfg.hops` hops. Each report goes to `on_tick`
/// and, if `log` is given, into a session log.
pub fn run_session<F>(
    cfg: &PipelineConfig,
    model: &ModelFile,
    log: Option<&Path>,
    mut on_tick: F,
) -> Result<u64>
where
    F: FnMut(&TickReport) -> Result<()>,
{
    let mut dec = Decoder::new(cfg.clone(), model.weights.clone())?;
    let mut writer = log.map(|p| SessionWriter::create(p, cfg, model)).transpose()?;
    let mut n = 0;
    while n < cfg.hops {
        let Some(r) = dec.hop()? else { break };
        if let Some(w) = writer.as_mut() {
            w.tick(&r)?;
        }
        on_tick(&r)?;
        n += 1;
    }
    if let Some(w) = writer.as_mut() {
        w.flush()?;
    }
    Ok(n)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplaySummary {
    pub ticks: u64,
    pub controls: u64,
    /// Ticks whose regenerated line differs from the logged one.
    pub mismatched: Vec<u64>,
}

impl ReplaySummary {
    pub fn identical(&self) -> bool {
        self.mismatched.is_empty()
    }
}

/// Re-run a logged session with the model named in its header and compare
/// every tick line byte for byte.
pub fn replay_session(path: &Path) -> Result<ReplaySummary> {
    let records = read_session(path)?;
    let SessionRecord::Header(h) = &records[0] else { unreachable!("checked by read_session") };
    let model = load_model(&h.config.model_path)?;
    replay_records(&records, &model)
}

pub fn replay_records(records: &[SessionRecord], model: &ModelFile) -> Result<ReplaySummary> {
    let Some(SessionRecord::Header(h)) = records.first() else {
        return Err(Error::Format("session log must start with a header".into()));
    };
    if h.weights_sha256 != model.sha256 {
        return Err(Error::Format(format!(
            "model hash {} does not match the logged {}",
            model.sha256, h.weights_sha256
        )));
    }
    let mut dec = Decoder::new(h.config.clone(), model.weights.clone())?;
    let mut summary = ReplaySummary { ticks: 0, controls: 0, mismatched: Vec::new() };
    for rec in &records[1..] {
        match rec {
            SessionRecord::Header(_) => return Err(Error::Format("duplicate header".into())),
            SessionRecord::Control { tick, msg } => {
                if *tick != dec.next_tick() {
                    return Err(Error::Format(format!(
                        "control logged for tick {tick} but replay is at {}",
                        dec.next_tick()
                    )));
                }
                dec.apply(msg)?;
                summary.controls += 1;
            }
            SessionRecord::Tick { report, line } => {
                let regenerated = dec
                    .hop()?
                    .ok_or_else(|| Error::Format("source exhausted before log end".into()))?;
                if serde_json::to_string(&regenerated)? != *line {
                    summary.mismatched.push(report.tick);
                }
                summary.ticks += 1;
            }
        }
    }
    Ok(summary)
}
