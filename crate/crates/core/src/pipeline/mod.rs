//! The online decode-control loop, its session log, the offline training
//! stage, and the line-delimited control service.

mod config;
mod control;
mod serve;
mod session;
mod source;
mod stages;

pub use config::{PipelineConfig, ScheduleEntry, ServeSection, SourceConfig, TrainSection};
pub use control::{parse_inbound, Control, Inbound, Reply, PROTOCOL_VERSION};
pub use serve::{serve, ServiceHandle};
pub use session::{
    read_session, replay_session, run_session, ReplaySummary, SessionHeader, SessionRecord,
    SessionWriter, SESSION_FORMAT_VERSION,
};
pub use source::Source;
pub use stages::{load_model, run_eval, run_synth, run_train, ModelFile};

use serde::{Deserialize, Serialize};

use crate::command::{
    ComboResolver, IntegratorParams, IntegratorState, Move, MoveEvent,
};
use crate::error::{Error, Result};
use crate::features::assemble_features;
use crate::model::{forward, Posterior, Weights};
use crate::robot::{Pose, RobotState};
use crate::signal::{gate_artifacts, preprocess, standard_filter, GateDecision};
use crate::synth::{ClassLabel, N_CLASSES};

/// One decode hop as seen by telemetry consumers and the session log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename = "tick")]
pub struct TickReport {
    pub v: u32,
    pub tick: u64,
    /// Class the window was drawn from, if known.
    pub source_class: Option<ClassLabel>,
    /// The window failed the amplitude gate; posterior is uniform and the
    /// accumulators only leaked.
    pub rejected: bool,
    pub posterior: [f64; N_CLASSES],
    /// Indexed by base move in table order: defense, forward, punch,
    /// heavy_punch, kick.
    pub accumulators: [f64; 5],
    pub refractory_remaining: u32,
    pub triggered: Option<Move>,
    pub events: Vec<MoveEvent>,
    pub robot_angles: Pose,
    pub active_move: Option<Move>,
    pub queue_len: usize,
    pub dropped_moves: u64,
    /// `[channel][band]` powers of the preprocessed window; absent when rejected.
    pub band_powers: Option<Vec<[f64; 5]>>,
}

/// Decode-control loop state. `hop` is a pure function of the state, so a
/// decoder rebuilt from the same config and control history reproduces the
/// same reports.
pub struct Decoder {
    cfg: PipelineConfig,
    weights: Weights,
    source: Source,
    integrator: IntegratorState,
    resolver: ComboResolver,
    robot: RobotState,
    injection: Option<(ClassLabel, u64)>,
    tick: u64,
    paused: bool,
}

impl Decoder {
    pub fn new(cfg: PipelineConfig, weights: Weights) -> Result<Self> {
        cfg.validate()?;
        if weights.cfg != cfg.model {
            return Err(Error::InvalidParameter(
                "weights were trained with a different model config".into(),
            ));
        }
        let source = Source::open(&cfg.source, cfg.window_samples())?;
        Ok(Self {
            integrator: IntegratorState::new(&cfg.integrator),
            resolver: ComboResolver::new(cfg.integrator.combo_window),
            robot: RobotState::new(cfg.servo_k),
            source,
            weights,
            cfg,
            injection: None,
            tick: 0,
            paused: false,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn next_tick(&self) -> u64 {
        self.tick
    }

    pub fn is_paused(&self) -> bool {
        self.paused
    }

    pub fn robot(&self) -> &RobotState {
        &self.robot
    }

    pub fn integrator(&self) -> &IntegratorState {
        &self.integrator
    }

    /// Class driving the next window: an active injection, else the schedule.
    pub fn intended_class(&self, tick: u64) -> Option<ClassLabel> {
        match self.injection {
            Some((c, until)) if tick < until => Some(c),
            _ => self.cfg.scheduled_class(tick),
        }
    }

    /// Apply a control message at the current tick boundary. On error the
    /// state is unchanged.
    pub fn apply(&mut self, msg: &Control) -> Result<()> {
        match msg {
            Control::SetParams { lambda, theta, refractory, combo_window } => {
                let mut p: IntegratorParams = self.cfg.integrator;
                if let Some(v) = lambda {
                    p.lambda = *v;
                }
                if let Some(v) = theta {
                    p.theta = *v;
                }
                if let Some(v) = refractory {
                    p.refractory = *v;
                }
                if let Some(v) = combo_window {
                    p.combo_window = *v;
                }
                p.validate()?;
                self.cfg.integrator = p;
                self.integrator.set_params(&p);
                self.resolver.set_window(p.combo_window);
            }
            Control::Inject { class_id, hold_hops } => {
                let c = ClassLabel::new(*class_id)?;
                self.injection = Some((c, self.tick + hold_hops));
            }
            Control::Pause => self.paused = true,
            Control::Resume => self.paused = false,
            Control::SetSource { source, schedule } => {
                let s = Source::open(source, self.cfg.window_samples())?;
                self.source = s;
                self.cfg.source = source.clone();
                if let Some(sched) = schedule {
                    self.cfg.schedule = sched.clone();
                }
            }
        }
        Ok(())
    }

    /// Run one hop. Returns `None` when the source is exhausted.
    pub fn hop(&mut self) -> Result<Option<TickReport>> {
        let tick = self.tick;
        let class = self.intended_class(tick);
        let Some((window, source_class)) = self.source.next(tick, class, self.cfg.window_samples())
        else {
            return Ok(None);
        };
        if tick > 0 {
            self.robot.advance(self.cfg.hop_ms, self.cfg.robot_dt_ms);
        }

        let gate = gate_artifacts(&window, self.cfg.amp_limit_uv)?;
        let (posterior, triggered, band_powers) = match gate {
            GateDecision::Accept => {
                let features = assemble_features(&preprocess(&window, standard_filter())?)?;
                let posterior = Posterior::from_logits(&forward(&self.weights, &features)?);
                let triggered = self.integrator.integrate(&posterior);
                (posterior, triggered, Some(features.band_powers()))
            }
            GateDecision::Reject { .. } => {
                self.integrator.leak();
                (Posterior::uniform(), None, None)
            }
        };
        let events = self.resolver.step(tick, triggered);
        for e in &events {
            self.robot.dispatch(e.mv);
        }
        self.tick += 1;
        Ok(Some(TickReport {
            v: PROTOCOL_VERSION,
            tick,
            source_class,
            rejected: band_powers.is_none(),
            posterior: posterior.probs,
            accumulators: self.integrator.accumulators,
            refractory_remaining: self.integrator.refractory_remaining,
            triggered,
            events,
            robot_angles: self.robot.pose(),
            active_move: self.robot.active.as_ref().map(|a| a.mv),
            queue_len: self.robot.queue.len(),
            dropped_moves: self.robot.dropped_moves,
            band_powers,
        }))
    }
}
