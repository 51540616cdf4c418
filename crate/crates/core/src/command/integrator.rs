use serde::{Deserialize, Serialize};

use super::{class_to_move, Move, N_BASE_MOVES};
use crate::error::{Error, Result};
use crate::model::Posterior;
use crate::synth::ClassLabel;

pub const DEFAULT_LAMBDA: f64 = 0.9;
pub const DEFAULT_THETA: f64 = 5.0;
pub const DEFAULT_REFRACTORY: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorParams {
    pub lambda: f64,
    pub theta: f64,
    pub refractory: u32,
    pub combo_window: u64,
}

impl Default for IntegratorParams {
    fn default() -> Self {
        Self {
            lambda: DEFAULT_LAMBDA,
            theta: DEFAULT_THETA,
            refractory: DEFAULT_REFRACTORY,
            combo_window: super::DEFAULT_COMBO_WINDOW,
        }
    }
}

impl IntegratorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(Error::InvalidParameter(format!("lambda {} not in (0,1)", self.lambda)));
        }
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(Error::InvalidParameter(format!("theta {} must be positive", self.theta)));
        }
        if self.combo_window == 0 {
            return Err(Error::InvalidParameter("combo_window must be at least 1".into()));
        }
        Ok(())
    }

    /// Largest value an accumulator can reach with inputs in [0, 1].
    pub fn bound(&self) -> f64 {
        1.0 / (1.0 - self.lambda)
    }
}

/// Per-move leaky accumulators, indexed by table row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorState {
    pub accumulators: [f64; N_BASE_MOVES],
    pub lambda: f64,
    pub theta: f64,
    pub refractory: u32,
    pub refractory_remaining: u32,
}

impl IntegratorState {
    pub fn new(p: &IntegratorParams) -> Self {
        Self {
            accumulators: [0.0; N_BASE_MOVES],
            lambda: p.lambda,
            theta: p.theta,
            refractory: p.refractory,
            refractory_remaining: 0,
        }
    }

    /// Adopt new parameters, keeping accumulators and refractory count.
    pub fn set_params(&mut self, p: &IntegratorParams) {
        self.lambda = p.lambda;
        self.theta = p.theta;
        self.refractory = p.refractory;
    }

    pub fn leak(&mut self) {
        for a in &mut self.accumulators {
            *a *= self.lambda;
        }
    }

    /// One tick. Returns the triggered base move, if any.
    pub fn integrate(&mut self, p: &Posterior) -> Option<Move> {
        if self.refractory_remaining > 0 {
            self.refractory_remaining -= 1;
            self.leak();
            return None;
        }
        for c in ClassLabel::ALL {
            let row = class_to_move(c).row();
            self.accumulators[row] = self.lambda * self.accumulators[row] + p.probs[c.index()];
        }
        let mut best = 0;
        for i in 1..N_BASE_MOVES {
            if self.accumulators[i] > self.accumulators[best] {
                best = i;
            }
        }
        if self.accumulators[best] >= self.theta {
            self.accumulators = [0.0; N_BASE_MOVES];
            self.refractory_remaining = self.refractory;
            Some(Move::BASE[best])
        } else {
            None
        }
    }

    /// Accumulators reordered by class id.
    pub fn by_class(&self) -> [f64; N_BASE_MOVES] {
        let mut out = [0.0; N_BASE_MOVES];
        for c in ClassLabel::ALL {
            out[c.index()] = self.accumulators[class_to_move(c).row()];
        }
        out
    }
}
