use serde::{Deserialize, Serialize};

use super::{Move, MoveEvent};

pub const DEFAULT_COMBO_WINDOW: u64 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComboRule {
    pub first: Move,
    pub second: Move,
    pub result: Move,
}

pub const COMBO_RULES: [ComboRule; 4] = [
    ComboRule { first: Move::Forward, second: Move::Punch, result: Move::PunchCombo },
    ComboRule { first: Move::Forward, second: Move::HeavyPunch, result: Move::Uppercut },
    ComboRule { first: Move::Forward, second: Move::Kick, result: Move::KickCombo },
    ComboRule { first: Move::Punch, second: Move::HeavyPunch, result: Move::Hadoken },
];

pub fn combo_for(first: Move, second: Move) -> Option<Move> {
    COMBO_RULES.iter().find(|r| r.first == first && r.second == second).map(|r| r.result)
}

fn starts_rule(m: Move) -> bool {
    COMBO_RULES.iter().any(|r| r.first == m)
}

/// Hold-and-upgrade resolver. A move that opens a rule is held for up to
/// `window` ticks waiting for its partner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComboResolver {
    pub window: u64,
    held: Option<(Move, u64)>,
}

impl ComboResolver {
    pub fn new(window: u64) -> Self {
        Self { window, held: None }
    }

    pub fn held(&self) -> Option<(Move, u64)> {
        self.held
    }

    /// Process tick `tick` with an optional fresh trigger. Expiry of an
    /// existing hold is handled before the trigger.
    pub fn step(&mut self, tick: u64, trigger: Option<Move>) -> Vec<MoveEvent> {
        let mut out = Vec::new();
        if let Some((m, t0)) = self.held {
            if tick >= t0 + self.window {
                out.push(MoveEvent::base(t0 + self.window, m));
                self.held = None;
            }
        }
        let Some(new) = trigger else { return out };
        if let Some((m, _)) = self.held.take() {
            if let Some(c) = combo_for(m, new) {
                out.push(MoveEvent::combo(tick, c));
                return out;
            }
            out.push(MoveEvent::base(tick, m));
        }
        if starts_rule(new) {
            self.held = Some((new, tick));
        } else {
            out.push(MoveEvent::base(tick, new));
        }
        out
    }

    /// Release any held move at `tick`.
    pub fn flush(&mut self, tick: u64) -> Vec<MoveEvent> {
        self.held.take().map(|(m, _)| MoveEvent::base(tick, m)).into_iter().collect()
    }

    pub fn set_window(&mut self, window: u64) {
        self.window = window;
    }
}
