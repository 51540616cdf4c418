//! Posterior stream to discrete moves: leaky integration, thresholded
//! triggers, and pairwise combo upgrades.

mod combo;
mod integrator;

pub use combo::{combo_for, ComboResolver, ComboRule, COMBO_RULES, DEFAULT_COMBO_WINDOW};
pub use integrator::{
    IntegratorParams, IntegratorState, DEFAULT_LAMBDA, DEFAULT_REFRACTORY, DEFAULT_THETA,
};

use serde::{Deserialize, Serialize};

use crate::synth::ClassLabel;

pub const N_BASE_MOVES: usize = 5;

/// Robot moves in table order. The first five are base moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Move {
    Defense,
    Forward,
    Punch,
    HeavyPunch,
    Kick,
    PunchCombo,
    Uppercut,
    KickCombo,
    Hadoken,
}

impl Move {
    pub const ALL: [Move; 9] = [
        Move::Defense,
        Move::Forward,
        Move::Punch,
        Move::HeavyPunch,
        Move::Kick,
        Move::PunchCombo,
        Move::Uppercut,
        Move::KickCombo,
        Move::Hadoken,
    ];

    pub const BASE: [Move; N_BASE_MOVES] =
        [Move::Defense, Move::Forward, Move::Punch, Move::HeavyPunch, Move::Kick];

    /// Zero-based table row.
    pub fn row(self) -> usize {
        self as usize
    }

    pub fn is_base(self) -> bool {
        self.row() < N_BASE_MOVES
    }

    pub fn is_combo(self) -> bool {
        !self.is_base()
    }

    pub fn name(self) -> &'static str {
        match self {
            Move::Defense => "defense",
            Move::Forward => "forward",
            Move::Punch => "punch",
            Move::HeavyPunch => "heavy punch",
            Move::Kick => "kick",
            Move::PunchCombo => "punch combo",
            Move::Uppercut => "uppercut",
            Move::KickCombo => "kick combo",
            Move::Hadoken => "Hadoken",
        }
    }

    /// Class that drives a base move; `None` for combos.
    pub fn class(self) -> Option<ClassLabel> {
        ClassLabel::ALL.into_iter().find(|&c| class_to_move(c) == self)
    }
}

/// Fixed class to base move bijection.
pub fn class_to_move(c: ClassLabel) -> Move {
    match c.id() {
        0 => Move::Punch,
        1 => Move::Defense,
        2 => Move::HeavyPunch,
        3 => Move::Forward,
        _ => Move::Kick,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventSource {
    Base,
    Combo,
}

/// A move released to the robot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveEvent {
    pub tick: u64,
    #[serde(rename = "move")]
    pub mv: Move,
    pub source: EventSource,
}

impl MoveEvent {
    pub fn base(tick: u64, mv: Move) -> Self {
        Self { tick, mv, source: EventSource::Base }
    }

    pub fn combo(tick: u64, mv: Move) -> Self {
        Self { tick, mv, source: EventSource::Combo }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bijection() {
        let mut seen: Vec<Move> = ClassLabel::ALL.iter().map(|&c| class_to_move(c)).collect();
        seen.sort();
        assert_eq!(seen, Move::BASE.to_vec());
        for m in Move::BASE {
            assert_eq!(class_to_move(m.class().unwrap()), m);
        }
        assert_eq!(Move::Hadoken.class(), None);
    }

    #[test]
    fn pedal_classes() {
        assert_eq!(class_to_move(ClassLabel::new(1).unwrap()), Move::Defense);
        assert_eq!(class_to_move(ClassLabel::new(3).unwrap()), Move::Forward);
        assert_eq!(class_to_move(ClassLabel::new(0).unwrap()), Move::Punch);
    }

    #[test]
    fn serde_names() {
        let e = MoveEvent::combo(4, Move::HeavyPunch);
        let s = serde_json::to_string(&e).unwrap();
        assert_eq!(s, r#"{"tick":4,"move":"heavy_punch","source":"combo"}"#);
    }
}
