use std::sync::OnceLock;

use serde::Serialize;

use super::{JointId, N_JOINTS};
use crate::command::Move;

pub const MAX_TRAJECTORY_MS: u64 = 3000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Waypoint {
    pub targets: [f64; N_JOINTS],
    pub duration_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    #[serde(rename = "move")]
    pub mv: Move,
    pub waypoints: Vec<Waypoint>,
}

impl Trajectory {
    pub fn total_ms(&self) -> u64 {
        self.waypoints.iter().map(|w| w.duration_ms).sum()
    }
}

fn wp(duration_ms: u64, joints: &[(JointId, f64)]) -> Waypoint {
    let mut targets = [0.0; N_JOINTS];
    for &(j, deg) in joints {
        targets[j.index()] = deg;
    }
    Waypoint { targets, duration_ms }
}

fn neutral(duration_ms: u64) -> Waypoint {
    wp(duration_ms, &[])
}

use JointId::*;

fn step_in() -> [Waypoint; 2] {
    [
        wp(250, &[(HipR, 35.0), (KneeR, -30.0), (Torso, 8.0)]),
        wp(200, &[(HipL, 20.0), (KneeL, -15.0), (Torso, 8.0)]),
    ]
}

fn jab() -> [Waypoint; 2] {
    [
        wp(200, &[(ShoulderL, 30.0), (ElbowL, 90.0)]),
        wp(250, &[(ShoulderL, 90.0), (ElbowL, 0.0), (Torso, -10.0)]),
    ]
}

fn cross() -> [Waypoint; 2] {
    [
        wp(300, &[(ShoulderR, -20.0), (ElbowR, 110.0), (Torso, -25.0)]),
        wp(300, &[(ShoulderR, 95.0), (ElbowR, 5.0), (Torso, 30.0)]),
    ]
}

fn kick() -> [Waypoint; 2] {
    [
        wp(250, &[(HipR, 20.0), (KneeR, 90.0), (ShoulderL, 20.0), (ShoulderR, 20.0)]),
        wp(250, &[(HipR, 85.0), (KneeR, 5.0), (ShoulderL, 20.0), (ShoulderR, 20.0), (Torso, -15.0)]),
    ]
}

fn build(mv: Move) -> Trajectory {
    let mut w: Vec<Waypoint> = Vec::new();
    match mv {
        Move::Defense => {
            w.push(wp(400, &[(ShoulderL, 60.0), (ShoulderR, 60.0), (ElbowL, 100.0), (ElbowR, 100.0), (Torso, -10.0)]));
            w.push(neutral(300));
        }
        Move::Forward => {
            w.extend(step_in());
            w.push(neutral(300));
        }
        Move::Punch => {
            w.extend(jab());
            w.push(neutral(300));
        }
        Move::HeavyPunch => {
            w.extend(cross());
            w.push(neutral(400));
        }
        Move::Kick => {
            w.extend(kick());
            w.push(neutral(400));
        }
        Move::PunchCombo => {
            w.extend(step_in());
            w.extend(jab());
            w.push(wp(200, &[(ShoulderL, 30.0), (ElbowL, 90.0)]));
            w.push(wp(250, &[(ShoulderL, 90.0), (ElbowL, 0.0), (Torso, -10.0)]));
            w.push(neutral(400));
        }
        Move::Uppercut => {
            w.extend(step_in());
            w.push(wp(300, &[(KneeL, 40.0), (KneeR, 40.0), (ShoulderR, -10.0), (ElbowR, 100.0)]));
            w.push(wp(300, &[(ShoulderR, 115.0), (ElbowR, 60.0), (Torso, 20.0)]));
            w.push(neutral(400));
        }
        Move::KickCombo => {
            w.extend(step_in());
            w.extend(kick());
            w.push(wp(200, &[(HipR, 20.0), (KneeR, 90.0)]));
            w.push(wp(250, &[(HipR, 100.0), (KneeR, 0.0), (Torso, -20.0)]));
            w.push(neutral(400));
        }
        Move::Hadoken => {
            w.push(wp(500, &[(ShoulderL, 30.0), (ShoulderR, 30.0), (ElbowL, 110.0), (ElbowR, 110.0), (Torso, -20.0)]));
            w.push(wp(400, &[(ShoulderL, 90.0), (ShoulderR, 90.0), (ElbowL, 0.0), (ElbowR, 0.0), (Torso, 10.0)]));
            w.push(wp(300, &[(ShoulderL, 90.0), (ShoulderR, 90.0), (Torso, 10.0)]));
            w.push(neutral(400));
        }
    }
    Trajectory { mv, waypoints: w }
}

/// Static trajectory for a move.
pub fn trajectory_for(m: Move) -> &'static Trajectory {
    static TABLE: OnceLock<Vec<Trajectory>> = OnceLock::new();
    &TABLE.get_or_init(|| Move::ALL.iter().map(|&m| build(m)).collect())[m.row()]
}
