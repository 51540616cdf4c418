//! Simulated nine-joint robot: per-move waypoint trajectories, first-order
//! servos, and a bounded move queue.

mod trajectory;

pub use trajectory::{trajectory_for, Trajectory, Waypoint, MAX_TRAJECTORY_MS};

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::command::Move;

pub const N_JOINTS: usize = 9;
pub const JOINT_LIMIT_DEG: f64 = 120.0;
pub const DEFAULT_SERVO_K: f64 = 5.0;
pub const QUEUE_CAPACITY: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointId {
    ShoulderL,
    ShoulderR,
    ElbowL,
    ElbowR,
    HipL,
    HipR,
    KneeL,
    KneeR,
    Torso,
}

impl JointId {
    pub const ALL: [JointId; N_JOINTS] = [
        JointId::ShoulderL,
        JointId::ShoulderR,
        JointId::ElbowL,
        JointId::ElbowR,
        JointId::HipL,
        JointId::HipR,
        JointId::KneeL,
        JointId::KneeR,
        JointId::Torso,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            JointId::ShoulderL => "shoulder_l",
            JointId::ShoulderR => "shoulder_r",
            JointId::ElbowL => "elbow_l",
            JointId::ElbowR => "elbow_r",
            JointId::HipL => "hip_l",
            JointId::HipR => "hip_r",
            JointId::KneeL => "knee_l",
            JointId::KneeR => "knee_r",
            JointId::Torso => "torso",
        }
    }

    pub fn limits(self) -> (f64, f64) {
        (-JOINT_LIMIT_DEG, JOINT_LIMIT_DEG)
    }
}

/// Joint angles in degrees, serialized as a map keyed by joint name.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pose {
    pub shoulder_l: f64,
    pub shoulder_r: f64,
    pub elbow_l: f64,
    pub elbow_r: f64,
    pub hip_l: f64,
    pub hip_r: f64,
    pub knee_l: f64,
    pub knee_r: f64,
    pub torso: f64,
}

impl Pose {
    pub fn from_array(a: [f64; N_JOINTS]) -> Self {
        let [shoulder_l, shoulder_r, elbow_l, elbow_r, hip_l, hip_r, knee_l, knee_r, torso] = a;
        Self { shoulder_l, shoulder_r, elbow_l, elbow_r, hip_l, hip_r, knee_l, knee_r, torso }
    }

    pub fn to_array(&self) -> [f64; N_JOINTS] {
        [
            self.shoulder_l,
            self.shoulder_r,
            self.elbow_l,
            self.elbow_r,
            self.hip_l,
            self.hip_r,
            self.knee_l,
            self.knee_r,
            self.torso,
        ]
    }

    pub fn get(&self, j: JointId) -> f64 {
        self.to_array()[j.index()]
    }
}

pub fn within_limits(angles: &[f64; N_JOINTS]) -> bool {
    JointId::ALL.iter().all(|j| {
        let (lo, hi) = j.limits();
        (lo..=hi).contains(&angles[j.index()])
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveMove {
    pub mv: Move,
    pub waypoint: usize,
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub angles: [f64; N_JOINTS],
    pub active: Option<ActiveMove>,
    pub queue: VecDeque<Move>,
    pub servo_k: f64,
    pub dropped_moves: u64,
}

impl Default for RobotState {
    fn default() -> Self {
        Self::new(DEFAULT_SERVO_K)
    }
}

impl RobotState {
    pub fn new(servo_k: f64) -> Self {
        Self {
            angles: [0.0; N_JOINTS],
            active: None,
            queue: VecDeque::with_capacity(QUEUE_CAPACITY),
            servo_k,
            dropped_moves: 0,
        }
    }

    pub fn is_idle(&self) -> bool {
        self.active.is_none()
    }

    pub fn pose(&self) -> Pose {
        Pose::from_array(self.angles)
    }

    /// Start `m` now if idle, otherwise queue it. Returns false if dropped.
    pub fn dispatch(&mut self, m: Move) -> bool {
        if self.active.is_none() {
            self.active = Some(ActiveMove { mv: m, waypoint: 0, elapsed_ms: 0 });
            true
        } else if self.queue.len() < QUEUE_CAPACITY {
            self.queue.push_back(m);
            true
        } else {
            self.dropped_moves += 1;
            false
        }
    }

    /// Current servo targets: the active waypoint, or neutral when idle.
    pub fn target(&self) -> [f64; N_JOINTS] {
        match &self.active {
            Some(a) => trajectory_for(a.mv).waypoints[a.waypoint].targets,
            None => [0.0; N_JOINTS],
        }
    }

    /// First-order servo update of every joint toward `target`.
    pub fn servo_toward(&mut self, target: &[f64; N_JOINTS], dt_ms: u64) {
        let alpha = 1.0 - (-self.servo_k * dt_ms as f64 / 1000.0).exp();
        for (j, a) in self.angles.iter_mut().enumerate() {
            let next = *a + alpha * (target[j] - *a);
            *a = next.clamp(-JOINT_LIMIT_DEG, JOINT_LIMIT_DEG);
        }
    }

    /// Advance the servos by `dt_ms`, then the active trajectory clock.
    pub fn step(&mut self, dt_ms: u64) {
        if dt_ms == 0 {
            return;
        }
        let target = self.target();
        self.servo_toward(&target, dt_ms);
        let Some(act) = self.active.as_mut() else { return };
        let traj = trajectory_for(act.mv);
        act.elapsed_ms += dt_ms;
        while act.waypoint < traj.waypoints.len()
            && act.elapsed_ms >= traj.waypoints[act.waypoint].duration_ms
        {
            act.elapsed_ms -= traj.waypoints[act.waypoint].duration_ms;
            act.waypoint += 1;
        }
        if act.waypoint == traj.waypoints.len() {
            self.active = self
                .queue
                .pop_front()
                .map(|mv| ActiveMove { mv, waypoint: 0, elapsed_ms: 0 });
        }
    }

    /// Step `total_ms` in increments of at most `dt_ms`.
    pub fn advance(&mut self, total_ms: u64, dt_ms: u64) {
        let mut left = total_ms;
        while left > 0 {
            let d = left.min(dt_ms);
            self.step(d);
            left -= d;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn servo_closed_form() {
        let mut s = RobotState::new(5.0);
        let mut target = [0.0; N_JOINTS];
        target[0] = 90.0;
        s.servo_toward(&target, 100);
        assert!((s.angles[0] - 90.0 * (1.0 - (-0.5f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn idle_is_fixed_point() {
        let mut s = RobotState::default();
        let before = s.clone();
        s.step(20);
        s.step(137);
        assert_eq!(s, before);
    }

    #[test]
    fn queue_and_drop() {
        let mut s = RobotState::default();
        assert!(s.dispatch(Move::Punch));
        assert_eq!(s.active.as_ref().unwrap().mv, Move::Punch);
        assert!(s.dispatch(Move::Kick));
        assert!(s.dispatch(Move::Defense));
        assert!(!s.dispatch(Move::Hadoken));
        assert_eq!(s.dropped_moves, 1);
        assert_eq!(s.queue, VecDeque::from(vec![Move::Kick, Move::Defense]));
    }

    #[test]
    fn fifo_drain() {
        let mut s = RobotState::default();
        for m in [Move::Punch, Move::Kick, Move::Defense] {
            s.dispatch(m);
        }
        let mut order = vec![];
        let mut last = None;
        for _ in 0..1000 {
            let cur = s.active.as_ref().map(|a| a.mv);
            if cur != last {
                if let Some(m) = cur {
                    order.push(m);
                }
                last = cur;
            }
            s.step(20);
        }
        assert_eq!(order, vec![Move::Punch, Move::Kick, Move::Defense]);
        assert!(s.is_idle());
    }

    #[test]
    fn pose_serializes_by_name() {
        let mut a = [0.0; N_JOINTS];
        a[JointId::Torso.index()] = 1.5;
        let v = serde_json::to_value(Pose::from_array(a)).unwrap();
        assert_eq!(v["torso"], 1.5);
        assert_eq!(v.as_object().unwrap().len(), N_JOINTS);
    }
}
