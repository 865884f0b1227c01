//! Planar 4-DOF arm under position control.
//!
//! Two mirrored arms share one [`ArmConfig`]. Each arm is a planar serial
//! chain rooted at its own base; the left arm is the mirror image of the right
//! one about the vertical axis, so the same joint angles reach mirrored points.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_JOINTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArmSide {
    Left,
    Right,
}

impl ArmSide {
    pub const BOTH: [ArmSide; 2] = [ArmSide::Left, ArmSide::Right];

    pub fn index(self) -> usize {
        match self {
            ArmSide::Left => 0,
            ArmSide::Right => 1,
        }
    }

    pub fn from_index(index: usize) -> Self {
        if index == 0 {
            ArmSide::Left
        } else {
            ArmSide::Right
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ArmSide::Left => "left",
            ArmSide::Right => "right",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArmConfig {
    pub link_lengths: [f64; NUM_JOINTS],
    /// Per-joint `[min, max]` in radians.
    pub joint_limits: [[f64; 2]; NUM_JOINTS],
    /// Largest joint change per timestep (radians).
    pub max_step: f64,
    pub touch_radius: f64,
    /// Horizontal distance of each arm base from the origin.
    pub base_offset: f64,
    /// Posture each trial starts from.
    pub home: [f64; NUM_JOINTS],
}

impl Default for ArmConfig {
    fn default() -> Self {
        Self {
            link_lengths: [0.25; NUM_JOINTS],
            joint_limits: [[-PI, PI]; NUM_JOINTS],
            max_step: 0.05,
            touch_radius: 0.05,
            base_offset: 0.15,
            home: [PI / 2.0, 1.2, 1.2, 1.2],
        }
    }
}

impl ArmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.link_lengths.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::Config("link lengths must be positive".into()));
        }
        for (i, [lo, hi]) in self.joint_limits.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::Config(format!(
                    "joint {i} limits [{lo}, {hi}] are not ordered"
                )));
            }
        }
        if !(self.max_step.is_finite() && self.max_step > 0.0) {
            return Err(Error::Config("max_step must be positive".into()));
        }
        if !(self.touch_radius.is_finite() && self.touch_radius > 0.0) {
            return Err(Error::Config("touch_radius must be positive".into()));
        }
        let home = JointState::new(self.home);
        if !home.within_limits(self) {
            return Err(Error::Config("home posture violates joint limits".into()));
        }
        Ok(())
    }

    pub fn reach(&self) -> f64 {
        self.link_lengths.iter().sum()
    }

    pub fn base(&self, side: ArmSide) -> Point {
        match side {
            ArmSide::Left => Point::new(-self.base_offset, 0.0),
            ArmSide::Right => Point::new(self.base_offset, 0.0),
        }
    }

    pub fn home_state(&self) -> JointState {
        JointState::new(self.home)
    }

    pub fn clamp_to_limits(&self, angles: [f64; NUM_JOINTS]) -> JointState {
        let mut out = angles;
        for (a, [lo, hi]) in out.iter_mut().zip(self.joint_limits) {
            *a = a.clamp(lo, hi);
        }
        JointState::new(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointState {
    pub angles: [f64; NUM_JOINTS],
}

impl JointState {
    pub const fn new(angles: [f64; NUM_JOINTS]) -> Self {
        Self { angles }
    }

    pub fn within_limits(&self, cfg: &ArmConfig) -> bool {
        self.angles
            .iter()
            .zip(cfg.joint_limits)
            .all(|(a, [lo, hi])| *a >= lo && *a <= hi)
    }

    /// Max-norm distance in joint space.
    pub fn distance(&self, other: &JointState) -> f64 {
        self.angles
            .iter()
            .zip(other.angles)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// End-effector position of a chain rooted at the origin, first joint
/// measured from the positive x axis.
pub fn forward_kinematics(joints: &JointState, cfg: &ArmConfig) -> Point {
    let mut cumulative = 0.0;
    let mut p = Point::default();
    for (angle, len) in joints.angles.iter().zip(cfg.link_lengths) {
        cumulative += angle;
        p.x += len * cumulative.cos();
        p.y += len * cumulative.sin();
    }
    p
}

/// End-effector position of one of the two arms in the shared workspace.
pub fn effector_position(side: ArmSide, joints: &JointState, cfg: &ArmConfig) -> Point {
    let local = forward_kinematics(joints, cfg);
    let base = cfg.base(side);
    match side {
        ArmSide::Right => Point::new(base.x + local.x, base.y + local.y),
        ArmSide::Left => Point::new(base.x - local.x, base.y + local.y),
    }
}

/// One position-control timestep: every joint moves toward its desired angle
/// by at most `max_step`, then is clamped to its limits.
pub fn step_toward(joints: &JointState, desired: &JointState, cfg: &ArmConfig) -> JointState {
    let mut next = joints.angles;
    for i in 0..NUM_JOINTS {
        let target = desired.angles[i];
        if !target.is_finite() {
            continue;
        }
        let delta = (target - joints.angles[i]).clamp(-cfg.max_step, cfg.max_step);
        let [lo, hi] = cfg.joint_limits[i];
        next[i] = (joints.angles[i] + delta).clamp(lo, hi);
    }
    JointState::new(next)
}

/// Touch sensor: the boundary distance counts as a touch.
pub fn check_touch(effector: &Point, sphere: &Point, cfg: &ArmConfig) -> bool {
    effector.distance(sphere) <= cfg.touch_radius
}

/// Sampled inverse-kinematics search for a posture that touches `target`.
///
/// Random restarts followed by shrinking-step hill climbing. Returns the best
/// posture found and its distance to the target. Deterministic for a given
/// configuration.
pub fn search_posture(side: ArmSide, target: &Point, cfg: &ArmConfig) -> (JointState, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(0x01c0_ba11);
    let sample = |rng: &mut ChaCha8Rng| {
        let mut a = [0.0; NUM_JOINTS];
        for (x, [lo, hi]) in a.iter_mut().zip(cfg.joint_limits) {
            *x = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        }
        JointState::new(a)
    };
    let dist = |j: &JointState| effector_position(side, j, cfg).distance(target);

    let mut best = sample(&mut rng);
    let mut best_d = dist(&best);
    for _ in 0..16 {
        let mut cur = sample(&mut rng);
        let mut cur_d = dist(&cur);
        let mut step = 0.5;
        while step > 1e-4 {
            let mut improved = false;
            for i in 0..NUM_JOINTS {
                for sign in [1.0, -1.0] {
                    let mut cand = cur.angles;
                    cand[i] += sign * step;
                    let cand = cfg.clamp_to_limits(cand);
                    let d = dist(&cand);
                    if d < cur_d {
                        cur = cand;
                        cur_d = d;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        if cur_d < best_d {
            best = cur;
            best_d = cur_d;
        }
        if best_d < cfg.touch_radius * 1e-3 {
            break;
        }
    }
    (best, best_d)
}

/// True when some posture within the joint limits touches `target`.
pub fn is_reachable(side: ArmSide, target: &Point, cfg: &ArmConfig) -> bool {
    search_posture(side, target, cfg).1 <= cfg.touch_radius
}

/// `count` points evenly spaced on an arc of the given radius around the
/// origin, from `start` to `end` radians.
pub fn arc_layout(count: usize, radius: f64, start: f64, end: f64) -> Vec<Point> {
    if count == 1 {
        let mid = 0.5 * (start + end);
        return vec![Point::new(radius * mid.cos(), radius * mid.sin())];
    }
    (0..count)
        .map(|i| {
            let t = start + (end - start) * i as f64 / (count - 1) as f64;
            Point::new(radius * t.cos(), radius * t.sin())
        })
        .collect()
}

/// Default sphere layout: an arc in front of the two arms, ordered from the
/// robot's right to its left.
pub fn default_layout(count: usize) -> Vec<Point> {
    arc_layout(count, 0.6, PI / 6.0, 5.0 * PI / 6.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn chain_oracle(angles: [f64; 4], lengths: [f64; 4]) -> (f64, f64) {
        // joint positions built link by link, each link rotated by the sum of
        // all angles up to and including its own joint
        let mut x = 0.0;
        let mut y = 0.0;
        for k in 0..4 {
            let theta: f64 = angles[..=k].iter().sum();
            x += lengths[k] * theta.cos();
            y += lengths[k] * theta.sin();
        }
        (x, y)
    }

    #[test]
    fn fully_extended_chain_lies_on_x_axis() {
        let cfg = ArmConfig::default();
        let p = forward_kinematics(&JointState::new([0.0; 4]), &cfg);
        assert_abs_diff_eq!(p.x, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.y, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn base_rotation_rotates_the_whole_chain() {
        let cfg = ArmConfig::default();
        let p = forward_kinematics(&JointState::new([PI / 2.0, 0.0, 0.0, 0.0]), &cfg);
        assert_abs_diff_eq!(p.x, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.y, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn step_toward_is_a_noop_at_the_target() {
        let cfg = ArmConfig::default();
        let j = JointState::new([0.1, -0.2, 0.3, 0.0]);
        assert_eq!(step_toward(&j, &j, &cfg), j);
    }

    #[test]
    fn step_toward_moves_exactly_max_step() {
        let cfg = ArmConfig::default();
        let j = JointState::new([0.0; 4]);
        let d = JointState::new([1.0, -1.0, 0.02, -0.5]);
        let n = step_toward(&j, &d, &cfg);
        assert_eq!(n.angles, [0.05, -0.05, 0.02, -0.05]);
    }

    #[test]
    fn step_toward_converges_to_the_limit() {
        let cfg = ArmConfig::default();
        let mut j = JointState::new([3.0, 0.0, 0.0, 0.0]);
        let d = JointState::new([10.0, 0.0, 0.0, 0.0]);
        for _ in 0..100 {
            j = step_toward(&j, &d, &cfg);
        }
        assert_eq!(j.angles[0], PI);
        assert_eq!(step_toward(&j, &d, &cfg), j);
    }

    #[test]
    fn touch_boundary_is_inclusive() {
        let cfg = ArmConfig::default();
        let s = Point::new(0.3, 0.4);
        assert!(check_touch(&s, &s, &cfg));
        assert!(check_touch(&Point::new(0.3 + 0.05, 0.4), &s, &cfg));
        assert!(!check_touch(&Point::new(0.3 + 0.1, 0.4), &s, &cfg));
    }

    #[test]
    fn mirrored_arms_reach_mirrored_points() {
        let cfg = ArmConfig::default();
        let j = JointState::new([0.7, 0.3, -0.2, 0.1]);
        let l = effector_position(ArmSide::Left, &j, &cfg);
        let r = effector_position(ArmSide::Right, &j, &cfg);
        assert_abs_diff_eq!(l.x, -r.x, epsilon = 1e-12);
        assert_abs_diff_eq!(l.y, r.y, epsilon = 1e-12);
    }

    #[test]
    fn default_layout_is_reachable_by_both_arms() {
        let cfg = ArmConfig::default();
        for p in default_layout(6) {
            for side in ArmSide::BOTH {
                assert!(is_reachable(side, &p, &cfg), "{p:?} {side:?}");
            }
        }
    }

    #[test]
    fn far_points_are_unreachable() {
        let cfg = ArmConfig::default();
        assert!(!is_reachable(ArmSide::Right, &Point::new(0.0, 2.0), &cfg));
    }

    #[test]
    fn home_posture_touches_no_sphere() {
        let cfg = ArmConfig::default();
        for side in ArmSide::BOTH {
            let e = effector_position(side, &cfg.home_state(), &cfg);
            for p in default_layout(6) {
                assert!(e.distance(&p) > 4.0 * cfg.touch_radius);
            }
        }
    }

    proptest! {
        #[test]
        fn fk_matches_per_link_oracle(a in prop::array::uniform4(-PI..PI)) {
            let cfg = ArmConfig::default();
            let p = forward_kinematics(&JointState::new(a), &cfg);
            let (x, y) = chain_oracle(a, cfg.link_lengths);
            prop_assert!((p.x - x).abs() < 1e-12 && (p.y - y).abs() < 1e-12);
        }

        #[test]
        fn step_toward_never_increases_joint_distance(
            a in prop::array::uniform4(-PI..PI),
            d in prop::array::uniform4(-5.0f64..5.0),
        ) {
            let cfg = ArmConfig::default();
            let cur = JointState::new(a);
            let desired = JointState::new(d);
            let next = step_toward(&cur, &desired, &cfg);
            prop_assert!(next.within_limits(&cfg));
            prop_assert!(next.distance(&desired) <= cur.distance(&desired) + 1e-15);
            prop_assert!(next.distance(&cur) <= cfg.max_step + 1e-15);
        }
    }
}
