//! Central pattern generated omnidirectional gait with attitude feedback.
//!
//! Each leg follows its own phase, the right leg half a cycle behind the
//! left. A swing window `W(φ) = max(0, sin φ)` shortens the swinging leg.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::estimation::AttitudeEstimate;
use crate::robot_model::{JointId, JointLimits, JointVector};
use crate::vision::camera::DEFAULT_NECK_PITCH;

pub const MAX_STEP_RAD: f64 = 0.1;

/// Body velocity at unit command.
pub const TWIST_SCALE: Twist = Twist { vx: 0.3, vy: 0.15, omega: 0.8 };

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GaitCommand {
    pub vx: f64,
    pub vy: f64,
    pub omega: f64,
    pub enabled: bool,
}

impl GaitCommand {
    pub fn walk(vx: f64, vy: f64, omega: f64) -> Self {
        GaitCommand { vx, vy, omega, enabled: true }.clamped()
    }

    pub fn clamped(self) -> Self {
        let c = |v: f64| if v.is_nan() { 0.0 } else { v.clamp(-1.0, 1.0) };
        GaitCommand { vx: c(self.vx), vy: c(self.vy), omega: c(self.omega), enabled: self.enabled }
    }
}

/// Planar body velocity in the robot frame (m/s, m/s, rad/s).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Twist {
    pub vx: f64,
    pub vy: f64,
    pub omega: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaitParams {
    pub freq: f64,
    pub a_lat: f64,
    pub a_short: f64,
    pub a_x: f64,
    pub a_y: f64,
    pub a_omega: f64,
    /// Stance hip roll offset; positive spreads the legs.
    pub r0: f64,
    pub p0: f64,
    pub k0: f64,
    pub a0: f64,
    pub shoulder_roll0: f64,
    pub elbow0: f64,
    pub kp_pitch: f64,
    pub kd_pitch: f64,
    pub kp_roll: f64,
    pub kd_roll: f64,
    pub pitch_nominal: f64,
}

impl Default for GaitParams {
    fn default() -> Self {
        GaitParams {
            freq: 1.8,
            a_lat: 0.06,
            a_short: 0.35,
            a_x: 0.25,
            a_y: 0.12,
            a_omega: 0.2,
            r0: 0.0,
            p0: -0.3,
            k0: 0.6,
            a0: -0.3,
            shoulder_roll0: 0.1,
            elbow0: 0.5,
            kp_pitch: 0.3,
            kd_pitch: 0.02,
            kp_roll: 0.3,
            kd_roll: 0.02,
            pitch_nominal: 0.0,
        }
    }
}

impl GaitParams {
    pub fn without_feedback(self) -> Self {
        GaitParams { kp_pitch: 0.0, kd_pitch: 0.0, kp_roll: 0.0, kd_roll: 0.0, ..self }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaitState {
    /// In [−π, π).
    pub phase: f64,
    pub last: JointVector,
}

impl GaitState {
    pub fn new(params: &GaitParams) -> Self {
        GaitState { phase: 0.0, last: stand_pose(params) }
    }

    pub fn with_phase(params: &GaitParams, phase: f64) -> Self {
        GaitState { phase: wrap_phase(phase), last: stand_pose(params) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaitOutput {
    pub joints: JointVector,
    pub twist: Twist,
}

/// Wrap to [−π, π).
pub fn wrap_phase(a: f64) -> f64 {
    (a + PI).rem_euclid(2.0 * PI) - PI
}

struct LegJoints {
    hip_yaw: JointId,
    hip_roll: JointId,
    hip_pitch: JointId,
    knee: JointId,
    ankle_pitch: JointId,
    ankle_roll: JointId,
    shoulder_pitch: JointId,
    shoulder_roll: JointId,
    elbow: JointId,
}

const LEFT: LegJoints = LegJoints {
    hip_yaw: JointId::LEFT_HIP_YAW,
    hip_roll: JointId::LEFT_HIP_ROLL,
    hip_pitch: JointId::LEFT_HIP_PITCH,
    knee: JointId::LEFT_KNEE_PITCH,
    ankle_pitch: JointId::LEFT_ANKLE_PITCH,
    ankle_roll: JointId::LEFT_ANKLE_ROLL,
    shoulder_pitch: JointId::LEFT_SHOULDER_PITCH,
    shoulder_roll: JointId::LEFT_SHOULDER_ROLL,
    elbow: JointId::LEFT_ELBOW_PITCH,
};

const RIGHT: LegJoints = LegJoints {
    hip_yaw: JointId::RIGHT_HIP_YAW,
    hip_roll: JointId::RIGHT_HIP_ROLL,
    hip_pitch: JointId::RIGHT_HIP_PITCH,
    knee: JointId::RIGHT_KNEE_PITCH,
    ankle_pitch: JointId::RIGHT_ANKLE_PITCH,
    ankle_roll: JointId::RIGHT_ANKLE_ROLL,
    shoulder_pitch: JointId::RIGHT_SHOULDER_PITCH,
    shoulder_roll: JointId::RIGHT_SHOULDER_ROLL,
    elbow: JointId::RIGHT_ELBOW_PITCH,
};

/// Stance offsets only.
pub fn stand_pose(params: &GaitParams) -> JointVector {
    let mut q = JointVector::ZERO;
    for (side, sigma) in [(&LEFT, 1.0), (&RIGHT, -1.0)] {
        q[side.hip_roll] = sigma * params.r0;
        q[side.ankle_roll] = -sigma * params.r0;
        q[side.hip_pitch] = params.p0;
        q[side.knee] = params.k0;
        q[side.ankle_pitch] = params.a0;
        q[side.shoulder_roll] = sigma * params.shoulder_roll0;
        q[side.elbow] = params.elbow0;
    }
    q[JointId::NECK_PITCH] = DEFAULT_NECK_PITCH;
    q
}

/// Pattern output before feedback, clamping and rate limiting.
pub fn pattern(phase: f64, cmd: &GaitCommand, params: &GaitParams) -> JointVector {
    let mut q = stand_pose(params);
    for (side, sigma, leg_phase) in [(&LEFT, 1.0, phase), (&RIGHT, -1.0, wrap_phase(phase + PI))] {
        let s = leg_phase.sin();
        let gamma = params.a_short * s.max(0.0);
        let swing_x = cmd.vx * params.a_x * s;
        let hip_roll = sigma * (params.r0 + params.a_lat * s) + cmd.vy * params.a_y * s;
        q[side.hip_roll] = hip_roll;
        q[side.ankle_roll] = -hip_roll;
        q[side.hip_pitch] = params.p0 + swing_x - gamma / 2.0;
        q[side.knee] = params.k0 + gamma;
        q[side.ankle_pitch] = params.a0 - gamma / 2.0 - swing_x * 0.5;
        q[side.hip_yaw] = sigma * cmd.omega * params.a_omega * s;
        q[side.shoulder_pitch] = cmd.vx * params.a_x * (leg_phase + PI).sin();
    }
    q
}

/// Attitude feedback added to the pattern.
pub fn feedback(att: &AttitudeEstimate, params: &GaitParams) -> JointVector {
    let pitch = params.kp_pitch * (att.pitch - params.pitch_nominal) + params.kd_pitch * att.pitch_rate;
    let roll = params.kp_roll * att.roll + params.kd_roll * att.roll_rate;
    let mut q = JointVector::ZERO;
    for side in [&LEFT, &RIGHT] {
        q[side.hip_pitch] = pitch;
        q[side.ankle_pitch] = pitch;
        q[side.hip_roll] = roll;
        q[side.ankle_roll] = roll;
    }
    q
}

fn rate_limit(target: &JointVector, last: &JointVector) -> JointVector {
    target.map(|j, v| v.clamp(last[j] - MAX_STEP_RAD, last[j] + MAX_STEP_RAD))
}

/// One control cycle of the gait. A disabled gait settles into the stand
/// pose with its phase held at zero.
pub fn gait_step(
    state: &GaitState,
    cmd: &GaitCommand,
    params: &GaitParams,
    limits: &JointLimits,
    attitude: &AttitudeEstimate,
    dt: f64,
) -> (GaitState, GaitOutput) {
    let cmd = cmd.clamped();
    let fb = feedback(attitude, params);
    let (raw, phase, twist) = if cmd.enabled {
        let twist = Twist { vx: cmd.vx * TWIST_SCALE.vx, vy: cmd.vy * TWIST_SCALE.vy, omega: cmd.omega * TWIST_SCALE.omega };
        (pattern(state.phase, &cmd, params), wrap_phase(state.phase + 2.0 * PI * params.freq * dt), twist)
    } else {
        (stand_pose(params), 0.0, Twist::default())
    };
    let target = JointVector(std::array::from_fn(|i| raw.0[i] + fb.0[i]));
    let joints = rate_limit(&limits.clamp_all(&target), &state.last);
    (GaitState { phase, last: joints }, GaitOutput { joints, twist })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const DT: f64 = 0.008;

    fn level() -> AttitudeEstimate {
        AttitudeEstimate::default()
    }

    #[test]
    fn zero_phase_is_stance() {
        let p = GaitParams::default().without_feedback();
        let q = pattern(0.0, &GaitCommand::walk(0.0, 0.0, 0.0), &p);
        assert!(q.max_abs_diff(&stand_pose(&p)) < 1e-15);
        let (_, out) = gait_step(&GaitState::new(&p), &GaitCommand::walk(0.0, 0.0, 0.0), &p, &JointLimits::default(), &level(), DT);
        assert!(out.joints.max_abs_diff(&stand_pose(&p)) < 1e-15);
    }

    #[test]
    fn half_period_mirror_symmetry() {
        let p = GaitParams::default().without_feedback();
        let limits = JointLimits::default();
        let cmd = GaitCommand::walk(0.0, 0.0, 0.0);
        let mut a = GaitState::with_phase(&p, 0.0);
        let mut b = GaitState::with_phase(&p, PI);
        let steps = (10.0 / p.freq / DT).ceil() as usize;
        for _ in 0..steps {
            let (na, qa) = gait_step(&a, &cmd, &p, &limits, &level(), DT);
            let (nb, qb) = gait_step(&b, &cmd, &p, &limits, &level(), DT);
            assert!(qa.joints.max_abs_diff(&qb.joints.mirror()) < 1e-9);
            a = na;
            b = nb;
        }
    }

    #[test]
    fn forward_swing_peak() {
        let p = GaitParams::default().without_feedback();
        let cmd = GaitCommand::walk(1.0, 0.0, 0.0);
        let q = pattern(PI / 2.0, &cmd, &p);
        let gamma = p.a_short;
        let swing = q[JointId::LEFT_HIP_PITCH] - (p.p0 - gamma / 2.0);
        assert!((swing - 0.25).abs() < 1e-12);
    }

    #[test]
    fn stand_pose_properties() {
        let p = GaitParams::default();
        let q = stand_pose(&p);
        assert_eq!(q[JointId::LEFT_KNEE_PITCH], p.k0);
        assert_eq!(q.mirror(), q);
        let moved = stand_pose(&GaitParams { p0: -0.1, ..p });
        assert_eq!(moved[JointId::RIGHT_HIP_PITCH], -0.1);
        // the foot stays level: hip + knee + ankle = 0
        assert!((q[JointId::LEFT_HIP_PITCH] + q[JointId::LEFT_KNEE_PITCH] + q[JointId::LEFT_ANKLE_PITCH]).abs() < 1e-12);
    }

    #[test]
    fn phase_advances_and_wraps() {
        let p = GaitParams::default();
        let mut s = GaitState::new(&p);
        let cmd = GaitCommand::walk(0.5, 0.0, 0.0);
        for _ in 0..1000 {
            let (n, _) = gait_step(&s, &cmd, &p, &JointLimits::default(), &level(), DT);
            let expected = wrap_phase(s.phase + 2.0 * PI * p.freq * DT);
            assert!((n.phase - expected).abs() < 1e-12);
            assert!((-PI..PI).contains(&n.phase));
            s = n;
        }
    }

    #[test]
    fn pitch_feedback_is_linear() {
        let p = GaitParams::default();
        let limits = JointLimits::default();
        let cmd = GaitCommand::walk(0.3, 0.1, 0.0);
        let s = GaitState { phase: 0.7, last: pattern(0.7, &cmd, &p) };
        let eps = 0.02;
        let (_, base) = gait_step(&s, &cmd, &p, &limits, &level(), DT);
        let tilted = AttitudeEstimate { pitch: eps, ..Default::default() };
        let (_, fb) = gait_step(&s, &cmd, &p, &limits, &tilted, DT);
        for j in JointId::all() {
            let d = fb.joints[j] - base.joints[j];
            let expected = if matches!(j.name(), "left_hip_pitch" | "right_hip_pitch" | "left_ankle_pitch" | "right_ankle_pitch") {
                p.kp_pitch * eps
            } else {
                0.0
            };
            assert!((d - expected).abs() < 1e-12, "{j}: {d}");
        }
    }

    #[test]
    fn disabled_gait_returns_to_stand() {
        let p = GaitParams::default();
        let limits = JointLimits::default();
        let mut s = GaitState { phase: 1.0, last: pattern(1.0, &GaitCommand::walk(1.0, 1.0, 1.0), &p) };
        for _ in 0..50 {
            let (n, out) = gait_step(&s, &GaitCommand::default(), &p, &limits, &level(), DT);
            assert_eq!(out.twist, Twist::default());
            assert_eq!(n.phase, 0.0);
            s = n;
        }
        assert!(s.last.max_abs_diff(&stand_pose(&p)) < 1e-12);
    }

    #[test]
    fn twist_scaling() {
        let p = GaitParams::default();
        let (_, out) = gait_step(&GaitState::new(&p), &GaitCommand::walk(1.0, -1.0, 0.5), &p, &JointLimits::default(), &level(), DT);
        assert_eq!(out.twist, Twist { vx: 0.3, vy: -0.15, omega: 0.4 });
    }

    proptest! {
        #[test]
        fn outputs_are_continuous_and_bounded(
            cmds in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0, any::<bool>(), -1.5f64..1.5, -4.0f64..4.0), 1..60),
        ) {
            let p = GaitParams::default();
            let limits = JointLimits::default();
            let mut s = GaitState::new(&p);
            for (vx, vy, w, enabled, pitch, rate) in cmds {
                let cmd = GaitCommand { vx, vy, omega: w, enabled };
                let att = AttitudeEstimate { pitch, pitch_rate: rate, roll: pitch * 0.5, ..Default::default() };
                let (n, out) = gait_step(&s, &cmd, &p, &limits, &att, DT);
                prop_assert!(out.joints.max_abs_diff(&s.last) <= MAX_STEP_RAD + 1e-12);
                for (j, v) in out.joints.iter() {
                    prop_assert!(limits.contains(j, v));
                }
                s = n;
            }
        }

        #[test]
        fn phase_wrap_is_seamless(phase in -PI..PI) {
            let p = GaitParams::default();
            let cmd = GaitCommand::walk(0.7, -0.4, 0.3);
            let a = pattern(phase, &cmd, &p);
            let b = pattern(phase + 2.0 * PI, &cmd, &p);
            prop_assert!(a.max_abs_diff(&b) < 1e-9);
        }
    }
}
