//! Attitude estimation from the IMU board and fall detection.

use serde::{Deserialize, Serialize};

use crate::robot_model::{wrap_angle, GRAVITY};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ImuSample {
    /// Body rates (rad/s) about x, y, z.
    pub gyro: [f64; 3],
    /// Specific force (m/s²); reads (0, 0, +g) upright at rest.
    pub accel: [f64; 3],
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AttitudeEstimate {
    pub roll: f64,
    pub pitch: f64,
    /// Integrated yaw, not wrapped.
    pub yaw: f64,
    pub roll_rate: f64,
    pub pitch_rate: f64,
    pub yaw_rate: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterParams {
    /// Per-step weight of the accelerometer angle.
    pub alpha: f64,
    /// Accelerometer is trusted only while |‖a‖ − g| stays within this band.
    pub gate_band: f64,
    pub gyro_bias: [f64; 3],
}

impl Default for FilterParams {
    fn default() -> Self {
        FilterParams { alpha: 0.02, gate_band: 0.3 * GRAVITY, gyro_bias: [0.0; 3] }
    }
}

/// Roll and pitch implied by the gravity direction in a specific-force reading.
pub fn accel_angles(accel: [f64; 3]) -> (f64, f64) {
    let [ax, ay, az] = accel;
    (ay.atan2(az), (-ax).atan2((ay * ay + az * az).sqrt()))
}

/// Blend the gyro-propagated attitude with the accelerometer angles.
pub fn update_attitude(est: &AttitudeEstimate, sample: &ImuSample, dt: f64, params: &FilterParams) -> AttitudeEstimate {
    let rates = [
        sample.gyro[0] - params.gyro_bias[0],
        sample.gyro[1] - params.gyro_bias[1],
        sample.gyro[2] - params.gyro_bias[2],
    ];
    let norm = sample.accel.iter().map(|a| a * a).sum::<f64>().sqrt();
    let alpha = if (norm - GRAVITY).abs() <= params.gate_band { params.alpha.clamp(0.0, 1.0) } else { 0.0 };
    let (roll_acc, pitch_acc) = accel_angles(sample.accel);

    let fuse = |prev: f64, rate: f64, measured: f64| {
        let predicted = prev + rate * dt;
        // blend along the short way round so ±π does not average to 0
        let innovation = wrap_angle(measured - predicted);
        wrap_angle(predicted + alpha * innovation)
    };
    AttitudeEstimate {
        roll: fuse(est.roll, rates[0], roll_acc),
        pitch: fuse(est.pitch, rates[1], pitch_acc),
        yaw: est.yaw + rates[2] * dt,
        roll_rate: rates[0],
        pitch_rate: rates[1],
        yaw_rate: rates[2],
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FallState {
    Stable,
    Falling,
    FallenProne,
    FallenSupine,
}

impl FallState {
    pub fn is_fallen(self) -> bool {
        matches!(self, FallState::FallenProne | FallState::FallenSupine)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FallState::Stable => "STABLE",
            FallState::Falling => "FALLING",
            FallState::FallenProne => "FALLEN_PRONE",
            FallState::FallenSupine => "FALLEN_SUPINE",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FallParams {
    pub trigger_rad: f64,
    pub fallen_rad: f64,
    pub dwell_s: f64,
}

impl Default for FallParams {
    fn default() -> Self {
        FallParams { trigger_rad: 0.9, fallen_rad: 1.3, dwell_s: 0.5 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FallDetector {
    pub state: FallState,
    /// Time the current lying-down candidate has persisted.
    dwell_s: f64,
    candidate: Option<FallState>,
}

impl Default for FallDetector {
    fn default() -> Self {
        FallDetector { state: FallState::Stable, dwell_s: 0.0, candidate: None }
    }
}

impl FallDetector {
    /// External reset after a completed get-up.
    pub fn reset(&mut self) {
        *self = FallDetector::default();
    }

    pub fn update(&mut self, est: &AttitudeEstimate, dt: f64, params: &FallParams) -> FallState {
        self.state = match self.state {
            FallState::Stable => {
                let outward = |angle: f64, rate: f64| angle.abs() > params.trigger_rad && angle * rate > 0.0;
                if outward(est.pitch, est.pitch_rate) || outward(est.roll, est.roll_rate) {
                    FallState::Falling
                } else {
                    FallState::Stable
                }
            }
            FallState::Falling => {
                let candidate = if est.pitch > params.fallen_rad {
                    Some(FallState::FallenProne)
                } else if est.pitch < -params.fallen_rad {
                    Some(FallState::FallenSupine)
                } else if est.roll.abs() > params.fallen_rad {
                    Some(if est.pitch >= 0.0 { FallState::FallenProne } else { FallState::FallenSupine })
                } else {
                    None
                };
                if candidate.is_some() && candidate == self.candidate {
                    self.dwell_s += dt;
                } else {
                    self.candidate = candidate;
                    self.dwell_s = if candidate.is_some() { dt } else { 0.0 };
                }
                match self.candidate {
                    Some(c) if self.dwell_s >= params.dwell_s - 1e-9 => c,
                    _ => FallState::Falling,
                }
            }
            fallen => fallen,
        };
        self.state
    }
}

/// Pure form of [`FallDetector::update`].
pub fn detect_fall(detector: &FallDetector, est: &AttitudeEstimate, dt: f64, params: &FallParams) -> FallDetector {
    let mut next = *detector;
    next.update(est, dt, params);
    next
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const DT: f64 = 0.008;

    /// Specific force for a body at the given roll and pitch (z-y-x Euler angles),
    /// built by rotating the world gravity reaction into the body frame.
    fn accel_for(roll: f64, pitch: f64) -> [f64; 3] {
        use nalgebra::{Rotation3, Vector3};
        let r = Rotation3::from_euler_angles(roll, pitch, 0.0);
        let f = r.inverse() * Vector3::new(0.0, 0.0, GRAVITY);
        [f.x, f.y, f.z]
    }

    #[test]
    fn level_converges_geometrically() {
        let p = FilterParams::default();
        let mut est = AttitudeEstimate { roll: 0.4, pitch: -0.3, ..Default::default() };
        let sample = ImuSample { gyro: [0.0; 3], accel: [0.0, 0.0, GRAVITY] };
        for k in 1..=50 {
            est = update_attitude(&est, &sample, DT, &p);
            let expect = 0.4 * (1.0 - p.alpha).powi(k);
            assert!((est.roll - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn pure_gyro_integration() {
        let p = FilterParams { alpha: 0.0, ..Default::default() };
        let mut est = AttitudeEstimate::default();
        let sample = ImuSample { gyro: [0.1, 0.0, 0.0], accel: [0.0, 0.0, GRAVITY] };
        for _ in 0..125 {
            est = update_attitude(&est, &sample, DT, &p);
        }
        assert!((est.roll - 0.1).abs() < 1e-12, "{}", est.roll);
    }

    #[test]
    fn static_roll_converges() {
        let p = FilterParams::default();
        let truth = 30f64.to_radians();
        let sample = ImuSample { gyro: [0.0; 3], accel: accel_for(truth, 0.0) };
        let mut est = AttitudeEstimate::default();
        for _ in 0..250 {
            est = update_attitude(&est, &sample, DT, &p);
        }
        assert!((est.roll - truth).abs() < 0.5f64.to_radians(), "{}", est.roll.to_degrees());
    }

    #[test]
    fn accel_angles_match_rotation_oracle() {
        for (r, pch) in [(0.3, -0.2), (-1.0, 0.5), (0.0, 1.2), (0.7, 0.0)] {
            let (ra, pa) = accel_angles(accel_for(r, pch));
            assert!((ra - r).abs() < 1e-12 && (pa - pch).abs() < 1e-12);
        }
    }

    #[test]
    fn alpha_one_returns_accel_angles() {
        let p = FilterParams { alpha: 1.0, ..Default::default() };
        let sample = ImuSample { gyro: [0.0; 3], accel: accel_for(0.2, -0.4) };
        let est = update_attitude(&AttitudeEstimate { roll: -1.0, pitch: 0.9, ..Default::default() }, &sample, DT, &p);
        assert!((est.roll - 0.2).abs() < 1e-12 && (est.pitch + 0.4).abs() < 1e-12);
    }

    #[test]
    fn violent_motion_gates_accelerometer() {
        let p = FilterParams::default();
        let prev = AttitudeEstimate { roll: 0.1, pitch: 0.2, ..Default::default() };
        let sample = ImuSample { gyro: [0.5, -0.5, 0.1], accel: [0.0, 9.0, 12.0] };
        let norm = (9.0f64 * 9.0 + 12.0 * 12.0).sqrt();
        assert_eq!(norm, 15.0);
        let est = update_attitude(&prev, &sample, DT, &p);
        assert_eq!(est.roll, 0.1 + 0.5 * DT);
        assert_eq!(est.pitch, 0.2 - 0.5 * DT);
    }

    #[test]
    fn yaw_is_not_wrapped() {
        let p = FilterParams::default();
        let mut est = AttitudeEstimate::default();
        let sample = ImuSample { gyro: [0.0, 0.0, 10.0], accel: [0.0, 0.0, GRAVITY] };
        for _ in 0..100 {
            est = update_attitude(&est, &sample, DT, &p);
        }
        assert!((est.yaw - 8.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn fusion_is_convex(
            roll in -1.2f64..1.2, pitch in -1.2f64..1.2,
            gr in -2.0f64..2.0, gp in -2.0f64..2.0,
            tr in -1.2f64..1.2, tp in -1.2f64..1.2,
            alpha in 0.0f64..1.0,
        ) {
            let p = FilterParams { alpha, ..Default::default() };
            let prev = AttitudeEstimate { roll, pitch, ..Default::default() };
            let sample = ImuSample { gyro: [gr, gp, 0.0], accel: accel_for(tr, tp) };
            let est = update_attitude(&prev, &sample, DT, &p);
            let (ra, pa) = accel_angles(sample.accel);
            for (fused, gyro, acc) in [(est.roll, roll + gr * DT, ra), (est.pitch, pitch + gp * DT, pa)] {
                prop_assert!(fused >= gyro.min(acc) - 1e-12 && fused <= gyro.max(acc) + 1e-12);
            }
        }
    }

    fn pitch_est(pitch: f64, rate: f64) -> AttitudeEstimate {
        AttitudeEstimate { pitch, pitch_rate: rate, ..Default::default() }
    }

    #[test]
    fn ramp_triggers_falling_before_fallen_threshold() {
        let p = FallParams::default();
        let mut det = FallDetector::default();
        let rate = 1.6 / 0.8;
        let mut fired_at = None;
        for k in 1..=200 {
            let pitch = (rate * k as f64 * DT).min(1.6);
            let r = if pitch < 1.6 { rate } else { 0.0 };
            if det.update(&pitch_est(pitch, r), DT, &p) == FallState::Falling && fired_at.is_none() {
                fired_at = Some(pitch);
            }
        }
        let fired = fired_at.expect("falling detected");
        assert!(fired > 0.9 && fired < 1.3, "{fired}");
        assert_eq!(det.state, FallState::FallenProne);
    }

    #[test]
    fn small_lean_stays_stable() {
        let p = FallParams::default();
        let mut det = FallDetector::default();
        for _ in 0..10_000 {
            assert_eq!(det.update(&pitch_est(0.2, 0.0), DT, &p), FallState::Stable);
        }
    }

    #[test]
    fn held_backward_becomes_supine_after_dwell() {
        let p = FallParams::default();
        let mut det = FallDetector { state: FallState::Falling, ..Default::default() };
        let mut t = 0.0;
        while t < 0.6 - 1e-9 {
            let s = det.update(&pitch_est(-1.5, 0.0), DT, &p);
            t += DT;
            if t < 0.5 - 1e-9 {
                assert_eq!(s, FallState::Falling, "at {t}");
            }
        }
        assert_eq!(det.state, FallState::FallenSupine);
    }

    #[test]
    fn sideways_fall_resolves_by_pitch_sign() {
        let p = FallParams::default();
        let mut det = FallDetector { state: FallState::Falling, ..Default::default() };
        for _ in 0..70 {
            det.update(&AttitudeEstimate { roll: 1.5, pitch: 0.0, ..Default::default() }, DT, &p);
        }
        assert_eq!(det.state, FallState::FallenProne);
        let mut det = FallDetector { state: FallState::Falling, ..Default::default() };
        for _ in 0..70 {
            det.update(&AttitudeEstimate { roll: -1.5, pitch: -0.1, ..Default::default() }, DT, &p);
        }
        assert_eq!(det.state, FallState::FallenSupine);
    }

    #[test]
    fn inward_motion_does_not_trigger() {
        let p = FallParams::default();
        let mut det = FallDetector::default();
        assert_eq!(det.update(&pitch_est(1.2, -0.5), DT, &p), FallState::Stable);
    }

    proptest! {
        #[test]
        fn fallen_only_via_falling(seq in proptest::collection::vec((-2.0f64..2.0, -3.0f64..3.0, -2.0f64..2.0), 1..300)) {
            let p = FallParams::default();
            let mut det = FallDetector::default();
            let mut prev = det.state;
            for (pitch, rate, roll) in seq {
                let est = AttitudeEstimate { pitch, pitch_rate: rate, roll, roll_rate: rate, ..Default::default() };
                let s = det.update(&est, DT, &p);
                if s.is_fallen() {
                    prop_assert!(prev == FallState::Falling || prev == s);
                }
                prev = s;
            }
        }
    }
}
