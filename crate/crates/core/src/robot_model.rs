//! Robot constants: joint layout, limits, link geometry and tick conversion.
//!
//! Sign conventions used across the crate: x forward, y left, z up.
//! Positive pitch leans the body forward (prone side). Positive hip and
//! shoulder pitch swing the limb forward, positive knee and elbow pitch bend
//! the joint, positive ankle pitch lifts the toe.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const JOINT_COUNT: usize = 20;
pub const TICKS_PER_REV: i32 = 4096;
pub const TICK_CENTER: i32 = 2048;
pub const GRAVITY: f64 = 9.81;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("tick value {0} outside 0..=4095")]
    TickRange(i64),
    #[error("angle is not a number")]
    NotANumber,
    #[error("unknown joint name `{0}`")]
    UnknownJoint(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct JointId(u8);

const JOINT_NAMES: [&str; JOINT_COUNT] = [
    "left_hip_yaw",
    "left_hip_roll",
    "left_hip_pitch",
    "left_knee_pitch",
    "left_ankle_pitch",
    "left_ankle_roll",
    "right_hip_yaw",
    "right_hip_roll",
    "right_hip_pitch",
    "right_knee_pitch",
    "right_ankle_pitch",
    "right_ankle_roll",
    "left_shoulder_pitch",
    "left_shoulder_roll",
    "left_elbow_pitch",
    "right_shoulder_pitch",
    "right_shoulder_roll",
    "right_elbow_pitch",
    "neck_yaw",
    "neck_pitch",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
    Center,
}

/// What a joint rotates about, which decides how it behaves under mirroring.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    Yaw,
    Roll,
    Pitch,
}

impl JointId {
    pub const LEFT_HIP_YAW: JointId = JointId(0);
    pub const LEFT_HIP_ROLL: JointId = JointId(1);
    pub const LEFT_HIP_PITCH: JointId = JointId(2);
    pub const LEFT_KNEE_PITCH: JointId = JointId(3);
    pub const LEFT_ANKLE_PITCH: JointId = JointId(4);
    pub const LEFT_ANKLE_ROLL: JointId = JointId(5);
    pub const RIGHT_HIP_YAW: JointId = JointId(6);
    pub const RIGHT_HIP_ROLL: JointId = JointId(7);
    pub const RIGHT_HIP_PITCH: JointId = JointId(8);
    pub const RIGHT_KNEE_PITCH: JointId = JointId(9);
    pub const RIGHT_ANKLE_PITCH: JointId = JointId(10);
    pub const RIGHT_ANKLE_ROLL: JointId = JointId(11);
    pub const LEFT_SHOULDER_PITCH: JointId = JointId(12);
    pub const LEFT_SHOULDER_ROLL: JointId = JointId(13);
    pub const LEFT_ELBOW_PITCH: JointId = JointId(14);
    pub const RIGHT_SHOULDER_PITCH: JointId = JointId(15);
    pub const RIGHT_SHOULDER_ROLL: JointId = JointId(16);
    pub const RIGHT_ELBOW_PITCH: JointId = JointId(17);
    pub const NECK_YAW: JointId = JointId(18);
    pub const NECK_PITCH: JointId = JointId(19);

    pub fn new(index: usize) -> Option<Self> {
        (index < JOINT_COUNT).then_some(JointId(index as u8))
    }

    pub fn all() -> impl Iterator<Item = JointId> + Clone {
        (0..JOINT_COUNT as u8).map(JointId)
    }

    pub fn from_name(name: &str) -> Result<Self, DomainError> {
        JOINT_NAMES
            .iter()
            .position(|n| *n == name)
            .map(|i| JointId(i as u8))
            .ok_or_else(|| DomainError::UnknownJoint(name.to_string()))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn name(self) -> &'static str {
        JOINT_NAMES[self.index()]
    }

    /// Bus device id of the servo driving this joint.
    pub fn bus_id(self) -> u8 {
        self.0 + 1
    }

    pub fn from_bus_id(id: u8) -> Option<Self> {
        id.checked_sub(1).and_then(|i| JointId::new(i as usize))
    }

    pub fn side(self) -> Side {
        match self.0 {
            0..=5 | 12..=14 => Side::Left,
            6..=11 | 15..=17 => Side::Right,
            _ => Side::Center,
        }
    }

    pub fn axis(self) -> Axis {
        let name = self.name();
        if name.ends_with("_yaw") {
            Axis::Yaw
        } else if name.ends_with("_roll") {
            Axis::Roll
        } else {
            Axis::Pitch
        }
    }

    /// The same joint on the other side of the body; center joints map to themselves.
    pub fn mirrored(self) -> JointId {
        match self.0 {
            0..=5 => JointId(self.0 + 6),
            6..=11 => JointId(self.0 - 6),
            12..=14 => JointId(self.0 + 3),
            15..=17 => JointId(self.0 - 3),
            _ => self,
        }
    }
}

impl fmt::Display for JointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl TryFrom<String> for JointId {
    type Error = DomainError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        JointId::from_name(&s)
    }
}

impl From<JointId> for String {
    fn from(j: JointId) -> String {
        j.name().to_string()
    }
}

/// Per-joint quantity in canonical joint order.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct JointVector(pub [f64; JOINT_COUNT]);

impl JointVector {
    pub const ZERO: JointVector = JointVector([0.0; JOINT_COUNT]);

    pub fn splat(v: f64) -> Self {
        JointVector([v; JOINT_COUNT])
    }

    pub fn iter(&self) -> impl Iterator<Item = (JointId, f64)> + '_ {
        JointId::all().map(move |j| (j, self[j]))
    }

    pub fn map(&self, mut f: impl FnMut(JointId, f64) -> f64) -> JointVector {
        let mut out = *self;
        for j in JointId::all() {
            out[j] = f(j, self[j]);
        }
        out
    }

    /// Swap left and right, negating yaw and roll joints.
    pub fn mirror(&self) -> JointVector {
        let mut out = JointVector::ZERO;
        for j in JointId::all() {
            let v = self[j];
            out[j.mirrored()] = match j.axis() {
                Axis::Pitch => v,
                Axis::Roll | Axis::Yaw => -v,
            };
        }
        out
    }

    pub fn max_abs_diff(&self, other: &JointVector) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl Index<JointId> for JointVector {
    type Output = f64;
    fn index(&self, j: JointId) -> &f64 {
        &self.0[j.index()]
    }
}

impl IndexMut<JointId> for JointVector {
    fn index_mut(&mut self, j: JointId) -> &mut f64 {
        &mut self.0[j.index()]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointLimits {
    pub lo: JointVector,
    pub hi: JointVector,
}

impl Default for JointLimits {
    fn default() -> Self {
        let mut lo = JointVector::splat(-2.6);
        let mut hi = JointVector::splat(2.6);
        for knee in [JointId::LEFT_KNEE_PITCH, JointId::RIGHT_KNEE_PITCH] {
            lo[knee] = 0.0;
        }
        for ankle in [JointId::LEFT_ANKLE_ROLL, JointId::RIGHT_ANKLE_ROLL] {
            lo[ankle] = -0.8;
            hi[ankle] = 0.8;
        }
        JointLimits { lo, hi }
    }
}

impl JointLimits {
    pub fn clamp(&self, j: JointId, v: f64) -> f64 {
        v.clamp(self.lo[j], self.hi[j])
    }

    pub fn clamp_all(&self, q: &JointVector) -> JointVector {
        q.map(|j, v| self.clamp(j, v))
    }

    pub fn contains(&self, j: JointId, v: f64) -> bool {
        v >= self.lo[j] && v <= self.hi[j]
    }
}

/// A point-mass link: length along the chain and the distance of its
/// center of mass from the proximal joint.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub length_m: f64,
    pub com_m: f64,
    pub mass_kg: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotConstants {
    pub height_m: f64,
    pub mass_kg: f64,
    pub battery_nominal_v: f64,
    pub trunk: Link,
    pub thigh: Link,
    pub shank: Link,
    pub foot: Link,
    pub upper_arm: Link,
    pub lower_arm: Link,
    pub head: Link,
    /// Lateral distance of each hip joint from the body center line.
    pub hip_offset_y_m: f64,
    /// Toe distance in front of the ankle axis.
    pub toe_length_m: f64,
    pub camera_height_m: f64,
    pub limits: JointLimits,
}

impl Default for RobotConstants {
    fn default() -> Self {
        RobotConstants {
            height_m: 0.95,
            mass_kg: 6.6,
            battery_nominal_v: 14.8,
            trunk: Link { length_m: 0.35, com_m: 0.175, mass_kg: 1.8 },
            thigh: Link { length_m: 0.21, com_m: 0.105, mass_kg: 0.8 },
            shank: Link { length_m: 0.21, com_m: 0.105, mass_kg: 0.7 },
            foot: Link { length_m: 0.05, com_m: 0.045, mass_kg: 0.3 },
            upper_arm: Link { length_m: 0.12, com_m: 0.06, mass_kg: 0.2 },
            lower_arm: Link { length_m: 0.13, com_m: 0.065, mass_kg: 0.2 },
            head: Link { length_m: 0.13, com_m: 0.065, mass_kg: 0.4 },
            hip_offset_y_m: 0.055,
            toe_length_m: 0.10,
            camera_height_m: 0.85,
            limits: JointLimits::default(),
        }
    }
}

impl RobotConstants {
    /// Sum of all link masses, both legs and arms included.
    pub fn link_mass_total(&self) -> f64 {
        self.trunk.mass_kg
            + self.head.mass_kg
            + 2.0 * (self.thigh.mass_kg + self.shank.mass_kg + self.foot.mass_kg)
            + 2.0 * (self.upper_arm.mass_kg + self.lower_arm.mass_kg)
    }

    /// Standing height with straight legs: foot, shank, thigh, trunk and head stacked.
    pub fn stacked_height(&self) -> f64 {
        self.foot.length_m
            + self.shank.length_m
            + self.thigh.length_m
            + self.trunk.length_m
            + self.head.length_m
    }
}

pub fn ticks_to_rad(ticks: i64) -> Result<f64, DomainError> {
    if !(0..TICKS_PER_REV as i64).contains(&ticks) {
        return Err(DomainError::TickRange(ticks));
    }
    Ok((ticks - TICK_CENTER as i64) as f64 * 2.0 * PI / TICKS_PER_REV as f64)
}

pub fn rad_to_ticks(angle: f64) -> Result<u16, DomainError> {
    if angle.is_nan() {
        return Err(DomainError::NotANumber);
    }
    let t = (angle * TICKS_PER_REV as f64 / (2.0 * PI)).round() + TICK_CENTER as f64;
    Ok(t.clamp(0.0, (TICKS_PER_REV - 1) as f64) as u16)
}

/// Wrap an angle to (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn joint_layout() {
        assert_eq!(JointId::all().count(), 20);
        let legs = JointId::all().filter(|j| j.index() < 12).count();
        assert_eq!(legs, 12);
        assert_eq!(JointId::LEFT_KNEE_PITCH.name(), "left_knee_pitch");
        assert_eq!(JointId::RIGHT_HIP_YAW.name(), "right_hip_yaw");
        assert_eq!(JointId::NECK_PITCH.bus_id(), 20);
        assert_eq!(JointId::LEFT_HIP_YAW.bus_id(), 1);
        for j in JointId::all() {
            assert_eq!(JointId::from_name(j.name()).unwrap(), j);
            assert_eq!(JointId::from_bus_id(j.bus_id()), Some(j));
            assert_eq!(j.mirrored().mirrored(), j);
        }
        let arms = JointId::all().filter(|j| (12..18).contains(&j.index())).count();
        assert_eq!(arms, 6);
    }

    #[test]
    fn constants_consistent() {
        let c = RobotConstants::default();
        assert!((c.link_mass_total() - c.mass_kg).abs() < 1e-6);
        assert!((c.stacked_height() - c.height_m).abs() < 1e-9);
        for j in JointId::all() {
            assert!(c.limits.lo[j] < c.limits.hi[j]);
        }
        assert_eq!(c.limits.lo[JointId::LEFT_KNEE_PITCH], 0.0);
        assert_eq!(c.limits.hi[JointId::RIGHT_ANKLE_ROLL], 0.8);
    }

    #[test]
    fn tick_examples() {
        assert_eq!(ticks_to_rad(2048).unwrap(), 0.0);
        assert!((ticks_to_rad(0).unwrap() + PI).abs() < 1e-15);
        assert!((ticks_to_rad(3072).unwrap() - PI / 2.0).abs() < 1e-15);
        assert_eq!(ticks_to_rad(4096), Err(DomainError::TickRange(4096)));
        assert_eq!(ticks_to_rad(-1), Err(DomainError::TickRange(-1)));

        assert_eq!(rad_to_ticks(0.0).unwrap(), 2048);
        assert_eq!(rad_to_ticks(PI / 2.0).unwrap(), 3072);
        assert_eq!(rad_to_ticks(10.0).unwrap(), 4095);
        assert_eq!(rad_to_ticks(-10.0).unwrap(), 0);
        assert_eq!(rad_to_ticks(f64::NAN), Err(DomainError::NotANumber));
    }

    #[test]
    fn mirror_examples() {
        assert_eq!(JointVector::ZERO.mirror(), JointVector::ZERO);

        let mut q = JointVector::ZERO;
        q[JointId::LEFT_KNEE_PITCH] = 0.5;
        let mut expect = JointVector::ZERO;
        expect[JointId::RIGHT_KNEE_PITCH] = 0.5;
        assert_eq!(q.mirror(), expect);

        let mut q = JointVector::ZERO;
        q[JointId::LEFT_HIP_ROLL] = 0.2;
        assert_eq!(q.mirror()[JointId::RIGHT_HIP_ROLL], -0.2);
        assert_eq!(q.mirror()[JointId::LEFT_HIP_ROLL], 0.0);
    }

    #[test]
    fn wrap() {
        assert!((wrap_angle(PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn mirror_is_involution(v in proptest::array::uniform20(-3.0f64..3.0)) {
            let q = JointVector(v);
            prop_assert_eq!(q.mirror().mirror(), q);
        }

        #[test]
        // 4096 does not exist, so the last half tick below +π clamps to 4095.
        fn tick_round_trip(a in -PI + 1e-9..PI - PI / 4096.0) {
            let t = rad_to_ticks(a).unwrap();
            let back = ticks_to_rad(t as i64).unwrap();
            prop_assert!((back - a).abs() <= PI / 4096.0 + 1e-12);
        }
    }
}
