//! Servo plant model and model-based feed-forward position control.

mod benchmark;
mod feedforward;
mod gravity;
mod ilc;

pub use benchmark::{IlcBenchmark, IlcReport};
pub use feedforward::{feedforward, FeedForwardModel};
pub use gravity::{gravity_torque, gravity_torques, is_sagittal_pitch};
pub use ilc::{fit_coefficients, ilc_iterate, moving_average, FitOutcome, IlcError, ReferenceTrajectory};

use serde::{Deserialize, Serialize};

use crate::robot_model::{ticks_to_rad, TICKS_PER_REV};

pub const SUBSTEPS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ServoDynamicsParams {
    /// Rotor plus load inertia, kg·m².
    pub inertia: f64,
    /// Position loop stiffness, N·m/rad.
    pub stiffness: f64,
    /// Viscous friction, N·m·s/rad.
    pub viscous: f64,
    /// Coulomb friction, N·m.
    pub coulomb: f64,
    /// Motor torque clamp, N·m.
    pub torque_max: f64,
}

impl Default for ServoDynamicsParams {
    fn default() -> Self {
        ServoDynamicsParams { inertia: 0.01, stiffness: 8.0, viscous: 0.3, coulomb: 0.1, torque_max: 10.0 }
    }
}

impl ServoDynamicsParams {
    pub fn is_valid(&self) -> bool {
        [self.inertia, self.stiffness, self.viscous, self.coulomb]
            .iter()
            .all(|v| v.is_finite() && *v >= 0.0)
            && self.torque_max > 0.0
            && self.inertia > 0.0
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ServoState {
    pub position: f64,
    pub velocity: f64,
    /// Motor torque applied during the last substep.
    pub motor_torque: f64,
}

impl ServoState {
    pub fn at(position: f64) -> Self {
        ServoState { position, ..Default::default() }
    }
}

/// Joint travel the plant may not leave.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Travel {
    pub lo: f64,
    pub hi: f64,
}

impl Travel {
    pub const FREE: Travel = Travel { lo: f64::NEG_INFINITY, hi: f64::INFINITY };
}

/// Convert a goal tick count to radians without range checks (ticks come
/// from a 12-bit register and are always representable).
pub fn goal_ticks_to_rad(ticks: u16) -> f64 {
    ticks_to_rad((ticks as i64).min(TICKS_PER_REV as i64 - 1)).unwrap_or(0.0)
}

/// Advance one servo by `dt` with [`SUBSTEPS`] velocity-Verlet substeps.
///
/// `J·q̈ = clamp(Kp·(q_cmd − q), ±τmax) − b·q̇ − τc·sign(q̇) − τ_ext`.
/// Coulomb friction sticks: a joint at rest stays at rest while the net
/// driving torque is inside the friction band, and a velocity sign change
/// inside the band stops the joint.
pub fn step_servo(
    state: ServoState,
    cmd_ticks: u16,
    external_torque: f64,
    dt: f64,
    params: &ServoDynamicsParams,
    travel: Travel,
) -> ServoState {
    step_servo_rad(state, goal_ticks_to_rad(cmd_ticks), external_torque, dt, params, travel)
}

/// [`step_servo`] with the command already in radians.
pub fn step_servo_rad(
    state: ServoState,
    command: f64,
    external_torque: f64,
    dt: f64,
    params: &ServoDynamicsParams,
    travel: Travel,
) -> ServoState {
    let h = dt / SUBSTEPS as f64;
    let motor = |q: f64| (params.stiffness * (command - q)).clamp(-params.torque_max, params.torque_max);
    let ServoState { mut position, mut velocity, mut motor_torque } = state;
    for _ in 0..SUBSTEPS {
        motor_torque = motor(position);
        let drive = motor_torque - external_torque;
        if velocity == 0.0 && drive.abs() <= params.coulomb {
            continue;
        }
        let friction = params.coulomb * if velocity != 0.0 { velocity.signum() } else { drive.signum() };
        let accel = |drive: f64, v: f64| (drive - params.viscous * v - friction) / params.inertia;
        let a0 = accel(drive, velocity);
        let next_position = position + velocity * h + 0.5 * a0 * h * h;
        let drive1 = motor(next_position) - external_torque;
        let a1 = accel(drive1, velocity + a0 * h);
        let mut next = velocity + 0.5 * (a0 + a1) * h;
        if velocity != 0.0 && next * velocity < 0.0 && drive1.abs() <= params.coulomb {
            next = 0.0;
        }
        position = next_position;
        velocity = next;
        if position < travel.lo || position > travel.hi {
            position = position.clamp(travel.lo, travel.hi);
            velocity = 0.0;
        }
    }
    ServoState { position, velocity, motor_torque }
}
