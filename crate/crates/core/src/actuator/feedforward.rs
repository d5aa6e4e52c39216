use serde::{Deserialize, Serialize};

/// Feed-forward model for one joint: a linear part in velocity, friction
/// direction and gravity load, plus a learned per-sample residual.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FeedForwardModel {
    pub k_velocity: f64,
    pub k_coulomb: f64,
    pub k_gravity: f64,
    /// Learned residual offset (rad), one entry per reference sample.
    pub residual: Vec<f64>,
}

impl FeedForwardModel {
    /// Model that only cancels static gravity droop of a servo with the given stiffness.
    pub fn gravity_only(stiffness: f64) -> Self {
        FeedForwardModel {
            k_gravity: if stiffness > 0.0 { 1.0 / stiffness } else { 0.0 },
            ..Default::default()
        }
    }

    pub fn residual_at(&self, sample: usize) -> f64 {
        self.residual.get(sample).copied().unwrap_or(0.0)
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Command offset (rad) added to the desired position.
///
/// `offset = k_v·q̇_des + k_c·sign(q̇_des) + k_g·τ_gravity + u(sample)`;
/// samples outside the learned residual contribute 0.
pub fn feedforward(velocity_des: f64, gravity_torque: f64, model: &FeedForwardModel, sample: Option<usize>) -> f64 {
    model.k_velocity * velocity_des
        + model.k_coulomb * sign(velocity_des)
        + model.k_gravity * gravity_torque
        + sample.map_or(0.0, |i| model.residual_at(i))
}

pub(crate) fn sign_of(v: f64) -> f64 {
    sign(v)
}
