//! Single-joint tracking benchmark: a sinusoidal reference on one pitch
//! joint under gravity load, tracked by the servo plant with the learned
//! feed-forward offset, refined between rollouts.

use std::f64::consts::PI;

use super::{
    feedforward, gravity_torque, ilc_iterate, step_servo, FeedForwardModel, IlcError, ReferenceTrajectory,
    ServoDynamicsParams, ServoState, Travel,
};
use crate::robot_model::{rad_to_ticks, JointId, JointVector, RobotConstants};

pub const CONTROL_PERIOD_S: f64 = 0.008;

#[derive(Clone, Debug)]
pub struct IlcBenchmark {
    pub joint: JointId,
    pub constants: RobotConstants,
    pub servo: ServoDynamicsParams,
    /// Pose of every other joint while the benchmark joint moves.
    pub pose: JointVector,
    pub reference: ReferenceTrajectory,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IlcReport {
    /// RMS tracking error (rad) per rollout; entry 0 is the rollout before any learning.
    pub rms: Vec<f64>,
    pub model: FeedForwardModel,
}

impl IlcReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,rms_rad\n");
        for (i, r) in self.rms.iter().enumerate() {
            out.push_str(&format!("{i},{r}\n"));
        }
        out
    }
}

impl IlcBenchmark {
    /// 2 s sinusoid around a mid-travel angle, sampled every 8 ms.
    pub fn new(joint: JointId, constants: RobotConstants, servo: ServoDynamicsParams) -> Self {
        let (center, amplitude) = if joint.name().contains("knee") || joint.name().contains("elbow") {
            (0.9, 0.5)
        } else {
            (0.3, 0.5)
        };
        let samples = (2.0 / CONTROL_PERIOD_S).round() as usize;
        let positions: Vec<f64> = (0..samples)
            .map(|i| center + amplitude * (2.0 * PI * i as f64 * CONTROL_PERIOD_S / 2.0).sin())
            .collect();
        let pose = JointVector::ZERO;
        let gravity = positions
            .iter()
            .map(|&q| {
                let mut p = pose;
                p[joint] = q;
                gravity_torque(&p, joint, &constants)
            })
            .collect();
        let reference = ReferenceTrajectory::new(positions, CONTROL_PERIOD_S)
            .and_then(|r| r.with_gravity(gravity))
            .expect("benchmark reference is well formed");
        IlcBenchmark { joint, constants, servo, pose, reference }
    }

    /// Run one rollout and return the tracking error at every sample.
    pub fn rollout(&self, model: &FeedForwardModel) -> Vec<f64> {
        let travel = Travel { lo: self.constants.limits.lo[self.joint], hi: self.constants.limits.hi[self.joint] };
        let r = &self.reference;
        let mut state = ServoState::at(r.positions[0]);
        let mut pose = self.pose;
        (0..r.len())
            .map(|i| {
                let error = r.positions[i] - state.position;
                let offset = feedforward(r.velocities[i], r.gravity[i], model, Some(i));
                let cmd = rad_to_ticks(r.positions[i] + offset).unwrap_or(2048);
                pose[self.joint] = state.position;
                let load = gravity_torque(&pose, self.joint, &self.constants);
                state = step_servo(state, cmd, load, r.dt, &self.servo, travel);
                error
            })
            .collect()
    }

    pub fn run(&self, iterations: usize, gain: f64, lead: usize) -> Result<IlcReport, IlcError> {
        let mut model = FeedForwardModel { residual: vec![0.0; self.reference.len()], ..Default::default() };
        let mut rms = Vec::with_capacity(iterations + 1);
        for k in 0..=iterations {
            let errors = self.rollout(&model);
            rms.push(root_mean_square(&errors));
            if k < iterations {
                model = ilc_iterate(&model, &self.reference, &errors, gain, lead)?;
            }
        }
        Ok(IlcReport { rms, model })
    }
}

pub fn root_mean_square(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}
