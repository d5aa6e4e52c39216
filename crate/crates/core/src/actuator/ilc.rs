//! Iterative learning of the feed-forward residual and its generalization
//! into the linear model coefficients.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use super::feedforward::{sign_of, FeedForwardModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IlcError {
    #[error("error signal has {got} samples, trajectory has {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("learning gain {0} outside (0, 1]")]
    Gain(f64),
    #[error("a reference trajectory needs at least 3 samples, got {0}")]
    TooShort(usize),
    #[error("sample period must be positive")]
    Period,
}

/// Desired joint positions sampled at a fixed period, plus the gravity load
/// expected at each sample.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceTrajectory {
    pub dt: f64,
    pub positions: Vec<f64>,
    pub velocities: Vec<f64>,
    pub accelerations: Vec<f64>,
    pub gravity: Vec<f64>,
}

impl ReferenceTrajectory {
    pub fn new(positions: Vec<f64>, dt: f64) -> Result<Self, IlcError> {
        let n = positions.len();
        if n < 3 {
            return Err(IlcError::TooShort(n));
        }
        if !(dt > 0.0) {
            return Err(IlcError::Period);
        }
        let diff = |v: &[f64]| -> Vec<f64> {
            (0..n)
                .map(|i| match i {
                    0 => (v[1] - v[0]) / dt,
                    i if i == n - 1 => (v[n - 1] - v[n - 2]) / dt,
                    i => (v[i + 1] - v[i - 1]) / (2.0 * dt),
                })
                .collect()
        };
        let velocities = diff(&positions);
        let accelerations = diff(&velocities);
        Ok(ReferenceTrajectory { dt, gravity: vec![0.0; n], positions, velocities, accelerations })
    }

    pub fn with_gravity(mut self, gravity: Vec<f64>) -> Result<Self, IlcError> {
        if gravity.len() != self.len() {
            return Err(IlcError::LengthMismatch { expected: self.len(), got: gravity.len() });
        }
        self.gravity = gravity;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Centered moving average; windows are truncated at the edges.
pub fn moving_average(values: &[f64], width: usize) -> Vec<f64> {
    let half = width / 2;
    let n = values.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

pub const SMOOTHING_WIDTH: usize = 5;

/// One learning step: `u ← smooth(u + γ·e(i + lead))`, errors past the end read 0.
pub fn ilc_iterate(
    model: &FeedForwardModel,
    traj: &ReferenceTrajectory,
    errors: &[f64],
    gain: f64,
    lead: usize,
) -> Result<FeedForwardModel, IlcError> {
    let n = traj.len();
    if errors.len() != n {
        return Err(IlcError::LengthMismatch { expected: n, got: errors.len() });
    }
    if !(gain > 0.0 && gain <= 1.0) {
        return Err(IlcError::Gain(gain));
    }
    let raw: Vec<f64> = (0..n)
        .map(|i| model.residual_at(i) + gain * errors.get(i + lead).copied().unwrap_or(0.0))
        .collect();
    Ok(FeedForwardModel { residual: moving_average(&raw, SMOOTHING_WIDTH), ..model.clone() })
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitOutcome {
    pub model: FeedForwardModel,
    /// The non-trivial regressors were collinear; the input model is returned unchanged.
    pub singular: bool,
}

/// Least-squares fit of the learned residual against `[q̇_des, sign(q̇_des), τ_gravity]`.
///
/// The fitted coefficients are added to the model and the residual keeps
/// only what the linear part cannot explain. Regressor columns that are
/// identically zero are left out of the fit.
pub fn fit_coefficients(model: &FeedForwardModel, traj: &ReferenceTrajectory) -> FitOutcome {
    let n = traj.len();
    let u: Vec<f64> = (0..n).map(|i| model.residual_at(i)).collect();
    let columns: [Vec<f64>; 3] = [
        traj.velocities.clone(),
        traj.velocities.iter().map(|v| sign_of(*v)).collect(),
        traj.gravity.clone(),
    ];
    let active: Vec<usize> = (0..3).filter(|&c| columns[c].iter().any(|v| *v != 0.0)).collect();
    if active.is_empty() {
        return FitOutcome { model: model.clone(), singular: false };
    }
    let x = DMatrix::from_fn(n, active.len(), |r, c| columns[active[c]][r]);
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin <= 1e-9 * smax * (n as f64).sqrt() {
        return FitOutcome { model: model.clone(), singular: true };
    }
    let rhs = DVector::from_vec(u.clone());
    let coef = svd.solve(&rhs, 1e-12).expect("svd computed with both factors");
    let fitted = &x * &coef;

    let mut out = model.clone();
    let mut deltas = [0.0; 3];
    for (k, &c) in active.iter().enumerate() {
        deltas[c] = coef[k];
    }
    out.k_velocity += deltas[0];
    out.k_coulomb += deltas[1];
    out.k_gravity += deltas[2];
    out.residual = u.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect();
    FitOutcome { model: out, singular: false }
}
