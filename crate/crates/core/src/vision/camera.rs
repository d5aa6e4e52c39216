//! Camera orientation relative to the robot's level frame.
//!
//! Level frame: x forward along the robot heading, y left, z up. Positive
//! neck pitch looks down, positive body pitch leans forward.

use nalgebra::{Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use super::lens::{LensModel, Ray};

pub const DEFAULT_NECK_PITCH: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bearing {
    /// Counter-clockwise from straight ahead.
    pub azimuth: f64,
    /// Above the horizon is positive.
    pub elevation: f64,
}

impl Bearing {
    pub fn from_direction(d: &Vector3<f64>) -> Bearing {
        Bearing { azimuth: d.y.atan2(d.x), elevation: d.z.atan2(d.x.hypot(d.y)) }
    }

    pub fn direction(&self) -> Vector3<f64> {
        let c = self.elevation.cos();
        Vector3::new(c * self.azimuth.cos(), c * self.azimuth.sin(), self.elevation.sin())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraPose {
    /// Camera-frame direction → level-frame direction.
    pub rotation: Matrix3<f64>,
}

/// Camera axes (x right, y up, z optical) expressed in the head frame.
fn optical_to_head() -> Matrix3<f64> {
    Matrix3::new(0.0, 0.0, 1.0, -1.0, 0.0, 0.0, 0.0, 1.0, 0.0)
}

impl CameraPose {
    pub fn new(neck_yaw: f64, neck_pitch: f64, roll: f64, pitch: f64) -> Self {
        let body = Rotation3::from_axis_angle(&Vector3::y_axis(), pitch) * Rotation3::from_axis_angle(&Vector3::x_axis(), roll);
        let neck = Rotation3::from_axis_angle(&Vector3::z_axis(), neck_yaw) * Rotation3::from_axis_angle(&Vector3::y_axis(), neck_pitch);
        CameraPose { rotation: (body * neck).matrix() * optical_to_head() }
    }

    /// Upright robot, head straight ahead at the given pitch.
    pub fn stand(neck_pitch: f64) -> Self {
        Self::new(0.0, neck_pitch, 0.0, 0.0)
    }

    pub fn to_level(&self, d_cam: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * d_cam
    }

    pub fn to_camera(&self, d_level: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.transpose() * d_level
    }

    pub fn bearing(&self, lens: &LensModel, u: f64, v: f64) -> Option<Bearing> {
        lens.undistort(u, v).ok().map(|r| Bearing::from_direction(&self.to_level(&r.direction())))
    }

    pub fn project(&self, lens: &LensModel, d_level: &Vector3<f64>) -> (f64, f64) {
        lens.project(&Ray::from_direction(&self.to_camera(d_level)))
    }
}

impl Default for CameraPose {
    fn default() -> Self {
        Self::stand(DEFAULT_NECK_PITCH)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn optical_axis_looks_ahead_and_down() {
        let lens = LensModel::default();
        let level = CameraPose::stand(0.0).bearing(&lens, 400.0, 300.0).unwrap();
        assert!(level.azimuth.abs() < 1e-12 && level.elevation.abs() < 1e-12);
        let down = CameraPose::stand(0.5).bearing(&lens, 400.0, 300.0).unwrap();
        assert!((down.elevation + 0.5).abs() < 1e-12);
        let leaning = CameraPose::new(0.0, 0.0, 0.0, 0.3).bearing(&lens, 400.0, 300.0).unwrap();
        assert!((leaning.elevation + 0.3).abs() < 1e-12);
    }

    #[test]
    fn image_right_is_robot_right() {
        let lens = LensModel::default();
        let b = CameraPose::stand(0.0).bearing(&lens, 600.0, 300.0).unwrap();
        assert!((b.azimuth + FRAC_PI_4).abs() < 1e-4);
        let up = CameraPose::stand(0.0).bearing(&lens, 400.0, 100.0).unwrap();
        assert!((up.elevation - FRAC_PI_4).abs() < 1e-4);
        let yawed = CameraPose::new(0.4, 0.0, 0.0, 0.0).bearing(&lens, 400.0, 300.0).unwrap();
        assert!((yawed.azimuth - 0.4).abs() < 1e-12);
    }

    #[test]
    fn project_inverts_bearing() {
        let lens = LensModel::default();
        let pose = CameraPose::new(-0.3, 0.6, 0.1, -0.2);
        for (u, v) in [(100.0, 200.0), (400.0, 300.0), (700.0, 550.0)] {
            let b = pose.bearing(&lens, u, v).unwrap();
            let (pu, pv) = pose.project(&lens, &b.direction());
            assert!((pu - u).abs() < 1e-9 && (pv - v).abs() < 1e-9);
        }
    }
}
