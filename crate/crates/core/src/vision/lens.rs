//! Equidistant fisheye lens with optional radial polynomial refinement.
//!
//! Image coordinates are pixel indices (the center of pixel `i` is at `i`).
//! Camera frame: x right, y up, z along the optical axis.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::VisionError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LensModel {
    pub cx: f64,
    pub cy: f64,
    /// Pixels per radian of off-axis angle.
    pub f: f64,
    pub k1: f64,
    pub k2: f64,
}

impl Default for LensModel {
    fn default() -> Self {
        // 800 px across spans π: r = 400 px ↔ θ = 90°
        LensModel { cx: 400.0, cy: 300.0, f: 254.65, k1: 0.0, k2: 0.0 }
    }
}

/// Direction of an image point: `theta` off the optical axis, `azimuth`
/// around it (0 = image right, +π/2 = image up).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ray {
    pub azimuth: f64,
    pub theta: f64,
}

impl Ray {
    pub fn direction(&self) -> Vector3<f64> {
        let s = self.theta.sin();
        Vector3::new(s * self.azimuth.cos(), s * self.azimuth.sin(), self.theta.cos())
    }

    pub fn from_direction(d: &Vector3<f64>) -> Ray {
        let n = d.norm();
        let theta = (d.z / n).clamp(-1.0, 1.0).acos();
        Ray { azimuth: d.y.atan2(d.x), theta }
    }
}

impl LensModel {
    fn distort(&self, rho: f64) -> f64 {
        let r2 = rho * rho;
        rho * (1.0 + self.k1 * r2 + self.k2 * r2 * r2)
    }

    /// Pixel to viewing ray.
    pub fn undistort(&self, u: f64, v: f64) -> Result<Ray, VisionError> {
        let (dx, dy) = (u - self.cx, v - self.cy);
        let r = (dx * dx + dy * dy).sqrt();
        let theta = self.distort(r / self.f);
        if !(theta <= std::f64::consts::PI) || theta < 0.0 {
            return Err(VisionError::OutOfModel { u, v });
        }
        Ok(Ray { azimuth: (-dy).atan2(dx), theta })
    }

    /// Viewing ray to pixel; the inverse of [`LensModel::undistort`].
    pub fn project(&self, ray: &Ray) -> (f64, f64) {
        let rho = if self.k1 == 0.0 && self.k2 == 0.0 {
            ray.theta
        } else {
            // Newton on ρ(1 + k1ρ² + k2ρ⁴) = θ, started at the equidistant value
            let mut rho = ray.theta;
            for _ in 0..50 {
                let r2 = rho * rho;
                let g = self.distort(rho) - ray.theta;
                let dg = 1.0 + 3.0 * self.k1 * r2 + 5.0 * self.k2 * r2 * r2;
                let step = g / dg;
                rho -= step;
                if step.abs() < 1e-14 {
                    break;
                }
            }
            rho
        };
        let r = rho * self.f;
        (self.cx + r * ray.azimuth.cos(), self.cy - r * ray.azimuth.sin())
    }

    pub fn project_direction(&self, d: &Vector3<f64>) -> (f64, f64) {
        self.project(&Ray::from_direction(d))
    }
}

/// Per-pixel camera-frame unit rays for one lens and image size.
#[derive(Clone, Debug)]
pub struct RayTable {
    pub lens: LensModel,
    pub width: usize,
    pub height: usize,
    /// Row-major; `None` where the lens model does not cover the pixel.
    pub rays: Vec<Option<[f32; 3]>>,
}

impl RayTable {
    pub fn new(lens: LensModel, width: usize, height: usize) -> Self {
        let mut rays = Vec::with_capacity(width * height);
        for v in 0..height {
            for u in 0..width {
                rays.push(lens.undistort(u as f64, v as f64).ok().map(|r| {
                    let d = r.direction();
                    [d.x as f32, d.y as f32, d.z as f32]
                }));
            }
        }
        RayTable { lens, width, height, rays }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    #[test]
    fn principal_point_is_on_axis() {
        let r = LensModel::default().undistort(400.0, 300.0).unwrap();
        assert_eq!(r.theta, 0.0);
    }

    #[test]
    fn forty_five_degrees_right_and_up() {
        let lens = LensModel::default();
        let r = lens.undistort(600.0, 300.0).unwrap();
        assert!((r.theta - 200.0 / 254.65).abs() < 1e-15);
        assert!((r.theta - FRAC_PI_4).abs() < 1e-4);
        assert_eq!(r.azimuth, 0.0);
        let up = lens.undistort(400.0, 100.0).unwrap();
        assert!((up.theta - FRAC_PI_4).abs() < 1e-4);
        assert!((up.azimuth - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn half_width_is_ninety_degrees() {
        let r = LensModel::default().undistort(0.0, 300.0).unwrap();
        assert!((r.theta - FRAC_PI_2).abs() < 1e-3);
    }

    #[test]
    fn beyond_pi_is_out_of_model() {
        let lens = LensModel { f: 100.0, ..Default::default() };
        assert!(matches!(lens.undistort(799.0, 599.0), Err(VisionError::OutOfModel { .. })));
    }

    #[test]
    fn project_inverts_undistort() {
        for lens in [
            LensModel::default(),
            LensModel { k1: -0.05, k2: 0.01, ..Default::default() },
            LensModel { k1: 0.08, ..Default::default() },
        ] {
            for (u, v) in [(10.0, 20.0), (400.0, 300.0), (799.0, 0.0), (123.4, 567.8), (650.0, 300.0)] {
                let ray = lens.undistort(u, v).unwrap();
                if ray.theta >= 85f64.to_radians() {
                    continue;
                }
                let (pu, pv) = lens.project(&ray);
                assert!((pu - u).abs() < 0.5 && (pv - v).abs() < 0.5, "{u},{v} -> {pu},{pv}");
                let (du, dv) = lens.project_direction(&ray.direction());
                assert!((du - u).abs() < 1e-6 && (dv - v).abs() < 1e-6);
            }
        }
    }
}
