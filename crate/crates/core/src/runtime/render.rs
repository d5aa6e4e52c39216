//! Synthetic fisheye camera: one ray per pixel against the ground plane,
//! the ball, goal posts and obstacles.

use nalgebra::{Matrix3, Rotation3, Vector3};
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::field::{FieldGeometry, Surface};
use crate::vision::lut::palette;
use crate::vision::{CameraPose, LensModel, RayTable, Yuv, YuyvImage};

pub const OBSTACLE_RADIUS: f64 = 0.2;
pub const OBSTACLE_HEIGHT: f64 = 0.6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub field: FieldGeometry,
    pub ball: Option<(f64, f64)>,
    pub obstacles: Vec<(f64, f64)>,
}

impl Scene {
    pub fn new(field: FieldGeometry) -> Self {
        Scene { field, ball: None, obstacles: Vec::new() }
    }
}

/// Camera placement in the world.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraView {
    pub position: Vector3<f64>,
    /// Camera-frame direction → world direction.
    pub rotation: Matrix3<f64>,
}

impl CameraView {
    /// Camera above the robot at (x, y) with heading θ, oriented by `pose`
    /// relative to the robot's level frame.
    pub fn new(x: f64, y: f64, heading: f64, height: f64, pose: &CameraPose) -> Self {
        let yaw = Rotation3::from_axis_angle(&Vector3::z_axis(), heading);
        CameraView { position: Vector3::new(x, y, height), rotation: yaw.matrix() * pose.rotation }
    }

    pub fn world_direction(&self, d_cam: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * d_cam
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Hit {
    Sky,
    Ground(Surface),
    Ball,
    Post,
    Obstacle,
}

impl Hit {
    pub fn color(self) -> Yuv {
        match self {
            Hit::Sky => palette::SKY,
            Hit::Ground(Surface::Field) => palette::FIELD,
            Hit::Ground(Surface::Line(_)) => palette::LINE,
            Hit::Ground(Surface::Floor) => palette::FLOOR,
            Hit::Ball => palette::BALL,
            Hit::Post => palette::GOAL,
            Hit::Obstacle => palette::OBSTACLE,
        }
    }
}

fn sphere_hit(o: &Vector3<f64>, d: &Vector3<f64>, c: &Vector3<f64>, r: f64) -> Option<f64> {
    let oc = o - c;
    let b = oc.dot(d);
    let cc = oc.norm_squared() - r * r;
    let disc = b * b - cc;
    if disc < 0.0 {
        return None;
    }
    let t = -b - disc.sqrt();
    (t > 0.0).then_some(t)
}

/// Nearest hit of a vertical cylinder standing on the ground, side or top.
fn cylinder_hit(o: &Vector3<f64>, d: &Vector3<f64>, cx: f64, cy: f64, r: f64, h: f64) -> Option<f64> {
    let (ox, oy) = (o.x - cx, o.y - cy);
    let a = d.x * d.x + d.y * d.y;
    let mut best: Option<f64> = None;
    if a > 1e-12 {
        let b = ox * d.x + oy * d.y;
        let c = ox * ox + oy * oy - r * r;
        let disc = b * b - a * c;
        if disc >= 0.0 {
            let t = (-b - disc.sqrt()) / a;
            let z = o.z + t * d.z;
            if t > 0.0 && (0.0..=h).contains(&z) {
                best = Some(t);
            }
        }
    }
    if d.z.abs() > 1e-12 {
        let t = (h - o.z) / d.z;
        let (px, py) = (ox + t * d.x, oy + t * d.y);
        if t > 0.0 && px * px + py * py <= r * r && best.is_none_or(|b| t < b) {
            best = Some(t);
        }
    }
    best
}

/// What the world-frame ray from `origin` along `d` sees first.
pub fn trace(scene: &Scene, origin: &Vector3<f64>, d: &Vector3<f64>) -> Hit {
    let f = &scene.field;
    let mut best = f64::INFINITY;
    let mut hit = Hit::Sky;
    if d.z < 0.0 {
        best = -origin.z / d.z;
        hit = Hit::Ground(Surface::Field);
    }
    if let Some((bx, by)) = scene.ball {
        if let Some(t) = sphere_hit(origin, d, &Vector3::new(bx, by, f.ball_radius), f.ball_radius) {
            if t < best {
                best = t;
                hit = Hit::Ball;
            }
        }
    }
    for (px, py) in f.goal_posts() {
        if let Some(t) = cylinder_hit(origin, d, px, py, f.post_radius, f.post_height) {
            if t < best {
                best = t;
                hit = Hit::Post;
            }
        }
    }
    for &(ox, oy) in &scene.obstacles {
        if let Some(t) = cylinder_hit(origin, d, ox, oy, OBSTACLE_RADIUS, OBSTACLE_HEIGHT) {
            if t < best {
                best = t;
                hit = Hit::Obstacle;
            }
        }
    }
    if hit == Hit::Ground(Surface::Field) {
        hit = Hit::Ground(f.surface(origin.x + best * d.x, origin.y + best * d.y));
    }
    hit
}

/// Continuous-coordinate lookup used by geometry checks: the hit seen
/// through image point (u, v), or None outside the lens model.
pub fn surface_at(scene: &Scene, view: &CameraView, lens: &LensModel, u: f64, v: f64) -> Option<Hit> {
    let ray = lens.undistort(u, v).ok()?;
    Some(trace(scene, &view.position, &view.world_direction(&ray.direction())))
}

fn pixel_hit(scene: &Scene, view: &CameraView, rays: &RayTable, idx: usize) -> Hit {
    match rays.rays[idx] {
        Some([x, y, z]) => trace(scene, &view.position, &view.world_direction(&Vector3::new(x as f64, y as f64, z as f64))),
        None => Hit::Sky,
    }
}

fn render_row(scene: &Scene, view: &CameraView, rays: &RayTable, row: usize, out: &mut [u8]) {
    let w = rays.width;
    for x in (0..w).step_by(2) {
        let left = pixel_hit(scene, view, rays, row * w + x).color();
        let right = pixel_hit(scene, view, rays, row * w + x + 1).color();
        out[x * 2..x * 2 + 4].copy_from_slice(&[left.y, left.u, right.y, left.v]);
    }
}

pub fn render_camera_sequential(scene: &Scene, view: &CameraView, rays: &RayTable) -> YuyvImage {
    let (w, h) = (rays.width, rays.height);
    let mut data = vec![0u8; w * h * 2];
    for (row, out) in data.chunks_mut(w * 2).enumerate() {
        render_row(scene, view, rays, row, out);
    }
    YuyvImage { width: w, height: h, data }
}

#[cfg(feature = "parallel")]
pub fn render_camera_parallel(scene: &Scene, view: &CameraView, rays: &RayTable) -> YuyvImage {
    let (w, h) = (rays.width, rays.height);
    let mut data = vec![0u8; w * h * 2];
    data.par_chunks_mut(w * 2).enumerate().for_each(|(row, out)| render_row(scene, view, rays, row, out));
    YuyvImage { width: w, height: h, data }
}

/// Render a YUYV frame; each pixel pair takes its chroma from the left pixel.
pub fn render_camera(scene: &Scene, view: &CameraView, rays: &RayTable) -> YuyvImage {
    #[cfg(feature = "parallel")]
    {
        render_camera_parallel(scene, view, rays)
    }
    #[cfg(not(feature = "parallel"))]
    {
        render_camera_sequential(scene, view, rays)
    }
}
