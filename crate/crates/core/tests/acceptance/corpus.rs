//! Seeded synthetic scenes with their ground truth. A scene is admitted only
//! when the truth is unambiguous: the ball is fully in view, every goal post
//! is either clearly visible or clearly out of frame, and at least one T or X
//! junction has every arm resolvable by the cell grid.

use nalgebra::{Rotation3, Vector3};
use nop_core::runtime::field::{FieldGeometry, JunctionKind, Surface};
use nop_core::runtime::render::{trace, CameraView, Hit, Scene};
use nop_core::vision::{CameraPose, LensModel, FRAME_HEIGHT, FRAME_WIDTH};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const CAMERA_HEIGHT: f64 = 0.85;
/// Narrowest arm, in pixels, for a junction to count as resolvable.
pub const MIN_ARM_WIDTH_PX: f64 = 6.0;
const MAX_THETA_DEG: f64 = 80.0;
const FRAME_MARGIN_PX: f64 = 20.0;

pub struct CorpusScene {
    pub scene: Scene,
    pub view: CameraView,
    pub pose: CameraPose,
    /// Level-frame direction from the camera to the ball center.
    pub ball_direction: Vector3<f64>,
    pub visible_posts: usize,
    /// Junctions whose T/X kind is observable in this frame.
    pub gradable: Vec<((f64, f64), JunctionKind)>,
}

struct Projected {
    u: f64,
    v: f64,
    theta_deg: f64,
}

fn project(view: &CameraView, lens: &LensModel, p: Vector3<f64>) -> Projected {
    let d = view.rotation.transpose() * (p - view.position);
    let (u, v) = lens.project_direction(&d);
    Projected { u, v, theta_deg: (d.z / d.norm()).clamp(-1.0, 1.0).acos().to_degrees() }
}

fn inside(p: &Projected, margin: f64) -> bool {
    p.theta_deg < MAX_THETA_DEG
        && p.u >= margin
        && p.u <= FRAME_WIDTH as f64 - margin
        && p.v >= margin
        && p.v <= FRAME_HEIGHT as f64 - margin
}

fn near_frame(p: &Projected) -> bool {
    p.theta_deg < 95.0 && p.u >= -40.0 && p.u <= FRAME_WIDTH as f64 + 40.0 && p.v >= -40.0 && p.v <= FRAME_HEIGHT as f64 + 40.0
}

fn sees(scene: &Scene, view: &CameraView, p: Vector3<f64>, want: Hit) -> bool {
    trace(scene, &view.position, &(p - view.position).normalize()) == want
}

#[derive(Debug, PartialEq)]
enum PostView {
    Clear,
    Absent,
    Borderline,
}

fn post_view(scene: &Scene, view: &CameraView, lens: &LensModel, (px, py): (f64, f64)) -> PostView {
    let f = &scene.field;
    let heights = [0.02, f.post_height / 2.0, f.post_height - 0.02];
    let pts: Vec<Projected> = heights.iter().map(|&z| project(view, lens, Vector3::new(px, py, z))).collect();
    if !pts.iter().any(near_frame) {
        return PostView::Absent;
    }
    if !pts.iter().all(|p| inside(p, FRAME_MARGIN_PX)) {
        return PostView::Borderline;
    }
    let mid = Vector3::new(px, py, f.post_height / 2.0);
    let to = mid - view.position;
    let side = Vector3::new(-to.y, to.x, 0.0).normalize() * f.post_radius;
    if ![-0.8, 0.0, 0.8].iter().all(|&s| sees(scene, view, mid + side * s, Hit::Post)) {
        return PostView::Borderline;
    }
    let (a, b) = (project(view, lens, mid + side), project(view, lens, mid - side));
    if (a.u - b.u).hypot(a.v - b.v) < 8.0 {
        return PostView::Borderline;
    }
    PostView::Clear
}

/// Narrowest apparent arm width in pixels, or None when an arm leaves the
/// frame, is hidden, or the junction does not show three arms.
fn arm_width(scene: &Scene, view: &CameraView, lens: &LensModel, (jx, jy): (f64, f64)) -> Option<f64> {
    let f = &scene.field;
    if !inside(&project(view, lens, Vector3::new(jx, jy, 0.0)), FRAME_MARGIN_PX) {
        return None;
    }
    let mut narrowest = f64::INFINITY;
    for rho in [0.15, 0.3] {
        let n = 720;
        let angle = |i: f64| i / n as f64 * std::f64::consts::TAU;
        let on: Vec<bool> = (0..n)
            .map(|i| {
                let a = angle(i as f64);
                matches!(f.surface(jx + rho * a.cos(), jy + rho * a.sin()), Surface::Line(_))
            })
            .collect();
        let mut arms = 0;
        for i in 0..n {
            if !on[i] || on[(i + n - 1) % n] {
                continue;
            }
            let run = (0..n).take_while(|k| on[(i + k) % n]).count();
            let a = angle(i as f64 + (run as f64 - 1.0) / 2.0);
            let p = Vector3::new(jx + rho * a.cos(), jy + rho * a.sin(), 0.0);
            if !matches!(trace(scene, &view.position, &(p - view.position).normalize()), Hit::Ground(Surface::Line(_))) {
                return None;
            }
            let across = Vector3::new(-a.sin(), a.cos(), 0.0) * (f.line_width / 2.0);
            let (l, r) = (project(view, lens, p + across), project(view, lens, p - across));
            if !inside(&l, FRAME_MARGIN_PX) || !inside(&r, FRAME_MARGIN_PX) {
                return None;
            }
            narrowest = narrowest.min((l.u - r.u).hypot(l.v - r.v));
            arms += 1;
        }
        if arms < 3 {
            return None;
        }
    }
    Some(narrowest)
}

fn candidate(rng: &mut ChaCha8Rng, field: &FieldGeometry, lens: &LensModel) -> Option<CorpusScene> {
    let (hl, hw) = (field.half_length(), field.half_width());
    let (x, y) = (rng.gen_range(-hl + 0.3..hl - 0.3), rng.gen_range(-hw + 0.3..hw - 0.3));
    let heading = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
    let (neck_yaw, neck_pitch) = (rng.gen_range(-0.3..0.3), rng.gen_range(0.35..0.65));
    let (ball_dist, ball_off) = (rng.gen_range(0.6..2.5), rng.gen_range(-0.6..0.6));
    let pose = CameraPose::new(neck_yaw, neck_pitch, 0.0, 0.0);
    let view = CameraView::new(x, y, heading, CAMERA_HEIGHT, &pose);
    let a = heading + neck_yaw + ball_off;
    let ball = (x + ball_dist * a.cos(), y + ball_dist * a.sin());
    if ball.0.abs() > hl - field.ball_radius || ball.1.abs() > hw - field.ball_radius {
        return None;
    }
    let mut scene = Scene::new(*field);
    scene.ball = Some(ball);

    let center = Vector3::new(ball.0, ball.1, field.ball_radius);
    if !inside(&project(&view, lens, center), 40.0) || !sees(&scene, &view, center, Hit::Ball) {
        return None;
    }
    let mut visible_posts = 0;
    for p in field.goal_posts() {
        match post_view(&scene, &view, lens, p) {
            PostView::Clear => visible_posts += 1,
            PostView::Absent => {}
            PostView::Borderline => return None,
        }
    }
    if visible_posts > 2 {
        return None;
    }
    let gradable: Vec<_> = field
        .junctions()
        .into_iter()
        .filter(|(j, k)| *k != JunctionKind::L && arm_width(&scene, &view, lens, *j).is_some_and(|w| w >= MIN_ARM_WIDTH_PX))
        .collect();
    if gradable.is_empty() {
        return None;
    }
    let to_level = Rotation3::from_axis_angle(&Vector3::z_axis(), -heading);
    let ball_direction = to_level * (center - view.position);
    Some(CorpusScene { scene, view, pose, ball_direction, visible_posts, gradable })
}

pub fn corpus(n: usize, seed: u64) -> Vec<CorpusScene> {
    let field = FieldGeometry::default();
    let lens = LensModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        if let Some(s) = candidate(&mut rng, &field, &lens) {
            out.push(s);
        }
    }
    out
}

/// Pixel of a ground point as seen from `view`.
pub fn ground_pixel(view: &CameraView, lens: &LensModel, (x, y): (f64, f64)) -> (f64, f64) {
    let p = project(view, lens, Vector3::new(x, y, 0.0));
    (p.u, p.v)
}
