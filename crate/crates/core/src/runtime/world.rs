//! Kinematic world: robot pose, ball, attitude during falls, battery.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::field::FieldGeometry;
use super::render::{CameraView, Scene};
use crate::gait::Twist;
use crate::robot_model::{JointId, JointVector, RobotConstants, GRAVITY};
use crate::servo_bus::ImuReading;
use crate::vision::CameraPose;

pub const BATTERY_FULL_V: f64 = 16.0;
pub const BATTERY_MIN_V: f64 = 12.8;
pub const BATTERY_MAX_V: f64 = 16.8;
pub const BATTERY_LOW_V: f64 = 14.0;
pub const BATTERY_DRAIN_PER_CYCLE: f64 = 0.0001;
/// Closest the robot center gets to the ball center before pushing it.
pub const ROBOT_RADIUS: f64 = 0.2;
/// Half the foot width across the toe edge.
pub const FOOT_HALF_WIDTH: f64 = 0.05;
const CONTACT_MARGIN: f64 = 0.02;
const MAX_BALL_SPEED: f64 = 4.0;
const UPRIGHT_RAD: f64 = 0.5;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Pose2 { x, y, theta }
    }

    /// Robot-frame point to world frame.
    pub fn transform(&self, px: f64, py: f64) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        (self.x + c * px - s * py, self.y + s * px + c * py)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BallState {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum WorldEvent {
    /// Tip the robot toward `pitch` (rad, positive forward).
    Push { pitch: f64 },
    Teleport { x: f64, y: f64, theta: f64 },
    SetBall {
        x: f64,
        y: f64,
        #[serde(default)]
        vx: f64,
        #[serde(default)]
        vy: f64,
    },
    RemoveBall,
    AddObstacle { x: f64, y: f64 },
    ClearObstacles,
    /// Fresh battery; re-arms the low-battery event.
    SetBattery { volts: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldParams {
    pub ball_friction: f64,
    pub push_duration_s: f64,
    pub restitution: f64,
    pub gyro_noise: f64,
    pub accel_noise: f64,
}

impl Default for WorldParams {
    fn default() -> Self {
        WorldParams { ball_friction: 0.5, push_duration_s: 0.3, restitution: 0.5, gyro_noise: 0.005, accel_noise: 0.05 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Ramp {
    from: f64,
    to: f64,
    elapsed: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorldNotice {
    LowBattery,
    BallTouched,
}

/// What the control loop hands the world each cycle.
#[derive(Clone, Copy, Debug, Default)]
pub struct StepInput {
    /// Body velocity while the gait is walking.
    pub twist: Option<Twist>,
    /// Measured joint angles after the servo step.
    pub joints: JointVector,
    /// Fraction of a get-up motion completed.
    pub getup_progress: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct World {
    pub field: FieldGeometry,
    pub constants: RobotConstants,
    pub params: WorldParams,
    pub robot: Pose2,
    pub ball: Option<BallState>,
    pub obstacles: Vec<(f64, f64)>,
    pub pitch: f64,
    pub roll: f64,
    pub pitch_rate: f64,
    pub roll_rate: f64,
    pub yaw_rate: f64,
    pub battery_v: f64,
    low_battery_sent: bool,
    push: Option<Ramp>,
    /// Attitude when the current get-up started.
    getup_from: Option<(f64, f64)>,
    toes: Option<[Vector3<f64>; 2]>,
    rng: ChaCha8Rng,
}

impl World {
    pub fn new(field: FieldGeometry, seed: u64) -> Self {
        World {
            field,
            constants: RobotConstants::default(),
            params: WorldParams::default(),
            robot: Pose2::new(-2.0, 0.0, 0.0),
            ball: Some(BallState::default()),
            obstacles: Vec::new(),
            pitch: 0.0,
            roll: 0.0,
            pitch_rate: 0.0,
            roll_rate: 0.0,
            yaw_rate: 0.0,
            battery_v: BATTERY_FULL_V,
            low_battery_sent: false,
            push: None,
            getup_from: None,
            toes: None,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn inject(&mut self, event: &WorldEvent) {
        match *event {
            WorldEvent::Push { pitch } => {
                self.push = Some(Ramp { from: self.pitch, to: pitch.clamp(-FRAC_PI_2, FRAC_PI_2), elapsed: 0.0 });
            }
            WorldEvent::Teleport { x, y, theta } => {
                self.robot = Pose2::new(x, y, theta);
                self.toes = None;
            }
            WorldEvent::SetBall { x, y, vx, vy } => self.ball = Some(BallState { x, y, vx, vy }),
            WorldEvent::RemoveBall => self.ball = None,
            WorldEvent::AddObstacle { x, y } => self.obstacles.push((x, y)),
            WorldEvent::ClearObstacles => self.obstacles.clear(),
            WorldEvent::SetBattery { volts } => {
                self.battery_v = volts.clamp(BATTERY_MIN_V, BATTERY_MAX_V);
                self.low_battery_sent = self.battery_v <= BATTERY_LOW_V;
            }
        }
    }

    pub fn upright(&self) -> bool {
        self.push.is_none() && self.pitch.abs() < UPRIGHT_RAD && self.roll.abs() < UPRIGHT_RAD
    }

    /// Stand the robot back up; called when a get-up completes.
    pub fn reset_attitude(&mut self) {
        self.pitch = 0.0;
        self.roll = 0.0;
        self.pitch_rate = 0.0;
        self.roll_rate = 0.0;
        self.push = None;
        self.getup_from = None;
    }

    pub fn scene(&self) -> Scene {
        Scene { field: self.field, ball: self.ball.map(|b| (b.x, b.y)), obstacles: self.obstacles.clone() }
    }

    /// Camera placement from the true attitude and the measured neck angles.
    pub fn camera_view(&self, neck_yaw: f64, neck_pitch: f64) -> CameraView {
        let h = self.constants.camera_height_m;
        let height = (h * self.pitch.cos() * self.roll.cos()).max(0.05);
        let (x, y) = self.robot.transform(h * self.pitch.sin(), -h * self.roll.sin());
        let pose = CameraPose::new(neck_yaw, neck_pitch, self.roll, self.pitch);
        CameraView::new(x, y, self.robot.theta, height, &pose)
    }

    /// IMU board reading for the current attitude, with seeded noise.
    pub fn imu(&mut self) -> ImuReading {
        let body = Rotation3::from_axis_angle(&Vector3::y_axis(), self.pitch)
            * Rotation3::from_axis_angle(&Vector3::x_axis(), self.roll);
        let g = body.inverse() * Vector3::new(0.0, 0.0, GRAVITY);
        let (gn, an) = (self.params.gyro_noise, self.params.accel_noise);
        let mut noise = |a: f64| if a > 0.0 { self.rng.gen_range(-a..a) } else { 0.0 };
        let gyro = [self.roll_rate + noise(gn), self.pitch_rate + noise(gn), self.yaw_rate + noise(gn)];
        let accel = [g.x + noise(an), g.y + noise(an), g.z + noise(an)];
        ImuReading { gyro, accel, voltage: self.battery_v }
    }

    pub fn step(&mut self, input: &StepInput, dt: f64) -> Vec<WorldNotice> {
        let mut notices = Vec::new();
        self.step_attitude(input.getup_progress, dt);

        self.yaw_rate = 0.0;
        if let Some(t) = input.twist.filter(|_| self.upright()) {
            let (s, c) = self.robot.theta.sin_cos();
            self.robot.x += (c * t.vx - s * t.vy) * dt;
            self.robot.y += (s * t.vx + c * t.vy) * dt;
            self.robot.theta = crate::robot_model::wrap_angle(self.robot.theta + t.omega * dt);
            self.yaw_rate = t.omega;
            self.battery_v = (self.battery_v - BATTERY_DRAIN_PER_CYCLE).max(BATTERY_MIN_V);
            if self.battery_v <= BATTERY_LOW_V && !self.low_battery_sent {
                self.low_battery_sent = true;
                notices.push(WorldNotice::LowBattery);
            }
        }

        let toes = if self.upright() { Some(self.toe_points(&input.joints)) } else { None };
        if let (Some(now), Some(prev), Some(ball)) = (toes, self.toes, self.ball.as_mut()) {
            let r = self.field.ball_radius;
            let center = Vector3::new(ball.x, ball.y, r);
            let half = FOOT_HALF_WIDTH * Vector3::new(-self.robot.theta.sin(), self.robot.theta.cos(), 0.0);
            for k in 0..2 {
                let p = closest_on_segment(&center, &(now[k] - half), &(now[k] + half));
                let d = center - p;
                let n = Vector3::new(d.x, d.y, 0.0);
                if d.norm() >= r + CONTACT_MARGIN || n.norm() < 1e-9 {
                    continue;
                }
                let n = n.normalize();
                let v_toe = (now[k] - prev[k]) / dt;
                let v_rel = (v_toe.x - ball.vx) * n.x + (v_toe.y - ball.vy) * n.y;
                if v_rel > 0.0 {
                    let k = 1.0 + self.params.restitution;
                    ball.vx += k * v_rel * n.x;
                    ball.vy += k * v_rel * n.y;
                    let speed = ball.vx.hypot(ball.vy);
                    if speed > MAX_BALL_SPEED {
                        ball.vx *= MAX_BALL_SPEED / speed;
                        ball.vy *= MAX_BALL_SPEED / speed;
                    }
                    notices.push(WorldNotice::BallTouched);
                }
            }
        }
        self.toes = toes;
        self.step_ball(dt);
        notices
    }

    fn step_attitude(&mut self, getup_progress: Option<f64>, dt: f64) {
        if let Some(ramp) = self.push.as_mut() {
            let dur = self.params.push_duration_s.max(dt);
            ramp.elapsed = (ramp.elapsed + dt).min(dur);
            let s = ramp.elapsed / dur;
            let blend = 0.5 - 0.5 * (std::f64::consts::PI * s).cos();
            let prev = self.pitch;
            self.pitch = ramp.from + (ramp.to - ramp.from) * blend;
            self.pitch_rate = (self.pitch - prev) / dt;
            if s >= 1.0 {
                self.push = None;
            }
            self.getup_from = None;
            return;
        }
        match getup_progress {
            Some(p) => {
                let (p0, r0) = *self.getup_from.get_or_insert((self.pitch, self.roll));
                let keep = 1.0 - p.clamp(0.0, 1.0);
                let (prev_p, prev_r) = (self.pitch, self.roll);
                self.pitch = p0 * keep;
                self.roll = r0 * keep;
                self.pitch_rate = (self.pitch - prev_p) / dt;
                self.roll_rate = (self.roll - prev_r) / dt;
            }
            None => {
                self.getup_from = None;
                self.pitch_rate = 0.0;
                self.roll_rate = 0.0;
            }
        }
    }

    fn step_ball(&mut self, dt: f64) {
        let rr = ROBOT_RADIUS;
        let robot = self.robot;
        let (lx, ly) = (self.field.half_length() + self.field.carpet_margin, self.field.half_width() + self.field.carpet_margin);
        let friction = self.params.ball_friction;
        let Some(ball) = self.ball.as_mut() else { return };
        let speed = ball.vx.hypot(ball.vy);
        if speed > 0.0 {
            let slower = (speed - friction * dt).max(0.0);
            ball.x += ball.vx * dt;
            ball.y += ball.vy * dt;
            ball.vx *= slower / speed;
            ball.vy *= slower / speed;
        }
        for (pos, vel, lim) in [(&mut ball.x, &mut ball.vx, lx), (&mut ball.y, &mut ball.vy, ly)] {
            if pos.abs() > lim {
                *pos = pos.signum() * lim;
                *vel = -0.5 * *vel;
            }
        }
        let (dx, dy) = (ball.x - robot.x, ball.y - robot.y);
        let d = dx.hypot(dy);
        if d < rr {
            let (ux, uy) = if d > 1e-9 { (dx / d, dy / d) } else { (robot.theta.cos(), robot.theta.sin()) };
            ball.x = robot.x + ux * rr;
            ball.y = robot.y + uy * rr;
        }
    }

    /// Toe edge centers of both feet in world coordinates, left then right.
    pub fn toe_points(&self, q: &JointVector) -> [Vector3<f64>; 2] {
        let c = &self.constants;
        let legs = [
            (JointId::LEFT_HIP_PITCH, JointId::LEFT_KNEE_PITCH, JointId::LEFT_ANKLE_PITCH, c.hip_offset_y_m),
            (JointId::RIGHT_HIP_PITCH, JointId::RIGHT_KNEE_PITCH, JointId::RIGHT_ANKLE_PITCH, -c.hip_offset_y_m),
        ];
        let rel = legs.map(|(h, k, a, y)| {
            let a1 = q[h];
            let a2 = a1 + q[k];
            let a3 = a2 + q[a];
            let sole_x = -c.thigh.length_m * a1.sin() - c.shank.length_m * a2.sin() - c.foot.length_m * a3.sin();
            let sole_z = -c.thigh.length_m * a1.cos() - c.shank.length_m * a2.cos() - c.foot.length_m * a3.cos();
            (sole_x + c.toe_length_m * a3.cos(), y, sole_z - c.toe_length_m * a3.sin(), sole_z)
        });
        // the lower sole stands on the ground
        let hip_height = -rel[0].3.min(rel[1].3);
        rel.map(|(x, y, z, _)| {
            let (wx, wy) = self.robot.transform(x, y);
            Vector3::new(wx, wy, hip_height + z)
        })
    }
}

fn closest_on_segment(p: &Vector3<f64>, a: &Vector3<f64>, b: &Vector3<f64>) -> Vector3<f64> {
    let ab = b - a;
    let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    a + ab * t
}
