//! Soccer behavior: search, approach, align, kick, fall protection, get-up.

use serde::{Deserialize, Serialize};

use crate::estimation::{AttitudeEstimate, FallState};
use crate::gait::GaitCommand;
use crate::vision::camera::DEFAULT_NECK_PITCH;
use crate::vision::Detections;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BehaviorParams {
    pub staleness_s: f64,
    pub kick_distance: f64,
    pub kick_ball_bearing: f64,
    pub kick_goal_bearing: f64,
    /// Distance at which ALIGN gives up and walks again.
    pub align_exit_distance: f64,
    pub behind_ball: f64,
    pub search_omega: f64,
    pub scan_amplitude: f64,
    pub scan_freq: f64,
    pub turn_gain: f64,
    pub side_gain: f64,
    pub camera_height: f64,
}

impl Default for BehaviorParams {
    fn default() -> Self {
        BehaviorParams {
            staleness_s: 2.0,
            kick_distance: 0.3,
            kick_ball_bearing: 0.2,
            kick_goal_bearing: 0.3,
            align_exit_distance: 0.4,
            behind_ball: 0.25,
            search_omega: 0.4,
            scan_amplitude: 1.0,
            scan_freq: 0.25,
            turn_gain: 1.5,
            side_gain: 2.0,
            camera_height: 0.85,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BallBelief {
    pub bearing: f64,
    /// None when the ball was seen at or above the horizon.
    pub distance: Option<f64>,
    pub age_s: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GoalBelief {
    pub bearing: f64,
    pub age_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldBelief {
    pub time_s: f64,
    pub ball: Option<BallBelief>,
    pub goal: Option<GoalBelief>,
    pub attitude: AttitudeEstimate,
    pub fall_state: FallState,
    /// Name of the motion currently playing, if any.
    pub motion: Option<String>,
}

impl Default for WorldBelief {
    fn default() -> Self {
        WorldBelief {
            time_s: 0.0,
            ball: None,
            goal: None,
            attitude: AttitudeEstimate::default(),
            fall_state: FallState::Stable,
            motion: None,
        }
    }
}

impl WorldBelief {
    pub fn fresh_ball(&self, params: &BehaviorParams) -> Option<&BallBelief> {
        self.ball.as_ref().filter(|b| b.age_s < params.staleness_s)
    }

    pub fn fresh_goal(&self, params: &BehaviorParams) -> Option<&GoalBelief> {
        self.goal.as_ref().filter(|g| g.age_s < params.staleness_s)
    }
}

/// Ground distance to a point seen at `elevation` from `camera_height`.
pub fn ground_distance(camera_height: f64, elevation: f64) -> Option<f64> {
    (elevation < 0.0).then(|| camera_height / (-elevation).tan())
}

/// Age the belief by `dt` and fold in a fresh vision result, if any.
pub fn update_belief(
    belief: &WorldBelief,
    detections: Option<&Detections>,
    attitude: &AttitudeEstimate,
    fall_state: FallState,
    dt: f64,
    params: &BehaviorParams,
) -> WorldBelief {
    let mut next = belief.clone();
    next.time_s += dt;
    next.attitude = *attitude;
    next.fall_state = fall_state;
    if let Some(b) = next.ball.as_mut() {
        b.age_s += dt;
    }
    if let Some(g) = next.goal.as_mut() {
        g.age_s += dt;
    }
    if let Some(det) = detections {
        if let Some(ball) = &det.ball {
            next.ball = Some(BallBelief {
                bearing: ball.bearing.azimuth,
                distance: ground_distance(params.camera_height, ball.bearing.elevation),
                age_s: 0.0,
            });
        }
        if let Some(bearing) = det.goal_bearing() {
            next.goal = Some(GoalBelief { bearing, age_s: 0.0 });
        }
    }
    next
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Mode {
    Search,
    Approach,
    Align,
    Kick,
    Relax,
    Getup,
}

impl Mode {
    pub const ALL: [Mode; 6] = [Mode::Search, Mode::Approach, Mode::Align, Mode::Kick, Mode::Relax, Mode::Getup];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Search => "SEARCH",
            Mode::Approach => "APPROACH",
            Mode::Align => "ALIGN",
            Mode::Kick => "KICK",
            Mode::Relax => "RELAX",
            Mode::Getup => "GETUP",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BehaviorState {
    pub mode: Mode,
    pub entry_time: f64,
}

impl Default for BehaviorState {
    fn default() -> Self {
        BehaviorState { mode: Mode::Search, entry_time: 0.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeadCommand {
    pub yaw: f64,
    pub pitch: f64,
}

impl Default for HeadCommand {
    fn default() -> Self {
        HeadCommand { yaw: 0.0, pitch: DEFAULT_NECK_PITCH }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Action {
    Walk { gait: GaitCommand, head: HeadCommand },
    PlayMotion(String),
    Relax,
}

pub const KICK_MOTION: &str = "kick";

pub fn getup_motion(fall: FallState) -> Option<&'static str> {
    match fall {
        FallState::FallenProne => Some("getup_prone"),
        FallState::FallenSupine => Some("getup_supine"),
        _ => None,
    }
}

fn triangle(t: f64, freq: f64, amplitude: f64) -> f64 {
    let x = (t * freq).rem_euclid(1.0);
    amplitude * if x < 0.25 { 4.0 * x } else if x < 0.75 { 2.0 - 4.0 * x } else { 4.0 * x - 4.0 }
}

fn unit(v: f64) -> f64 {
    v.clamp(-1.0, 1.0)
}

/// Gait command steering toward a point behind the ball on the ball to goal
/// line; far away it heads for that point, close in it turns toward the goal.
pub fn approach_command(ball: &BallBelief, goal: Option<&GoalBelief>, params: &BehaviorParams) -> GaitCommand {
    let d = ball.distance.unwrap_or(1.0);
    let (bx, by) = (d * ball.bearing.cos(), d * ball.bearing.sin());
    let (ux, uy) = match goal {
        Some(g) => (g.bearing.cos(), g.bearing.sin()),
        None if d > 0.0 => (bx / d, by / d),
        None => (1.0, 0.0),
    };
    let (px, py) = (bx - params.behind_ball * ux, by - params.behind_ball * uy);
    let to_target = py.atan2(px);
    let face = goal.map_or(ball.bearing, |g| g.bearing);
    let w = d.clamp(0.0, 1.0);
    GaitCommand::walk(
        w * to_target.cos().max(0.0),
        unit(params.side_gain * py) * (1.0 - w),
        unit(params.turn_gain * (w * to_target + (1.0 - w) * face)),
    )
}

fn align_command(ball: &BallBelief, goal: Option<&GoalBelief>, params: &BehaviorParams) -> GaitCommand {
    let face = goal.map_or(ball.bearing, |g| g.bearing);
    GaitCommand::walk(0.0, unit(params.side_gain * ball.bearing), unit(params.turn_gain * face))
}

fn kick_ready(ball: &BallBelief, goal: Option<&GoalBelief>, params: &BehaviorParams) -> bool {
    ball.distance.is_some_and(|d| d < params.kick_distance)
        && ball.bearing.abs() < params.kick_ball_bearing
        && goal.is_none_or(|g| g.bearing.abs() < params.kick_goal_bearing)
}

fn head_on_ball(ball: &BallBelief, params: &BehaviorParams) -> HeadCommand {
    HeadCommand { yaw: ball.bearing.clamp(-params.scan_amplitude, params.scan_amplitude), pitch: DEFAULT_NECK_PITCH }
}

/// One decision per control cycle.
pub fn tick(state: &BehaviorState, belief: &WorldBelief, params: &BehaviorParams) -> (BehaviorState, Action) {
    let now = belief.time_s;
    let enter = |mode: Mode| if mode == state.mode { *state } else { BehaviorState { mode, entry_time: now } };

    if belief.fall_state == FallState::Falling {
        return (enter(Mode::Relax), Action::Relax);
    }
    if let Some(getup) = getup_motion(belief.fall_state) {
        return (enter(Mode::Getup), Action::PlayMotion(getup.to_string()));
    }
    // a motion in progress runs to completion
    if let (Mode::Kick | Mode::Getup, Some(m)) = (state.mode, &belief.motion) {
        return (*state, Action::PlayMotion(m.clone()));
    }
    if state.mode == Mode::Kick && now <= state.entry_time {
        return (*state, Action::PlayMotion(KICK_MOTION.to_string()));
    }

    let goal = belief.fresh_goal(params);
    let Some(ball) = belief.fresh_ball(params) else {
        let head = HeadCommand { yaw: triangle(now, params.scan_freq, params.scan_amplitude), pitch: DEFAULT_NECK_PITCH };
        return (enter(Mode::Search), Action::Walk { gait: GaitCommand::walk(0.0, 0.0, params.search_omega), head });
    };
    // a finished kick or get-up always looks for the ball again first
    if matches!(state.mode, Mode::Kick | Mode::Getup) {
        let head = HeadCommand { yaw: triangle(now, params.scan_freq, params.scan_amplitude), pitch: DEFAULT_NECK_PITCH };
        return (enter(Mode::Search), Action::Walk { gait: GaitCommand::walk(0.0, 0.0, params.search_omega), head });
    }
    if kick_ready(ball, goal, params) {
        return (enter(Mode::Kick), Action::PlayMotion(KICK_MOTION.to_string()));
    }
    let near = ball.distance.is_some_and(|d| {
        d < if state.mode == Mode::Align { params.align_exit_distance } else { params.kick_distance }
    });
    let head = head_on_ball(ball, params);
    if near {
        (enter(Mode::Align), Action::Walk { gait: align_command(ball, goal, params), head })
    } else {
        (enter(Mode::Approach), Action::Walk { gait: approach_command(ball, goal, params), head })
    }
}
