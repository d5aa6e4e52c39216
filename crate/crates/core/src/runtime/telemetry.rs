use serde::{Deserialize, Serialize};

use super::world::Pose2;
use crate::estimation::FallState;
use crate::robot_model::JointVector;
use crate::vision::{CrossingKind, Detections};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BallSummary {
    pub azimuth: f64,
    pub elevation: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectionSummary {
    /// Cycle whose frame produced these detections.
    pub frame_cycle: u64,
    pub ball: Option<BallSummary>,
    pub goal_posts: usize,
    pub goal_bearing: Option<f64>,
    pub obstacles: usize,
    pub lines: usize,
    pub t_crossings: usize,
    pub x_crossings: usize,
}

impl DetectionSummary {
    pub fn new(frame_cycle: u64, d: &Detections) -> Self {
        let count = |k: CrossingKind| d.crossings.iter().filter(|c| c.kind == k).count();
        DetectionSummary {
            frame_cycle,
            ball: d.ball.as_ref().map(|b| BallSummary { azimuth: b.bearing.azimuth, elevation: b.bearing.elevation }),
            goal_posts: d.goal_posts.len(),
            goal_bearing: d.goal_bearing(),
            obstacles: d.obstacles.len(),
            lines: d.line_segments.len(),
            t_crossings: count(CrossingKind::T),
            x_crossings: count(CrossingKind::X),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AttitudeSummary {
    pub roll: f64,
    pub pitch: f64,
}

/// One line of the telemetry stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TelemetryFrame {
    pub cycle: u64,
    pub time_us: u64,
    pub targets: JointVector,
    pub positions: JointVector,
    pub attitude: AttitudeSummary,
    pub fall_state: FallState,
    pub behavior: String,
    pub motion: Option<String>,
    pub battery_v: f64,
    pub pose: Pose2,
    pub ball: Option<[f64; 2]>,
    pub detections: Option<DetectionSummary>,
    pub bus_warnings: u64,
}

impl TelemetryFrame {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("telemetry frames contain only finite numbers and strings")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_json_line_round_trip() {
        let f = TelemetryFrame {
            cycle: 12,
            time_us: 96_000,
            targets: JointVector::splat(0.1),
            positions: JointVector::splat(-0.2),
            attitude: AttitudeSummary { roll: 0.01, pitch: -0.02 },
            fall_state: FallState::Stable,
            behavior: "SEARCH".into(),
            motion: None,
            battery_v: 15.9,
            pose: Pose2::new(-2.0, 0.0, 0.1),
            ball: Some([0.0, 0.0]),
            detections: Some(DetectionSummary::default()),
            bus_warnings: 0,
        };
        let line = f.to_line();
        assert!(!line.contains('\n'));
        assert_eq!(serde_json::from_str::<TelemetryFrame>(&line).unwrap(), f);
        assert!(line.contains("\"fall_state\":\"STABLE\""));
    }
}
