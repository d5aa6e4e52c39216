//! Timed event scripts: `[{"at_s": 1.5, "event": {"type": "push", "pitch": 1.6}}, ...]`.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::world::WorldEvent;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioEvent {
    World(WorldEvent),
    Control(ControlEvent),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ControlEvent {
    SetParam { path: String, value: Value },
    PlayMotion { name: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduledEvent {
    pub at_s: f64,
    pub event: ScenarioEvent,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Scenario {
    events: Vec<ScheduledEvent>,
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("scenario parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("event at {0} s has a negative or non-finite time")]
    Time(f64),
    #[error("cannot read scenario: {0}")]
    Io(#[from] std::io::Error),
}

impl Scenario {
    /// Events are kept in time order; equal times keep file order.
    pub fn new(mut events: Vec<ScheduledEvent>) -> Result<Self, ScenarioError> {
        if let Some(bad) = events.iter().find(|e| !e.at_s.is_finite() || e.at_s < 0.0) {
            return Err(ScenarioError::Time(bad.at_s));
        }
        events.sort_by(|a, b| a.at_s.total_cmp(&b.at_s));
        Ok(Scenario { events })
    }

    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let events: Vec<ScheduledEvent> = serde_json::from_str(text)
            .map_err(|e| ScenarioError::Parse { line: e.line(), column: e.column(), message: e.to_string() })?;
        Self::new(events)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ScenarioError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn events(&self) -> &[ScheduledEvent] {
        &self.events
    }

    /// Events with `from_s < at_s ≤ to_s`.
    pub fn due(&self, from_s: f64, to_s: f64) -> impl Iterator<Item = &ScenarioEvent> {
        self.events.iter().filter(move |e| e.at_s > from_s && e.at_s <= to_s).map(|e| &e.event)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_mixed_events() {
        let s = Scenario::parse(
            r#"[
                {"at_s": 2.0, "event": {"type": "push", "pitch": 1.6}},
                {"at_s": 0.0, "event": {"type": "set_ball", "x": 1.0, "y": 0.5}},
                {"at_s": 1.0, "event": {"type": "set_param", "path": "/gait/freq", "value": 2.0}},
                {"at_s": 1.0, "event": {"type": "remove_ball"}}
            ]"#,
        )
        .unwrap();
        assert_eq!(s.events().len(), 4);
        assert_eq!(s.events()[0].event, ScenarioEvent::World(WorldEvent::SetBall { x: 1.0, y: 0.5, vx: 0.0, vy: 0.0 }));
        assert!(matches!(s.events()[1].event, ScenarioEvent::Control(ControlEvent::SetParam { .. })));
        assert_eq!(s.events()[2].event, ScenarioEvent::World(WorldEvent::RemoveBall));
        assert_eq!(s.due(-1.0, 0.0).count(), 1);
        assert_eq!(s.due(0.0, 0.008).count(), 0);
        assert_eq!(s.due(0.992, 1.0).count(), 2);
        assert_eq!(s.due(1.0, 1.008).count(), 0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(Scenario::parse(r#"[{"at_s": -1, "event": {"type": "remove_ball"}}]"#), Err(ScenarioError::Time(_))));
        assert!(matches!(Scenario::parse(r#"[{"at_s": 1, "event": {"type": "fly"}}]"#), Err(ScenarioError::Parse { .. })));
        assert!(matches!(Scenario::parse("{"), Err(ScenarioError::Parse { .. })));
    }
}
