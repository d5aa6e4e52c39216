//! Tunable parameters exposed in the config tree.

use crate::behavior::BehaviorParams;
use crate::config::{ConfigError, Meta, ParamStore};
use crate::estimation::{FallParams, FilterParams};
use crate::gait::GaitParams;
use crate::runtime::field::FieldGeometry;
use crate::runtime::world::WorldParams;
use crate::vision::ClassId;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SystemParams {
    pub gait: GaitParams,
    pub behavior: BehaviorParams,
    pub filter: FilterParams,
    pub fall: FallParams,
    pub field: FieldGeometry,
    pub world: WorldParams,
    pub vision_threshold: u8,
    /// Class the goal-post detector looks at.
    pub goal_class: ClassId,
    pub bus_corrupt_rate: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        SystemParams {
            gait: GaitParams::default(),
            behavior: BehaviorParams::default(),
            filter: FilterParams::default(),
            fall: FallParams::default(),
            field: FieldGeometry::default(),
            world: WorldParams::default(),
            vision_threshold: crate::vision::classify::DEFAULT_THRESHOLD,
            goal_class: ClassId::Goal,
            bus_corrupt_rate: 0.0,
        }
    }
}

type Field = fn(&mut SystemParams) -> &mut f64;

fn table() -> Vec<(&'static str, f64, f64, f64, Field)> {
    vec![
        ("/gait/freq", 0.5, 3.0, 0.05, |p| &mut p.gait.freq),
        ("/gait/a_lat", 0.0, 0.2, 0.005, |p| &mut p.gait.a_lat),
        ("/gait/a_short", 0.0, 0.8, 0.01, |p| &mut p.gait.a_short),
        ("/gait/a_x", 0.0, 0.6, 0.01, |p| &mut p.gait.a_x),
        ("/gait/a_y", 0.0, 0.4, 0.01, |p| &mut p.gait.a_y),
        ("/gait/a_omega", 0.0, 0.5, 0.01, |p| &mut p.gait.a_omega),
        ("/gait/r0", -0.2, 0.2, 0.005, |p| &mut p.gait.r0),
        ("/gait/p0", -1.0, 0.5, 0.01, |p| &mut p.gait.p0),
        ("/gait/k0", 0.0, 1.5, 0.01, |p| &mut p.gait.k0),
        ("/gait/a0", -1.0, 0.5, 0.01, |p| &mut p.gait.a0),
        ("/gait/shoulder_roll0", -0.5, 0.5, 0.01, |p| &mut p.gait.shoulder_roll0),
        ("/gait/elbow0", -1.0, 1.5, 0.01, |p| &mut p.gait.elbow0),
        ("/gait/kp_pitch", 0.0, 2.0, 0.01, |p| &mut p.gait.kp_pitch),
        ("/gait/kd_pitch", 0.0, 0.5, 0.005, |p| &mut p.gait.kd_pitch),
        ("/gait/kp_roll", 0.0, 2.0, 0.01, |p| &mut p.gait.kp_roll),
        ("/gait/kd_roll", 0.0, 0.5, 0.005, |p| &mut p.gait.kd_roll),
        ("/gait/pitch_nominal", -0.3, 0.3, 0.005, |p| &mut p.gait.pitch_nominal),
        ("/behavior/staleness_s", 0.1, 10.0, 0.1, |p| &mut p.behavior.staleness_s),
        ("/behavior/kick_distance", 0.1, 1.0, 0.01, |p| &mut p.behavior.kick_distance),
        ("/behavior/kick_ball_bearing", 0.01, 1.0, 0.01, |p| &mut p.behavior.kick_ball_bearing),
        ("/behavior/kick_goal_bearing", 0.01, 1.5, 0.01, |p| &mut p.behavior.kick_goal_bearing),
        ("/behavior/align_exit_distance", 0.1, 1.5, 0.01, |p| &mut p.behavior.align_exit_distance),
        ("/behavior/behind_ball", 0.0, 1.0, 0.01, |p| &mut p.behavior.behind_ball),
        ("/behavior/search_omega", -1.0, 1.0, 0.05, |p| &mut p.behavior.search_omega),
        ("/behavior/scan_amplitude", 0.0, 1.5, 0.05, |p| &mut p.behavior.scan_amplitude),
        ("/behavior/scan_freq", 0.0, 2.0, 0.05, |p| &mut p.behavior.scan_freq),
        ("/behavior/turn_gain", 0.0, 5.0, 0.1, |p| &mut p.behavior.turn_gain),
        ("/behavior/side_gain", 0.0, 5.0, 0.1, |p| &mut p.behavior.side_gain),
        ("/behavior/camera_height", 0.3, 1.5, 0.01, |p| &mut p.behavior.camera_height),
        ("/estimation/alpha", 0.0, 1.0, 0.005, |p| &mut p.filter.alpha),
        ("/estimation/gate_band", 0.0, 20.0, 0.1, |p| &mut p.filter.gate_band),
        ("/fall/trigger_rad", 0.1, 1.5, 0.01, |p| &mut p.fall.trigger_rad),
        ("/fall/fallen_rad", 0.2, 1.6, 0.01, |p| &mut p.fall.fallen_rad),
        ("/fall/dwell_s", 0.0, 3.0, 0.05, |p| &mut p.fall.dwell_s),
        ("/world/length", 4.0, 14.0, 0.1, |p| &mut p.field.length),
        ("/world/width", 3.0, 10.0, 0.1, |p| &mut p.field.width),
        ("/world/line_width", 0.01, 0.2, 0.01, |p| &mut p.field.line_width),
        ("/world/goal_width", 0.5, 4.0, 0.05, |p| &mut p.field.goal_width),
        ("/world/ball_radius", 0.03, 0.3, 0.01, |p| &mut p.field.ball_radius),
        ("/world/ball_friction", 0.0, 5.0, 0.05, |p| &mut p.world.ball_friction),
        ("/world/push_duration_s", 0.05, 2.0, 0.05, |p| &mut p.world.push_duration_s),
        ("/bus/corrupt_rate", 0.0, 0.1, 0.0001, |p| &mut p.bus_corrupt_rate),
    ]
}

pub const VISION_THRESHOLD_PATH: &str = "/vision/threshold";
pub const GOAL_CLASS_PATH: &str = "/vision/goal_class_hue";

/// Declare every parameter with `defaults` as its default; values already
/// in the store (loaded from a file) are kept.
pub fn declare(store: &ParamStore, defaults: &SystemParams) -> Result<(), ConfigError> {
    let mut d = *defaults;
    for (path, min, max, step, field) in table() {
        let v = *field(&mut d);
        store.declare_numeric(path, v, Meta::new(min, max, step, v))?;
    }
    let t = defaults.vision_threshold as i64;
    store.declare_numeric(VISION_THRESHOLD_PATH, t, Meta::new(0.0, 16.0, 1.0, t as f64))?;
    let g = defaults.goal_class as i64;
    store.declare_numeric(GOAL_CLASS_PATH, g, Meta::new(1.0, 5.0, 1.0, g as f64))?;
    Ok(())
}

/// Current parameter values; anything missing keeps the value in `base`.
pub fn snapshot(store: &ParamStore, base: &SystemParams) -> SystemParams {
    let mut p = *base;
    for (path, _, _, _, field) in table() {
        if let Some(v) = store.get_f64(path) {
            *field(&mut p) = v;
        }
    }
    if let Some(v) = store.get_f64(VISION_THRESHOLD_PATH) {
        p.vision_threshold = v.round().clamp(0.0, 16.0) as u8;
    }
    if let Some(c) = store.get_f64(GOAL_CLASS_PATH).and_then(|v| ClassId::from_u8(v.round().clamp(1.0, 5.0) as u8)) {
        p.goal_class = c;
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn declare_then_snapshot_is_identity() {
        let store = ParamStore::new();
        let d = SystemParams::default();
        declare(&store, &d).unwrap();
        assert_eq!(snapshot(&store, &d), d);
        store.set("/gait/freq", 2.2).unwrap();
        store.set("/vision/threshold", 5).unwrap();
        let s = snapshot(&store, &d);
        assert_eq!(s.gait.freq, 2.2);
        assert_eq!(s.vision_threshold, 5);
        store.set(GOAL_CLASS_PATH, 5).unwrap();
        assert_eq!(snapshot(&store, &d).goal_class, ClassId::Obstacle);
    }

    #[test]
    fn loaded_values_survive_declaration() {
        let a = ParamStore::new();
        declare(&a, &SystemParams::default()).unwrap();
        a.set("/behavior/kick_distance", 0.35).unwrap();
        let b = ParamStore::new();
        b.load_json(&a.to_json()).unwrap();
        declare(&b, &SystemParams::default()).unwrap();
        assert_eq!(snapshot(&b, &SystemParams::default()).behavior.kick_distance, 0.35);
    }
}
