//! Keyframe motions: the `.motion` text format, interpolation and playback.
//!
//! ```text
//! motion kick
//! interp cosine
//! frame 0.5 [hold]
//!   left_hip_yaw 0
//!   ... exactly one line per joint, 20 in all
//! ```
//!
//! A `hold` frame reaches its targets halfway through its span and stays
//! there for the rest of it.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::robot_model::{JointId, JointLimits, JointVector, JOINT_COUNT};

#[derive(Debug, Error, PartialEq)]
pub enum MotionError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: invalid {field}")]
    Validation { line: usize, field: String },
    #[error("motion has no keyframes")]
    Empty,
}

impl MotionError {
    /// What failed validation, if this is a validation error.
    pub fn field(&self) -> Option<&str> {
        match self {
            MotionError::Validation { field, .. } => Some(field),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    Linear,
    #[default]
    Cosine,
}

impl Interpolation {
    fn as_str(self) -> &'static str {
        match self {
            Interpolation::Linear => "linear",
            Interpolation::Cosine => "cosine",
        }
    }

    fn weight(self, s: f64) -> f64 {
        match self {
            Interpolation::Linear => s,
            Interpolation::Cosine => (1.0 - (std::f64::consts::PI * s).cos()) / 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Keyframe {
    pub duration_s: f64,
    pub targets: JointVector,
    pub hold: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionFile {
    pub name: String,
    pub interpolation: Interpolation,
    pub keyframes: Vec<Keyframe>,
}

impl MotionFile {
    pub fn total_duration(&self) -> f64 {
        self.keyframes.iter().map(|k| k.duration_s).sum()
    }

    pub fn last_targets(&self) -> Option<&JointVector> {
        self.keyframes.last().map(|k| &k.targets)
    }

    pub fn validate(&self, limits: &JointLimits) -> Result<(), MotionError> {
        if self.keyframes.is_empty() {
            return Err(MotionError::Empty);
        }
        for (k, frame) in self.keyframes.iter().enumerate() {
            if !(frame.duration_s > 0.0 && frame.duration_s.is_finite()) {
                return Err(MotionError::Validation { line: k + 1, field: "duration".into() });
            }
            for (j, v) in frame.targets.iter() {
                if !limits.contains(j, v) {
                    return Err(MotionError::Validation { line: k + 1, field: j.name().into() });
                }
            }
        }
        Ok(())
    }
}

/// Parse and validate against the default joint limits.
pub fn load_motion(text: &str) -> Result<MotionFile, MotionError> {
    load_motion_with(text, &JointLimits::default())
}

struct PendingFrame {
    line: usize,
    duration_s: f64,
    hold: bool,
    targets: [Option<f64>; JOINT_COUNT],
    count: usize,
}

impl PendingFrame {
    fn finish(self, limits: &JointLimits) -> Result<Keyframe, MotionError> {
        if self.count != JOINT_COUNT {
            return Err(MotionError::Validation { line: self.line, field: "arity".into() });
        }
        let targets = JointVector(std::array::from_fn(|i| self.targets[i].unwrap_or_default()));
        if let Some((j, _)) = targets.iter().find(|(j, v)| !limits.contains(*j, *v)) {
            return Err(MotionError::Validation { line: self.line, field: j.name().into() });
        }
        Ok(Keyframe { duration_s: self.duration_s, targets, hold: self.hold })
    }
}

pub fn load_motion_with(text: &str, limits: &JointLimits) -> Result<MotionFile, MotionError> {
    let syntax = |line: usize, message: &str| MotionError::Syntax { line, message: message.to_string() };
    let mut name = None;
    let mut interpolation = None;
    let mut keyframes = Vec::new();
    let mut pending: Option<PendingFrame> = None;

    for (i, raw) in text.split('\n').enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = content.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        match (tokens[0], name.is_some(), interpolation.is_some()) {
            ("motion", false, _) => match tokens.as_slice() {
                [_, n] => name = Some(n.to_string()),
                _ => return Err(syntax(line, "expected `motion <name>`")),
            },
            (_, false, _) => return Err(syntax(line, "file must start with `motion <name>`")),
            ("interp", true, false) => {
                interpolation = Some(match tokens.as_slice() {
                    [_, "linear"] => Interpolation::Linear,
                    [_, "cosine"] => Interpolation::Cosine,
                    _ => return Err(syntax(line, "expected `interp linear|cosine`")),
                })
            }
            (_, true, false) => return Err(syntax(line, "expected `interp` on the second line")),
            ("frame", _, _) => {
                if let Some(p) = pending.take() {
                    keyframes.push(p.finish(limits)?);
                }
                let (duration, hold) = match tokens.as_slice() {
                    [_, d] => (d, false),
                    [_, d, "hold"] => (d, true),
                    _ => return Err(syntax(line, "expected `frame <duration_s> [hold]`")),
                };
                let duration_s: f64 = duration.parse().map_err(|_| syntax(line, "bad duration"))?;
                if !(duration_s > 0.0 && duration_s.is_finite()) {
                    return Err(MotionError::Validation { line, field: "duration".into() });
                }
                pending = Some(PendingFrame { line, duration_s, hold, targets: [None; JOINT_COUNT], count: 0 });
            }
            (joint, _, _) => {
                let Some(frame) = pending.as_mut() else {
                    return Err(syntax(line, "joint line before the first frame"));
                };
                let j = JointId::from_name(joint).map_err(|e| syntax(line, &e.to_string()))?;
                let [_, value] = tokens.as_slice() else {
                    return Err(syntax(line, "expected `<joint_name> <angle_rad>`"));
                };
                let v: f64 = value.parse().map_err(|_| syntax(line, "bad angle"))?;
                if !v.is_finite() {
                    return Err(syntax(line, "bad angle"));
                }
                if frame.targets[j.index()].replace(v).is_some() {
                    return Err(syntax(line, &format!("joint {joint} repeated")));
                }
                frame.count += 1;
            }
        }
    }
    if let Some(p) = pending.take() {
        keyframes.push(p.finish(limits)?);
    }
    let name = name.ok_or_else(|| syntax(1, "empty file"))?;
    let interpolation = interpolation.ok_or_else(|| syntax(2, "missing `interp` line"))?;
    if keyframes.is_empty() {
        return Err(MotionError::Empty);
    }
    Ok(MotionFile { name, interpolation, keyframes })
}

/// Canonical text form, without comments.
pub fn serialize_motion(motion: &MotionFile) -> String {
    let mut out = format!("motion {}\ninterp {}\n", motion.name, motion.interpolation.as_str());
    for k in &motion.keyframes {
        let _ = writeln!(out, "frame {}{}", k.duration_s, if k.hold { " hold" } else { "" });
        for (j, v) in k.targets.iter() {
            let _ = writeln!(out, "  {} {}", j.name(), v);
        }
    }
    out
}

/// Joint targets `t` seconds into `motion`, blending from `start_pose`.
pub fn sample(motion: &MotionFile, t: f64, start_pose: &JointVector) -> Result<JointVector, MotionError> {
    let last = motion.last_targets().ok_or(MotionError::Empty)?;
    let t = t.max(0.0);
    let mut from = start_pose;
    let mut span_start = 0.0;
    for k in &motion.keyframes {
        let span_end = span_start + k.duration_s;
        if t < span_end {
            let mut s = (t - span_start) / k.duration_s;
            if k.hold {
                s = (2.0 * s).min(1.0);
            }
            let w = motion.interpolation.weight(s);
            return Ok(JointVector(std::array::from_fn(|i| {
                let (a, b) = (from.0[i], k.targets.0[i]);
                (a + w * (b - a)).clamp(a.min(b), a.max(b))
            })));
        }
        from = &k.targets;
        span_start = span_end;
    }
    Ok(*last)
}

#[derive(Clone, Debug)]
pub struct StandardMotions {
    pub kick: Arc<MotionFile>,
    pub getup_prone: Arc<MotionFile>,
    pub getup_supine: Arc<MotionFile>,
}

impl StandardMotions {
    pub fn get(&self, name: &str) -> Option<&Arc<MotionFile>> {
        match name {
            "kick" => Some(&self.kick),
            "getup_prone" => Some(&self.getup_prone),
            "getup_supine" => Some(&self.getup_supine),
            _ => None,
        }
    }
}

pub const KICK_TEXT: &str = include_str!("kick.motion");
pub const GETUP_PRONE_TEXT: &str = include_str!("getup_prone.motion");
pub const GETUP_SUPINE_TEXT: &str = include_str!("getup_supine.motion");

pub fn standard_motions() -> StandardMotions {
    let load = |text| Arc::new(load_motion(text).expect("shipped motion is valid"));
    StandardMotions { kick: load(KICK_TEXT), getup_prone: load(GETUP_PRONE_TEXT), getup_supine: load(GETUP_SUPINE_TEXT) }
}

#[derive(Clone, Debug)]
pub struct MotionPlayback {
    pub motion: Arc<MotionFile>,
    pub start_pose: JointVector,
    pub elapsed_s: f64,
    pub active: bool,
}

impl MotionPlayback {
    pub fn start(motion: Arc<MotionFile>, start_pose: JointVector) -> Self {
        MotionPlayback { motion, start_pose, elapsed_s: 0.0, active: true }
    }

    pub fn name(&self) -> &str {
        &self.motion.name
    }

    /// Targets at the current time, then advance by `dt`. Deactivates once
    /// the last keyframe has been emitted.
    pub fn step(&mut self, dt: f64) -> JointVector {
        let q = sample(&self.motion, self.elapsed_s, &self.start_pose).unwrap_or(self.start_pose);
        if self.elapsed_s >= self.motion.total_duration() {
            self.active = false;
        } else {
            self.elapsed_s += dt;
        }
        q
    }
}
