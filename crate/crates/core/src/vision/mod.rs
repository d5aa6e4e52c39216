//! Fisheye soccer vision: YUYV frames, color classification into per-class
//! cell grids, and ball / goal / obstacle / boundary / line detection.

pub mod boundary;
pub mod camera;
pub mod classify;
pub mod components;
pub mod image;
pub mod lens;
pub mod lines;
pub mod lut;
pub mod objects;
pub mod pipeline;

use thiserror::Error;

pub use image::{read_ppm, write_ppm, Yuv, YuyvImage, FRAME_HEIGHT, FRAME_WIDTH};
pub use lens::{LensModel, Ray, RayTable};
pub use boundary::detect_field_boundary;
pub use camera::{Bearing, CameraPose};
pub use classify::{classify, ClassImage, ClassImages, Mask};
pub use lines::{detect_lines_and_crossings, Crossing, CrossingKind, LineParams, LineSegment};
pub use lut::{palette, ClassId, ColorLut, LutSidecar};
pub use objects::{detect_ball, detect_goal_posts, detect_obstacles, Blob};
pub use pipeline::{process_frame, BallDetection, Detections, ObjectDetection, VisionConfig};

#[derive(Debug, Error)]
pub enum VisionError {
    #[error("image {width}x{height} does not match {bytes} bytes")]
    Dimensions { width: usize, height: usize, bytes: usize },
    #[error("ppm: {0}")]
    Ppm(String),
    #[error("lut: {0}")]
    Lut(String),
    #[error("pixel ({u}, {v}) is outside the lens model")]
    OutOfModel { u: f64, v: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
