//! The full per-frame pipeline and its serializable result.

use serde::{Deserialize, Serialize};

use super::boundary::detect_field_boundary;
use super::camera::{Bearing, CameraPose};
use super::classify::{classify, classify_pixels, ClassImages, DEFAULT_THRESHOLD};
use super::image::YuyvImage;
use super::lens::LensModel;
use super::lines::{detect_lines_and_crossings, Crossing, LineParams, LineSegment};
use super::lut::{ClassId, ColorLut};
use super::objects::{detect_ball, detect_goal_posts, detect_obstacles, Blob};
use super::VisionError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisionConfig {
    pub lens: LensModel,
    pub threshold: u8,
    pub goal_class: ClassId,
    pub lines: LineParams,
}

impl Default for VisionConfig {
    fn default() -> Self {
        VisionConfig { lens: LensModel::default(), threshold: DEFAULT_THRESHOLD, goal_class: ClassId::Goal, lines: LineParams::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallDetection {
    pub pixel: (f64, f64),
    pub bearing: Bearing,
    pub radius_cells: f64,
    pub area: usize,
}

/// A goal post or obstacle; the bearing is that of its foot point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectDetection {
    pub pixel: (f64, f64),
    pub base_pixel: (f64, f64),
    pub bearing: Bearing,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Detections {
    pub ball: Option<BallDetection>,
    pub goal_posts: Vec<ObjectDetection>,
    pub obstacles: Vec<ObjectDetection>,
    /// Top cell row of the field per cell column.
    pub field_boundary: Vec<usize>,
    pub line_segments: Vec<LineSegment>,
    pub crossings: Vec<Crossing>,
}

impl Detections {
    /// Bearing of the goal center: midpoint of two posts, or the single post.
    pub fn goal_bearing(&self) -> Option<f64> {
        match self.goal_posts.as_slice() {
            [] => None,
            [p] => Some(p.bearing.azimuth),
            [a, b, ..] => {
                let (da, db) = (a.bearing.direction(), b.bearing.direction());
                let mid = da.normalize() + db.normalize();
                Some(mid.y.atan2(mid.x))
            }
        }
    }
}

fn object(blob: &Blob, camera: &CameraPose, lens: &LensModel) -> Option<ObjectDetection> {
    let bearing = camera.bearing(lens, blob.base_pixel.0, blob.base_pixel.1)?;
    Some(ObjectDetection { pixel: blob.pixel, base_pixel: blob.base_pixel, bearing })
}

/// Run every detector on already classified cell grids.
pub fn detect(classes: &ClassImages, cfg: &VisionConfig, camera: &CameraPose) -> Detections {
    let t = cfg.threshold;
    let field_boundary = detect_field_boundary(&classes.get(ClassId::Field).binary(t));
    let ball = detect_ball(classes.get(ClassId::Ball), &field_boundary, t).and_then(|b| {
        let bearing = camera.bearing(&cfg.lens, b.pixel.0, b.pixel.1)?;
        Some(BallDetection { pixel: b.pixel, bearing, radius_cells: b.radius_cells(), area: b.area })
    });
    let goal_posts = detect_goal_posts(classes.get(cfg.goal_class), &field_boundary, t)
        .iter()
        .filter_map(|b| object(b, camera, &cfg.lens))
        .collect();
    let obstacles = detect_obstacles(classes.get(ClassId::Obstacle), &field_boundary, t)
        .iter()
        .filter_map(|b| object(b, camera, &cfg.lens))
        .collect();
    let white = classes.get(ClassId::Line).binary(t).below(&field_boundary);
    let (line_segments, crossings) = detect_lines_and_crossings(&white, &cfg.lines);
    Detections { ball, goal_posts, obstacles, field_boundary, line_segments, crossings }
}

/// Classify a frame and run every detector.
pub fn process_frame(
    img: &YuyvImage,
    lut: &ColorLut,
    cfg: &VisionConfig,
    camera: &CameraPose,
) -> Result<(Detections, ClassImages), VisionError> {
    let classes = classify(img, lut)?;
    Ok((detect(&classes, cfg, camera), classes))
}

/// Full-resolution RGB image painted with each pixel's class color.
pub fn class_overlay_rgb(img: &YuyvImage, lut: &ColorLut) -> Vec<u8> {
    classify_pixels(img, lut)
        .into_iter()
        .flat_map(|c| ClassId::from_u8(c).unwrap_or(ClassId::Unknown).overlay_rgb())
        .collect()
}

pub fn encode_png(width: usize, height: usize, rgb: &[u8]) -> Result<Vec<u8>, VisionError> {
    use image::ImageEncoder;
    let mut out = Vec::new();
    image::codecs::png::PngEncoder::new(&mut out)
        .write_image(rgb, width as u32, height as u32, image::ExtendedColorType::Rgb8)
        .map_err(|e| VisionError::Io(std::io::Error::other(e)))?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vision::image::Yuv;
    use crate::vision::lut::palette;

    fn scene() -> YuyvImage {
        // sky above row 200, field below with an orange square and a white bar
        let (w, h) = (800, 600);
        let pixels: Vec<Yuv> = (0..w * h)
            .map(|i| {
                let (x, y) = (i % w, i / w);
                if y < 200 {
                    palette::SKY
                } else if (380..420).contains(&x) && (400..440).contains(&y) {
                    palette::BALL
                } else if (500..520).contains(&y) {
                    palette::LINE
                } else {
                    palette::FIELD
                }
            })
            .collect();
        YuyvImage::from_yuv_pixels(w, h, &pixels).unwrap()
    }

    #[test]
    fn pipeline_on_synthetic_scene() {
        let (det, classes) = process_frame(&scene(), &ColorLut::canonical(), &VisionConfig::default(), &CameraPose::stand(0.0)).unwrap();
        assert_eq!(classes.0.len(), 6);
        assert!(det.field_boundary.iter().all(|r| *r == 50));
        let ball = det.ball.clone().expect("ball");
        assert!((ball.pixel.0 - 399.5).abs() < 1.0 && (ball.pixel.1 - 419.5).abs() < 1.0);
        assert!(ball.bearing.azimuth.abs() < 0.01);
        assert!(ball.bearing.elevation < 0.0);
        assert!(det.crossings.is_empty());
        assert!(!det.line_segments.is_empty());
        assert!(det.goal_posts.is_empty());
        let json = serde_json::to_string(&det).unwrap();
        let back: Detections = serde_json::from_str(&json).unwrap();
        assert_eq!(back, det);
    }

    #[test]
    fn overlay_and_png() {
        let img = scene();
        let rgb = class_overlay_rgb(&img, &ColorLut::canonical());
        assert_eq!(rgb.len(), 800 * 600 * 3);
        assert_eq!(&rgb[..3], &ClassId::Unknown.overlay_rgb());
        let png = encode_png(800, 600, &rgb).unwrap();
        assert_eq!(&png[..8], b"\x89PNG\r\n\x1a\n");
    }
}
