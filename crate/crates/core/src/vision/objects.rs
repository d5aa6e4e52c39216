//! Blob detectors for the ball, goal posts and obstacles.

use serde::{Deserialize, Serialize};

use super::classify::{ClassImage, CELL_SIZE};
use super::components::{connected_components, Component};

pub const MIN_BALL_AREA: usize = 4;
pub const MIN_OBSTACLE_AREA: usize = 6;
pub const GOAL_BAND: usize = 5;
pub const MIN_POST_ASPECT: f64 = 2.0;
pub const MAX_POSTS: usize = 2;
/// Largest angle between a post's long axis and the image vertical.
pub const MAX_POST_TILT: f64 = std::f64::consts::FRAC_PI_4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Blob {
    /// Count-weighted centroid in pixels.
    pub pixel: (f64, f64),
    /// Bottom-center pixel; where a standing object meets the ground.
    pub base_pixel: (f64, f64),
    pub area: usize,
    pub width: usize,
    pub height: usize,
}

impl Blob {
    fn from_component(comp: &Component, counts: &ClassImage) -> Blob {
        let (c, r) = comp.weighted_centroid(counts);
        let pixel = ClassImage::cell_center(c, r);
        let base_pixel = (pixel.0, ((comp.max_row + 1) * CELL_SIZE) as f64 - 0.5);
        Blob { pixel, base_pixel, area: comp.area(), width: comp.width(), height: comp.height() }
    }

    /// Radius of the disc with the blob's area, in cells.
    pub fn radius_cells(&self) -> f64 {
        (self.area as f64 / std::f64::consts::PI).sqrt()
    }
}

/// Largest ball-colored component reaching below the field boundary. The
/// whole component counts, so a ball in front of a post is not clipped.
pub fn detect_ball(ball: &ClassImage, boundary: &[usize], threshold: u8) -> Option<Blob> {
    let mask = ball.binary(threshold);
    let w = ball.width;
    connected_components(&mask)
        .iter()
        .filter(|c| c.area() >= MIN_BALL_AREA)
        .filter(|c| c.cells.iter().any(|&i| i / w >= boundary[i % w]))
        // first in raster order wins ties
        .fold(None::<&Component>, |best, c| match best {
            Some(b) if b.area() >= c.area() => Some(b),
            _ => Some(c),
        })
        .map(|c| Blob::from_component(c, ball))
}

/// Elongated, roughly upright goal-colored components straddling the field boundary, at most two
/// (the largest), ordered left to right in the image.
pub fn detect_goal_posts(goal: &ClassImage, boundary: &[usize], threshold: u8) -> Vec<Blob> {
    let mask = goal.binary(threshold);
    let w = goal.width;
    let mut posts: Vec<(Component, Blob)> = connected_components(&mask)
        .into_iter()
        // fisheye tilts vertical posts away from the image center
        .filter(|c| {
            let (ratio, tilt) = c.elongation(w);
            ratio >= MIN_POST_ASPECT && tilt <= MAX_POST_TILT
        })
        .filter(|c| c.cells.iter().any(|&i| (i / w).abs_diff(boundary[i % w]) <= GOAL_BAND))
        .map(|c| {
            let b = Blob::from_component(&c, goal);
            (c, b)
        })
        .collect();
    posts.sort_by(|a, b| b.0.area().cmp(&a.0.area()));
    posts.truncate(MAX_POSTS);
    let mut blobs: Vec<Blob> = posts.into_iter().map(|(_, b)| b).collect();
    blobs.sort_by(|a, b| a.pixel.0.total_cmp(&b.pixel.0));
    blobs
}

/// Obstacle-colored components whose foot lies on the field.
pub fn detect_obstacles(obstacle: &ClassImage, boundary: &[usize], threshold: u8) -> Vec<Blob> {
    let mask = obstacle.binary(threshold);
    connected_components(&mask)
        .iter()
        .filter(|c| c.area() >= MIN_OBSTACLE_AREA)
        .filter(|c| {
            let foot_col = (c.min_col + c.max_col) / 2;
            c.max_row >= boundary[foot_col]
        })
        .map(|c| Blob::from_component(c, obstacle))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vision::lut::ClassId;

    fn fill(img: &mut ClassImage, cols: std::ops::RangeInclusive<usize>, rows: std::ops::RangeInclusive<usize>) {
        for r in rows {
            for c in cols.clone() {
                img.set(c, r, 16);
            }
        }
    }

    #[test]
    fn no_ball_in_empty_image() {
        let img = ClassImage::new(ClassId::Ball, 200, 150);
        assert!(detect_ball(&img, &[0; 200], 8).is_none());
    }

    #[test]
    fn square_blob_centroid() {
        let mut img = ClassImage::new(ClassId::Ball, 200, 150);
        fill(&mut img, 99..=102, 99..=102);
        let b = detect_ball(&img, &[0; 200], 8).unwrap();
        assert!((b.pixel.0 - 402.0).abs() <= 2.0 && (b.pixel.1 - 402.0).abs() <= 2.0, "{:?}", b.pixel);
        assert_eq!(b.area, 16);
        assert!((b.radius_cells() - (16.0 / std::f64::consts::PI).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn largest_ball_wins() {
        let mut img = ClassImage::new(ClassId::Ball, 200, 150);
        fill(&mut img, 10..=11, 10..=12);
        fill(&mut img, 50..=54, 80..=83);
        let b = detect_ball(&img, &[0; 200], 8).unwrap();
        assert_eq!(b.area, 20);
        assert!(b.pixel.0 > 200.0);
    }

    #[test]
    fn ball_above_boundary_is_ignored() {
        let mut img = ClassImage::new(ClassId::Ball, 200, 150);
        fill(&mut img, 50..=54, 10..=13);
        assert!(detect_ball(&img, &[40; 200], 8).is_none());
        assert!(detect_ball(&img, &[5; 200], 8).is_some());
    }

    #[test]
    fn ball_in_front_of_post_keeps_its_center() {
        let mut img = ClassImage::new(ClassId::Ball, 200, 150);
        fill(&mut img, 50..=57, 30..=37);
        let mut boundary = [20; 200];
        // a post behind the left half pushes the field edge below the ball
        boundary[48..=53].fill(38);
        let b = detect_ball(&img, &boundary, 8).unwrap();
        assert_eq!(b.area, 64);
        assert!((b.pixel.0 - (53.5 * 4.0 + 1.5)).abs() < 1e-9, "{:?}", b.pixel);
    }

    #[test]
    fn goal_posts() {
        let mut img = ClassImage::new(ClassId::Goal, 200, 150);
        assert!(detect_goal_posts(&img, &[50; 200], 8).is_empty());
        fill(&mut img, 150..=152, 30..=60);
        fill(&mut img, 40..=42, 35..=58);
        let posts = detect_goal_posts(&img, &[50; 200], 8);
        assert_eq!(posts.len(), 2);
        assert!(posts[0].pixel.0 < posts[1].pixel.0);
        // wide flat blob is rejected
        let mut flat = ClassImage::new(ClassId::Goal, 200, 150);
        fill(&mut flat, 20..=60, 45..=52);
        assert!(detect_goal_posts(&flat, &[50; 200], 8).is_empty());
        // tall bar far from the boundary is rejected
        let mut floating = ClassImage::new(ClassId::Goal, 200, 150);
        fill(&mut floating, 20..=22, 100..=140);
        assert!(detect_goal_posts(&floating, &[50; 200], 8).is_empty());
        // a slanted bar, as near the edge of a fisheye frame, still counts
        let mut slanted = ClassImage::new(ClassId::Goal, 200, 150);
        for k in 0..24 {
            fill(&mut slanted, 30 + k / 2..=32 + k / 2, 36 + k..=36 + k);
        }
        assert_eq!(detect_goal_posts(&slanted, &[50; 200], 8).len(), 1);
    }

    #[test]
    fn at_most_two_posts() {
        let mut img = ClassImage::new(ClassId::Goal, 200, 150);
        fill(&mut img, 10..=11, 40..=60);
        fill(&mut img, 50..=52, 40..=60);
        fill(&mut img, 90..=93, 40..=60);
        let posts = detect_goal_posts(&img, &[50; 200], 8);
        assert_eq!(posts.iter().map(|p| p.width).collect::<Vec<_>>(), vec![3, 4]);
    }

    #[test]
    fn obstacles_on_field() {
        let mut img = ClassImage::new(ClassId::Obstacle, 200, 150);
        fill(&mut img, 60..=65, 70..=90);
        fill(&mut img, 120..=125, 5..=10);
        let obs = detect_obstacles(&img, &[50; 200], 8);
        assert_eq!(obs.len(), 1);
        assert_eq!(obs[0].base_pixel.1, 91.0 * 4.0 - 0.5);
    }
}
