//! Soccer field layout on the ground plane. Origin at the center spot, x
//! toward the opponent goal, y to the left.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldGeometry {
    pub length: f64,
    pub width: f64,
    pub line_width: f64,
    pub goal_width: f64,
    pub ball_radius: f64,
    pub center_circle_radius: f64,
    pub goal_area_depth: f64,
    pub goal_area_width: f64,
    /// Green carpet beyond the outer lines.
    pub carpet_margin: f64,
    pub post_radius: f64,
    pub post_height: f64,
}

impl Default for FieldGeometry {
    fn default() -> Self {
        FieldGeometry {
            length: 9.0,
            width: 6.0,
            line_width: 0.05,
            goal_width: 2.6,
            ball_radius: 0.11,
            center_circle_radius: 0.75,
            goal_area_depth: 1.0,
            goal_area_width: 5.0,
            carpet_margin: 0.7,
            post_radius: 0.05,
            post_height: 0.8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum LineFeature {
    Segment { a: (f64, f64), b: (f64, f64) },
    Circle { center: (f64, f64), radius: f64 },
}

impl LineFeature {
    /// Distance from the painted center line; segments have square caps.
    fn distance(&self, x: f64, y: f64, half_width: f64) -> f64 {
        match *self {
            LineFeature::Segment { a, b } => {
                let (dx, dy) = (b.0 - a.0, b.1 - a.1);
                let len = dx.hypot(dy);
                let (tx, ty) = (dx / len, dy / len);
                let along = (x - a.0) * tx + (y - a.1) * ty;
                let across = (-(x - a.0) * ty + (y - a.1) * tx).abs();
                let beyond = if along < -half_width || along > len + half_width { f64::INFINITY } else { 0.0 };
                across + beyond
            }
            LineFeature::Circle { center, radius } => ((x - center.0).hypot(y - center.1) - radius).abs(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Surface {
    Field,
    /// Index into [`FieldGeometry::lines`].
    Line(u8),
    Floor,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum JunctionKind {
    L,
    T,
    X,
}

impl FieldGeometry {
    pub fn half_length(&self) -> f64 {
        self.length / 2.0
    }

    pub fn half_width(&self) -> f64 {
        self.width / 2.0
    }

    /// Every painted line; straight segments first, the center circle last.
    pub fn lines(&self) -> Vec<LineFeature> {
        let (hl, hw) = (self.half_length(), self.half_width());
        let ax = hl - self.goal_area_depth;
        let ay = self.goal_area_width / 2.0;
        let seg = |a, b| LineFeature::Segment { a, b };
        vec![
            seg((-hl, hw), (hl, hw)),
            seg((-hl, -hw), (hl, -hw)),
            seg((hl, -hw), (hl, hw)),
            seg((-hl, -hw), (-hl, hw)),
            seg((0.0, -hw), (0.0, hw)),
            seg((ax, -ay), (ax, ay)),
            seg((-ax, -ay), (-ax, ay)),
            seg((ax, ay), (hl, ay)),
            seg((ax, -ay), (hl, -ay)),
            seg((-hl, ay), (-ax, ay)),
            seg((-hl, -ay), (-ax, -ay)),
            LineFeature::Circle { center: (0.0, 0.0), radius: self.center_circle_radius },
        ]
    }

    pub fn surface(&self, x: f64, y: f64) -> Surface {
        let (hl, hw, m) = (self.half_length(), self.half_width(), self.carpet_margin);
        if x.abs() > hl + m || y.abs() > hw + m {
            return Surface::Floor;
        }
        let half = self.line_width / 2.0;
        // cheap reject: every line lies on one of a few coordinates or the circle
        let near = |v: f64, c: f64| (v.abs() - c).abs() <= half || v.abs() <= half;
        let ax = hl - self.goal_area_depth;
        let ay = self.goal_area_width / 2.0;
        let r = x.hypot(y);
        let candidate = near(x, hl)
            || near(x, ax)
            || near(y, hw)
            || near(y, ay)
            || (r - self.center_circle_radius).abs() <= half;
        if candidate {
            for (i, l) in self.lines().iter().enumerate() {
                if l.distance(x, y, half) <= half {
                    return Surface::Line(i as u8);
                }
            }
        }
        Surface::Field
    }

    pub fn goal_posts(&self) -> [(f64, f64); 4] {
        let (hl, g) = (self.half_length(), self.goal_width / 2.0);
        [(hl, g), (hl, -g), (-hl, g), (-hl, -g)]
    }

    /// Ground-truth line junctions.
    pub fn junctions(&self) -> Vec<((f64, f64), JunctionKind)> {
        let (hl, hw) = (self.half_length(), self.half_width());
        let ax = hl - self.goal_area_depth;
        let ay = self.goal_area_width / 2.0;
        let r = self.center_circle_radius;
        let mut out = Vec::new();
        for sy in [1.0, -1.0] {
            out.push(((0.0, sy * hw), JunctionKind::T));
            out.push(((0.0, sy * r), JunctionKind::X));
            for sx in [1.0, -1.0] {
                out.push(((sx * hl, sy * ay), JunctionKind::T));
                out.push(((sx * hl, sy * hw), JunctionKind::L));
                out.push(((sx * ax, sy * ay), JunctionKind::L));
            }
        }
        out
    }
}
