//! YUV → color class look-up table and its on-disk format.
//!
//! File layout: the 8-byte magic `NOPLUT01` followed by 64³ class-id bytes,
//! Y-major then U then V, each channel quantized as `value / 4`. A JSON
//! sidecar names the classes.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::image::Yuv;
use super::VisionError;

pub const LUT_SIDE: usize = 64;
pub const LUT_SIZE: usize = LUT_SIDE * LUT_SIDE * LUT_SIDE;
pub const LUT_MAGIC: &[u8; 8] = b"NOPLUT01";
pub const NUM_CLASSES: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum ClassId {
    Unknown = 0,
    Ball = 1,
    Field = 2,
    Line = 3,
    Goal = 4,
    Obstacle = 5,
}

impl ClassId {
    pub const ALL: [ClassId; NUM_CLASSES] =
        [ClassId::Unknown, ClassId::Ball, ClassId::Field, ClassId::Line, ClassId::Goal, ClassId::Obstacle];

    pub fn from_u8(v: u8) -> Option<Self> {
        ClassId::ALL.get(v as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassId::Unknown => "unknown",
            ClassId::Ball => "ball",
            ClassId::Field => "field",
            ClassId::Line => "line",
            ClassId::Goal => "goal",
            ClassId::Obstacle => "obstacle",
        }
    }

    /// Display color used by overlays.
    pub fn overlay_rgb(self) -> [u8; 3] {
        match self {
            ClassId::Unknown => [40, 40, 40],
            ClassId::Ball => [255, 128, 0],
            ClassId::Field => [0, 160, 0],
            ClassId::Line => [255, 255, 255],
            ClassId::Goal => [255, 230, 0],
            ClassId::Obstacle => [0, 0, 0],
        }
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Colors the simulated camera renders each surface with.
pub mod palette {
    use super::Yuv;

    pub const FIELD: Yuv = Yuv::new(90, 100, 90);
    pub const LINE: Yuv = Yuv::new(220, 128, 128);
    pub const BALL: Yuv = Yuv::new(140, 70, 200);
    pub const GOAL: Yuv = Yuv::new(200, 40, 150);
    pub const OBSTACLE: Yuv = Yuv::new(25, 128, 128);
    pub const SKY: Yuv = Yuv::new(128, 128, 128);
    pub const FLOOR: Yuv = Yuv::new(70, 128, 128);
}

#[derive(Clone, PartialEq, Eq)]
pub struct ColorLut {
    table: Box<[u8]>,
}

impl fmt::Debug for ColorLut {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let used = self.table.iter().filter(|c| **c != 0).count();
        write!(f, "ColorLut({used} classified cells)")
    }
}

impl Default for ColorLut {
    fn default() -> Self {
        ColorLut { table: vec![0; LUT_SIZE].into_boxed_slice() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LutSidecar {
    pub format: String,
    pub classes: Vec<String>,
}

impl Default for LutSidecar {
    fn default() -> Self {
        LutSidecar {
            format: String::from_utf8_lossy(LUT_MAGIC).into_owned(),
            classes: ClassId::ALL.iter().map(|c| c.name().to_string()).collect(),
        }
    }
}

#[inline]
pub fn cell_index(y: u8, u: u8, v: u8) -> usize {
    ((y as usize >> 2) << 12) | ((u as usize >> 2) << 6) | (v as usize >> 2)
}

impl ColorLut {
    /// The table the dashboard would produce by clicking each rendered surface once.
    pub fn canonical() -> Self {
        let mut lut = ColorLut::default();
        lut.paint(palette::FIELD, ClassId::Field, 2);
        lut.paint(palette::LINE, ClassId::Line, 2);
        lut.paint(palette::BALL, ClassId::Ball, 2);
        lut.paint(palette::GOAL, ClassId::Goal, 2);
        lut.paint(palette::OBSTACLE, ClassId::Obstacle, 2);
        lut
    }

    #[inline]
    pub fn classify(&self, y: u8, u: u8, v: u8) -> u8 {
        self.table[cell_index(y, u, v)]
    }

    pub fn get(&self, c: Yuv) -> ClassId {
        ClassId::from_u8(self.classify(c.y, c.u, c.v)).unwrap_or(ClassId::Unknown)
    }

    pub fn set_cell(&mut self, cy: usize, cu: usize, cv: usize, class: ClassId) {
        self.table[(cy << 12) | (cu << 6) | cv] = class as u8;
    }

    /// Assign `class` to the (2r+1)³ cell neighborhood of `color`; painting
    /// `Unknown` erases.
    pub fn paint(&mut self, color: Yuv, class: ClassId, radius: usize) {
        let r = radius as isize;
        let center = [color.y as isize >> 2, color.u as isize >> 2, color.v as isize >> 2];
        let side = LUT_SIDE as isize;
        for dy in -r..=r {
            for du in -r..=r {
                for dv in -r..=r {
                    let (y, u, v) = (center[0] + dy, center[1] + du, center[2] + dv);
                    if (0..side).contains(&y) && (0..side).contains(&u) && (0..side).contains(&v) {
                        self.set_cell(y as usize, u as usize, v as usize, class);
                    }
                }
            }
        }
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.table
    }

    pub fn to_file_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(LUT_SIZE + 8);
        out.extend_from_slice(LUT_MAGIC);
        out.extend_from_slice(&self.table);
        out
    }

    pub fn from_file_bytes(bytes: &[u8]) -> Result<Self, VisionError> {
        if bytes.len() != LUT_SIZE + 8 {
            return Err(VisionError::Lut(format!("expected {} bytes, got {}", LUT_SIZE + 8, bytes.len())));
        }
        if &bytes[..8] != LUT_MAGIC {
            return Err(VisionError::Lut("bad magic".into()));
        }
        if let Some(pos) = bytes[8..].iter().position(|b| *b as usize >= NUM_CLASSES) {
            return Err(VisionError::Lut(format!("invalid class id {} at entry {pos}", bytes[8 + pos])));
        }
        Ok(ColorLut { table: bytes[8..].to_vec().into_boxed_slice() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_order_is_y_major() {
        assert_eq!(cell_index(0, 0, 4), 1);
        assert_eq!(cell_index(0, 4, 0), 64);
        assert_eq!(cell_index(4, 0, 0), 4096);
        assert_eq!(cell_index(255, 255, 255), LUT_SIZE - 1);
    }

    #[test]
    fn paint_and_erase() {
        let mut lut = ColorLut::default();
        lut.paint(Yuv::new(100, 100, 100), ClassId::Ball, 1);
        assert_eq!(lut.get(Yuv::new(100, 100, 100)), ClassId::Ball);
        assert_eq!(lut.get(Yuv::new(96, 104, 97)), ClassId::Ball);
        assert_eq!(lut.get(Yuv::new(92, 100, 100)), ClassId::Unknown);
        assert_eq!(lut.as_bytes().iter().filter(|c| **c == 1).count(), 27);
        lut.paint(Yuv::new(100, 100, 100), ClassId::Unknown, 0);
        assert_eq!(lut.get(Yuv::new(100, 100, 100)), ClassId::Unknown);
        assert_eq!(lut.as_bytes().iter().filter(|c| **c == 1).count(), 26);
    }

    #[test]
    fn paint_clips_at_table_edges() {
        let mut lut = ColorLut::default();
        lut.paint(Yuv::new(0, 255, 0), ClassId::Line, 2);
        assert_eq!(lut.as_bytes().iter().filter(|c| **c != 0).count(), 27);
    }

    #[test]
    fn canonical_palette_is_separable() {
        let lut = ColorLut::canonical();
        assert_eq!(lut.get(palette::FIELD), ClassId::Field);
        assert_eq!(lut.get(palette::LINE), ClassId::Line);
        assert_eq!(lut.get(palette::BALL), ClassId::Ball);
        assert_eq!(lut.get(palette::GOAL), ClassId::Goal);
        assert_eq!(lut.get(palette::OBSTACLE), ClassId::Obstacle);
        assert_eq!(lut.get(palette::SKY), ClassId::Unknown);
        assert_eq!(lut.get(palette::FLOOR), ClassId::Unknown);
    }

    #[test]
    fn file_format() {
        let lut = ColorLut::canonical();
        let bytes = lut.to_file_bytes();
        assert_eq!(bytes.len(), 262_152);
        assert_eq!(&bytes[..8], b"NOPLUT01");
        assert_eq!(ColorLut::from_file_bytes(&bytes).unwrap(), lut);
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(ColorLut::from_file_bytes(&bad).is_err());
        let mut bad = bytes.clone();
        bad[100] = 6;
        assert!(ColorLut::from_file_bytes(&bad).is_err());
        assert!(ColorLut::from_file_bytes(&bytes[..100]).is_err());
        let sidecar = serde_json::to_string(&LutSidecar::default()).unwrap();
        assert_eq!(sidecar, r#"{"format":"NOPLUT01","classes":["unknown","ball","field","line","goal","obstacle"]}"#);
    }
}
