//! Packed YUYV frames and binary PPM conversion.

use std::io::{self, BufRead, BufReader, Read, Write};

use super::VisionError;

pub const FRAME_WIDTH: usize = 800;
pub const FRAME_HEIGHT: usize = 600;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Yuv {
    pub y: u8,
    pub u: u8,
    pub v: u8,
}

impl Yuv {
    pub const fn new(y: u8, u: u8, v: u8) -> Self {
        Yuv { y, u, v }
    }

    /// Full-range BT.601.
    pub fn from_rgb(r: u8, g: u8, b: u8) -> Self {
        let (r, g, b) = (r as f64, g as f64, b as f64);
        let y = 0.299 * r + 0.587 * g + 0.114 * b;
        let u = -0.168_736 * r - 0.331_264 * g + 0.5 * b + 128.0;
        let v = 0.5 * r - 0.418_688 * g - 0.081_312 * b + 128.0;
        let c = |x: f64| x.round().clamp(0.0, 255.0) as u8;
        Yuv { y: c(y), u: c(u), v: c(v) }
    }

    pub fn to_rgb(self) -> [u8; 3] {
        let y = self.y as f64;
        let u = self.u as f64 - 128.0;
        let v = self.v as f64 - 128.0;
        let c = |x: f64| x.round().clamp(0.0, 255.0) as u8;
        [c(y + 1.402 * v), c(y - 0.344_136 * u - 0.714_136 * v), c(y + 1.772 * u)]
    }
}

/// 4:2:2 packed frame: `Y0 U Y1 V` per horizontal pixel pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct YuyvImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl YuyvImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, VisionError> {
        if width % 2 != 0 || data.len() != width * height * 2 {
            return Err(VisionError::Dimensions { width, height, bytes: data.len() });
        }
        Ok(YuyvImage { width, height, data })
    }

    pub fn filled(width: usize, height: usize, c: Yuv) -> Self {
        let data = [c.y, c.u, c.y, c.v].repeat(width * height / 2);
        YuyvImage { width, height, data }
    }

    /// Pixel color; both pixels of a pair share the chroma.
    pub fn pixel(&self, x: usize, y: usize) -> Yuv {
        let base = (y * self.width + (x & !1)) * 2;
        let luma = self.data[base + if x & 1 == 0 { 0 } else { 2 }];
        Yuv { y: luma, u: self.data[base + 1], v: self.data[base + 3] }
    }

    /// Write a pixel pair; the chroma of the pair is taken from `left`.
    pub fn set_pair(&mut self, x_even: usize, y: usize, left: Yuv, right_luma: u8) {
        let base = (y * self.width + x_even) * 2;
        self.data[base..base + 4].copy_from_slice(&[left.y, left.u, right_luma, left.v]);
    }

    pub fn from_yuv_pixels(width: usize, height: usize, pixels: &[Yuv]) -> Result<Self, VisionError> {
        if width % 2 != 0 || pixels.len() != width * height {
            return Err(VisionError::Dimensions { width, height, bytes: pixels.len() * 2 });
        }
        let mut data = Vec::with_capacity(width * height * 2);
        for pair in pixels.chunks_exact(2) {
            data.extend_from_slice(&[pair[0].y, pair[0].u, pair[1].y, pair[0].v]);
        }
        Ok(YuyvImage { width, height, data })
    }

    pub fn from_rgb(width: usize, height: usize, rgb: &[u8]) -> Result<Self, VisionError> {
        if rgb.len() != width * height * 3 {
            return Err(VisionError::Dimensions { width, height, bytes: rgb.len() });
        }
        let pixels: Vec<Yuv> = rgb.chunks_exact(3).map(|p| Yuv::from_rgb(p[0], p[1], p[2])).collect();
        Self::from_yuv_pixels(width, height, &pixels)
    }

    pub fn to_rgb(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.width * self.height * 3);
        for y in 0..self.height {
            for x in 0..self.width {
                out.extend_from_slice(&self.pixel(x, y).to_rgb());
            }
        }
        out
    }
}

/// Read a binary (P6, maxval 255) PPM.
pub fn read_ppm(r: impl Read) -> Result<(usize, usize, Vec<u8>), VisionError> {
    let mut r = BufReader::new(r);
    let mut fields = Vec::new();
    let mut line = String::new();
    while fields.len() < 4 {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            return Err(VisionError::Ppm("truncated header".into()));
        }
        let content = line.split('#').next().unwrap_or("");
        fields.extend(content.split_whitespace().map(str::to_owned));
    }
    if fields[0] != "P6" {
        return Err(VisionError::Ppm(format!("unsupported magic {}", fields[0])));
    }
    let parse = |s: &str| s.parse::<usize>().map_err(|_| VisionError::Ppm(format!("bad header field `{s}`")));
    let (w, h, maxval) = (parse(&fields[1])?, parse(&fields[2])?, parse(&fields[3])?);
    if maxval != 255 {
        return Err(VisionError::Ppm(format!("maxval {maxval} unsupported")));
    }
    let mut rgb = vec![0; w * h * 3];
    r.read_exact(&mut rgb).map_err(|_| VisionError::Ppm("truncated pixel data".into()))?;
    Ok((w, h, rgb))
}

pub fn write_ppm(mut w: impl Write, width: usize, height: usize, rgb: &[u8]) -> io::Result<()> {
    write!(w, "P6\n{width} {height}\n255\n")?;
    w.write_all(rgb)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn yuyv_layout() {
        let mut img = YuyvImage::filled(4, 1, Yuv::new(1, 2, 3));
        assert_eq!(img.data, vec![1, 2, 1, 3, 1, 2, 1, 3]);
        img.set_pair(2, 0, Yuv::new(10, 20, 30), 11);
        assert_eq!(img.pixel(2, 0), Yuv::new(10, 20, 30));
        assert_eq!(img.pixel(3, 0), Yuv::new(11, 20, 30));
        assert!(YuyvImage::new(3, 1, vec![0; 6]).is_err());
        assert!(YuyvImage::new(4, 1, vec![0; 7]).is_err());
    }

    #[test]
    fn rgb_round_trip_is_close() {
        for (r, g, b) in [(0, 0, 0), (255, 255, 255), (250, 120, 20), (30, 140, 40), (220, 200, 30)] {
            let back = Yuv::from_rgb(r, g, b).to_rgb();
            for (a, b) in back.iter().zip([r, g, b]) {
                assert!((*a as i32 - b as i32).abs() <= 2);
            }
        }
    }

    #[test]
    fn ppm_round_trip() {
        let rgb: Vec<u8> = (0..2 * 3 * 3).map(|v| v as u8 * 7).collect();
        let mut buf = Vec::new();
        write_ppm(&mut buf, 2, 3, &rgb).unwrap();
        assert!(buf.starts_with(b"P6\n2 3\n255\n"));
        assert_eq!(read_ppm(&buf[..]).unwrap(), (2, 3, rgb));
        let commented = b"P6\n# made by hand\n1 1\n255\n\x01\x02\x03";
        assert_eq!(read_ppm(&commented[..]).unwrap(), (1, 1, vec![1, 2, 3]));
        assert!(read_ppm(&b"P3\n1 1\n255\n"[..]).is_err());
    }
}
