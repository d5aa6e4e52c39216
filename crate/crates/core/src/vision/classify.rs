//! Pixel classification through the color LUT into per-class cell grids.

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::Serialize;

use super::image::YuyvImage;
use super::lut::{ClassId, ColorLut, NUM_CLASSES};
use super::VisionError;

pub const CELL_SIZE: usize = 4;
pub const DEFAULT_THRESHOLD: u8 = 8;

/// Count of class pixels in every 4×4 block.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ClassImage {
    pub class: ClassId,
    pub width: usize,
    pub height: usize,
    pub counts: Vec<u8>,
}

impl ClassImage {
    pub fn new(class: ClassId, width: usize, height: usize) -> Self {
        ClassImage { class, width, height, counts: vec![0; width * height] }
    }

    #[inline]
    pub fn count(&self, col: usize, row: usize) -> u8 {
        self.counts[row * self.width + col]
    }

    pub fn set(&mut self, col: usize, row: usize, count: u8) {
        self.counts[row * self.width + col] = count;
    }

    pub fn binary(&self, threshold: u8) -> Mask {
        Mask {
            width: self.width,
            height: self.height,
            cells: self.counts.iter().map(|&c| c >= threshold).collect(),
        }
    }

    /// Pixel coordinates of the center of a cell.
    pub fn cell_center(col: f64, row: f64) -> (f64, f64) {
        let half = (CELL_SIZE as f64 - 1.0) / 2.0;
        (col * CELL_SIZE as f64 + half, row * CELL_SIZE as f64 + half)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub cells: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize) -> Self {
        Mask { width, height, cells: vec![false; width * height] }
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> bool {
        self.cells[row * self.width + col]
    }

    /// Out-of-bounds reads are `false`.
    #[inline]
    pub fn get_i(&self, col: isize, row: isize) -> bool {
        col >= 0 && row >= 0 && (col as usize) < self.width && (row as usize) < self.height && self.get(col as usize, row as usize)
    }

    #[inline]
    pub fn set(&mut self, col: usize, row: usize, v: bool) {
        self.cells[row * self.width + col] = v;
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|c| **c).count()
    }

    /// Clear every cell above the per-column boundary row.
    pub fn below(mut self, boundary: &[usize]) -> Self {
        for (col, &top) in boundary.iter().enumerate().take(self.width) {
            for row in 0..top.min(self.height) {
                self.set(col, row, false);
            }
        }
        self
    }
}

/// One grid per class id, unknown included.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassImages(pub Vec<ClassImage>);

impl ClassImages {
    pub fn get(&self, class: ClassId) -> &ClassImage {
        &self.0[class as usize]
    }

    pub fn width(&self) -> usize {
        self.0[0].width
    }

    pub fn height(&self) -> usize {
        self.0[0].height
    }
}

fn check_dims(img: &YuyvImage) -> Result<(), VisionError> {
    if img.width % CELL_SIZE != 0 || img.height % CELL_SIZE != 0 || img.data.len() != img.width * img.height * 2 {
        return Err(VisionError::Dimensions { width: img.width, height: img.height, bytes: img.data.len() });
    }
    Ok(())
}

/// Counts for one band of 4 pixel rows, laid out `[col][class]`.
fn classify_band(img: &YuyvImage, lut: &ColorLut, band: usize, out: &mut [[u8; NUM_CLASSES]]) {
    let stride = img.width * 2;
    for dy in 0..CELL_SIZE {
        let row = &img.data[(band * CELL_SIZE + dy) * stride..][..stride];
        for (col, quad) in row.chunks_exact(CELL_SIZE * 2).enumerate() {
            let cell = &mut out[col];
            for px in quad.chunks_exact(4) {
                let (y0, u, y1, v) = (px[0], px[1], px[2], px[3]);
                cell[lut.classify(y0, u, v) as usize] += 1;
                cell[lut.classify(y1, u, v) as usize] += 1;
            }
        }
    }
}

fn split(width: usize, height: usize, counts: Vec<[u8; NUM_CLASSES]>) -> ClassImages {
    let mut images: Vec<ClassImage> = ClassId::ALL.iter().map(|&c| ClassImage::new(c, width, height)).collect();
    for (i, cell) in counts.iter().enumerate() {
        for (k, img) in images.iter_mut().enumerate() {
            img.counts[i] = cell[k];
        }
    }
    ClassImages(images)
}

pub fn classify_sequential(img: &YuyvImage, lut: &ColorLut) -> Result<ClassImages, VisionError> {
    check_dims(img)?;
    let (w, h) = (img.width / CELL_SIZE, img.height / CELL_SIZE);
    let mut counts = vec![[0u8; NUM_CLASSES]; w * h];
    for (band, out) in counts.chunks_mut(w).enumerate() {
        classify_band(img, lut, band, out);
    }
    Ok(split(w, h, counts))
}

#[cfg(feature = "parallel")]
pub fn classify_parallel(img: &YuyvImage, lut: &ColorLut) -> Result<ClassImages, VisionError> {
    check_dims(img)?;
    let (w, h) = (img.width / CELL_SIZE, img.height / CELL_SIZE);
    let mut counts = vec![[0u8; NUM_CLASSES]; w * h];
    counts.par_chunks_mut(w).enumerate().for_each(|(band, out)| classify_band(img, lut, band, out));
    Ok(split(w, h, counts))
}

pub fn classify(img: &YuyvImage, lut: &ColorLut) -> Result<ClassImages, VisionError> {
    #[cfg(feature = "parallel")]
    {
        classify_parallel(img, lut)
    }
    #[cfg(not(feature = "parallel"))]
    {
        classify_sequential(img, lut)
    }
}

/// Full-resolution class id per pixel, for overlays.
pub fn classify_pixels(img: &YuyvImage, lut: &ColorLut) -> Vec<u8> {
    let mut out = Vec::with_capacity(img.width * img.height);
    for px in img.data.chunks_exact(4) {
        out.push(lut.classify(px[0], px[1], px[3]));
        out.push(lut.classify(px[2], px[1], px[3]));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vision::image::Yuv;
    use crate::vision::lut::palette;
    use proptest::prelude::*;

    #[test]
    fn empty_lut_leaves_class_images_empty() {
        let img = YuyvImage::filled(800, 600, palette::BALL);
        let out = classify(&img, &ColorLut::default()).unwrap();
        assert_eq!((out.width(), out.height()), (200, 150));
        for class in &ClassId::ALL[1..] {
            assert!(out.get(*class).counts.iter().all(|c| *c == 0));
        }
        assert!(out.get(ClassId::Unknown).counts.iter().all(|c| *c == 16));
    }

    #[test]
    fn uniform_ball_color_saturates() {
        let img = YuyvImage::filled(800, 600, palette::BALL);
        let out = classify(&img, &ColorLut::canonical()).unwrap();
        assert!(out.get(ClassId::Ball).counts.iter().all(|c| *c == 16));
    }

    #[test]
    fn half_green_half_white_splits_at_seam() {
        // seam at x = 402 falls inside block column 100 (pixels 400..404)
        let (w, h) = (800, 600);
        let pixels: Vec<Yuv> = (0..w * h).map(|i| if i % w < 402 { palette::FIELD } else { palette::LINE }).collect();
        let img = YuyvImage::from_yuv_pixels(w, h, &pixels).unwrap();
        let out = classify(&img, &ColorLut::canonical()).unwrap();
        let (green, white) = (out.get(ClassId::Field), out.get(ClassId::Line));
        for row in [0, 75, 149] {
            assert_eq!(green.count(99, row), 16);
            assert_eq!(white.count(99, row), 0);
            assert_eq!(green.count(100, row), 8);
            assert_eq!(white.count(100, row), 8);
            assert_eq!(green.count(101, row), 0);
            assert_eq!(white.count(101, row), 16);
        }
    }

    #[test]
    fn rejects_bad_dimensions() {
        let img = YuyvImage { width: 802, height: 600, data: vec![0; 802 * 600 * 2] };
        assert!(classify(&img, &ColorLut::default()).is_err());
    }

    #[test]
    fn cell_center_geometry() {
        assert_eq!(ClassImage::cell_center(0.0, 0.0), (1.5, 1.5));
        assert_eq!(ClassImage::cell_center(100.0, 100.0), (401.5, 401.5));
    }

    fn random_image(seed: u64) -> YuyvImage {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let colors = [palette::FIELD, palette::LINE, palette::BALL, palette::GOAL, palette::SKY, palette::OBSTACLE];
        let mut data = vec![0u8; 64 * 48 * 2];
        for px in data.chunks_exact_mut(4) {
            if rng.gen_bool(0.3) {
                rng.fill(px);
            } else {
                let a = colors[rng.gen_range(0..colors.len())];
                let b = colors[rng.gen_range(0..colors.len())];
                px.copy_from_slice(&[a.y, a.u, b.y, a.v]);
            }
        }
        YuyvImage::new(64, 48, data).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn block_counts_sum_to_sixteen(seed in any::<u64>()) {
            let img = random_image(seed);
            let out = classify(&img, &ColorLut::canonical()).unwrap();
            for i in 0..out.width() * out.height() {
                let total: u32 = out.0.iter().map(|c| c.counts[i] as u32).sum();
                prop_assert_eq!(total, 16);
            }
        }

        #[test]
        fn sequential_and_parallel_agree(seed in any::<u64>()) {
            let img = random_image(seed);
            let lut = ColorLut::canonical();
            let a = classify_sequential(&img, &lut).unwrap();
            prop_assert_eq!(&a, &classify(&img, &lut).unwrap());
            prop_assert_eq!(&a, &classify(&img, &lut).unwrap());
        }
    }
}
