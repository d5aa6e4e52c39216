//! 8-connected component labelling on cell masks.

use super::classify::{ClassImage, Mask};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Component {
    /// Row-major cell indices, in discovery order.
    pub cells: Vec<usize>,
    pub min_col: usize,
    pub max_col: usize,
    pub min_row: usize,
    pub max_row: usize,
}

impl Component {
    pub fn area(&self) -> usize {
        self.cells.len()
    }

    pub fn width(&self) -> usize {
        self.max_col - self.min_col + 1
    }

    pub fn height(&self) -> usize {
        self.max_row - self.min_row + 1
    }

    /// Principal axes of the cell set treated as unit squares: the ratio of
    /// major to minor extent and the major axis angle from image vertical.
    pub fn elongation(&self, width: usize) -> (f64, f64) {
        let n = self.cells.len() as f64;
        let (mut sc, mut sr) = (0.0, 0.0);
        for &i in &self.cells {
            sc += (i % width) as f64;
            sr += (i / width) as f64;
        }
        let (mc, mr) = (sc / n, sr / n);
        let (mut cc, mut rr, mut cr) = (0.0, 0.0, 0.0);
        for &i in &self.cells {
            let (dc, dr) = ((i % width) as f64 - mc, (i / width) as f64 - mr);
            cc += dc * dc;
            rr += dr * dr;
            cr += dc * dr;
        }
        let (cc, rr, cr) = (cc / n + 1.0 / 12.0, rr / n + 1.0 / 12.0, cr / n);
        let mean = (cc + rr) / 2.0;
        let spread = (((cc - rr) / 2.0).powi(2) + cr * cr).sqrt();
        let ratio = ((mean + spread) / (mean - spread)).sqrt();
        // major axis direction (dc, dr) measured from the row axis
        let tilt = (2.0 * cr).atan2(rr - cc) / 2.0;
        (ratio, tilt.abs())
    }

    /// Count-weighted mean cell position `(col, row)`.
    pub fn weighted_centroid(&self, counts: &ClassImage) -> (f64, f64) {
        let w = counts.width;
        let (mut sx, mut sy, mut sw) = (0.0, 0.0, 0.0);
        for &i in &self.cells {
            let c = counts.counts[i] as f64;
            sx += c * (i % w) as f64;
            sy += c * (i / w) as f64;
            sw += c;
        }
        if sw == 0.0 {
            let n = self.cells.len() as f64;
            let sx: f64 = self.cells.iter().map(|i| (i % w) as f64).sum();
            let sy: f64 = self.cells.iter().map(|i| (i / w) as f64).sum();
            return (sx / n, sy / n);
        }
        (sx / sw, sy / sw)
    }
}

/// Components in raster order of their first cell.
pub fn connected_components(mask: &Mask) -> Vec<Component> {
    let (w, h) = (mask.width, mask.height);
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if !mask.cells[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut comp = Component {
            cells: Vec::new(),
            min_col: usize::MAX,
            max_col: 0,
            min_row: usize::MAX,
            max_row: 0,
        };
        while let Some(i) = stack.pop() {
            let (c, r) = (i % w, i / w);
            comp.cells.push(i);
            comp.min_col = comp.min_col.min(c);
            comp.max_col = comp.max_col.max(c);
            comp.min_row = comp.min_row.min(r);
            comp.max_row = comp.max_row.max(r);
            for dr in -1isize..=1 {
                for dc in -1isize..=1 {
                    let (nc, nr) = (c as isize + dc, r as isize + dr);
                    if mask.get_i(nc, nr) {
                        let j = nr as usize * w + nc as usize;
                        if !seen[j] {
                            seen[j] = true;
                            stack.push(j);
                        }
                    }
                }
            }
        }
        out.push(comp);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask_from(rows: &[&str]) -> Mask {
        let mut m = Mask::new(rows[0].len(), rows.len());
        for (r, line) in rows.iter().enumerate() {
            for (c, ch) in line.chars().enumerate() {
                m.set(c, r, ch == '#');
            }
        }
        m
    }

    #[test]
    fn diagonal_neighbors_connect() {
        let m = mask_from(&["#...", ".#..", "..#.", "...."]);
        let comps = connected_components(&m);
        assert_eq!(comps.len(), 1);
        assert_eq!(comps[0].area(), 3);
        assert_eq!((comps[0].width(), comps[0].height()), (3, 3));
    }

    #[test]
    fn separate_blobs() {
        let m = mask_from(&["##..#", "##..#", ".....", "#...."]);
        let comps = connected_components(&m);
        let areas: Vec<usize> = comps.iter().map(Component::area).collect();
        assert_eq!(areas, vec![4, 2, 1]);
    }

    #[test]
    fn empty_mask() {
        assert!(connected_components(&Mask::new(5, 5)).is_empty());
    }

    #[test]
    fn rectangle_elongation_matches_its_sides() {
        let m = mask_from(&["..........", ".###......", ".###......", ".###......", ".###......", ".###......", ".###......", ".........."]);
        let (ratio, tilt) = connected_components(&m)[0].elongation(m.width);
        assert!((ratio - 2.0).abs() < 1e-12, "{ratio}");
        assert!(tilt.abs() < 1e-12);
        let flat = mask_from(&["......", "######", "######", "......"]);
        let (ratio, tilt) = connected_components(&flat)[0].elongation(flat.width);
        assert!((ratio - 3.0).abs() < 1e-12);
        assert!((tilt - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }
}
