//! Per-column upper edge of the green field region.

use super::classify::Mask;

pub const MEDIAN_WIDTH: usize = 5;
pub const MIN_RUN: usize = 2;

/// Topmost row where a vertical run of at least two field cells starts;
/// `mask.height` where a column has none. Median-smoothed over 5 columns.
pub fn detect_field_boundary(green: &Mask) -> Vec<usize> {
    let raw: Vec<usize> = (0..green.width)
        .map(|col| {
            let mut run = 0;
            for row in 0..green.height {
                if green.get(col, row) {
                    run += 1;
                    if run == MIN_RUN {
                        return row + 1 - MIN_RUN;
                    }
                } else {
                    run = 0;
                }
            }
            green.height
        })
        .collect();
    median_filter(&raw, MEDIAN_WIDTH)
}

/// Centered running median; windows are truncated at the edges and an even
/// window takes the lower middle element.
pub fn median_filter(values: &[usize], width: usize) -> Vec<usize> {
    let half = width / 2;
    let mut window = Vec::with_capacity(width);
    (0..values.len())
        .map(|i| {
            window.clear();
            window.extend_from_slice(&values[i.saturating_sub(half)..(i + half + 1).min(values.len())]);
            window.sort_unstable();
            window[(window.len() - 1) / 2]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_green_is_row_zero() {
        let m = Mask { width: 200, height: 150, cells: vec![true; 200 * 150] };
        assert!(detect_field_boundary(&m).iter().all(|r| *r == 0));
    }

    #[test]
    fn no_green_is_sentinel() {
        assert!(detect_field_boundary(&Mask::new(200, 150)).iter().all(|r| *r == 150));
    }

    #[test]
    fn green_below_row_fifty() {
        let mut m = Mask::new(200, 150);
        for r in 50..150 {
            for c in 0..200 {
                m.set(c, r, true);
            }
        }
        assert!(detect_field_boundary(&m).iter().all(|r| *r == 50));
    }

    #[test]
    fn isolated_cells_and_narrow_spikes_are_ignored() {
        let mut m = Mask::new(20, 30);
        for r in 20..30 {
            for c in 0..20 {
                m.set(c, r, true);
            }
        }
        // single green cell: not a run
        m.set(3, 5, true);
        // two-column tall spike: removed by the median
        for c in 10..12 {
            m.set(c, 2, true);
            m.set(c, 3, true);
        }
        assert!(detect_field_boundary(&m).iter().all(|r| *r == 20));
    }

    #[test]
    fn median_edges() {
        assert_eq!(median_filter(&[5, 1, 9, 2, 7], 5), vec![5, 2, 5, 2, 7]);
        assert_eq!(median_filter(&[], 5), Vec::<usize>::new());
    }
}
