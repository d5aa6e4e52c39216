//! Field lines: skeletonization, junction classification and segment fitting.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::classify::Mask;
use super::components::connected_components;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CrossingKind {
    T,
    X,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    /// Cell coordinates `(col, row)`.
    pub cell: (f64, f64),
    pub kind: CrossingKind,
    pub branches: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineSegment {
    pub start: (f64, f64),
    pub end: (f64, f64),
    /// Orientation in cell coordinates, in [0, π).
    pub direction: f64,
    pub support: usize,
}

impl LineSegment {
    pub fn length(&self) -> f64 {
        (self.end.0 - self.start.0).hypot(self.end.1 - self.start.1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineParams {
    pub junction_radius: usize,
    /// Branches shorter than this many skeleton cells are spurs.
    pub min_branch: usize,
    pub split_tolerance: f64,
    pub merge_angle: f64,
    pub merge_gap: f64,
    pub min_segment: usize,
}

impl Default for LineParams {
    fn default() -> Self {
        LineParams {
            junction_radius: 2,
            min_branch: 4,
            split_tolerance: 1.5,
            merge_angle: 10f64.to_radians(),
            merge_gap: 5.0,
            min_segment: 5,
        }
    }
}

// P2..P9: N, NE, E, SE, S, SW, W, NW
const RING: [(isize, isize); 8] = [(0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1)];

fn ring(mask: &Mask, c: usize, r: usize) -> [bool; 8] {
    RING.map(|(dc, dr)| mask.get_i(c as isize + dc, r as isize + dr))
}

fn transitions(p: &[bool; 8]) -> usize {
    (0..8).filter(|&i| !p[i] && p[(i + 1) % 8]).count()
}

/// Zhang-Suen thinning to a one-cell-wide skeleton.
pub fn thin(mask: &Mask) -> Mask {
    let mut m = mask.clone();
    let mut doomed = Vec::new();
    loop {
        let mut changed = false;
        for step in 0..2 {
            doomed.clear();
            for r in 0..m.height {
                for c in 0..m.width {
                    if !m.get(c, r) {
                        continue;
                    }
                    let p = ring(&m, c, r);
                    let b = p.iter().filter(|x| **x).count();
                    if !(2..=6).contains(&b) || transitions(&p) != 1 {
                        continue;
                    }
                    let (n, e, s, w) = (p[0], p[2], p[4], p[6]);
                    let ok = if step == 0 { !(n && e && s) && !(e && s && w) } else { !(n && e && w) && !(n && s && w) };
                    if ok {
                        doomed.push((c, r));
                    }
                }
            }
            for &(c, r) in &doomed {
                m.set(c, r, false);
            }
            changed |= !doomed.is_empty();
        }
        if !changed {
            return m;
        }
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }

    fn find(&mut self, i: usize) -> usize {
        let mut i = i;
        while self.0[i] != i {
            self.0[i] = self.0[self.0[i]];
            i = self.0[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (a, b) = (self.find(a), self.find(b));
        if a != b {
            self.0[a.max(b)] = a.min(b);
        }
    }
}

fn chebyshev(a: (usize, usize), b: (usize, usize)) -> usize {
    a.0.abs_diff(b.0).max(a.1.abs_diff(b.1))
}

struct Junctions {
    /// Candidate cells per cluster.
    clusters: Vec<Vec<(usize, usize)>>,
    /// Cluster id per cell of the junction regions, `usize::MAX` elsewhere.
    region: Vec<usize>,
}

fn junction_regions(skel: &Mask, clusters: Vec<Vec<(usize, usize)>>, radius: usize) -> Junctions {
    let mut region = vec![usize::MAX; skel.width * skel.height];
    for (k, cells) in clusters.iter().enumerate() {
        for &(c, r) in cells {
            for rr in r.saturating_sub(radius)..=(r + radius).min(skel.height - 1) {
                for cc in c.saturating_sub(radius)..=(c + radius).min(skel.width - 1) {
                    region[rr * skel.width + cc] = region[rr * skel.width + cc].min(k);
                }
            }
        }
    }
    Junctions { clusters, region }
}

/// Skeleton with the junction regions removed.
fn arms(skel: &Mask, j: &Junctions) -> Mask {
    let mut m = skel.clone();
    for (i, cell) in m.cells.iter_mut().enumerate() {
        if j.region[i] != usize::MAX {
            *cell = false;
        }
    }
    m
}

/// Clusters each arm component touches.
fn touching(comp: &[usize], width: usize, height: usize, region: &[usize]) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    for &i in comp {
        let (c, r) = ((i % width) as isize, (i / width) as isize);
        for (dc, dr) in RING {
            let (nc, nr) = (c + dc, r + dr);
            if nc >= 0 && nr >= 0 && (nc as usize) < width && (nr as usize) < height {
                let k = region[nr as usize * width + nc as usize];
                if k != usize::MAX {
                    out.insert(k);
                }
            }
        }
    }
    out
}

const PROBE_RADIUS: isize = 3;

/// Separate runs of skeleton cells on the square of radius 3 around a cell;
/// a line through the cell crosses it twice, a T three times, an X four.
fn perimeter_runs(skel: &Mask, c: usize, r: usize) -> usize {
    let (c, r, k) = (c as isize, r as isize, PROBE_RADIUS);
    let mut cells = Vec::with_capacity(8 * k as usize);
    for i in -k..k {
        cells.push((c + i, r - k));
    }
    for i in -k..k {
        cells.push((c + k, r + i));
    }
    for i in -k..k {
        cells.push((c - i, r + k));
    }
    for i in -k..k {
        cells.push((c - k, r - i));
    }
    let on: Vec<bool> = cells.iter().map(|&(x, y)| skel.get_i(x, y)).collect();
    (0..on.len()).filter(|&i| !on[i] && on[(i + 1) % on.len()]).count()
}

fn find_crossings(skel: &Mask, params: &LineParams) -> (Vec<Crossing>, Junctions) {
    let (w, h) = (skel.width, skel.height);
    let candidates: Vec<(usize, usize)> = (0..h)
        .flat_map(|r| (0..w).map(move |c| (c, r)))
        .filter(|&(c, r)| skel.get(c, r) && (transitions(&ring(skel, c, r)) >= 3 || perimeter_runs(skel, c, r) >= 3))
        .collect();
    let mut uf = UnionFind::new(candidates.len());
    for i in 0..candidates.len() {
        for j in i + 1..candidates.len() {
            if chebyshev(candidates[i], candidates[j]) <= params.junction_radius {
                uf.union(i, j);
            }
        }
    }

    // thick-line junctions thin into several nearby forks joined by short
    // bridges; fold bridged clusters together until the picture is stable
    loop {
        let clusters = group(&candidates, &mut uf);
        let j = junction_regions(skel, clusters, params.junction_radius);
        let arm_mask = arms(skel, &j);
        let comps = connected_components(&arm_mask);
        let mut merged = false;
        let mut branch_count = vec![0usize; j.clusters.len()];
        for comp in &comps {
            let touched = touching(&comp.cells, w, h, &j.region);
            if comp.area() < params.min_branch {
                if touched.len() >= 2 {
                    let first = *touched.iter().next().unwrap();
                    for &k in &touched {
                        let (a, b) = (index_of(&candidates, &j.clusters[first][0]), index_of(&candidates, &j.clusters[k][0]));
                        if uf.find(a) != uf.find(b) {
                            uf.union(a, b);
                            merged = true;
                        }
                    }
                }
                continue;
            }
            for &k in &touched {
                branch_count[k] += 1;
            }
        }
        if merged {
            continue;
        }
        let crossings = j
            .clusters
            .iter()
            .zip(&branch_count)
            .filter_map(|(cells, &branches)| {
                let kind = match branches {
                    3 => CrossingKind::T,
                    4 => CrossingKind::X,
                    _ => return None,
                };
                let n = cells.len() as f64;
                let cell = (
                    cells.iter().map(|c| c.0 as f64).sum::<f64>() / n,
                    cells.iter().map(|c| c.1 as f64).sum::<f64>() / n,
                );
                Some(Crossing { cell, kind, branches })
            })
            .collect();
        return (crossings, j);
    }
}

fn index_of(candidates: &[(usize, usize)], cell: &(usize, usize)) -> usize {
    candidates.iter().position(|c| c == cell).expect("cluster cell is a candidate")
}

fn group(candidates: &[(usize, usize)], uf: &mut UnionFind) -> Vec<Vec<(usize, usize)>> {
    let mut roots: Vec<usize> = Vec::new();
    let mut clusters: Vec<Vec<(usize, usize)>> = Vec::new();
    for (i, &cell) in candidates.iter().enumerate() {
        let root = uf.find(i);
        match roots.iter().position(|&r| r == root) {
            Some(k) => clusters[k].push(cell),
            None => {
                roots.push(root);
                clusters.push(vec![cell]);
            }
        }
    }
    clusters
}

/// Walk a skeleton component from one of its endpoints.
fn trace(cells: &[usize], width: usize) -> Vec<(f64, f64)> {
    let set: BTreeSet<usize> = cells.iter().copied().collect();
    let neighbors = |i: usize| -> Vec<usize> {
        let (c, r) = ((i % width) as isize, (i / width) as isize);
        RING.iter()
            .filter_map(|(dc, dr)| {
                let (nc, nr) = (c + dc, r + dr);
                if nc < 0 || nr < 0 || nc as usize >= width {
                    return None;
                }
                let j = nr as usize * width + nc as usize;
                set.contains(&j).then_some(j)
            })
            .collect()
    };
    let start = cells.iter().copied().find(|&i| neighbors(i).len() == 1).unwrap_or(cells[0]);
    let mut visited = BTreeSet::new();
    let mut path = Vec::with_capacity(cells.len());
    let mut cur = start;
    loop {
        visited.insert(cur);
        path.push(((cur % width) as f64, (cur / width) as f64));
        // prefer 4-neighbors so diagonal shortcuts do not skip cells
        let next = neighbors(cur).into_iter().filter(|j| !visited.contains(j)).min_by_key(|&j| {
            let d = (j % width).abs_diff(cur % width) + (j / width).abs_diff(cur / width);
            (d, j)
        });
        match next {
            Some(n) => cur = n,
            None => return path,
        }
    }
}

fn point_line_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len = dx.hypot(dy);
    if len == 0.0 {
        return (p.0 - a.0).hypot(p.1 - a.1);
    }
    ((p.0 - a.0) * dy - (p.1 - a.1) * dx).abs() / len
}

/// Douglas-Peucker split points (indices into `path`, both ends included).
fn split_points(path: &[(f64, f64)], tolerance: f64) -> Vec<usize> {
    fn rec(path: &[(f64, f64)], lo: usize, hi: usize, tol: f64, out: &mut Vec<usize>) {
        let (mut worst, mut at) = (0.0, lo);
        for i in lo + 1..hi {
            let d = point_line_distance(path[i], path[lo], path[hi]);
            if d > worst {
                worst = d;
                at = i;
            }
        }
        if worst > tol {
            rec(path, lo, at, tol, out);
            out.push(at);
            rec(path, at, hi, tol, out);
        }
    }
    let mut out = vec![0];
    if path.len() > 1 {
        rec(path, 0, path.len() - 1, tolerance, &mut out);
        out.push(path.len() - 1);
    }
    out
}

/// Total least squares line through the points, clipped to their extent.
pub fn fit_segment(points: &[(f64, f64)]) -> LineSegment {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for p in points {
        let (dx, dy) = (p.0 - mx, p.1 - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let (ux, uy) = (theta.cos(), theta.sin());
    let proj = |p: &(f64, f64)| (p.0 - mx) * ux + (p.1 - my) * uy;
    let lo = points.iter().map(proj).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(proj).fold(f64::NEG_INFINITY, f64::max);
    LineSegment {
        start: (mx + lo * ux, my + lo * uy),
        end: (mx + hi * ux, my + hi * uy),
        direction: theta.rem_euclid(std::f64::consts::PI),
        support: points.len(),
    }
}

fn angle_between(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(std::f64::consts::PI);
    d.min(std::f64::consts::PI - d)
}

fn endpoint_gap(a: &LineSegment, b: &LineSegment) -> f64 {
    let d = |p: (f64, f64), q: (f64, f64)| (p.0 - q.0).hypot(p.1 - q.1);
    d(a.start, b.start).min(d(a.start, b.end)).min(d(a.end, b.start)).min(d(a.end, b.end))
}

fn merge_segments(mut pieces: Vec<Vec<(f64, f64)>>, params: &LineParams) -> Vec<LineSegment> {
    loop {
        let fits: Vec<LineSegment> = pieces.iter().map(|p| fit_segment(p)).collect();
        let pair = (0..fits.len()).flat_map(|i| (i + 1..fits.len()).map(move |j| (i, j))).find(|&(i, j)| {
            angle_between(fits[i].direction, fits[j].direction) < params.merge_angle
                && endpoint_gap(&fits[i], &fits[j]) < params.merge_gap
        });
        match pair {
            Some((i, j)) => {
                let other = pieces.remove(j);
                pieces[i].extend(other);
            }
            None => return fits,
        }
    }
}

/// Skeleton-based line segments and T/X crossings on a white-cell mask
/// that has already been restricted to the field.
pub fn detect_lines_and_crossings(white: &Mask, params: &LineParams) -> (Vec<LineSegment>, Vec<Crossing>) {
    let skel = thin(white);
    let (crossings, junctions) = find_crossings(&skel, params);
    let kept: Vec<Vec<(usize, usize)>> = junctions
        .clusters
        .iter()
        .filter(|cells| {
            let n = cells.len() as f64;
            let centre = (cells.iter().map(|c| c.0 as f64).sum::<f64>() / n, cells.iter().map(|c| c.1 as f64).sum::<f64>() / n);
            crossings.iter().any(|x| x.cell == centre)
        })
        .cloned()
        .collect();
    let regions = junction_regions(&skel, kept, params.junction_radius);
    let arm_mask = arms(&skel, &regions);
    let mut pieces = Vec::new();
    for comp in connected_components(&arm_mask) {
        if comp.area() < params.min_segment {
            continue;
        }
        let path = trace(&comp.cells, skel.width);
        let splits = split_points(&path, params.split_tolerance);
        for w in splits.windows(2) {
            let piece = &path[w[0]..=w[1]];
            if piece.len() >= params.min_segment {
                pieces.push(piece.to_vec());
            }
        }
    }
    (merge_segments(pieces, params), crossings)
}
