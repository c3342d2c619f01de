//! Spatial primitives: convex hulls of trace points, pixel-center
//! rasterization, binary masks, IOU and centroids.
//!
//! Coordinates are normalized to `[0, 1]` with `y` growing downwards, as in
//! image space. Pixel `(i, j)` of a `w × h` grid has its center at
//! `((i + 0.5) / w, (j + 0.5) / h)`.

use serde::{Deserialize, Serialize};

use crate::corpus::{LabelId, TracePoint};
use crate::error::{Error, Result};

const EDGE_EPS: f64 = 1e-12;

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

impl From<&TracePoint> for Point {
    fn from(p: &TracePoint) -> Self {
        Point { x: p.x, y: p.y }
    }
}

/// `(a - o) × (b - o)`; positive when `o → a → b` turns counter-clockwise
/// in `(x, y)`.
fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    vertices: Vec<Point>,
}

impl Polygon {
    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn is_degenerate(&self) -> bool {
        self.vertices.len() < 3
    }

    /// Shoelace area; zero for degenerate polygons.
    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        if n < 3 {
            return 0.0;
        }
        let mut twice = 0.0;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            twice += a.x * b.y - b.x * a.y;
        }
        twice.abs() / 2.0
    }

    /// Inclusive containment for convex polygons, with `tol` measured as a
    /// distance in normalized units.
    pub fn contains(&self, p: Point, tol: f64) -> bool {
        match self.vertices.as_slice() {
            [] => false,
            [a] => ((p.x - a.x).powi(2) + (p.y - a.y).powi(2)).sqrt() <= tol,
            [a, b] => segment_distance(*a, *b, p) <= tol,
            vs => (0..vs.len()).all(|i| {
                let a = vs[i];
                let b = vs[(i + 1) % vs.len()];
                let len = ((b.x - a.x).powi(2) + (b.y - a.y).powi(2)).sqrt();
                cross(a, b, p) / len >= -tol
            }),
        }
    }
}

fn segment_distance(a: Point, b: Point, p: Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 { 0.0 } else { (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0) };
    let (qx, qy) = (a.x + t * dx, a.y + t * dy);
    ((p.x - qx).powi(2) + (p.y - qy).powi(2)).sqrt()
}

/// Andrew's monotone chain. Vertices come out counter-clockwise starting
/// from the lexicographically smallest point; collinear points are dropped
/// so only extreme points survive.
pub fn convex_hull(points: &[Point]) -> Result<Polygon> {
    if points.is_empty() {
        return Err(Error::EmptyInput("convex hull of zero points"));
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return Ok(Polygon { vertices: pts });
    }

    let mut hull: Vec<Point> = Vec::with_capacity(pts.len() + 1);
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    Ok(Polygon { vertices: hull })
}

pub fn trace_hull(points: &[TracePoint]) -> Result<Polygon> {
    let pts: Vec<Point> = points.iter().map(Point::from).collect();
    convex_hull(&pts)
}

/// Row-major bit grid, optionally typed with a class and a source example.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    words: Vec<u64>,
    pub class_id: Option<LabelId>,
    pub source_id: Option<String>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::DimensionMismatch(format!("mask dimensions {width}x{height}")));
        }
        let n = width as usize * height as usize;
        Ok(BinaryMask { width, height, words: vec![0; n.div_ceil(64)], class_id: None, source_id: None })
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Result<Self> {
        let mut m = Self::new(width, height)?;
        for y in 0..height {
            for x in 0..width {
                if f(x, y) {
                    m.set(x, y);
                }
            }
        }
        Ok(m)
    }

    pub fn with_class(mut self, class_id: LabelId) -> Self {
        self.class_id = Some(class_id);
        self
    }

    pub fn with_source(mut self, source_id: impl Into<String>) -> Self {
        self.source_id = Some(source_id.into());
        self
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    #[inline]
    fn index(&self, x: u32, y: u32) -> usize {
        y as usize * self.width as usize + x as usize
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        let i = self.index(x, y);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32) {
        let i = self.index(x, y);
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn count(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn iter_set(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let w = self.width as usize;
        self.words.iter().enumerate().flat_map(move |(wi, &word)| {
            let mut bits = word;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let b = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                let i = wi * 64 + b;
                Some(((i % w) as u32, (i / w) as u32))
            })
        })
    }

    /// Inclusive pixel bounding box `(x0, y0, x1, y1)`.
    pub fn bbox(&self) -> Option<(u32, u32, u32, u32)> {
        let mut it = self.iter_set();
        let (x, y) = it.next()?;
        let init = (x, y, x, y);
        Some(it.fold(init, |(x0, y0, x1, y1), (x, y)| (x0.min(x), y0.min(y), x1.max(x), y1.max(y))))
    }

    /// Nearest-neighbor resampling by pixel center; class and source carry over.
    pub fn resample(&self, width: u32, height: u32) -> Result<Self> {
        if (width, height) == self.dims() {
            return Ok(self.clone());
        }
        let xs: Vec<u32> = (0..width).map(|i| source_index(i, width, self.width)).collect();
        let ys: Vec<u32> = (0..height).map(|j| source_index(j, height, self.height)).collect();
        let mut out = BinaryMask::from_fn(width, height, |x, y| self.get(xs[x as usize], ys[y as usize]))?;
        out.class_id = self.class_id;
        out.source_id = self.source_id.clone();
        Ok(out)
    }
}

/// Source pixel whose area contains the center of destination pixel `i`.
pub(crate) fn source_index(i: u32, dst: u32, src: u32) -> u32 {
    let c = (i as f64 + 0.5) / dst as f64;
    ((c * src as f64).floor() as u32).min(src - 1)
}

fn pixel_of(v: f64, n: u32) -> u32 {
    ((v * n as f64).floor().max(0.0) as u32).min(n - 1)
}

/// Pixels whose center lies inside or on the polygon. Degenerate polygons,
/// and hulls too thin to contain any pixel center, rasterize the pixels their
/// outline passes through.
pub fn rasterize(polygon: &Polygon, width: u32, height: u32) -> Result<BinaryMask> {
    let mut mask = BinaryMask::new(width, height)?;
    let vs = polygon.vertices();
    match vs {
        [] => return Err(Error::EmptyInput("rasterize an empty polygon")),
        [p] => mask.set(pixel_of(p.x, width), pixel_of(p.y, height)),
        [a, b] => draw_segment(&mut mask, *a, *b),
        _ => {
            fill_convex(&mut mask, vs);
            if mask.is_empty() {
                for i in 0..vs.len() {
                    draw_segment(&mut mask, vs[i], vs[(i + 1) % vs.len()]);
                }
            }
        }
    }
    Ok(mask)
}

fn fill_convex(mask: &mut BinaryMask, vs: &[Point]) {
    let (w, h) = mask.dims();
    let ymin = vs.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
    let ymax = vs.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max);
    for j in 0..h {
        let yc = (j as f64 + 0.5) / h as f64;
        if yc < ymin - EDGE_EPS || yc > ymax + EDGE_EPS {
            continue;
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..vs.len() {
            let a = vs[i];
            let b = vs[(i + 1) % vs.len()];
            let (ey0, ey1) = if a.y <= b.y { (a.y, b.y) } else { (b.y, a.y) };
            if yc < ey0 - EDGE_EPS || yc > ey1 + EDGE_EPS {
                continue;
            }
            if (b.y - a.y).abs() <= EDGE_EPS {
                lo = lo.min(a.x.min(b.x));
                hi = hi.max(a.x.max(b.x));
            } else {
                let t = ((yc - a.y) / (b.y - a.y)).clamp(0.0, 1.0);
                let x = a.x + t * (b.x - a.x);
                lo = lo.min(x);
                hi = hi.max(x);
            }
        }
        if lo > hi {
            continue;
        }
        // first/last pixel columns whose centers fall in [lo, hi]
        let first = ((lo - EDGE_EPS) * w as f64 - 0.5).ceil().max(0.0);
        let last = ((hi + EDGE_EPS) * w as f64 - 0.5).floor().min(w as f64 - 1.0);
        if first > last {
            continue;
        }
        for i in first as u32..=last as u32 {
            mask.set(i, j);
        }
    }
}

fn draw_segment(mask: &mut BinaryMask, a: Point, b: Point) {
    let (w, h) = mask.dims();
    let dx = (b.x - a.x) * w as f64;
    let dy = (b.y - a.y) * h as f64;
    let steps = (dx.abs().max(dy.abs()) * 2.0).ceil() as usize + 1;
    for s in 0..=steps {
        let t = s as f64 / steps as f64;
        let x = a.x + t * (b.x - a.x);
        let y = a.y + t * (b.y - a.y);
        mask.set(pixel_of(x, w), pixel_of(y, h));
    }
}

/// `|a ∩ b| / |a ∪ b|`, zero when both masks are empty.
pub fn iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch(format!(
            "iou of {}x{} and {}x{} masks",
            a.width, a.height, b.width, b.height
        )));
    }
    let (mut inter, mut union) = (0u64, 0u64);
    for (x, y) in a.words.iter().zip(&b.words) {
        inter += (x & y).count_ones() as u64;
        union += (x | y).count_ones() as u64;
    }
    Ok(if union == 0 { 0.0 } else { inter as f64 / union as f64 })
}

/// Mean of set-pixel centers, normalized.
pub fn centroid(mask: &BinaryMask) -> Result<Point> {
    let (mut sx, mut sy, mut n) = (0u64, 0u64, 0u64);
    for (x, y) in mask.iter_set() {
        sx += x as u64;
        sy += y as u64;
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptyInput("centroid of an empty mask"));
    }
    let nf = n as f64;
    Ok(Point::new(
        (sx as f64 + 0.5 * nf) / (nf * mask.width as f64),
        (sy as f64 + 0.5 * nf) / (nf * mask.height as f64),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[(f64, f64)]) -> Vec<Point> {
        v.iter().map(|&(x, y)| Point::new(x, y)).collect()
    }

    #[test]
    fn hull_of_triangle_is_itself() {
        let h = convex_hull(&pts(&[(0.1, 0.1), (0.9, 0.2), (0.4, 0.8)])).unwrap();
        assert_eq!(h.vertices().len(), 3);
        for p in pts(&[(0.1, 0.1), (0.9, 0.2), (0.4, 0.8)]) {
            assert!(h.vertices().contains(&p));
        }
    }

    #[test]
    fn hull_square_drops_center() {
        let h = convex_hull(&pts(&[(0.0, 0.0), (1.0, 0.0), (0.5, 0.5), (1.0, 1.0), (0.0, 1.0)])).unwrap();
        assert_eq!(h.vertices(), pts(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]).as_slice());
    }

    #[test]
    fn hull_degenerate_cases() {
        assert_eq!(convex_hull(&pts(&[(0.3, 0.3)])).unwrap().vertices().len(), 1);
        assert_eq!(convex_hull(&pts(&[(0.3, 0.3), (0.3, 0.3)])).unwrap().vertices().len(), 1);
        let line = convex_hull(&pts(&[(0.0, 0.0), (0.5, 0.5), (0.2, 0.2), (1.0, 1.0)])).unwrap();
        assert_eq!(line.vertices(), pts(&[(0.0, 0.0), (1.0, 1.0)]).as_slice());
        assert!(convex_hull(&[]).is_err());
    }

    #[test]
    fn unit_square_fills_grid() {
        let sq = convex_hull(&pts(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)])).unwrap();
        assert_eq!(rasterize(&sq, 10, 10).unwrap().count(), 100);
    }

    #[test]
    fn point_rasterizes_one_pixel() {
        let p = convex_hull(&pts(&[(0.42, 0.77)])).unwrap();
        let m = rasterize(&p, 10, 10).unwrap();
        assert_eq!(m.count(), 1);
        assert!(m.get(4, 7));
        // the far border clamps into the grid
        let edge = rasterize(&convex_hull(&pts(&[(1.0, 1.0)])).unwrap(), 10, 10).unwrap();
        assert!(edge.get(9, 9));
    }

    #[test]
    fn segment_rasterizes_a_thin_line() {
        let l = convex_hull(&pts(&[(0.05, 0.05), (0.95, 0.05)])).unwrap();
        let m = rasterize(&l, 10, 10).unwrap();
        assert_eq!(m.count(), 10);
        assert!((0..10).all(|x| m.get(x, 0)));
    }

    #[test]
    fn thin_triangle_is_never_empty() {
        let t = convex_hull(&pts(&[(0.11, 0.11), (0.12, 0.111), (0.13, 0.112)])).unwrap();
        assert!(!rasterize(&t, 10, 10).unwrap().is_empty());
    }

    #[test]
    fn zero_dimensions_fail() {
        let p = convex_hull(&pts(&[(0.5, 0.5)])).unwrap();
        assert!(rasterize(&p, 0, 4).is_err());
    }

    #[test]
    fn iou_cases() {
        let a = BinaryMask::from_fn(20, 10, |x, _| x < 10).unwrap();
        assert_eq!(iou(&a, &a).unwrap(), 1.0);
        let b = BinaryMask::from_fn(20, 10, |x, _| x >= 10).unwrap();
        assert_eq!(iou(&a, &b).unwrap(), 0.0);
        // 10x10 squares sharing 5 columns: 50 / 150
        let c = BinaryMask::from_fn(20, 10, |x, _| (5..15).contains(&x)).unwrap();
        assert_eq!(iou(&a, &c).unwrap(), 50.0 / 150.0);
        let e = BinaryMask::new(20, 10).unwrap();
        assert_eq!(iou(&e, &e).unwrap(), 0.0);
        assert!(iou(&a, &BinaryMask::new(10, 10).unwrap()).is_err());
    }

    #[test]
    fn centroid_cases() {
        let full = BinaryMask::from_fn(10, 10, |_, _| true).unwrap();
        assert_eq!(centroid(&full).unwrap(), Point::new(0.5, 0.5));
        let one = BinaryMask::from_fn(10, 10, |x, y| x == 0 && y == 0).unwrap();
        let c = centroid(&one).unwrap();
        assert!((c.x - 0.05).abs() < 1e-15 && (c.y - 0.05).abs() < 1e-15);
        let corners = BinaryMask::from_fn(10, 10, |x, y| (x, y) == (0, 0) || (x, y) == (9, 9)).unwrap();
        assert_eq!(centroid(&corners).unwrap(), Point::new(0.5, 0.5));
        assert!(centroid(&BinaryMask::new(3, 3).unwrap()).is_err());
    }

    #[test]
    fn resample_preserves_normalized_shape() {
        let m = BinaryMask::from_fn(4, 4, |x, y| x < 2 && y < 2).unwrap().with_class(LabelId(3));
        let big = m.resample(8, 8).unwrap();
        assert_eq!(big.count(), 16);
        assert_eq!(big.class_id, Some(LabelId(3)));
        assert_eq!(big.bbox(), Some((0, 0, 3, 3)));
    }

    #[test]
    fn iter_set_matches_get() {
        let m = BinaryMask::from_fn(13, 7, |x, y| (x * 7 + y * 3) % 5 == 0).unwrap();
        let listed: Vec<_> = m.iter_set().collect();
        let scanned: Vec<_> = (0..7).flat_map(|y| (0..13).map(move |x| (x, y))).filter(|&(x, y)| m.get(x, y)).collect();
        assert_eq!(listed, scanned);
    }
}
