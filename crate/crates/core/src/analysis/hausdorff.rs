use serde::{Deserialize, Serialize};

use crate::wulff::{polygon_centroid, Point, WulffShape};

/// Boundary samples of a closed polygon, at most `step` apart.
fn densify(poly: &[Point], step: f64) -> Vec<Point> {
    let mut out = Vec::new();
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
        let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
        let k = (len / step).ceil().max(1.0) as usize;
        out.extend((0..k).map(|j| {
            let t = j as f64 / k as f64;
            (a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1))
        }));
    }
    out
}

fn point_segment(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let l2 = dx * dx + dy * dy;
    let t = if l2 == 0.0 { 0.0 } else { (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / l2).clamp(0.0, 1.0) };
    ((p.0 - a.0 - t * dx).powi(2) + (p.1 - a.1 - t * dy).powi(2)).sqrt()
}

fn directed(samples: &[Point], poly: &[Point]) -> f64 {
    samples
        .iter()
        .map(|&p| (0..poly.len()).map(|i| point_segment(p, poly[i], poly[(i + 1) % poly.len()])).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

/// Hausdorff distance between two closed polygonal curves, with boundaries
/// sampled every quarter lattice unit.
pub fn hausdorff_distance(a: &[Point], b: &[Point]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty(), "empty polygon");
    directed(&densify(a, 0.25), b).max(directed(&densify(b, 0.25), a))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ShapeFit {
    /// Shift applied to the target.
    pub translation: Point,
    pub distance: f64,
    /// Enclosed area used for normalisation.
    pub area: f64,
    /// `distance / area^{1/3}`.
    pub normalized: f64,
}

fn shifted(poly: &[Point], t: Point) -> Vec<Point> {
    poly.iter().map(|p| (p.0 + t.0, p.1 + t.1)).collect()
}

/// Minimises the Hausdorff distance over translations of `target`: centroid
/// alignment, a lattice grid of ±3, then a shrinking pattern search.
pub fn hausdorff_fit(contour: &[Point], target: &[Point], area: f64) -> ShapeFit {
    let (ca, cb) = (polygon_centroid(contour), polygon_centroid(target));
    let start = (ca.0 - cb.0, ca.1 - cb.1);
    let eval = |t: Point| hausdorff_distance(contour, &shifted(target, t));
    let mut best = (start, eval(start));
    for dx in -3..=3 {
        for dy in -3..=3 {
            let t = (start.0 + dx as f64, start.1 + dy as f64);
            let d = eval(t);
            if d < best.1 {
                best = (t, d);
            }
        }
    }
    let mut step = 0.5;
    while step >= 1e-3 {
        let mut moved = false;
        for (dx, dy) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)] {
            let t = (best.0 .0 + dx * step, best.0 .1 + dy * step);
            let d = eval(t);
            if d < best.1 {
                best = (t, d);
                moved = true;
            }
        }
        if !moved {
            step /= 2.0;
        }
    }
    ShapeFit { translation: best.0, distance: best.1, area, normalized: best.1 / area.cbrt() }
}

/// The Wulff shape scaled to enclose `area`, centred at the origin.
pub fn wulff_target(shape: &WulffShape, area: f64) -> Vec<Point> {
    let k = (area / shape.area()).sqrt();
    shape.polygon.iter().map(|p| (p.0 * k, p.1 * k)).collect()
}
