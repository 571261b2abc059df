use std::collections::VecDeque;
use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::{SurfaceTension, WulffError};

pub type Point = (f64, f64);

/// Shoelace area, positive for counter-clockwise polygons.
pub fn polygon_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a.0 * b.1 - b.0 * a.1
        })
        .sum::<f64>()
        / 2.0
}

pub fn polygon_centroid(poly: &[Point]) -> Point {
    let n = poly.len();
    let (mut cx, mut cy, mut a2) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (p, q) = (poly[i], poly[(i + 1) % n]);
        let cr = p.0 * q.1 - q.0 * p.1;
        a2 += cr;
        cx += (p.0 + q.0) * cr;
        cy += (p.1 + q.1) * cr;
    }
    (cx / (3.0 * a2), cy / (3.0 * a2))
}

/// `(xmin, ymin, xmax, ymax)`.
pub fn bounding_box(poly: &[Point]) -> (f64, f64, f64, f64) {
    poly.iter().fold((f64::MAX, f64::MAX, f64::MIN, f64::MIN), |b, p| {
        (b.0.min(p.0), b.1.min(p.1), b.2.max(p.0), b.3.max(p.1))
    })
}

/// `Σ τ(edge normal)·|edge|` for a counter-clockwise polygon.
pub fn tension_cost(poly: &[Point], tension: &SurfaceTension) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            let (dx, dy) = (b.0 - a.0, b.1 - a.1);
            let len = dx.hypot(dy);
            if len == 0.0 {
                0.0
            } else {
                tension.tau_at(dy.atan2(dx) - std::f64::consts::FRAC_PI_2) * len
            }
        })
        .sum()
}

pub fn is_convex(poly: &[Point], tol: f64) -> bool {
    let n = poly.len();
    (0..n).all(|i| {
        let (a, b, c) = (poly[i], poly[(i + 1) % n], poly[(i + 2) % n]);
        (b.0 - a.0) * (c.1 - b.1) - (b.1 - a.1) * (c.0 - b.0) >= -tol
    })
}

/// Minkowski sum of two convex counter-clockwise polygons.
pub fn minkowski_sum(p: &[Point], q: &[Point]) -> Vec<Point> {
    fn start(poly: &[Point]) -> Vec<Point> {
        let k = (0..poly.len())
            .min_by(|&a, &b| (poly[a].1, poly[a].0).partial_cmp(&(poly[b].1, poly[b].0)).unwrap())
            .unwrap_or(0);
        let mut v = poly.to_vec();
        v.rotate_left(k);
        v
    }
    let (p, q) = (start(p), start(q));
    let (n, m) = (p.len(), q.len());
    let edge = |poly: &[Point], i: usize| {
        let (a, b) = (poly[i % poly.len()], poly[(i + 1) % poly.len()]);
        (b.0 - a.0, b.1 - a.1)
    };
    let mut out = Vec::with_capacity(n + m);
    let (mut i, mut j) = (0, 0);
    while i < n || j < m {
        out.push((p[i % n].0 + q[j % m].0, p[i % n].1 + q[j % m].1));
        let (e, f) = (edge(&p, i), edge(&q, j));
        let cross = e.0 * f.1 - e.1 * f.0;
        if j >= m || (i < n && cross > 0.0) {
            i += 1;
        } else if i >= n || cross < 0.0 {
            j += 1;
        } else {
            i += 1;
            j += 1;
        }
    }
    dedup_vertices(out, 1e-12)
}

/// Removes consecutive near-duplicate vertices and collinear middle points.
pub fn dedup_vertices(poly: Vec<Point>, tol: f64) -> Vec<Point> {
    let mut out: Vec<Point> = Vec::with_capacity(poly.len());
    for p in poly {
        if out.last().is_none_or(|q| (p.0 - q.0).abs() > tol || (p.1 - q.1).abs() > tol) {
            out.push(p);
        }
    }
    while out.len() > 1 {
        let (a, b) = (out[0], out[out.len() - 1]);
        if (a.0 - b.0).abs() <= tol && (a.1 - b.1).abs() <= tol {
            out.pop();
        } else {
            break;
        }
    }
    let n = out.len();
    if n < 3 {
        return out;
    }
    let keep: Vec<bool> = (0..n)
        .map(|i| {
            let (a, b, c) = (out[(i + n - 1) % n], out[i], out[(i + 1) % n]);
            ((b.0 - a.0) * (c.1 - b.1) - (b.1 - a.1) * (c.0 - b.0)).abs() > tol * tol
        })
        .collect();
    out.into_iter().zip(keep).filter(|(_, k)| *k).map(|(p, _)| p).collect()
}

/// Intersection of `{x : x·n_k ≤ h_k}` for normals sorted by increasing angle,
/// each containing the origin. Returns a counter-clockwise polygon.
pub fn half_plane_intersection(normals: &[Point], offsets: &[f64]) -> Result<Vec<Point>, WulffError> {
    // line k: point h·n, direction n rotated by +90°, feasible side on the left
    let lines: Vec<(Point, Point)> =
        normals.iter().zip(offsets).map(|(&(nx, ny), &h)| ((h * nx, h * ny), (-ny, nx))).collect();
    let meet = |a: &(Point, Point), b: &(Point, Point)| -> Point {
        let ((p, d), (q, e)) = (a, b);
        let den = d.0 * e.1 - d.1 * e.0;
        let t = ((q.0 - p.0) * e.1 - (q.1 - p.1) * e.0) / den;
        (p.0 + t * d.0, p.1 + t * d.1)
    };
    let inside = |l: &(Point, Point), x: Point| {
        let (p, d) = l;
        d.0 * (x.1 - p.1) - d.1 * (x.0 - p.0) >= -1e-12
    };
    let mut dq: VecDeque<usize> = VecDeque::new();
    for k in 0..lines.len() {
        while dq.len() >= 2 && !inside(&lines[k], meet(&lines[dq[dq.len() - 2]], &lines[dq[dq.len() - 1]])) {
            dq.pop_back();
        }
        while dq.len() >= 2 && !inside(&lines[k], meet(&lines[dq[0]], &lines[dq[1]])) {
            dq.pop_front();
        }
        dq.push_back(k);
    }
    while dq.len() >= 3 && !inside(&lines[dq[0]], meet(&lines[dq[dq.len() - 2]], &lines[dq[dq.len() - 1]])) {
        dq.pop_back();
    }
    while dq.len() >= 3 && !inside(&lines[dq[dq.len() - 1]], meet(&lines[dq[0]], &lines[dq[1]])) {
        dq.pop_front();
    }
    if dq.len() < 3 {
        return Err(WulffError::Degenerate("half-plane intersection is unbounded or empty".into()));
    }
    let m = dq.len();
    let poly: Vec<Point> = (0..m).map(|i| meet(&lines[dq[(i + m - 1) % m]], &lines[dq[i]])).collect();
    let scale = poly.iter().map(|p| p.0.abs().max(p.1.abs())).fold(0.0, f64::max);
    Ok(dedup_vertices(poly, 1e-10 * scale.max(1.0)))
}

/// Uniform normals `2πk/m`, `k = 0..m`.
pub fn uniform_normals(m: usize) -> Vec<Point> {
    (0..m).map(|k| (TAU * k as f64 / m as f64).sin_cos()).map(|(s, c)| (c, s)).collect()
}

/// Intersection of the half-planes `{x·n ≤ τ(n)}` over `m` uniform normals.
pub fn wulff_body(tension: &SurfaceTension, m: usize) -> Result<Vec<Point>, WulffError> {
    let normals = uniform_normals(m);
    let offsets: Vec<f64> = (0..m).map(|k| tension.tau_at(TAU * k as f64 / m as f64)).collect();
    if let Some(k) = offsets.iter().position(|&h| !(h > 0.0) || !h.is_finite()) {
        return Err(WulffError::Degenerate(format!("tau={} at normal angle {:.4}", offsets[k], TAU * k as f64 / m as f64)));
    }
    half_plane_intersection(&normals, &offsets)
}

/// Unit-area optimal loop, centred at its centroid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WulffShape {
    pub tension: SurfaceTension,
    pub polygon: Vec<Point>,
    /// `w(1)`: tension cost of the unit-area shape.
    pub cost_unit: f64,
    /// Side of the smallest axis-parallel square containing the shape.
    pub bounding_side: f64,
    /// `1/ℓ_W²`: the largest area whose Wulff shape fits the unit square.
    pub s1: f64,
    /// Area of the unnormalised intersection body `K_τ`.
    pub body_area: f64,
    pub directions: usize,
    pub warnings: Vec<String>,
}

pub const DEFAULT_DIRECTIONS: usize = 720;
const MAX_DOUBLINGS: usize = 6;

impl WulffShape {
    /// Builds on `DEFAULT_DIRECTIONS` normals, doubling until `w(1)` moves by less than `1e-6`.
    pub fn construct(tension: &SurfaceTension) -> Result<Self, WulffError> {
        let mut shape = Self::with_directions(tension, DEFAULT_DIRECTIONS)?;
        for _ in 0..MAX_DOUBLINGS {
            let next = Self::with_directions(tension, shape.directions * 2)?;
            let done = (next.cost_unit - shape.cost_unit).abs() < 1e-6;
            shape = next;
            if done {
                return Ok(shape);
            }
        }
        shape.warnings.push(format!("refinement stopped at {} directions before reaching 1e-6", shape.directions));
        Ok(shape)
    }

    pub fn with_directions(tension: &SurfaceTension, m: usize) -> Result<Self, WulffError> {
        if m < 4 {
            return Err(WulffError::OutOfRange(format!("{m} directions")));
        }
        let body = wulff_body(tension, m)?;
        let body_area = polygon_area(&body);
        let s = 1.0 / body_area.sqrt();
        let c = polygon_centroid(&body);
        let polygon: Vec<Point> = body.iter().map(|p| ((p.0 - c.0) * s, (p.1 - c.1) * s)).collect();
        let cost_unit = tension_cost(&polygon, tension);
        let (x0, y0, x1, y1) = bounding_box(&polygon);
        let bounding_side = (x1 - x0).max(y1 - y0);
        let mut warnings = Vec::new();
        if matches!(tension, SurfaceTension::NumericPath { .. }) {
            warnings.push("directed-path tension used beyond 30 degrees from the lattice axes".to_string());
        }
        Ok(Self {
            tension: tension.clone(),
            polygon,
            cost_unit,
            bounding_side,
            s1: (1.0 / (bounding_side * bounding_side)).min(1.0),
            body_area,
            directions: m,
            warnings,
        })
    }

    /// `w(S) = √S·w(1)`.
    pub fn cost(&self, area: f64) -> f64 {
        area.max(0.0).sqrt() * self.cost_unit
    }

    pub fn area(&self) -> f64 {
        polygon_area(&self.polygon)
    }

    /// The shape scaled to bounding side 1 and placed in `[0, 1]²`.
    pub fn normalized_corner_body(&self) -> Vec<Point> {
        let (x0, y0, x1, y1) = bounding_box(&self.polygon);
        let (cx, cy) = ((x0 + x1) / 2.0, (y0 + y1) / 2.0);
        let k = 1.0 / self.bounding_side;
        self.polygon.iter().map(|p| ((p.0 - cx) * k + 0.5, (p.1 - cy) * k + 0.5)).collect()
    }

    /// At most `max` vertices, sampled evenly along the vertex list.
    pub fn decimated(&self, max: usize) -> Vec<Point> {
        let n = self.polygon.len();
        if n <= max {
            return self.polygon.clone();
        }
        (0..max).map(|k| self.polygon[k * n / max]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn disc_for_isotropic_tension() {
        let beta = 1.7;
        let t = SurfaceTension::Isotropic { beta };
        let w = WulffShape::with_directions(&t, 720).unwrap();
        assert_relative_eq!(w.area(), 1.0, epsilon = 1e-8);
        assert!((w.cost_unit - 2.0 * beta * PI.sqrt()).abs() < 1e-4);
        assert_relative_eq!(w.s1, PI / 4.0, max_relative = 1e-4);
        assert!(is_convex(&w.polygon, 1e-12));
        // identity between the optimal cost and the area of the raw body
        assert_relative_eq!(w.cost_unit, 2.0 * w.body_area.sqrt(), max_relative = 1e-9);
    }

    #[test]
    fn square_for_l1_tension() {
        let beta = 1.3;
        let t = SurfaceTension::LatticeL1 { beta };
        let body = wulff_body(&t, 720).unwrap();
        assert_eq!(body.len(), 4);
        for p in &body {
            assert_relative_eq!(p.0.abs(), beta, epsilon = 1e-9);
            assert_relative_eq!(p.1.abs(), beta, epsilon = 1e-9);
        }
        let w = WulffShape::construct(&t).unwrap();
        assert_relative_eq!(w.cost_unit, 4.0 * beta, epsilon = 1e-9);
        assert_relative_eq!(w.s1, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn homogeneity() {
        let t = SurfaceTension::numeric_path(2.0, 24).unwrap();
        let a = WulffShape::with_directions(&t, 360).unwrap();
        let b = WulffShape::with_directions(&t.scaled(2.0), 360).unwrap();
        assert_relative_eq!(b.cost_unit, 2.0 * a.cost_unit, max_relative = 1e-10);
        assert_eq!(a.polygon.len(), b.polygon.len());
        for (p, q) in a.polygon.iter().zip(&b.polygon) {
            assert!((p.0 - q.0).abs() < 1e-9 && (p.1 - q.1).abs() < 1e-9);
        }
        assert!(!a.warnings.is_empty());
    }

    #[test]
    fn refinement_converges() {
        let t = SurfaceTension::Isotropic { beta: 2.0 };
        let w = WulffShape::construct(&t).unwrap();
        assert!(w.directions > 720);
        assert!((w.cost_unit - 4.0 * PI.sqrt()).abs() < 1e-5);
        assert!(w.warnings.is_empty());
    }

    #[test]
    fn cost_scaling() {
        let w = WulffShape::with_directions(&SurfaceTension::Isotropic { beta: 1.0 }, 360).unwrap();
        assert_eq!(w.cost(0.0), 0.0);
        assert_relative_eq!(w.cost(1.0), w.cost_unit);
        assert_relative_eq!(w.cost(4.0), 2.0 * w.cost_unit);
    }

    #[test]
    fn minkowski_sum_of_squares() {
        let sq = |s: f64| vec![(0.0, 0.0), (s, 0.0), (s, s), (0.0, s)];
        let m = minkowski_sum(&sq(1.0), &sq(2.0));
        assert_eq!(m.len(), 4);
        assert_relative_eq!(polygon_area(&m), 9.0, epsilon = 1e-12);
        let tri = vec![(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)];
        let m = minkowski_sum(&sq(1.0), &tri);
        // 1 + 1/2 + mixed term (perimeter contributions of the unit square against the triangle)
        assert_relative_eq!(polygon_area(&m), 3.5, epsilon = 1e-12);
        assert!(is_convex(&m, 1e-12));
    }

    #[test]
    fn zero_tension_rejected() {
        assert!(matches!(WulffShape::construct(&SurfaceTension::Isotropic { beta: 0.0 }), Err(WulffError::Degenerate(_))));
    }
}
