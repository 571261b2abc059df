use serde::{Deserialize, Serialize};

use super::shape::{minkowski_sum, Point, WulffShape};
use super::WulffError;

/// Square of side `1−r` with its corners rounded by `r·K̂`, where `K̂` is the
/// Wulff shape scaled to bounding side 1. `r = 1` is the largest Wulff shape
/// fitting the unit square; `r → 0` is the square itself.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlaquetteSolution {
    pub corner_radius: f64,
    pub area: f64,
    pub cost: f64,
}

impl PlaquetteSolution {
    /// Loop polygon inside `[0, 1]²`.
    pub fn polygon(&self, shape: &WulffShape) -> Vec<Point> {
        let r = self.corner_radius;
        let corner: Vec<Point> = shape.normalized_corner_body().iter().map(|p| (p.0 * r, p.1 * r)).collect();
        let s = 1.0 - r;
        if s <= 0.0 {
            return corner;
        }
        minkowski_sum(&[(0.0, 0.0), (s, 0.0), (s, s), (0.0, s)], &corner)
    }
}

/// `area(r) = 1 − r²(1 − S₁)` and `cost(r) = (1−r)·τ(□) + r·√S₁·w(1)`.
pub fn plaquette(shape: &WulffShape, r: f64) -> Result<PlaquetteSolution, WulffError> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(WulffError::OutOfRange(format!("corner radius {r} outside (0, 1]")));
    }
    Ok(PlaquetteSolution {
        corner_radius: r,
        area: 1.0 - r * r * (1.0 - shape.s1),
        cost: (1.0 - r) * shape.tension.square_cost() + r * shape.s1.sqrt() * shape.cost_unit,
    })
}

/// Corner radius of the plaquette with the given area, `None` outside `[S₁, 1)`.
pub fn plaquette_radius(shape: &WulffShape, area: f64) -> Option<f64> {
    let gap = 1.0 - shape.s1;
    if gap <= 0.0 || area < shape.s1 || area >= 1.0 {
        return None;
    }
    Some(((1.0 - area) / gap).sqrt().min(1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RestrictedRegime {
    /// One scaled Wulff shape.
    Wulff,
    /// One plaquette.
    Plaquette,
    /// A full-width plaquette with a Wulff shape on top, equal corner radii.
    PlaquetteAndWulff,
    /// Two identical stacked plaquettes.
    TwinPlaquettes,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RestrictedSolution {
    pub area: f64,
    /// Number of loops.
    pub loops: usize,
    pub regime: RestrictedRegime,
    /// Corner scale relative to the bounding-side-1 Wulff shape; 0 in the Wulff regime.
    pub corner_radius: f64,
    pub value: f64,
}

/// Largest admissible area of the restricted problem.
pub const MAX_RESTRICTED_AREA: f64 = 2.0;

/// Regime boundaries `(S₁, 1, max(2S₁, 1))`.
pub fn regime_boundaries(shape: &WulffShape) -> (f64, f64, f64) {
    (shape.s1, 1.0, (2.0 * shape.s1).max(1.0))
}

/// Minimal tension cost of at most two nested loops in the unit square
/// enclosing total area `s` (counted with multiplicity).
pub fn restricted_wulff(shape: &WulffShape, s: f64) -> Result<RestrictedSolution, WulffError> {
    if !(0.0..=MAX_RESTRICTED_AREA).contains(&s) {
        return Err(WulffError::OutOfRange(format!("area {s} outside [0, 2]")));
    }
    let (s1, _, b3) = regime_boundaries(shape);
    let a = shape.tension.square_cost();
    let wk = shape.s1.sqrt() * shape.cost_unit;
    let sol = |loops, regime, corner_radius, value| RestrictedSolution { area: s, loops, regime, corner_radius, value };
    if s <= s1 {
        return Ok(sol(1, RestrictedRegime::Wulff, 0.0, shape.cost(s)));
    }
    if s <= 1.0 {
        let r = ((1.0 - s) / (1.0 - s1)).sqrt();
        return Ok(sol(1, RestrictedRegime::Plaquette, r, (1.0 - r) * a + r * wk));
    }
    if s <= b3 {
        let r = ((s - 1.0) / (2.0 * s1 - 1.0)).sqrt().min(1.0);
        return Ok(sol(2, RestrictedRegime::PlaquetteAndWulff, r, (1.0 - r) * a + 2.0 * r * wk));
    }
    let r = ((1.0 - s / 2.0) / (1.0 - s1)).sqrt();
    Ok(sol(2, RestrictedRegime::TwinPlaquettes, r, 2.0 * ((1.0 - r) * a + r * wk)))
}

/// Value-only shortcut for [`restricted_wulff`].
pub fn restricted_value(shape: &WulffShape, s: f64) -> Result<f64, WulffError> {
    restricted_wulff(shape, s).map(|r| r.value)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SingularityFit {
    /// Exponent of `|w(S) − w(1)|` in `1 − S` for `S < 1`.
    pub below: f64,
    /// Exponent of `|w(S) − w(1)|` in `S − 1` for `S > 1`.
    pub above: f64,
    /// Exponent of `w(S)` in `S` near zero.
    pub small: f64,
}

fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (mx, my) = points.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0 / n, a.1 + p.1 / n));
    let (sxy, sxx) = points.iter().fold((0.0, 0.0), |a, p| (a.0 + (p.0 - mx) * (p.1 - my), a.1 + (p.0 - mx).powi(2)));
    sxy / sxx
}

/// Least-squares log-log exponents of the restricted value near `S = 1`
/// over `|S − 1| ∈ [lo, hi]`, and near `S = 0` over `S ∈ [lo·S₁, hi·S₁]`.
pub fn singularity_exponents(shape: &WulffShape, lo: f64, hi: f64) -> Result<SingularityFit, WulffError> {
    if shape.s1 >= 1.0 - 1e-9 {
        return Err(WulffError::FitRefused("Wulff shape fills the square; no corner singularity".into()));
    }
    if !(0.0 < lo && lo < hi && hi < (1.0 - shape.s1).min(0.5)) {
        return Err(WulffError::OutOfRange(format!("fit window [{lo}, {hi}]")));
    }
    let w1 = restricted_value(shape, 1.0)?;
    let grid: Vec<f64> = (0..25).map(|k| lo * (hi / lo).powf(k as f64 / 24.0)).collect();
    let side = |sign: f64| -> Result<f64, WulffError> {
        let pts = grid
            .iter()
            .map(|&e| Ok((e.ln(), (restricted_value(shape, 1.0 + sign * e)? - w1).abs().ln())))
            .collect::<Result<Vec<_>, WulffError>>()?;
        Ok(log_log_slope(&pts))
    };
    let small: Vec<(f64, f64)> = grid.iter().map(|&e| ((e * shape.s1).ln(), shape.cost(e * shape.s1).ln())).collect();
    Ok(SingularityFit { below: side(-1.0)?, above: side(1.0)?, small: log_log_slope(&small) })
}
