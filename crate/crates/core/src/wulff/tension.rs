use std::f64::consts::FRAC_PI_6;

use serde::{Deserialize, Serialize};

use super::WulffError;

/// Surface tension as a function of the outward normal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum SurfaceTension {
    /// `τ(n) = β(|n₁| + |n₂|)`: the bare bond count of a lattice line.
    LatticeL1 { beta: f64 },
    /// `τ ≡ β`.
    Isotropic { beta: f64 },
    /// Directed-path estimate tabulated over normal angles in `[0, π/4]`.
    NumericPath { beta: f64, length: usize, table: Vec<(f64, f64)> },
}

impl SurfaceTension {
    /// Tabulates the directed-path estimate at scale `length`.
    pub fn numeric_path(beta: f64, length: usize) -> Result<Self, WulffError> {
        if length < 8 {
            return Err(WulffError::OutOfRange(format!("path length {length} < 8")));
        }
        if !(beta > 0.0) {
            return Err(WulffError::Degenerate(format!("beta={beta} must be positive")));
        }
        let logs = log_path_sums(beta, length);
        let table: Vec<(f64, f64)> = (0..=length)
            .map(|y| {
                let (x, y) = (length as f64, y as f64);
                ((y / x).atan(), -logs[y as usize] / x.hypot(y))
            })
            .collect();
        if let Some(&(theta, tau)) = table.iter().find(|(_, t)| !(*t > 0.0)) {
            return Err(WulffError::Degenerate(format!("tau={tau:.4} at normal angle {theta:.4}; beta too small")));
        }
        Ok(SurfaceTension::NumericPath { beta, length, table })
    }

    pub fn beta(&self) -> f64 {
        match self {
            SurfaceTension::LatticeL1 { beta }
            | SurfaceTension::Isotropic { beta }
            | SurfaceTension::NumericPath { beta, .. } => *beta,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SurfaceTension::LatticeL1 { .. } => "lattice-l1",
            SurfaceTension::Isotropic { .. } => "isotropic",
            SurfaceTension::NumericPath { .. } => "numeric-path",
        }
    }

    /// `τ` at the unit normal of angle `theta`.
    pub fn tau_at(&self, theta: f64) -> f64 {
        let (s, c) = theta.sin_cos();
        match self {
            SurfaceTension::LatticeL1 { beta } => beta * (c.abs() + s.abs()),
            SurfaceTension::Isotropic { beta } => *beta,
            SurfaceTension::NumericPath { table, .. } => interpolate(table, fold_to_octant(c, s)),
        }
    }

    pub fn tau(&self, n: (f64, f64)) -> f64 {
        self.tau_at(n.1.atan2(n.0))
    }

    /// Sum of `τ` over the four axis normals: the cost of the unit square.
    pub fn square_cost(&self) -> f64 {
        (0..4).map(|k| self.tau_at(k as f64 * std::f64::consts::FRAC_PI_2)).sum()
    }

    /// True when the directed-path estimate is used more than 30° away from
    /// both axes, where neglecting backtracking is no longer a small effect.
    pub fn approximation_warning(&self, theta: f64) -> bool {
        matches!(self, SurfaceTension::NumericPath { .. }) && fold_to_octant(theta.cos(), theta.sin()) > FRAC_PI_6
    }

    /// Same model with `τ` multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        match self {
            SurfaceTension::LatticeL1 { beta } => SurfaceTension::LatticeL1 { beta: beta * k },
            SurfaceTension::Isotropic { beta } => SurfaceTension::Isotropic { beta: beta * k },
            SurfaceTension::NumericPath { beta, length, table } => SurfaceTension::NumericPath {
                beta: *beta,
                length: *length,
                table: table.iter().map(|&(t, v)| (t, v * k)).collect(),
            },
        }
    }
}

/// Angle in `[0, π/4]` of the direction equivalent to `(c, s)` under the
/// symmetries of the square lattice.
fn fold_to_octant(c: f64, s: f64) -> f64 {
    let (a, b) = (c.abs(), s.abs());
    a.min(b).atan2(a.max(b))
}

fn interpolate(table: &[(f64, f64)], theta: f64) -> f64 {
    let k = table.partition_point(|&(t, _)| t < theta);
    if k == 0 {
        return table[0].1;
    }
    if k >= table.len() {
        return table[table.len() - 1].1;
    }
    let ((t0, v0), (t1, v1)) = (table[k - 1], table[k]);
    v0 + (v1 - v0) * (theta - t0) / (t1 - t0)
}

/// `log T(x, y)` for `y = 0..=x`, where `T` sums `e^{−β(x + Σ|Δ|)}` over
/// directed paths of `x` horizontal unit steps separated by `x + 1` vertical
/// runs `Δ` with total rise `y`.
fn log_path_sums(beta: f64, x: usize) -> Vec<f64> {
    let q = (-beta).exp();
    let pad = (40.0 / beta).ceil() as usize + 2;
    let width = x + 2 * pad + 1;
    let mut v = vec![0.0; width];
    v[pad] = 1.0;
    let mut log_scale = 0.0;
    let mut fwd = vec![0.0; width];
    let mut bwd = vec![0.0; width];
    for step in 0..=x {
        // convolution with q^|Δ| via one forward and one backward recursion
        let mut acc = 0.0;
        for i in 0..width {
            acc = v[i] + q * acc;
            fwd[i] = acc;
        }
        acc = 0.0;
        for i in (0..width).rev() {
            acc = v[i] + q * acc;
            bwd[i] = acc;
        }
        for i in 0..width {
            v[i] = fwd[i] + bwd[i] - v[i];
        }
        let m = v.iter().cloned().fold(0.0, f64::max);
        v.iter_mut().for_each(|e| *e /= m);
        log_scale += m.ln();
        if step < x {
            log_scale -= beta;
        }
    }
    (0..=x).map(|y| v[pad + y].ln() + log_scale).collect()
}

/// Directed-path estimate of `τ` at the normal of angle `theta`, evaluated at
/// the lattice point `⌊L·t⌋` where `t` is the tangent folded into the first octant.
pub fn tau_estimate(beta: f64, theta: f64, length: usize) -> Result<(f64, bool), WulffError> {
    if length < 8 {
        return Err(WulffError::OutOfRange(format!("path length {length} < 8")));
    }
    let phi = fold_to_octant(theta.cos(), theta.sin());
    let (tx, ty) = (phi.cos(), phi.sin());
    let x = (length as f64 * tx).floor() as usize;
    let y = (length as f64 * ty).floor() as usize;
    let logs = log_path_sums(beta, x);
    Ok((-logs[y] / length as f64, phi > FRAC_PI_6))
}
