//! Free energy of a droplet of volume `ρN²` at supersaturation `δ` and the
//! critical supersaturations where the global minimiser jumps.
//!
//! `F_δ(ρ) = (δ − psv·ρ)²/(2DR²) + R·w_rst(ρ/R²)` on `ρ ∈ [0, 2R²]`.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::particles::PhaseParams;
use crate::wulff::{regime_boundaries, restricted_wulff, RestrictedRegime, WulffError, WulffShape};

#[derive(Debug, Error, PartialEq)]
pub enum PhaseError {
    #[error("out of range: {0}")]
    OutOfRange(String),
    #[error("critical droplet does not fit the box: R={r} but at least {required:.3} is needed")]
    DoesNotFit { r: f64, required: f64 },
    #[error("no transition found: {0}")]
    NoTransition(String),
    #[error(transparent)]
    Wulff(#[from] WulffError),
}

/// `κ_c = ½(3/2)^{3/2}`.
pub fn kappa_c() -> f64 {
    0.5 * 1.5f64.powf(1.5)
}

/// Volume fraction at the transition, `λ_c = 2/3`.
pub const LAMBDA_C: f64 = 2.0 / 3.0;

/// `φ_κ(λ) = κ(1−λ)² + √λ`.
pub fn phi(kappa: f64, lambda: f64) -> f64 {
    kappa * (1.0 - lambda).powi(2) + lambda.sqrt()
}

/// Largest root of `4κ√λ(1−λ) = 1` in `(1/3, 1)`, if any.
pub fn stationary_root(kappa: f64) -> Option<f64> {
    let g = |l: f64| 4.0 * kappa * l.sqrt() * (1.0 - l) - 1.0;
    let (mut a, mut b) = (1.0 / 3.0, 1.0);
    if g(a) < 0.0 {
        return None;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if g(m) >= 0.0 {
            a = m;
        } else {
            b = m;
        }
        if b - a < 1e-16 {
            break;
        }
    }
    Some(0.5 * (a + b))
}

/// Global minimisers of `φ_κ` on `[0, 1]`.
pub fn phi_minimizers(kappa: f64) -> Vec<f64> {
    let kc = kappa_c();
    if (kappa - kc).abs() <= 1e-12 {
        return vec![0.0, LAMBDA_C];
    }
    if kappa < kc {
        return vec![0.0];
    }
    vec![stationary_root(kappa).expect("root exists above the critical value")]
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Points of the coarse grid over `[0, 2R²]`.
    pub grid_points: usize,
    /// Tie tolerance in `F` when counting minimisers.
    pub tie_tolerance: f64,
    /// Proceed when the critical droplet does not fit the box.
    pub allow_unfit: bool,
    /// Points of the δ-grid for the radii table.
    pub radii_points: usize,
    pub exec: Execution,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { grid_points: 10_000, tie_tolerance: 1e-9, allow_unfit: false, radii_points: 200, exec: Execution::Parallel }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Minimum {
    pub delta: f64,
    pub rho_star: f64,
    pub f_min: f64,
    /// All global minimisers within the tie tolerance.
    pub minimizers: Vec<f64>,
    pub loops: usize,
    pub regime: Option<RestrictedRegime>,
    pub corner_radius: f64,
}

impl Minimum {
    pub fn multiplicity(&self) -> usize {
        self.minimizers.len()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RadiusRow {
    pub delta: f64,
    pub rho_star: f64,
    pub loops: usize,
    /// Half the bounding side of a free Wulff droplet, in units of `N`.
    pub r1: Option<f64>,
    /// Corner radius of the first-layer plaquette, in units of `N`.
    pub r1_tilde: Option<f64>,
    /// Corner radius of the second layer, in units of `N`.
    pub r2: Option<f64>,
    pub f_min: f64,
    pub multiplicity: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CriticalValues {
    pub delta1_analytic: f64,
    pub delta1_numeric: f64,
    /// The closed form with `psv` under the cube root in the numerator.
    pub delta1_printed: f64,
    pub delta15: f64,
    /// True when the first droplet already exceeds the Wulff regime at `δ¹`.
    pub delta15_degenerate: bool,
    pub delta2: f64,
    pub rho_minus: f64,
    pub rho_plus: f64,
    pub delta25: f64,
    /// True when the jump at `δ²` already lands in the twin-plaquette regime.
    pub delta25_degenerate: bool,
    /// `√(λ_c·δ¹/psv)`, the critical droplet scale in units of `N`.
    pub r_cr: f64,
    pub s1: f64,
    /// Smallest `R` for which the critical Wulff droplet fits the box.
    pub required_r: f64,
    /// The same bound computed with the area printed in the fitting condition.
    pub required_r_printed: f64,
    pub radii: Vec<RadiusRow>,
}

/// Which of the three volume regimes a droplet falls in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VolumeCase {
    Small,
    Mesoscopic,
    Macroscopic,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CaseConstants {
    pub eta: f64,
    pub c8: f64,
    pub c9: f64,
}

impl Default for CaseConstants {
    fn default() -> Self {
        Self { eta: 0.25, c8: 1.0, c9: 0.1 }
    }
}

/// Log-probability envelopes of `{α = b, Σ = target}` up to constants.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CaseEnvelope {
    pub delta: f64,
    pub b: f64,
    pub case: VolumeCase,
    pub small_lower: f64,
    pub small_upper: f64,
    pub mesoscopic_upper: f64,
    pub macroscopic_lower: f64,
    pub macroscopic_upper: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CasePrediction {
    pub delta: f64,
    pub predicted_b: f64,
    pub dominant: VolumeCase,
    pub envelope: CaseEnvelope,
}

#[derive(Clone, Debug)]
pub struct PhaseProblem {
    pub params: PhaseParams,
    pub r: f64,
    pub shape: WulffShape,
    pub options: SolverOptions,
}

impl PhaseProblem {
    pub fn new(params: PhaseParams, r: f64, shape: WulffShape) -> Self {
        Self { params, r, shape, options: SolverOptions::default() }
    }

    pub fn with_options(mut self, options: SolverOptions) -> Self {
        self.options = options;
        self
    }

    fn r2(&self) -> f64 {
        self.r * self.r
    }

    fn f_unchecked(&self, rho: f64, delta: f64) -> f64 {
        let p = &self.params;
        let s = (rho / self.r2()).clamp(0.0, 2.0);
        let w = restricted_wulff(&self.shape, s).map(|x| x.value).unwrap_or(f64::INFINITY);
        (delta - p.psv() * rho).powi(2) / (2.0 * p.d() * self.r2()) + self.r * w
    }

    pub fn free_energy(&self, rho: f64, delta: f64) -> Result<f64, PhaseError> {
        if !(0.0..=2.0 * self.r2()).contains(&rho) {
            return Err(PhaseError::OutOfRange(format!("rho={rho} outside [0, 2R²]")));
        }
        Ok(self.f_unchecked(rho, delta))
    }

    /// `κ(δ) = δ^{3/2}·√psv / (2DR²w(1))`, the scale-free coupling of the small-droplet branch.
    pub fn kappa_of(&self, delta: f64) -> f64 {
        let p = &self.params;
        delta.powf(1.5) * p.psv().sqrt() / (2.0 * p.d() * self.r2() * self.shape.cost_unit)
    }

    /// The coupling with `√psv` in the denominator, as printed alongside the reduction.
    pub fn kappa_printed(&self, delta: f64) -> f64 {
        let p = &self.params;
        delta.powf(1.5) / (2.0 * p.d() * self.r2() * self.shape.cost_unit * p.psv().sqrt())
    }

    /// `δ¹ = (3/2)·∛(D²w²/psv)·R^{4/3}`, the root of `κ(δ) = κ_c`.
    pub fn delta1(&self) -> f64 {
        let p = &self.params;
        1.5 * (p.d().powi(2) * self.shape.cost_unit.powi(2) / p.psv()).cbrt() * self.r.powf(4.0 / 3.0)
    }

    /// `(3/2)·∛(D²w²psv)·R^{4/3}`, the root of the printed coupling.
    pub fn delta1_printed(&self) -> f64 {
        let p = &self.params;
        1.5 * (p.d().powi(2) * self.shape.cost_unit.powi(2) * p.psv()).cbrt() * self.r.powf(4.0 / 3.0)
    }

    /// Smallest `R` for which the droplet of volume `λ_c δ¹/psv` fits as a Wulff shape.
    pub fn required_r(&self) -> f64 {
        let p = &self.params;
        p.d() * self.shape.cost_unit / (p.psv().powi(2) * self.shape.s1.powf(1.5))
    }

    /// The bound obtained from the droplet area `∛(D²w²/psv)R^{4/3}`.
    pub fn required_r_printed(&self) -> f64 {
        let p = &self.params;
        p.d() * self.shape.cost_unit / (p.psv().sqrt() * self.shape.s1.powf(1.5))
    }

    fn grid(&self, lo: f64, hi: f64) -> Vec<f64> {
        let n = self.options.grid_points.max(8);
        let mut xs: Vec<f64> = (0..=n).map(|k| 2.0 * self.r2() * k as f64 / n as f64).filter(|&x| x >= lo && x <= hi).collect();
        let (s1, one, b3) = regime_boundaries(&self.shape);
        for b in [lo, hi, s1 * self.r2(), one * self.r2(), b3 * self.r2()] {
            if b >= lo && b <= hi {
                xs.push(b);
            }
        }
        xs.sort_by(f64::total_cmp);
        xs.dedup_by(|a, b| (*a - *b).abs() < 1e-14 * self.r2());
        xs
    }

    fn golden(&self, delta: f64, mut a: f64, mut b: f64) -> (f64, f64) {
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let f = |x: f64| self.f_unchecked(x, delta);
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let (mut fc, mut fd) = (f(c), f(d));
        for _ in 0..200 {
            if (b - a).abs() <= 1e-13 * (1.0 + a.abs()) {
                break;
            }
            if fc <= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = f(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = f(d);
            }
        }
        let mut best = (c, fc);
        for x in [a, b, d] {
            let v = f(x);
            if v < best.1 {
                best = (x, v);
            }
        }
        best
    }

    /// Refined local minima of `F_δ` on `[lo, hi]`, endpoints included.
    pub fn local_minima(&self, delta: f64, lo: f64, hi: f64) -> Vec<(f64, f64)> {
        let xs = self.grid(lo, hi);
        let fs: Vec<f64> = xs.iter().map(|&x| self.f_unchecked(x, delta)).collect();
        let n = xs.len();
        let mut out = Vec::new();
        for i in 0..n {
            let left = i == 0 || fs[i] <= fs[i - 1];
            let right = i + 1 == n || fs[i] <= fs[i + 1];
            if !(left && right) {
                continue;
            }
            if i == 0 || i + 1 == n {
                out.push((xs[i], fs[i]));
            } else {
                out.push(self.golden(delta, xs[i - 1], xs[i + 1]));
            }
        }
        out
    }

    fn min_over(&self, delta: f64, lo: f64, hi: f64) -> (f64, f64) {
        self.local_minima(delta, lo, hi).into_iter().min_by(|a, b| a.1.total_cmp(&b.1)).expect("nonempty grid")
    }

    /// Global minimiser of `F_δ` on `[0, 2R²]`.
    pub fn minimize(&self, delta: f64) -> Minimum {
        let cands = self.local_minima(delta, 0.0, 2.0 * self.r2());
        let best = cands.iter().cloned().min_by(|a, b| a.1.total_cmp(&b.1)).expect("nonempty grid");
        let mut minimizers: Vec<f64> = Vec::new();
        for &(x, v) in &cands {
            if v <= best.1 + self.options.tie_tolerance && minimizers.iter().all(|m| (m - x).abs() > 1e-6 * self.r2()) {
                minimizers.push(x);
            }
        }
        minimizers.sort_by(f64::total_cmp);
        let (loops, regime, corner_radius) = if best.0 <= 0.0 {
            (0, None, 0.0)
        } else {
            let sol = restricted_wulff(&self.shape, (best.0 / self.r2()).min(2.0)).expect("in domain");
            (sol.loops, Some(sol.regime), sol.corner_radius)
        };
        Minimum { delta, rho_star: best.0, f_min: best.1, minimizers, loops, regime, corner_radius }
    }

    /// `F(0) − min_{ρ>0} F` over positive local minima; `-∞` if there are none.
    fn droplet_gain(&self, delta: f64) -> f64 {
        let f0 = self.f_unchecked(0.0, delta);
        self.local_minima(delta, 0.0, 2.0 * self.r2())
            .into_iter()
            .filter(|&(x, _)| x > 0.0)
            .map(|(_, v)| f0 - v)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn layer_gain(&self, delta: f64) -> f64 {
        let r2 = self.r2();
        self.min_over(delta, 0.0, r2).1 - self.min_over(delta, r2, 2.0 * r2).1
    }

    fn bisect<F: Fn(f64) -> bool>(mut lo: f64, mut hi: f64, above: F) -> f64 {
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if m <= lo || m >= hi {
                break;
            }
            if above(m) {
                hi = m;
            } else {
                lo = m;
            }
        }
        hi
    }

    fn bracket<F: Fn(f64) -> bool>(start: f64, above: F) -> Result<f64, PhaseError> {
        let mut hi = start.max(1e-6);
        for _ in 0..200 {
            if above(hi) {
                return Ok(hi);
            }
            hi *= 1.5;
        }
        Err(PhaseError::NoTransition(format!("no sign change up to delta={hi:e}")))
    }

    /// First `δ` at which a positive-volume droplet becomes the global minimiser.
    pub fn delta1_numeric(&self) -> Result<f64, PhaseError> {
        let above = |d: f64| self.droplet_gain(d) > 0.0;
        let hi = Self::bracket(self.delta1(), above)?;
        Ok(Self::bisect(0.0, hi, above))
    }

    /// First `δ` above `from` at which the global minimiser moves beyond `R²`.
    pub fn delta2(&self, from: f64) -> Result<f64, PhaseError> {
        let above = |d: f64| self.layer_gain(d) > 0.0;
        let hi = Self::bracket(from * 1.01, above)?;
        Ok(Self::bisect(from, hi, above))
    }

    /// Smallest `δ` in `[lo, hi]` with `ρ*(δ) ≥ threshold`, and whether it is `lo` itself.
    fn first_reaching(&self, lo: f64, hi: f64, threshold: f64) -> (f64, bool) {
        let reached = |d: f64| self.minimize(d).rho_star >= threshold;
        if reached(lo * (1.0 + 1e-9)) {
            return (lo, true);
        }
        let mut top = hi;
        for _ in 0..200 {
            if reached(top) {
                break;
            }
            top *= 1.5;
        }
        (Self::bisect(lo, top, reached), false)
    }

    pub fn radius_row(&self, delta: f64) -> RadiusRow {
        let m = self.minimize(delta);
        let half_r = self.r / 2.0;
        let (mut r1, mut r1_tilde, mut r2) = (None, None, None);
        match m.regime {
            Some(RestrictedRegime::Wulff) => r1 = Some((m.rho_star / self.shape.s1).sqrt() / 2.0),
            Some(RestrictedRegime::Plaquette) => r1_tilde = Some(m.corner_radius * half_r),
            Some(RestrictedRegime::PlaquetteAndWulff) | Some(RestrictedRegime::TwinPlaquettes) => {
                r1_tilde = Some(m.corner_radius * half_r);
                r2 = Some(m.corner_radius * half_r);
            }
            None => {}
        }
        RadiusRow {
            delta,
            rho_star: m.rho_star,
            loops: m.loops,
            r1,
            r1_tilde,
            r2,
            f_min: m.f_min,
            multiplicity: m.multiplicity(),
        }
    }

    pub fn radii_table(&self, deltas: Vec<f64>) -> Vec<RadiusRow> {
        self.options.exec.map(deltas, |d| self.radius_row(d))
    }

    pub fn critical_values(&self) -> Result<CriticalValues, PhaseError> {
        let required_r = self.required_r();
        if self.r < required_r && !self.options.allow_unfit {
            return Err(PhaseError::DoesNotFit { r: self.r, required: required_r });
        }
        let r2 = self.r2();
        let d1 = self.delta1_numeric()?;
        let d2 = self.delta2(d1)?;
        let rho_minus = self.min_over(d2, 0.0, r2).0;
        let rho_plus = self.min_over(d2, r2, 2.0 * r2).0;
        let (s1, _, b3) = regime_boundaries(&self.shape);
        let (d15, deg15) = self.first_reaching(d1, d2, s1 * r2);
        let (d15, deg15) = if d15 >= d2 { (d2, true) } else { (d15, deg15) };
        let (d25, deg25) = self.first_reaching(d2, 2.0 * d2, b3 * r2 * (1.0 - 1e-12));
        let top = d25.max(d2) * 1.5;
        let n = self.options.radii_points.max(2);
        let deltas: Vec<f64> = (0..n).map(|k| top * (k + 1) as f64 / n as f64).collect();
        Ok(CriticalValues {
            delta1_analytic: self.delta1(),
            delta1_numeric: d1,
            delta1_printed: self.delta1_printed(),
            delta15: d15,
            delta15_degenerate: deg15,
            delta2: d2,
            rho_minus,
            rho_plus,
            delta25: d25,
            delta25_degenerate: deg25,
            r_cr: (LAMBDA_C * d1 / self.params.psv()).sqrt(),
            s1,
            required_r,
            required_r_printed: self.required_r_printed(),
            radii: self.radii_table(deltas),
        })
    }

    /// All three envelopes at a fixed volume `b` (in lattice units) for system size `n`.
    pub fn envelopes_at(&self, delta: f64, b: f64, n: f64, consts: &CaseConstants) -> CaseEnvelope {
        let p = &self.params;
        let (dd, r2) = (p.d(), self.r2());
        let base = -delta * delta / (2.0 * dd * r2) * n;
        let rho = b / (n * n);
        let w = restricted_wulff(&self.shape, (rho / r2).clamp(0.0, 2.0)).map(|s| s.value).unwrap_or(f64::INFINITY);
        let quad = (delta - p.psv() * rho).powi(2) / (dd * r2) * n;
        let case = if b <= n.powf(1.0 + consts.eta) {
            VolumeCase::Small
        } else if b <= consts.c9 * n * n {
            VolumeCase::Mesoscopic
        } else {
            VolumeCase::Macroscopic
        };
        CaseEnvelope {
            delta,
            b,
            case,
            small_lower: base - b * b / (n * n),
            small_upper: base,
            mesoscopic_upper: base + delta * p.psv() * b / (n * r2 * dd) - consts.c8 * (b * b / (n * n)).min(n),
            macroscopic_lower: -quad - self.r * n * w,
            macroscopic_upper: -quad / 2.0 - self.r * n * w,
        }
    }

    /// Predicted typical volume `ρ*(δ)·N²` and the regime it falls in.
    pub fn case_envelope(&self, delta: f64, n: f64, consts: &CaseConstants) -> Result<CasePrediction, PhaseError> {
        if !(consts.eta > 0.0 && consts.eta < 0.5) {
            return Err(PhaseError::OutOfRange(format!("eta={} outside (0, 1/2)", consts.eta)));
        }
        let m = self.minimize(delta);
        let b = m.rho_star * n * n;
        let envelope = self.envelopes_at(delta, b, n, consts);
        Ok(CasePrediction { delta, predicted_b: b, dominant: envelope.case, envelope })
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_radii_csv<W: Write>(rows: &[RadiusRow], w: W) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["delta", "rhoStar", "k", "r1", "r1tilde", "r2", "Fmin", "multiplicity"])?;
    for r in rows {
        wtr.write_record([
            r.delta.to_string(),
            r.rho_star.to_string(),
            r.loops.to_string(),
            opt(r.r1),
            opt(r.r1_tilde),
            opt(r.r2),
            r.f_min.to_string(),
            r.multiplicity.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
