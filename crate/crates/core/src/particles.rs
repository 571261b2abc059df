//! Particle occupations and the law of the total particle count given the interface.
//!
//! Below the interface every site holds a particle with probability `ps`,
//! above it with probability `pv`, independently. Given the interface the
//! total count `Σ` is therefore a sum of two binomials whose sizes depend on
//! the interface only through its signed volume `α`.

use std::io::Write;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;
use thiserror::Error;

use crate::exec::Execution;
use crate::lattice::{HeightField, LatticeGeometry};

#[derive(Debug, Error, PartialEq)]
pub enum ParticleError {
    #[error("potentials violate e^-a + e^-b = e^-c + e^-d (relative mismatch {mismatch:e})")]
    Equilibrium { mismatch: f64 },
    #[error("occupations must satisfy 0 < pv < ps < 1, got pv={pv}, ps={ps}")]
    Ordering { pv: f64, ps: f64 },
    #[error("{0}")]
    Range(String),
}

const EQUILIBRIUM_TOL: f64 = 1e-12;

/// Chemical potentials and derived occupation statistics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub f: f64,
    pub pv: f64,
    pub ps: f64,
}

impl PhaseParams {
    pub fn from_potentials(a: f64, b: f64, c: f64, d: f64) -> Result<Self, ParticleError> {
        if ![a, b, c, d].iter().all(|v| v.is_finite()) {
            return Err(ParticleError::Range("potentials must be finite".into()));
        }
        let lhs = (-a).exp() + (-b).exp();
        let rhs = (-c).exp() + (-d).exp();
        let mismatch = ((lhs - rhs) / lhs).abs();
        if mismatch > EQUILIBRIUM_TOL {
            return Err(ParticleError::Equilibrium { mismatch });
        }
        let f = -lhs.ln();
        let (pv, ps) = ((f - a).exp(), (f - c).exp());
        if !(0.0 < pv && pv < ps && ps < 1.0) {
            return Err(ParticleError::Ordering { pv, ps });
        }
        Ok(Self { a, b, c, d, f, pv, ps })
    }

    pub fn from_occupations(pv: f64, ps: f64, f: f64) -> Result<Self, ParticleError> {
        if !f.is_finite() {
            return Err(ParticleError::Range("f must be finite".into()));
        }
        if !(0.0 < pv && pv < ps && ps < 1.0) {
            return Err(ParticleError::Ordering { pv, ps });
        }
        Ok(Self {
            a: f - pv.ln(),
            b: f - (1.0 - pv).ln(),
            c: f - ps.ln(),
            d: f - (1.0 - ps).ln(),
            f,
            pv,
            ps,
        })
    }

    pub fn psv(&self) -> f64 {
        self.ps - self.pv
    }

    pub fn ds(&self) -> f64 {
        self.ps * (1.0 - self.ps)
    }

    pub fn dv(&self) -> f64 {
        self.pv * (1.0 - self.pv)
    }

    pub fn d(&self) -> f64 {
        self.ds() + self.dv()
    }

    pub fn rho0(&self) -> f64 {
        (self.ps + self.pv) / 2.0
    }

    /// `a₀ = 2ρ₀R²`.
    pub fn a0(&self, r: u32) -> f64 {
        2.0 * self.rho0() * (r as f64).powi(2)
    }
}

/// Solid and vapour region sizes for a given signed volume.
pub fn region_sizes(geometry: &LatticeGeometry, alpha: i64) -> Option<(u64, u64)> {
    let half = geometry.half_box() as i64;
    if alpha.abs() > half {
        return None;
    }
    Some(((half + alpha) as u64, (half - alpha) as u64))
}

/// The integer total particle count imposed on the box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetTotal {
    pub sigma: u64,
    pub delta_requested: f64,
    /// `(Σ − a₀N³)/N²` after rounding `Σ` to an integer.
    pub delta_effective: f64,
}

impl TargetTotal {
    pub fn new(geometry: &LatticeGeometry, params: &PhaseParams, delta: f64) -> Self {
        let n = geometry.n() as f64;
        let base = params.a0(geometry.r()) * n.powi(3);
        let sigma = (base + delta * n * n).round().clamp(0.0, geometry.box_sites() as f64) as u64;
        Self { sigma, delta_requested: delta, delta_effective: (sigma as f64 - base) / (n * n) }
    }
}

fn log_pmf(n: u64, p: f64, k: u64) -> f64 {
    ln_binomial(n, k) + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln()
}

/// `log P(X + Y = target)` with `X ~ Bin(n_s, p_s)`, `Y ~ Bin(n_v, p_v)` independent.
pub fn log_binomial_convolution(n_s: u64, p_s: f64, n_v: u64, p_v: f64, target: u64) -> f64 {
    if target > n_s + n_v {
        return f64::NEG_INFINITY;
    }
    let lo = target.saturating_sub(n_v);
    let hi = target.min(n_s);
    let (os, ov) = (p_s / (1.0 - p_s), (1.0 - p_v) / p_v);
    // term(k+1)/term(k); decreasing in k since the summand is log-concave
    let ratio = |k: u64| -> f64 {
        ((n_s - k) as f64 / (k + 1) as f64) * os * ((target - k) as f64 / (n_v - (target - k) + 1) as f64) * ov
    };
    let (mut a, mut b) = (lo, hi);
    while a < b {
        let m = a + (b - a) / 2;
        if ratio(m) > 1.0 {
            a = m + 1;
        } else {
            b = m;
        }
    }
    let mode = a;
    let log_peak = log_pmf(n_s, p_s, mode) + log_pmf(n_v, p_v, target - mode);
    let mut sum = 1.0;
    let mut t = 1.0;
    let mut k = mode;
    while k < hi {
        t *= ratio(k);
        k += 1;
        sum += t;
        if t < 1e-17 * sum {
            break;
        }
    }
    t = 1.0;
    k = mode;
    while k > lo {
        t /= ratio(k - 1);
        k -= 1;
        sum += t;
        if t < 1e-17 * sum {
            break;
        }
    }
    log_peak + sum.ln()
}

/// Exact `log P(Σ = target | α)`.
pub fn sigma_exact(alpha: i64, geometry: &LatticeGeometry, params: &PhaseParams, target: u64) -> f64 {
    match region_sizes(geometry, alpha) {
        Some((n_s, n_v)) => log_binomial_convolution(n_s, params.ps, n_v, params.pv, target),
        None => f64::NEG_INFINITY,
    }
}

/// Gaussian local-limit surrogate in its printed form:
/// `log(1/√(πD|B|)) − (α·psv − δN²)² / (D|B|)`.
pub fn sigma_llt(alpha: i64, geometry: &LatticeGeometry, params: &PhaseParams, delta: f64) -> f64 {
    let db = params.d() * geometry.box_sites() as f64;
    let n2 = (geometry.n() as f64).powi(2);
    let z = alpha as f64 * params.psv() - delta * n2;
    -0.5 * (std::f64::consts::PI * db).ln() - z * z / db
}

/// Binomial pmf truncated where the relative mass falls below `1e-15` per tail,
/// renormalised. Returns `(first index, probabilities)`.
fn binomial_table(n: u64, p: f64) -> (u64, Vec<f64>) {
    let mode = (((n + 1) as f64 * p).floor() as u64).min(n);
    let odds = p / (1.0 - p);
    let mut up = vec![1.0];
    let mut t = 1.0;
    let mut k = mode;
    while k < n {
        t *= (n - k) as f64 / (k + 1) as f64 * odds;
        k += 1;
        if t < 1e-18 {
            break;
        }
        up.push(t);
    }
    let mut down = Vec::new();
    t = 1.0;
    k = mode;
    while k > 0 {
        t *= k as f64 / ((n - k + 1) as f64 * odds);
        k -= 1;
        if t < 1e-18 {
            break;
        }
        down.push(t);
    }
    let start = mode - down.len() as u64;
    down.reverse();
    down.extend(up);
    let total: f64 = down.iter().sum();
    down.iter_mut().for_each(|v| *v /= total);
    (start, down)
}

/// Full law of `Σ` given `α`, as a truncated log-probability table.
#[derive(Clone, Debug)]
pub struct SigmaLaw {
    pub alpha: i64,
    pub n_s: u64,
    pub n_v: u64,
    offset: u64,
    log_p: Vec<f64>,
}

impl SigmaLaw {
    pub fn exact(alpha: i64, geometry: &LatticeGeometry, params: &PhaseParams) -> Result<Self, ParticleError> {
        let (n_s, n_v) = region_sizes(geometry, alpha)
            .ok_or_else(|| ParticleError::Range(format!("|alpha|={} exceeds R²N³", alpha.abs())))?;
        let (s0, ps) = binomial_table(n_s, params.ps);
        let (v0, pv) = binomial_table(n_v, params.pv);
        let mut conv = vec![0.0; ps.len() + pv.len() - 1];
        for (i, &a) in ps.iter().enumerate() {
            for (j, &b) in pv.iter().enumerate() {
                conv[i + j] += a * b;
            }
        }
        Ok(Self { alpha, n_s, n_v, offset: s0 + v0, log_p: conv.into_iter().map(f64::ln).collect() })
    }

    pub fn log_prob(&self, target: u64) -> f64 {
        match target.checked_sub(self.offset) {
            Some(i) if (i as usize) < self.log_p.len() => self.log_p[i as usize],
            _ => f64::NEG_INFINITY,
        }
    }

    /// `(Σ, log P)` pairs over the retained support.
    pub fn iter(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.log_p.iter().enumerate().map(move |(i, &l)| (self.offset + i as u64, l))
    }

    pub fn total_mass(&self) -> f64 {
        self.log_p.iter().map(|l| l.exp()).sum()
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(s, l)| s as f64 * l.exp()).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.iter().map(|(s, l)| (s as f64 - m).powi(2) * l.exp()).sum()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightMethod {
    /// Exact when `|B| ≤ 10⁶`, otherwise the surrogate.
    #[default]
    Auto,
    Exact,
    Llt,
}

/// Box size up to which [`WeightMethod::Auto`] uses the exact law.
pub const EXACT_LIMIT: u64 = 1_000_000;

/// Table `α ↦ log Q_δ(α) = log P(Σ = target | α)` over a contiguous range.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CanonicalWeights {
    pub alpha_min: i64,
    pub log_q: Vec<f64>,
    pub method: WeightMethod,
    pub target: TargetTotal,
}

impl CanonicalWeights {
    pub fn build(
        geometry: &LatticeGeometry,
        params: &PhaseParams,
        delta: f64,
        alpha_range: (i64, i64),
        method: WeightMethod,
        exec: Execution,
    ) -> Self {
        let target = TargetTotal::new(geometry, params, delta);
        let method = match method {
            WeightMethod::Auto if geometry.box_sites() <= EXACT_LIMIT => WeightMethod::Exact,
            WeightMethod::Auto => WeightMethod::Llt,
            m => m,
        };
        let (lo, hi) = alpha_range;
        let alphas: Vec<i64> = (lo..=hi).collect();
        let g = *geometry;
        let p = *params;
        let log_q = exec.map(alphas, |a| match method {
            WeightMethod::Exact => sigma_exact(a, &g, &p, target.sigma),
            _ => sigma_llt(a, &g, &p, target.delta_effective),
        });
        Self { alpha_min: lo, log_q, method, target }
    }

    /// Table covering every volume reachable under the height cutoff.
    pub fn for_reachable(
        geometry: &LatticeGeometry,
        params: &PhaseParams,
        delta: f64,
        method: WeightMethod,
        exec: Execution,
    ) -> Self {
        let m = geometry.hmax() as i64 * geometry.interior_sites() as i64;
        Self::build(geometry, params, delta, (-m, m), method, exec)
    }

    pub fn alpha_max(&self) -> i64 {
        self.alpha_min + self.log_q.len() as i64 - 1
    }

    /// `log Q(α)`, `-∞` outside the table.
    #[inline]
    pub fn log_q(&self, alpha: i64) -> f64 {
        match alpha.checked_sub(self.alpha_min) {
            Some(i) if i >= 0 && (i as usize) < self.log_q.len() => self.log_q[i as usize],
            _ => f64::NEG_INFINITY,
        }
    }

    pub fn argmax(&self) -> i64 {
        let i = self
            .log_q
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        self.alpha_min + i as i64
    }

    /// Same table with every entry shifted by `c`.
    pub fn shifted(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.log_q.iter_mut().for_each(|v| *v += c);
        out
    }

    /// Same table with every entry outside `[lo, hi]` set to `-∞`.
    pub fn restricted(&self, lo: i64, hi: i64) -> Self {
        let mut out = self.clone();
        for (i, v) in out.log_q.iter_mut().enumerate() {
            let a = self.alpha_min + i as i64;
            if a < lo || a > hi {
                *v = f64::NEG_INFINITY;
            }
        }
        out
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["alpha", "logQ"])?;
        for (i, v) in self.log_q.iter().enumerate() {
            wtr.write_record([(self.alpha_min + i as i64).to_string(), v.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Particle counts per column for a cosmetic rendering of one interface.
#[derive(Clone, Debug, Serialize)]
pub struct ParticleSnapshot {
    /// `(solid, vapour)` counts per column, row-major over the full box.
    pub columns: Vec<(u64, u64)>,
    pub total: u64,
}

/// Draws independent occupations: column `(x, y)` has `N+h` sites below the
/// interface and `N−h` above.
pub fn instantiate_particles<R: Rng>(field: &HeightField, params: &PhaseParams, rng: &mut R) -> ParticleSnapshot {
    let g = field.geometry();
    let n = g.n() as i64;
    let side = g.side() as i64;
    let mut columns = Vec::with_capacity((side * side) as usize);
    let mut total = 0;
    for y in 0..side {
        for x in 0..side {
            let h = field.get_or_zero(x - 1, y - 1) as i64;
            let s = Binomial::new((n + h) as u64, params.ps).expect("valid p").sample(rng);
            let v = Binomial::new((n - h) as u64, params.pv).expect("valid p").sample(rng);
            total += s + v;
            columns.push((s, v));
        }
    }
    ParticleSnapshot { columns, total }
}
