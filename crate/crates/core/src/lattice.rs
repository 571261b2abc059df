//! Height-field representation of the interface.
//!
//! The box `Λ = {0, …, side-1}²` carries a ring of boundary columns pinned at
//! height zero; only the `(side-2)²` interior columns are free. Heights are
//! stored in a padded row-major buffer so that neighbour reads at the edge of
//! the interior hit the zero ring without bounds checks.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LatticeError {
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("height {value} at interior site ({x}, {y}) outside [-{hmax}, {hmax}]")]
    HeightOutOfRange { x: usize, y: usize, value: i32, hmax: i32 },
    #[error("expected {expected} rows of {expected} values, got {got}")]
    Shape { expected: usize, got: String },
    #[error("snapshot parse error: {0}")]
    Parse(String),
}

/// Box dimensions: `side = R·N` columns per edge and the height cutoff.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeGeometry {
    n: u32,
    r: u32,
    hmax: i32,
}

impl LatticeGeometry {
    pub fn new(n: u32, r: u32, hmax: i32) -> Result<Self, LatticeError> {
        if n == 0 || r == 0 {
            return Err(LatticeError::Geometry(format!("N={n} and R={r} must be positive")));
        }
        if (n as u64) * (r as u64) < 2 {
            return Err(LatticeError::Geometry("side R·N must be at least 2".into()));
        }
        if hmax < 1 || hmax as u32 > n {
            return Err(LatticeError::Geometry(format!("hmax={hmax} must lie in [1, N={n}]")));
        }
        Ok(Self { n, r, hmax })
    }

    /// Geometry with a prescribed interior side `l`, i.e. `R = 1`, `N = l + 2`.
    /// Used for the tiny boxes of the exhaustive oracle.
    pub fn with_interior(l: usize, hmax: i32) -> Result<Self, LatticeError> {
        Self::new(l as u32 + 2, 1, hmax)
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn r(&self) -> u32 {
        self.r
    }

    pub fn hmax(&self) -> i32 {
        self.hmax
    }

    pub fn side(&self) -> usize {
        (self.n * self.r) as usize
    }

    /// Number of free columns per edge, `side - 2`.
    pub fn interior_side(&self) -> usize {
        self.side().saturating_sub(2)
    }

    pub fn interior_sites(&self) -> usize {
        self.interior_side() * self.interior_side()
    }

    /// `R²N³`, the number of 3D sites on each side of a flat interface.
    pub fn half_box(&self) -> u64 {
        let (n, r) = (self.n as u64, self.r as u64);
        r * r * n * n * n
    }

    /// `|B_N| = 2R²N³`.
    pub fn box_sites(&self) -> u64 {
        2 * self.half_box()
    }
}

/// Change of energy and signed volume produced by a single-site `±1` move.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MoveDelta {
    pub d_energy: i64,
    pub d_alpha: i64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HeightField {
    geometry: LatticeGeometry,
    /// Padded buffer of size `(L+2)²`; the outer ring is always zero.
    h: Vec<i32>,
}

impl HeightField {
    pub fn flat(geometry: LatticeGeometry) -> Self {
        let p = geometry.interior_side() + 2;
        Self { geometry, h: vec![0; p * p] }
    }

    /// Builds a field from interior rows (`rows[y][x]`).
    pub fn from_rows(geometry: LatticeGeometry, rows: &[Vec<i32>]) -> Result<Self, LatticeError> {
        let l = geometry.interior_side();
        if rows.len() != l || rows.iter().any(|r| r.len() != l) {
            let got = rows.iter().map(|r| r.len().to_string()).collect::<Vec<_>>().join(",");
            return Err(LatticeError::Shape { expected: l, got: format!("rows [{got}]") });
        }
        let mut field = Self::flat(geometry);
        for (y, row) in rows.iter().enumerate() {
            for (x, &v) in row.iter().enumerate() {
                field.set(x, y, v)?;
            }
        }
        Ok(field)
    }

    /// Builds a field from interior values in row-major order.
    pub fn from_values(geometry: LatticeGeometry, values: &[i32]) -> Result<Self, LatticeError> {
        let l = geometry.interior_side();
        if values.len() != l * l {
            return Err(LatticeError::Shape { expected: l, got: format!("{} values", values.len()) });
        }
        let mut field = Self::flat(geometry);
        for (s, &v) in values.iter().enumerate() {
            field.set(s % l.max(1), s / l.max(1), v)?;
        }
        Ok(field)
    }

    /// A compact droplet: the `|b|` interior columns closest to the centre are
    /// raised (or lowered, for negative `b`). Columns beyond one full layer go
    /// into a second, third, ... layer, each layer again filled centre-out.
    pub fn droplet(geometry: LatticeGeometry, b: i64) -> Self {
        let mut field = Self::flat(geometry);
        let l = geometry.interior_side();
        if l == 0 || b == 0 {
            return field;
        }
        let c = (l as f64 - 1.0) / 2.0;
        let mut order: Vec<usize> = (0..l * l).collect();
        order.sort_by(|&a, &b| {
            let da = ((a % l) as f64 - c).powi(2) + ((a / l) as f64 - c).powi(2);
            let db = ((b % l) as f64 - c).powi(2) + ((b / l) as f64 - c).powi(2);
            da.total_cmp(&db).then(a.cmp(&b))
        });
        let sign = b.signum() as i32;
        let max_cells = (geometry.hmax() as usize) * l * l;
        let mut remaining = (b.unsigned_abs() as usize).min(max_cells);
        let mut cap = l * l;
        while remaining > 0 {
            let take = remaining.min(cap);
            for &s in &order[..take] {
                let p = field.padded(s % l, s / l);
                field.h[p] += sign;
            }
            remaining -= take;
            cap = take;
        }
        field
    }

    pub fn geometry(&self) -> &LatticeGeometry {
        &self.geometry
    }

    pub fn interior_side(&self) -> usize {
        self.geometry.interior_side()
    }

    #[inline]
    fn stride(&self) -> usize {
        self.geometry.interior_side() + 2
    }

    #[inline]
    fn padded(&self, x: usize, y: usize) -> usize {
        (y + 1) * self.stride() + (x + 1)
    }

    #[inline]
    fn padded_site(&self, site: usize) -> usize {
        let l = self.interior_side();
        self.padded(site % l, site / l)
    }

    /// Height at interior coordinates. Panics outside the interior.
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> i32 {
        let l = self.interior_side();
        assert!(x < l && y < l, "({x}, {y}) outside interior of side {l}");
        self.h[self.padded(x, y)]
    }

    /// Height with the pinned boundary: anything outside the interior reads 0.
    #[inline]
    pub fn get_or_zero(&self, x: i64, y: i64) -> i32 {
        let l = self.interior_side() as i64;
        if x < 0 || y < 0 || x >= l || y >= l {
            0
        } else {
            self.h[self.padded(x as usize, y as usize)]
        }
    }

    #[inline]
    pub fn site_height(&self, site: usize) -> i32 {
        self.h[self.padded_site(site)]
    }

    pub fn set(&mut self, x: usize, y: usize, value: i32) -> Result<(), LatticeError> {
        let hmax = self.geometry.hmax();
        let l = self.interior_side();
        if x >= l || y >= l {
            return Err(LatticeError::Geometry(format!("site ({x}, {y}) outside interior of side {l}")));
        }
        if value.abs() > hmax {
            return Err(LatticeError::HeightOutOfRange { x, y, value, hmax });
        }
        let p = self.padded(x, y);
        self.h[p] = value;
        Ok(())
    }

    /// Interior heights in row-major order.
    pub fn values(&self) -> Vec<i32> {
        let l = self.interior_side();
        let mut out = Vec::with_capacity(l * l);
        for y in 0..l {
            for x in 0..l {
                out.push(self.get(x, y));
            }
        }
        out
    }

    /// Signed volume under the interface: the unit-cell sum of heights.
    pub fn alpha(&self) -> i64 {
        self.h.iter().map(|&v| v as i64).sum()
    }

    /// Σ over nearest-neighbour pairs of `|h_i - h_j|`, bonds to the zero ring included.
    pub fn perimeter_sum(&self) -> i64 {
        let s = self.stride();
        let mut e = 0i64;
        // Every bond touching the interior has at least one endpoint in it; with
        // the zero ring, summing right and down bonds over rows/cols 0..=L covers
        // all of them exactly once.
        for y in 0..s {
            for x in 0..s {
                let v = self.h[y * s + x];
                if x + 1 < s {
                    e += (v - self.h[y * s + x + 1]).abs() as i64;
                }
                if y + 1 < s {
                    e += (v - self.h[(y + 1) * s + x]).abs() as i64;
                }
            }
        }
        e
    }

    /// Energy and volume change of `h(site) += dh`, from the four neighbours only.
    /// Returns `None` when the move would leave `[-hmax, hmax]`.
    #[inline]
    pub fn propose_delta(&self, site: usize, dh: i32) -> Option<MoveDelta> {
        let p = self.padded_site(site);
        let h = self.h[p];
        let new = h + dh;
        if new.abs() > self.geometry.hmax() {
            return None;
        }
        let s = self.stride();
        let mut d = 0i32;
        for q in [p - 1, p + 1, p - s, p + s] {
            let hn = self.h[q];
            d += (new - hn).abs() - (h - hn).abs();
        }
        Some(MoveDelta { d_energy: d as i64, d_alpha: dh as i64 })
    }

    /// Applies `h(site) += dh` without validation; pair with [`Self::propose_delta`].
    #[inline]
    pub fn apply(&mut self, site: usize, dh: i32) {
        let p = self.padded_site(site);
        self.h[p] += dh;
    }

    /// Height histogram over levels `-hmax..=hmax` (index `h + hmax`).
    pub fn level_histogram(&self) -> Vec<u64> {
        let hmax = self.geometry.hmax();
        let mut hist = vec![0u64; (2 * hmax + 1) as usize];
        for v in self.values() {
            hist[(v + hmax) as usize] += 1;
        }
        hist
    }

    /// Writes the interior as a CSV matrix, one lattice row per line.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        let l = self.interior_side();
        for y in 0..l {
            wtr.write_record((0..l).map(|x| self.get(x, y).to_string()))?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(geometry: LatticeGeometry, r: R) -> Result<Self, LatticeError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(r);
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| LatticeError::Parse(e.to_string()))?;
            let row = rec
                .iter()
                .map(|s| s.trim().parse::<i32>().map_err(|e| LatticeError::Parse(format!("{s:?}: {e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        Self::from_rows(geometry, &rows)
    }
}
