//! Exhaustive enumeration of height fields on tiny boxes and the exact laws
//! of every ensemble, used as ground truth for the sampler.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::contour::{extract_contours, Sign};
use crate::exec::Execution;
use crate::lattice::{HeightField, LatticeError, LatticeGeometry};
use crate::particles::CanonicalWeights;
use crate::sampler::{acceptance_probability, Ensemble};

/// Largest state space the enumerator accepts.
pub const ENUMERATION_LIMIT: u64 = 100_000_000;

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("state space has {states:.3e} fields, above the limit of {ENUMERATION_LIMIT}")]
    TooLarge { states: f64 },
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

/// Every height field of a box, in row-major odometer order (last site fastest).
#[derive(Clone, Debug)]
pub struct EnumeratedEnsemble {
    geometry: LatticeGeometry,
    energies: Vec<u16>,
    alphas: Vec<i16>,
}

fn state_count(geometry: &LatticeGeometry) -> f64 {
    (2.0 * geometry.hmax() as f64 + 1.0).powi(geometry.interior_sites() as i32)
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn normalize(log_w: Vec<f64>) -> Vec<f64> {
    let lz = log_sum_exp(log_w.iter().copied());
    log_w.into_iter().map(|x| (x - lz).exp()).collect()
}

impl EnumeratedEnsemble {
    pub fn enumerate(geometry: LatticeGeometry, exec: Execution) -> Result<Self, OracleError> {
        let states = state_count(&geometry);
        if states > ENUMERATION_LIMIT as f64 {
            return Err(OracleError::TooLarge { states });
        }
        let sites = geometry.interior_sites();
        let base = 2 * geometry.hmax() as u64 + 1;
        let total = states as u64;
        let chunk = total / base;
        let parts = exec.map((0..base).collect(), |lead| {
            let mut field = HeightField::flat(geometry);
            let mut energies = Vec::with_capacity(chunk as usize);
            let mut alphas = Vec::with_capacity(chunk as usize);
            for k in lead * chunk..(lead + 1) * chunk {
                field = Self::decode_into(field, k, sites, base);
                energies.push(field.perimeter_sum() as u16);
                alphas.push(field.alpha() as i16);
            }
            (energies, alphas)
        });
        let mut energies = Vec::with_capacity(total as usize);
        let mut alphas = Vec::with_capacity(total as usize);
        for (e, a) in parts {
            energies.extend(e);
            alphas.extend(a);
        }
        Ok(Self { geometry, energies, alphas })
    }

    fn decode_into(mut field: HeightField, mut k: u64, sites: usize, base: u64) -> HeightField {
        let l = field.interior_side();
        let h = (base / 2) as i32;
        for s in (0..sites).rev() {
            let v = (k % base) as i32 - h;
            k /= base;
            field.set(s % l, s / l, v).expect("digit within cutoff");
        }
        field
    }

    pub fn geometry(&self) -> &LatticeGeometry {
        &self.geometry
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn energy(&self, index: usize) -> i64 {
        self.energies[index] as i64
    }

    pub fn alpha(&self, index: usize) -> i64 {
        self.alphas[index] as i64
    }

    /// The field at odometer position `index`.
    pub fn field(&self, index: usize) -> HeightField {
        let base = 2 * self.geometry.hmax() as u64 + 1;
        Self::decode_into(HeightField::flat(self.geometry), index as u64, self.geometry.interior_sites(), base)
    }

    /// Odometer position of `field`.
    pub fn index_of(&self, field: &HeightField) -> usize {
        let base = 2 * self.geometry.hmax() as i64 + 1;
        let h = self.geometry.hmax() as i64;
        (0..self.geometry.interior_sites()).fold(0i64, |acc, s| acc * base + field.site_height(s) as i64 + h) as usize
    }

    pub fn flat_index(&self) -> usize {
        self.index_of(&HeightField::flat(self.geometry))
    }

    pub fn log_partition(&self, beta: f64) -> f64 {
        log_sum_exp(self.energies.iter().map(|&e| -beta * e as f64))
    }

    /// `Pr(Γ) ∝ e^{−β·perimeter}`.
    pub fn grand_law(&self, beta: f64) -> Vec<f64> {
        normalize(self.energies.iter().map(|&e| -beta * e as f64).collect())
    }

    /// Grand law tilted by the exact particle-count weights.
    pub fn canonical_law(&self, beta: f64, weights: &CanonicalWeights) -> Vec<f64> {
        normalize(
            self.energies
                .iter()
                .zip(&self.alphas)
                .map(|(&e, &a)| -beta * e as f64 + weights.log_q(a as i64))
                .collect(),
        )
    }

    /// Grand law conditioned on `lo ≤ α ≤ hi`.
    pub fn pinned_law(&self, beta: f64, lo: i64, hi: i64) -> Vec<f64> {
        normalize(
            self.energies
                .iter()
                .zip(&self.alphas)
                .map(|(&e, &a)| if (lo..=hi).contains(&(a as i64)) { -beta * e as f64 } else { f64::NEG_INFINITY })
                .collect(),
        )
    }

    pub fn law(&self, beta: f64, ensemble: &Ensemble) -> Vec<f64> {
        match ensemble {
            Ensemble::Grand => self.grand_law(beta),
            Ensemble::Canonical(w) => self.canonical_law(beta, w),
            Ensemble::Pinned { lo, hi } => self.pinned_law(beta, *lo, *hi),
        }
    }

    /// Marginal of `α` under `law`.
    pub fn volume_law(&self, law: &[f64]) -> BTreeMap<i64, f64> {
        let mut out = BTreeMap::new();
        for (&a, &p) in self.alphas.iter().zip(law) {
            *out.entry(a as i64).or_insert(0.0) += p;
        }
        out
    }

    pub fn expectation_alpha(&self, law: &[f64]) -> f64 {
        self.alphas.iter().zip(law).map(|(&a, &p)| a as f64 * p).sum()
    }

    /// For every contour occurring in some field, `Pr(γ ∈ Γ)` against `e^{−β|γ|}`.
    pub fn peierls_check(&self, beta: f64) -> PeierlsReport {
        let law = self.grand_law(beta);
        let mut mass: HashMap<(Sign, Vec<(i64, i64)>), (f64, usize)> = HashMap::new();
        for (k, &p) in law.iter().enumerate() {
            if self.energies[k] == 0 {
                continue;
            }
            let family = extract_contours(&self.field(k));
            let mut seen = std::collections::HashSet::new();
            for c in family.contours() {
                let key = c.canonical_key();
                if seen.insert(key.clone()) {
                    mass.entry(key).or_insert((0.0, c.length())).0 += p;
                }
            }
        }
        let mut worst_ratio = 0.0f64;
        let mut worst_length = 0;
        for (p, len) in mass.values() {
            let ratio = p / (-beta * *len as f64).exp();
            if ratio > worst_ratio {
                worst_ratio = ratio;
                worst_length = *len;
            }
        }
        PeierlsReport { contours: mass.len(), worst_ratio, worst_length }
    }

    /// Largest violation of `π(x)P(x→y) = π(y)P(y→x)` and of `πP = π` for the
    /// single-site Metropolis kernel, built from the sampler's acceptance rule.
    pub fn detailed_balance_check(&self, beta: f64, ensemble: &Ensemble) -> BalanceReport {
        let law = self.law(beta, ensemble);
        let n = self.len();
        let sites = self.geometry.interior_sites();
        let mut stationary = vec![0.0; n];
        let mut worst_pair = 0.0f64;
        for (x, &px) in law.iter().enumerate() {
            let field = self.field(x);
            let mut stay = 1.0;
            for site in 0..sites {
                for dh in [-1, 1] {
                    let q = acceptance_probability(&field, site, dh, beta, ensemble) / (2 * sites) as f64;
                    if q == 0.0 {
                        continue;
                    }
                    let mut next = field.clone();
                    next.apply(site, dh);
                    let y = self.index_of(&next);
                    stay -= q;
                    stationary[y] += px * q;
                    let back = acceptance_probability(&next, site, -dh, beta, ensemble) / (2 * sites) as f64;
                    worst_pair = worst_pair.max((px * q - law[y] * back).abs());
                }
            }
            stationary[x] += px * stay;
        }
        let worst_stationary = stationary.iter().zip(&law).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        BalanceReport { states: n, worst_pair, worst_stationary }
    }

    pub fn golden(&self, beta: f64) -> GoldenRecord {
        let law = self.grand_law(beta);
        GoldenRecord {
            interior_side: self.geometry.interior_side(),
            hmax: self.geometry.hmax(),
            beta,
            count: self.len() as u64,
            log_z: self.log_partition(beta),
            prob_flat: law[self.flat_index()],
            prob_alpha: self.volume_law(&law).into_iter().collect(),
        }
    }
}

/// `log Z` from a second pass in reverse odometer order with its own
/// bond bookkeeping, independent of the lattice module.
pub fn log_partition_reversed(l: usize, hmax: i32, beta: f64) -> Result<f64, OracleError> {
    let geometry = LatticeGeometry::with_interior(l, hmax)?;
    let states = state_count(&geometry);
    if states > ENUMERATION_LIMIT as f64 {
        return Err(OracleError::TooLarge { states });
    }
    let base = 2 * hmax as u64 + 1;
    let at = |h: &[i32], x: i64, y: i64| -> i32 {
        if x < 0 || y < 0 || x >= l as i64 || y >= l as i64 {
            0
        } else {
            h[y as usize * l + x as usize]
        }
    };
    let mut terms = Vec::with_capacity(states as usize);
    let mut h = vec![0i32; l * l];
    for k in (0..states as u64).rev() {
        let mut r = k;
        for s in (0..l * l).rev() {
            h[s] = (r % base) as i32 - hmax;
            r /= base;
        }
        let mut e = 0i64;
        for y in -1..l as i64 {
            for x in -1..l as i64 {
                e += (at(&h, x, y) - at(&h, x + 1, y)).abs() as i64;
                e += (at(&h, x, y) - at(&h, x, y + 1)).abs() as i64;
            }
        }
        terms.push(-beta * e as f64);
    }
    Ok(log_sum_exp(terms.into_iter().rev()))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PeierlsReport {
    pub contours: usize,
    /// Largest `Pr(γ ∈ Γ) / e^{−β|γ|}`; at most 1 when the bound holds.
    pub worst_ratio: f64,
    pub worst_length: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BalanceReport {
    pub states: usize,
    pub worst_pair: f64,
    pub worst_stationary: f64,
}

/// Exact summary of the grand law stored as reference data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoldenRecord {
    pub interior_side: usize,
    pub hmax: i32,
    pub beta: f64,
    pub count: u64,
    pub log_z: f64,
    pub prob_flat: f64,
    pub prob_alpha: Vec<(i64, f64)>,
}

impl GoldenRecord {
    /// Human-readable differences beyond `tol` (absolute on probabilities, relative on `log Z`).
    pub fn compare(&self, reference: &GoldenRecord, tol: f64) -> Vec<String> {
        let mut out = Vec::new();
        if (self.interior_side, self.hmax, self.count) != (reference.interior_side, reference.hmax, reference.count) {
            out.push(format!(
                "shape (L={}, hmax={}, count={}) vs (L={}, hmax={}, count={})",
                self.interior_side, self.hmax, self.count, reference.interior_side, reference.hmax, reference.count
            ));
        }
        if (self.beta - reference.beta).abs() > 0.0 {
            out.push(format!("beta {} vs {}", self.beta, reference.beta));
        }
        if (self.log_z - reference.log_z).abs() > tol * reference.log_z.abs().max(1.0) {
            out.push(format!("log_z {} vs {}", self.log_z, reference.log_z));
        }
        if (self.prob_flat - reference.prob_flat).abs() > tol {
            out.push(format!("prob_flat {} vs {}", self.prob_flat, reference.prob_flat));
        }
        let theirs: BTreeMap<i64, f64> = reference.prob_alpha.iter().copied().collect();
        let ours: BTreeMap<i64, f64> = self.prob_alpha.iter().copied().collect();
        for b in theirs.keys().chain(ours.keys()).collect::<std::collections::BTreeSet<_>>() {
            let (x, y) = (ours.get(b).copied().unwrap_or(0.0), theirs.get(b).copied().unwrap_or(0.0));
            if (x - y).abs() > tol {
                out.push(format!("Pr(alpha={b}) {x} vs {y}"));
            }
        }
        out
    }
}

/// Total variation distance between visit counts over odometer positions and an exact law.
pub fn total_variation(counts: &HashMap<usize, u64>, law: &[f64]) -> f64 {
    let n: u64 = counts.values().sum();
    if n == 0 {
        return 1.0;
    }
    let mut tv: f64 = law
        .iter()
        .enumerate()
        .map(|(k, &p)| (counts.get(&k).copied().unwrap_or(0) as f64 / n as f64 - p).abs())
        .sum();
    tv += counts.iter().filter(|(k, _)| **k >= law.len()).map(|(_, &c)| c as f64 / n as f64).sum::<f64>();
    tv / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::particles::{PhaseParams, WeightMethod};
    use approx::assert_relative_eq;
    use std::sync::Arc;

    fn ens(l: usize, hmax: i32) -> EnumeratedEnsemble {
        EnumeratedEnsemble::enumerate(LatticeGeometry::with_interior(l, hmax).unwrap(), Execution::Sequential).unwrap()
    }

    #[test]
    fn single_site() {
        let e = ens(1, 1);
        assert_eq!(e.len(), 3);
        let got: Vec<(i64, i64)> = (0..3).map(|k| (e.alpha(k), e.energy(k))).collect();
        assert_eq!(got, vec![(-1, 4), (0, 0), (1, 4)]);
    }

    #[test]
    fn counts_and_indexing() {
        let e = ens(2, 1);
        assert_eq!(e.len(), 81);
        for k in 0..e.len() {
            let f = e.field(k);
            assert_eq!(e.index_of(&f), k);
            assert_eq!((e.energy(k), e.alpha(k)), (f.perimeter_sum(), f.alpha()));
        }
        let par = EnumeratedEnsemble::enumerate(*e.geometry(), Execution::Parallel).unwrap();
        assert_eq!(par.energies, e.energies);
    }

    #[test]
    fn refuses_huge_boxes() {
        let g = LatticeGeometry::with_interior(4, 2).unwrap();
        assert!(matches!(EnumeratedEnsemble::enumerate(g, Execution::Sequential), Err(OracleError::TooLarge { .. })));
    }

    #[test]
    fn reversed_enumeration_agrees() {
        for (l, h) in [(1, 1), (2, 1), (2, 2), (3, 1)] {
            let e = ens(l, h);
            for beta in [0.3, 2.0] {
                assert_relative_eq!(e.log_partition(beta), log_partition_reversed(l, h, beta).unwrap(), max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn laws_are_normalised_and_symmetric() {
        let e = ens(2, 2);
        let law = e.grand_law(1.0);
        assert_relative_eq!(law.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        let v = e.volume_law(&law);
        for (b, p) in &v {
            assert_relative_eq!(*p, v[&-b], max_relative = 1e-12);
        }
        let cold = e.grand_law(50.0);
        assert!(cold[e.flat_index()] >= 1.0 - 1e-20);
    }

    #[test]
    fn canonical_tilt_follows_delta() {
        let e = ens(2, 1);
        let g = LatticeGeometry::new(4, 1, 1).unwrap();
        let params = PhaseParams::from_occupations(0.2, 0.8, 0.0).unwrap();
        for delta in [-1.0, 1.0] {
            let w = CanonicalWeights::for_reachable(&g, &params, delta, WeightMethod::Exact, Execution::Sequential);
            let law = e.canonical_law(1.0, &w);
            assert_relative_eq!(law.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
            assert_eq!(e.expectation_alpha(&law).signum(), delta);
            let report = e.detailed_balance_check(1.0, &Ensemble::Canonical(Arc::new(w)));
            assert!(report.worst_pair < 1e-12 && report.worst_stationary < 1e-12, "{report:?}");
        }
    }

    #[test]
    fn pinned_law_support() {
        let e = ens(2, 1);
        let law = e.pinned_law(1.0, 1, 2);
        for (k, p) in law.iter().enumerate() {
            assert!(*p == 0.0 || (1..=2).contains(&e.alpha(k)));
        }
        assert_relative_eq!(law.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn total_variation_limits() {
        let e = ens(1, 1);
        let law = e.grand_law(1.0);
        let exact: HashMap<usize, u64> = [(0, 0), (1, 0), (2, 0)].into();
        assert_eq!(total_variation(&exact, &law), 1.0);
        let point: HashMap<usize, u64> = [(1, 10)].into();
        assert_relative_eq!(total_variation(&point, &law), 1.0 - law[1], epsilon = 1e-15);
    }
}
