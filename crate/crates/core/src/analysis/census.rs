use serde::{Deserialize, Serialize};

use crate::contour::{extract_contours, OrientedContour, Sign};
use crate::lattice::HeightField;
use crate::sampler::{classify_contours, ClassThresholds};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    /// No large contour.
    Flat,
    /// Exactly one large contour, positive.
    OneMonolayer,
    /// Exactly two large positive contours, one inside the other.
    TwoMonolayer,
    Other,
}

impl Verdict {
    pub const ALL: [Verdict; 4] = [Verdict::Flat, Verdict::OneMonolayer, Verdict::TwoMonolayer, Verdict::Other];

    pub fn name(self) -> &'static str {
        match self {
            Verdict::Flat => "flat",
            Verdict::OneMonolayer => "one-monolayer",
            Verdict::TwoMonolayer => "two-monolayer",
            Verdict::Other => "other",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LargeContour {
    pub sign: Sign,
    pub length: usize,
    /// Number of enclosed cells.
    pub area: usize,
    pub bounding_box: (i64, i64, i64, i64),
}

impl LargeContour {
    fn of(c: &OrientedContour) -> Self {
        Self { sign: c.sign(), length: c.length(), area: c.interior_area(), bounding_box: c.bounding_box() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonolayerReport {
    pub sample: u64,
    pub thresholds: ClassThresholds,
    pub small: usize,
    pub intermediate: usize,
    pub large: usize,
    pub total: usize,
    /// Largest-area large contour.
    pub gamma0: Option<LargeContour>,
    /// Second largest-area large contour.
    pub gamma1: Option<LargeContour>,
    /// Longest chain of mutually nested large contours.
    pub nesting_depth: usize,
    /// Column counts per level `-hmax..=hmax`.
    pub levels: Vec<u64>,
    pub verdict: Verdict,
}

impl MonolayerReport {
    /// Whether `area(γ₀) > slack · (2δ/(3p)) N²`; `None` without a large contour.
    pub fn gamma0_bound(&self, delta: f64, psv: f64, n: f64, slack: f64) -> Option<bool> {
        self.gamma0.as_ref().map(|g| g.area as f64 > slack * 2.0 * delta / (3.0 * psv) * n * n)
    }
}

fn nested_in(inner: &OrientedContour, outer: &OrientedContour) -> bool {
    inner.interior_area() < outer.interior_area() && inner.interior().iter().all(|&(x, y)| outer.contains_cell(x, y))
}

/// Classifies the contours of `field` and reads off the monolayer verdict.
pub fn monolayer_census(field: &HeightField, epsilon: f64, sample: u64) -> MonolayerReport {
    let family = extract_contours(field);
    let geometry = field.geometry();
    let (part, thresholds) = classify_contours(&family, geometry, epsilon);
    let all = family.contours();
    let mut large: Vec<&OrientedContour> = part.large.iter().map(|&i| &all[i]).collect();
    large.sort_by(|a, b| b.interior_area().cmp(&a.interior_area()).then_with(|| a.canonical_key().cmp(&b.canonical_key())));

    // longest nesting chain, largest first
    let mut depth = vec![1usize; large.len()];
    for i in 0..large.len() {
        for j in 0..i {
            if nested_in(large[i], large[j]) {
                depth[i] = depth[i].max(depth[j] + 1);
            }
        }
    }
    let nesting_depth = depth.iter().copied().max().unwrap_or(0);
    let verdict = match large.as_slice() {
        [] => Verdict::Flat,
        [g] if g.sign() == Sign::Plus => Verdict::OneMonolayer,
        [g0, g1] if g0.sign() == Sign::Plus && g1.sign() == Sign::Plus && nested_in(g1, g0) => Verdict::TwoMonolayer,
        _ => Verdict::Other,
    };
    MonolayerReport {
        sample,
        thresholds,
        small: part.small.len(),
        intermediate: part.intermediate.len(),
        large: part.large.len(),
        total: family.len(),
        gamma0: large.first().map(|c| LargeContour::of(c)),
        gamma1: large.get(1).map(|c| LargeContour::of(c)),
        nesting_depth,
        levels: field.level_histogram(),
        verdict,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeGeometry;

    fn g() -> LatticeGeometry {
        LatticeGeometry::new(12, 2, 2).unwrap()
    }

    fn plateau(field: &mut HeightField, x0: usize, x1: usize, h: i32) {
        for y in x0..x1 {
            for x in x0..x1 {
                let v = field.get(x, y);
                field.set(x, y, v + h).unwrap();
            }
        }
    }

    #[test]
    fn flat() {
        let r = monolayer_census(&HeightField::flat(g()), 1.0, 0);
        assert_eq!((r.verdict, r.total, r.nesting_depth), (Verdict::Flat, 0, 0));
        assert!(r.gamma0_bound(1.0, 0.5, 12.0, 1.0).is_none());
    }

    #[test]
    fn one_and_two_monolayers() {
        let mut f = HeightField::flat(g());
        plateau(&mut f, 4, 18, 1);
        let r = monolayer_census(&f, 1.0, 3);
        assert_eq!(r.verdict, Verdict::OneMonolayer);
        assert_eq!(r.gamma0.as_ref().unwrap().area, 14 * 14);
        assert_eq!((r.sample, r.nesting_depth, r.large), (3, 1, 1));
        plateau(&mut f, 6, 16, 1);
        let r = monolayer_census(&f, 1.0, 0);
        assert_eq!((r.verdict, r.nesting_depth), (Verdict::TwoMonolayer, 2));
        assert_eq!(r.gamma1.as_ref().unwrap().area, 100);
        assert_eq!(r.small + r.intermediate + r.large, r.total);
    }

    #[test]
    fn negative_large_contour_is_other() {
        let mut f = HeightField::flat(g());
        plateau(&mut f, 4, 18, -1);
        assert_eq!(monolayer_census(&f, 1.0, 0).verdict, Verdict::Other);
    }

    #[test]
    fn bound_on_gamma0() {
        let mut f = HeightField::flat(g());
        plateau(&mut f, 4, 14, 1);
        let r = monolayer_census(&f, 1.0, 0);
        // 100 cells against (2δ/3p)N² with N=12
        assert_eq!(r.gamma0_bound(0.5, 1.0, 12.0, 1.0), Some(true));
        assert_eq!(r.gamma0_bound(2.0, 1.0, 12.0, 1.0), Some(false));
    }
}
