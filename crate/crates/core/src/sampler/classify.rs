use serde::{Deserialize, Serialize};

use crate::contour::{ContourFamily, OrientedContour};
use crate::lattice::LatticeGeometry;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContourClass {
    Small,
    Intermediate,
    Large,
}

/// Length thresholds `(ε⁻¹ ln N, εN)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassThresholds {
    pub epsilon: f64,
    pub small_max: f64,
    pub large_min: f64,
}

impl ClassThresholds {
    pub fn new(geometry: &LatticeGeometry, epsilon: f64) -> Self {
        assert!(epsilon > 0.0, "epsilon must be positive");
        let n = geometry.n() as f64;
        Self { epsilon, small_max: n.ln() / epsilon, large_min: epsilon * n }
    }

    pub fn classify(&self, contour: &OrientedContour) -> ContourClass {
        let len = contour.length() as f64;
        if len >= self.large_min {
            ContourClass::Large
        } else if len <= self.small_max {
            ContourClass::Small
        } else {
            ContourClass::Intermediate
        }
    }
}

/// Indices of the contours of `family` in each class.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ContourPartition {
    pub small: Vec<usize>,
    pub intermediate: Vec<usize>,
    pub large: Vec<usize>,
}

impl ContourPartition {
    pub fn total(&self) -> usize {
        self.small.len() + self.intermediate.len() + self.large.len()
    }
}

/// A contour meeting both length conditions counts as large.
pub fn classify_contours(family: &ContourFamily, geometry: &LatticeGeometry, epsilon: f64) -> (ContourPartition, ClassThresholds) {
    let th = ClassThresholds::new(geometry, epsilon);
    let mut part = ContourPartition::default();
    for (i, c) in family.contours().iter().enumerate() {
        match th.classify(c) {
            ContourClass::Small => part.small.push(i),
            ContourClass::Intermediate => part.intermediate.push(i),
            ContourClass::Large => part.large.push(i),
        }
    }
    (part, th)
}
