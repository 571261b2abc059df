//! Surface tension, the Wulff construction and the area-constrained problem
//! for at most two nested loops in the unit square.

mod restricted;
mod shape;
mod tension;

use thiserror::Error;

pub use restricted::{
    plaquette, plaquette_radius, regime_boundaries, restricted_value, restricted_wulff, singularity_exponents,
    PlaquetteSolution, RestrictedRegime, RestrictedSolution, SingularityFit, MAX_RESTRICTED_AREA,
};
pub use shape::{
    bounding_box, dedup_vertices, half_plane_intersection, is_convex, minkowski_sum, polygon_area, polygon_centroid,
    tension_cost, uniform_normals, wulff_body, Point, WulffShape, DEFAULT_DIRECTIONS,
};
pub use tension::{tau_estimate, SurfaceTension};

#[derive(Debug, Error, PartialEq)]
pub enum WulffError {
    #[error("degenerate surface tension: {0}")]
    Degenerate(String),
    #[error("out of range: {0}")]
    OutOfRange(String),
    #[error("fit refused: {0}")]
    FitRefused(String),
}
