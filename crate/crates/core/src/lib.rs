//! Sampler and variational solver for a solid/vapour SOS interface in a box
//! held at fixed total particle number.
//!
//! * [`lattice`] and [`contour`]: height fields, energy, volume, level-set contours.
//! * [`particles`]: occupation probabilities and the law of the particle count.
//! * [`sampler`]: Metropolis chains in grand, canonical and volume-pinned
//!   ensembles, Wang–Landau density of states, contour classification.
//! * [`oracle`]: exhaustive enumeration on tiny boxes.
//! * [`wulff`]: surface tension, Wulff shape, plaquettes, restricted problem.
//! * [`phase`]: free energy in the droplet volume and critical supersaturations.
//! * [`analysis`]: census of large contours, shape fits, sweeps.

pub mod analysis;
pub mod contour;
pub mod exec;
pub mod lattice;
pub mod oracle;
pub mod particles;
pub mod phase;
pub mod sampler;
pub mod wulff;

pub use contour::{extract_contours, reconstruct_height, ContourFamily, OrientedContour, Sign};
pub use exec::Execution;
pub use lattice::{HeightField, LatticeGeometry, MoveDelta};
