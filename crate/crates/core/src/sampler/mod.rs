//! Metropolis chains for the grand, canonical and volume-pinned measures,
//! a flat-histogram estimator of the volume law, and contour size classes.

mod chain;
mod classify;
mod wang_landau;

pub use chain::{
    acceptance_probability, integrated_autocorrelation, run_chain, stream_rng, Chain, Ensemble, RunConfig, RunResult,
    SeriesPoint,
};
pub use classify::{classify_contours, ClassThresholds, ContourClass, ContourPartition};
pub use wang_landau::{wang_landau_alpha, DensityOfStates, StageRecord, WangLandauConfig, WindowReport};

#[derive(Debug, thiserror::Error)]
pub enum SamplerError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("bookkeeping drift at sweep {sweep}: energy {energy:?} (tracked, recomputed), alpha {alpha:?}")]
    Inconsistent { sweep: u64, energy: (i64, i64), alpha: (i64, i64) },
}
