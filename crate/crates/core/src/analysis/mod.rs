//! Confronting samples with the variational predictions.

mod census;
mod hausdorff;
mod sweep;

pub use census::{monolayer_census, LargeContour, MonolayerReport, Verdict};
pub use hausdorff::{hausdorff_distance, hausdorff_fit, wulff_target, ShapeFit};
pub use sweep::{reweighted_volume_law, sweep_experiment, SampleRecord, SweepConfig, SweepMode, SweepReport, SweepRow};
