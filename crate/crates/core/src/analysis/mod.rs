//! Moment formulas, long-run bounds, ergodicity checks and the small-rate
//! limit of the invariant measure.

mod ergodicity;
mod moments;
mod sweep;

pub use ergodicity::{ergodicity_check, ErgodicityOptions, ErgodicityReport, ErgodicityRow, PartitionSpec};
pub use moments::{
    bm_stationary_moments, gbm_stationary_moment, max_finite_moment_order, modified_moment, moment_bound,
    uniform_moment_bound, BoundKind, BrownianStationaryMoments, GbmStationaryMoment, MomentBound, MomentReport,
    MomentValue,
};
pub use sweep::{small_lambda_sweep, SweepReport, SweepRow};
