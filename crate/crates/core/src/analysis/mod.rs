//! Slices, history probes, recovery metrics, cross-validation protocols and
//! the pooled-estimator scaling check.

pub mod crossval;
pub mod history;
pub mod recovery;
pub mod report;
pub mod se_scaling;
pub mod slices;
pub mod stats;

pub use crossval::{crossval_animals, crossval_future, evaluate_models, fold_assignment, CHANCE};
pub use history::{history_gap, model_history_gap, HistoryCondition, HistoryGap, HistoryGapRow, MarkovAdapter};
pub use recovery::{grid_recovery_rmse, model_recovery_rmse, recovery_rmse, LatentTrajectory, Recovery};
pub use report::{EvalReport, ModelScores, NamedHistoryGap, NamedSlices, PairwiseTest, Protocol, ReportMetadata, RmsePoint};
pub use se_scaling::{se_scaling_check, IdealizedConfig, SePoint, SeScaling};
pub use slices::{model_slices, rule_slices, slice_rmse, update_slices, Outcome, SliceGrid, SliceRow};
pub use stats::{linear_fit, mean, paired_t_test, sample_std, PairedTTest};
