//! Significance testing and cross-modal agreement.

mod attention;
mod ks;
mod null;
mod overlap;
mod rank;
mod significance;
mod spin;

pub use attention::{attention_correlation_map, frame_tr_indices, gather_rows, MIN_ALIGNED_FRAMES};
pub use ks::{ks_distance, ks_uniform};
pub use null::{null_importances, null_importances_with, permuted_labels, NullDistribution};
pub use overlap::{
    overlap_score, overlap_series, OverlapConfig, OverlapSeries, PercentileIndex, TieRule,
    WindowAggregate,
};
pub use rank::{midranks, pearson, spearman};
pub use significance::{permutation_p, significance, RegionSignificance};
pub use spin::{spin_test, SpinNull, SpinResult, DEFAULT_N_PERM};
