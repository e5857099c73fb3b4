//! Annotation and time-series preprocessing: smoothing, dominance labels,
//! hemodynamic lag, balancing and fold assignment.

mod dataset;
mod labels;
mod pipeline;
mod window;

pub use dataset::{
    build_dataset, kfold_split, undersample, Dataset, FoldMode, FoldSplit, Provenance,
};
pub use labels::{binarize_dominance, lag_shift};
pub use pipeline::{prepare_fmri, prepare_labels, FmriPrepConfig};
pub use window::{centered_window_mean, moving_average, smooth_annotations};
