//! Explainable emotion decoding toolkit.
//!
//! The crate covers the whole desk-scale pipeline:
//!
//! * [`tensor`], [`atlas`], [`series`], [`io`]: domain containers and their
//!   on-disk formats (`.xbt` tensors, atlas CSV, JSON-lines event streams).
//! * [`preprocess`]: annotation smoothing, dominance binarization, hemodynamic
//!   lag, moving averages, undersampling and fold splits.
//! * [`frames`]: TR resampling of movie frames, label-based deduplication,
//!   face labels and the square padding transform.
//! * [`decoder`]: the per-subject feed-forward decoder with Adam, L2 and early
//!   stopping, plus grid search and fold evaluation.
//! * [`explainers`]: exact Shapley values, KernelSHAP, LIME, superpixels and
//!   image saliency through a [`predictor::Predictor`].
//! * [`stats`]: shuffled-label null models, permutation significance,
//!   Spearman with spin permutations, gaze overlap scores, attention
//!   correlation maps and KS distances.
//! * [`predictor`]: the newline-delimited JSON protocol for external image
//!   classifiers and deterministic in-process toy predictors.
//! * [`synth`]: a synthetic data generator with planted informative regions.

pub mod atlas;
pub mod brainmap;
pub mod decoder;
mod error;
pub mod explainers;
pub mod frames;
pub mod io;
pub mod linalg;
pub mod predictor;
pub mod preprocess;
pub mod render;
pub mod rng;
pub mod series;
pub mod stats;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;
