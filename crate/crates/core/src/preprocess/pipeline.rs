use serde::{Deserialize, Serialize};

use super::{
    binarize_dominance, build_dataset, lag_shift, moving_average, smooth_annotations, undersample,
    Dataset,
};
use crate::series::{AnnotationSeries, BinaryLabelSeries, RegionTimeSeries};
use crate::Result;

/// Settings that turn annotations and region series into one decoder dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FmriPrepConfig {
    pub target_emotion: String,
    /// Smooth annotations before binarizing.
    pub smooth_labels: bool,
    pub smooth_window_s: f64,
    /// Stride of the annotation smoother; `None` keeps the annotation grid.
    pub smooth_stride_s: Option<f64>,
    pub lag_s: f64,
    /// Moving average on region series; 0 disables it.
    pub moving_average_s: f64,
    pub undersample: bool,
    pub seed: u64,
}

impl Default for FmriPrepConfig {
    fn default() -> Self {
        Self {
            target_emotion: "fear".into(),
            smooth_labels: true,
            smooth_window_s: 10.0,
            smooth_stride_s: None,
            lag_s: 2.0,
            moving_average_s: 10.0,
            undersample: true,
            seed: 0,
        }
    }
}

/// Binary labels for the target emotion on the region-series grid.
pub fn prepare_labels(
    annotations: &AnnotationSeries,
    cfg: &FmriPrepConfig,
    tr_seconds: f64,
    len: usize,
) -> Result<BinaryLabelSeries> {
    let labels = if cfg.smooth_labels {
        let stride = cfg.smooth_stride_s.unwrap_or(annotations.tr_seconds);
        binarize_dominance(
            &smooth_annotations(annotations, cfg.smooth_window_s, stride)?,
            &cfg.target_emotion,
        )?
    } else {
        binarize_dominance(annotations, &cfg.target_emotion)?
    };
    Ok(labels.resample(tr_seconds, len))
}

/// Lag, moving average, label pairing and (optionally) undersampling.
pub fn prepare_fmri(
    annotations: &AnnotationSeries,
    rts: &RegionTimeSeries,
    cfg: &FmriPrepConfig,
) -> Result<Dataset> {
    let labels = prepare_labels(annotations, cfg, rts.tr_seconds, rts.n_times())?;
    let mut rts = lag_shift(rts, cfg.lag_s)?;
    if cfg.moving_average_s > 0.0 {
        rts = moving_average(&rts, cfg.moving_average_s)?;
    }
    let ds = build_dataset(&rts, &labels)?;
    if cfg.undersample {
        undersample(&ds, cfg.seed)
    } else {
        Ok(ds)
    }
}
