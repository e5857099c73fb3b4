//! Time series and map containers shared by every stage.

use serde::{Deserialize, Serialize};

use crate::atlas::Atlas;
use crate::{Error, Result, Tensor};

/// Mean regional activity over acquisition time, `T × R`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionTimeSeries {
    pub subject_id: String,
    pub tr_seconds: f64,
    values: Tensor,
    /// Row `t` pairs with label index `t - label_offset`; earlier rows are unusable.
    pub label_offset: usize,
}

impl RegionTimeSeries {
    pub fn new(subject_id: impl Into<String>, tr_seconds: f64, values: Tensor) -> Result<Self> {
        if !(tr_seconds > 0.0) {
            return Err(Error::invalid("tr_seconds must be positive"));
        }
        values.shape2()?;
        if !values.is_finite() {
            return Err(Error::invalid("region time series contains missing values"));
        }
        Ok(Self {
            subject_id: subject_id.into(),
            tr_seconds,
            values,
            label_offset: 0,
        })
    }

    pub fn values(&self) -> &Tensor {
        &self.values
    }

    pub fn n_times(&self) -> usize {
        self.values.dims()[0]
    }

    pub fn n_regions(&self) -> usize {
        self.values.dims()[1]
    }

    pub fn with_values(&self, values: Tensor) -> Result<Self> {
        let mut out = Self::new(self.subject_id.clone(), self.tr_seconds, values)?;
        out.label_offset = self.label_offset;
        Ok(out)
    }
}

/// Per-annotator, per-emotion intensities, `A × T × E`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationSeries {
    pub emotions: Vec<String>,
    pub tr_seconds: f64,
    values: Tensor,
}

impl AnnotationSeries {
    pub fn new(emotions: Vec<String>, tr_seconds: f64, values: Tensor) -> Result<Self> {
        if emotions.len() < 2 {
            return Err(Error::invalid("need at least two emotions"));
        }
        if !(tr_seconds > 0.0) {
            return Err(Error::invalid("tr_seconds must be positive"));
        }
        match values.dims() {
            [_, _, e] if *e == emotions.len() => {}
            dims => {
                return Err(Error::invalid(format!(
                    "annotation tensor must be A×T×{}, got {dims:?}",
                    emotions.len()
                )))
            }
        }
        if values.data().iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::invalid(
                "annotation intensities must be non-negative",
            ));
        }
        Ok(Self {
            emotions,
            tr_seconds,
            values,
        })
    }

    pub fn values(&self) -> &Tensor {
        &self.values
    }

    pub fn n_annotators(&self) -> usize {
        self.values.dims()[0]
    }

    pub fn n_times(&self) -> usize {
        self.values.dims()[1]
    }

    pub fn n_emotions(&self) -> usize {
        self.emotions.len()
    }

    pub fn get(&self, annotator: usize, t: usize, emotion: usize) -> f32 {
        let (tn, en) = (self.n_times(), self.n_emotions());
        self.values.data()[(annotator * tn + t) * en + emotion]
    }

    pub fn emotion_index(&self, name: &str) -> Option<usize> {
        self.emotions.iter().position(|e| e == name)
    }
}

/// Binary labels on a time grid, with a per-sample usability mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryLabelSeries {
    pub label_name: String,
    pub tr_seconds: f64,
    pub values: Vec<u8>,
    pub usable: Vec<bool>,
}

impl BinaryLabelSeries {
    pub fn new(
        label_name: impl Into<String>,
        tr_seconds: f64,
        values: Vec<u8>,
        usable: Vec<bool>,
    ) -> Result<Self> {
        if values.len() != usable.len() {
            return Err(Error::DimensionMismatch {
                expected: values.len(),
                actual: usable.len(),
            });
        }
        if values.iter().any(|&v| v > 1) {
            return Err(Error::invalid("labels must be 0 or 1"));
        }
        Ok(Self {
            label_name: label_name.into(),
            tr_seconds,
            values,
            usable,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Label at index `t`, if present and usable.
    pub fn get(&self, t: usize) -> Option<u8> {
        (t < self.values.len() && self.usable[t]).then(|| self.values[t])
    }

    /// Nearest-sample resampling onto a grid of `len` points spaced `tr_seconds`.
    pub fn resample(&self, tr_seconds: f64, len: usize) -> Self {
        let mut values = Vec::with_capacity(len);
        let mut usable = Vec::with_capacity(len);
        for j in 0..len {
            let src = (j as f64 * tr_seconds / self.tr_seconds).round() as usize;
            match self.values.get(src) {
                Some(&v) => {
                    values.push(v);
                    usable.push(self.usable[src]);
                }
                None => {
                    values.push(0);
                    usable.push(false);
                }
            }
        }
        Self {
            label_name: self.label_name.clone(),
            tr_seconds,
            values,
            usable,
        }
    }
}

/// Averages voxel columns into atlas regions.
///
/// `out[t][r]` is the mean of `voxel_series[t][v]` over voxels labelled `r`.
pub fn parcellate(voxel_series: &Tensor, labels: &[usize], atlas: &Atlas) -> Result<Tensor> {
    let (t_len, v_len) = voxel_series.shape2()?;
    if labels.len() != v_len {
        return Err(Error::DimensionMismatch {
            expected: v_len,
            actual: labels.len(),
        });
    }
    let r_len = atlas.len();
    let mut counts = vec![0usize; r_len];
    for (v, &r) in labels.iter().enumerate() {
        if r >= r_len {
            return Err(Error::invalid(format!(
                "voxel {v} has unknown region id {r}"
            )));
        }
        counts[r] += 1;
    }
    let empty: Vec<usize> = (0..r_len).filter(|&r| counts[r] == 0).collect();
    match empty[..] {
        [] => {}
        [r] => return Err(Error::EmptyRegion(r)),
        _ => {
            return Err(Error::invalid(format!("empty regions {empty:?}")));
        }
    }
    let mut out = vec![0f64; t_len * r_len];
    for t in 0..t_len {
        let row = voxel_series.row(t);
        let acc = &mut out[t * r_len..(t + 1) * r_len];
        for (v, &r) in labels.iter().enumerate() {
            acc[r] += f64::from(row[v]);
        }
        for (a, &c) in acc.iter_mut().zip(&counts) {
            *a /= c as f64;
        }
    }
    Tensor::from_f64(vec![t_len, r_len], &out)
}

/// Per-region importance scores for one model and explainer.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributionMap {
    pub model_tag: String,
    pub explainer_tag: String,
    /// Subject id, or `"group"` for a mean over subjects.
    pub subject_id: String,
    pub region_scores: Vec<f64>,
    /// Per-sample attributions, `N × R`.
    pub per_sample: Option<Tensor>,
}

impl AttributionMap {
    /// Mean of subject maps. All maps must have the same length.
    pub fn group_mean(maps: &[AttributionMap]) -> Result<Self> {
        let first = maps
            .first()
            .ok_or_else(|| Error::invalid("no maps to average"))?;
        let r = first.region_scores.len();
        let mut scores = vec![0.0; r];
        for m in maps {
            if m.region_scores.len() != r {
                return Err(Error::DimensionMismatch {
                    expected: r,
                    actual: m.region_scores.len(),
                });
            }
            for (s, v) in scores.iter_mut().zip(&m.region_scores) {
                *s += v;
            }
        }
        for s in &mut scores {
            *s /= maps.len() as f64;
        }
        Ok(Self {
            model_tag: first.model_tag.clone(),
            explainer_tag: first.explainer_tag.clone(),
            subject_id: "group".to_string(),
            region_scores: scores,
            per_sample: None,
        })
    }

    /// Mean score per macro area, in atlas order.
    pub fn macro_area_scores(&self, atlas: &Atlas) -> Result<Vec<(String, f64)>> {
        if self.region_scores.len() != atlas.len() {
            return Err(Error::DimensionMismatch {
                expected: atlas.len(),
                actual: self.region_scores.len(),
            });
        }
        Ok(atlas
            .macro_areas()
            .into_iter()
            .map(|(name, ids)| {
                let mean =
                    ids.iter().map(|&i| self.region_scores[i]).sum::<f64>() / ids.len() as f64;
                (name, mean)
            })
            .collect())
    }
}

/// One eye-tracker sample in movie pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GazeSample {
    #[serde(rename = "t")]
    pub t_seconds: f64,
    #[serde(rename = "x")]
    pub x_px: f64,
    #[serde(rename = "y")]
    pub y_px: f64,
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GazeTrace {
    pub subject_id: String,
    pub sample_rate_hz: f64,
    pub frame_width: usize,
    pub frame_height: usize,
    samples: Vec<GazeSample>,
}

impl GazeTrace {
    pub const DEFAULT_RATE_HZ: f64 = 1000.0;
    pub const DEFAULT_WIDTH: usize = 1280;
    pub const DEFAULT_HEIGHT: usize = 546;

    /// Checks that timestamps strictly increase. Samples marked valid but
    /// lying outside the frame are demoted to invalid.
    pub fn new(
        subject_id: impl Into<String>,
        sample_rate_hz: f64,
        frame_width: usize,
        frame_height: usize,
        mut samples: Vec<GazeSample>,
    ) -> Result<Self> {
        for (i, w) in samples.windows(2).enumerate() {
            if !(w[1].t_seconds > w[0].t_seconds) {
                return Err(Error::invalid(format!(
                    "gaze timestamps must strictly increase (sample {})",
                    i + 1
                )));
            }
        }
        for s in &mut samples {
            let inside = s.x_px >= 0.0
                && s.y_px >= 0.0
                && s.x_px < frame_width as f64
                && s.y_px < frame_height as f64;
            s.valid &= inside;
        }
        Ok(Self {
            subject_id: subject_id.into(),
            sample_rate_hz,
            frame_width,
            frame_height,
            samples,
        })
    }

    pub fn samples(&self) -> &[GazeSample] {
        &self.samples
    }

    /// Samples with `lo <= t <= hi`.
    pub fn window(&self, lo: f64, hi: f64) -> &[GazeSample] {
        let start = self.samples.partition_point(|s| s.t_seconds < lo);
        let end = self.samples.partition_point(|s| s.t_seconds <= hi);
        &self.samples[start..end.max(start)]
    }
}

/// Per-pixel importance for one frame, in original movie coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyHeatmap {
    pub frame_index: usize,
    pub width: usize,
    pub height: usize,
    scores: Tensor,
}

impl SaliencyHeatmap {
    pub fn new(frame_index: usize, scores: Tensor) -> Result<Self> {
        let (height, width) = scores.shape2()?;
        if !scores.is_finite() {
            return Err(Error::invalid("heatmap scores must be finite"));
        }
        Ok(Self {
            frame_index,
            width,
            height,
            scores,
        })
    }

    pub fn scores(&self) -> &Tensor {
        &self.scores
    }

    pub fn at(&self, x: usize, y: usize) -> f32 {
        self.scores.data()[y * self.width + x]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_region_atlas() -> Atlas {
        Atlas::synthetic(3).unwrap()
    }

    #[test]
    fn parcellate_means_voxels() {
        let atlas = two_region_atlas();
        let x = Tensor::new(vec![1, 4], vec![1.0, 3.0, 5.0, 7.0]).unwrap();
        let out = parcellate(&x, &[0, 0, 1, 2], &atlas).unwrap();
        assert_eq!(out.data(), &[2.0, 5.0, 7.0]);
    }

    #[test]
    fn parcellate_reports_empty_region() {
        let atlas = Atlas::synthetic(6).unwrap();
        let x = Tensor::new(vec![1, 5], vec![0.0; 5]).unwrap();
        let err = parcellate(&x, &[0, 1, 2, 3, 4], &atlas).unwrap_err();
        assert_eq!(err.to_string(), "empty region 5");
    }

    #[test]
    fn parcellate_is_order_invariant_and_linear() {
        use rand::Rng;
        let atlas = Atlas::synthetic(5).unwrap();
        let mut rng = crate::rng::stream(3);
        let labels: Vec<usize> = (0..20).map(|v| v % 5).collect();
        let a: Vec<f64> = (0..60).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..60).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ta = Tensor::from_f64(vec![3, 20], &a).unwrap();
        let base = parcellate(&ta, &labels, &atlas).unwrap();

        // permute voxel columns together with labels
        let perm: Vec<usize> = (0..20).rev().collect();
        let pa: Vec<f64> = (0..3)
            .flat_map(|t| perm.iter().map(move |&v| (t, v)))
            .map(|(t, v)| a[t * 20 + v])
            .collect();
        let pl: Vec<usize> = perm.iter().map(|&v| labels[v]).collect();
        let permuted =
            parcellate(&Tensor::from_f64(vec![3, 20], &pa).unwrap(), &pl, &atlas).unwrap();
        for (x, y) in base.data().iter().zip(permuted.data()) {
            assert!((x - y).abs() < 1e-6);
        }

        let tb = Tensor::from_f64(vec![3, 20], &b).unwrap();
        let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 2.0 * x - 0.5 * y).collect();
        let lhs = parcellate(
            &Tensor::from_f64(vec![3, 20], &mix).unwrap(),
            &labels,
            &atlas,
        )
        .unwrap();
        let pb = parcellate(&tb, &labels, &atlas).unwrap();
        for i in 0..lhs.len() {
            let rhs = 2.0 * base.data()[i] - 0.5 * pb.data()[i];
            assert!((lhs.data()[i] - rhs).abs() < 1e-5);
        }
    }

    #[test]
    fn label_resampling_holds_nearest() {
        let l = BinaryLabelSeries::new("x", 4.0, vec![1, 0], vec![true, true]).unwrap();
        let r = l.resample(2.0, 5);
        assert_eq!(r.values, vec![1, 0, 0, 0, 0]);
        assert_eq!(r.usable, vec![true, true, true, false, false]);
    }
}
