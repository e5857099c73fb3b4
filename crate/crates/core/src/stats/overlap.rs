use serde::{Deserialize, Serialize};

use crate::series::{GazeTrace, SaliencyHeatmap};
use crate::{Error, Result};

/// How pixels tied with the gazed value count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieRule {
    /// Only strictly smaller pixels count, so a flat map scores 0.
    #[default]
    StrictLess,
    /// Ties count half.
    Midrank,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowAggregate {
    #[default]
    Mean,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OverlapConfig {
    /// Width of the gaze window centred on the frame time.
    pub window_s: f64,
    pub tie_rule: TieRule,
    pub aggregate: WindowAggregate,
}

impl Default for OverlapConfig {
    fn default() -> Self {
        Self {
            window_s: 1.0,
            tie_rule: TieRule::StrictLess,
            aggregate: WindowAggregate::Mean,
        }
    }
}

/// Sorted heatmap values for percentile lookups.
#[derive(Debug, Clone)]
pub struct PercentileIndex {
    sorted: Vec<f32>,
}

impl PercentileIndex {
    pub fn new(heatmap: &SaliencyHeatmap) -> Result<Self> {
        let mut sorted = heatmap.scores().data().to_vec();
        if sorted.len() < 2 {
            return Err(Error::invalid("heatmap needs at least two pixels"));
        }
        sorted.sort_by(f32::total_cmp);
        Ok(Self { sorted })
    }

    /// Fraction of the other pixels below `v`.
    pub fn percentile(&self, v: f32, rule: TieRule) -> f64 {
        let less = self.sorted.partition_point(|&s| s < v);
        let denom = (self.sorted.len() - 1) as f64;
        match rule {
            TieRule::StrictLess => less as f64 / denom,
            TieRule::Midrank => {
                let eq = self.sorted.partition_point(|&s| s <= v) - less;
                (less as f64 + eq.saturating_sub(1) as f64 / 2.0) / denom
            }
        }
    }
}

/// Frame-level agreement between a saliency heatmap and gaze.
///
/// Each valid gaze sample within `window_s/2` of `frame_time` scores the
/// percentile of the heatmap value under it. Returns `None` when no sample
/// qualifies.
pub fn overlap_score(
    heatmap: &SaliencyHeatmap,
    gaze: &GazeTrace,
    frame_time: f64,
    config: &OverlapConfig,
) -> Result<Option<f64>> {
    score_with(
        &PercentileIndex::new(heatmap)?,
        heatmap,
        gaze,
        frame_time,
        config,
    )
}

fn score_with(
    index: &PercentileIndex,
    heatmap: &SaliencyHeatmap,
    gaze: &GazeTrace,
    frame_time: f64,
    config: &OverlapConfig,
) -> Result<Option<f64>> {
    if (gaze.frame_width, gaze.frame_height) != (heatmap.width, heatmap.height) {
        return Err(Error::invalid(format!(
            "gaze frame {}x{} does not match heatmap {}x{}",
            gaze.frame_width, gaze.frame_height, heatmap.width, heatmap.height
        )));
    }
    if !(config.window_s >= 0.0) {
        return Err(Error::invalid("window must be non-negative"));
    }
    let half = config.window_s / 2.0;
    let scores = gaze
        .window(frame_time - half, frame_time + half)
        .iter()
        .filter(|s| s.valid)
        .map(|s| (s.x_px.floor() as usize, s.y_px.floor() as usize))
        .filter(|&(x, y)| x < heatmap.width && y < heatmap.height)
        .map(|(x, y)| index.percentile(heatmap.at(x, y), config.tie_rule));
    let (n, total, max) = scores.fold((0usize, 0.0, f64::NEG_INFINITY), |(n, t, m), s| {
        (n + 1, t + s, m.max(s))
    });
    Ok(match (n, config.aggregate) {
        (0, _) => None,
        (_, WindowAggregate::Mean) => Some(total / n as f64),
        (_, WindowAggregate::Max) => Some(max),
    })
}

/// Overlap per frame; frames without gaze are masked as `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapSeries {
    pub frame_indices: Vec<usize>,
    pub times: Vec<f64>,
    pub scores: Vec<Option<f64>>,
    pub window_s: f64,
}

/// Scores each `(frame_time, heatmap)` pair against one gaze trace.
pub fn overlap_series(
    frames: &[(f64, &SaliencyHeatmap)],
    gaze: &GazeTrace,
    config: &OverlapConfig,
) -> Result<OverlapSeries> {
    let mut scores = Vec::with_capacity(frames.len());
    for (i, (t, h)) in frames.iter().enumerate() {
        let index = PercentileIndex::new(h).map_err(|e| e.at("frame", i))?;
        scores.push(score_with(&index, h, gaze, *t, config).map_err(|e| e.at("frame", i))?);
    }
    Ok(OverlapSeries {
        frame_indices: frames.iter().map(|(_, h)| h.frame_index).collect(),
        times: frames.iter().map(|(t, _)| *t).collect(),
        scores,
        window_s: config.window_s,
    })
}
