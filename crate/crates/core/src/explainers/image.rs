use image::RgbImage;
use serde::{Deserialize, Serialize};

use super::kernel_shap::{kernel_shap_game, ShapSampling};
use super::lime::{lime_binary, LimeConfig};
use super::segment::{segment_image, SegmentMap, SegmentMode};
use super::shapley::CoalitionGame;
use super::Explanation;
use crate::frames::{FitMode, PadTransform};
use crate::predictor::Predictor;
use crate::series::SaliencyHeatmap;
use crate::{Error, Result, Tensor};

/// Upper bound on superpixels per image.
pub const MAX_SEGMENTS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageMethod {
    #[default]
    Lime,
    Shap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImageExplainConfig {
    pub method: ImageMethod,
    pub n_segments: usize,
    pub segment_mode: SegmentMode,
    pub n_samples: usize,
    /// Class whose probability is explained.
    pub target_class: usize,
    pub fit: FitMode,
    /// Images per predictor call.
    pub batch_size: usize,
    pub ridge_lambda: f64,
}

impl Default for ImageExplainConfig {
    fn default() -> Self {
        Self {
            method: ImageMethod::Lime,
            n_segments: 16,
            segment_mode: SegmentMode::Grid,
            n_samples: 256,
            target_class: 1,
            fit: FitMode::Pad,
            batch_size: 32,
            ridge_lambda: 1.0,
        }
    }
}

/// Heatmap in original frame coordinates plus the per-segment attributions
/// it was painted from.
#[derive(Debug, Clone)]
pub struct ImageExplanation {
    pub heatmap: SaliencyHeatmap,
    pub segments: SegmentMap,
    pub transform: PadTransform,
    pub explanation: Explanation,
}

/// Segment-masking game on the square canvas. Absent segments are painted
/// with the mean colour of the non-border pixels; border pixels stay black.
struct MaskGame<'a, P: ?Sized> {
    predictor: &'a mut P,
    square: RgbImage,
    segments: &'a SegmentMap,
    border: Vec<bool>,
    fill: [u8; 3],
    target: usize,
    batch: usize,
}

impl<P: Predictor + ?Sized> MaskGame<'_, P> {
    fn render(&self, mask: &[bool]) -> RgbImage {
        let mut img = self.square.clone();
        for (i, px) in img.pixels_mut().enumerate() {
            if !self.border[i] && !mask[self.segments.labels[i]] {
                px.0 = self.fill;
            }
        }
        img
    }
}

impl<P: Predictor + ?Sized> CoalitionGame for MaskGame<'_, P> {
    fn n_players(&self) -> usize {
        self.segments.n_segments
    }

    fn values(&mut self, masks: &[bool], n: usize) -> Result<Vec<f64>> {
        let m = self.segments.n_segments;
        let mut out = Vec::with_capacity(n);
        for chunk in masks[..n * m].chunks(self.batch * m) {
            let images: Vec<RgbImage> = chunk
                .chunks_exact(m)
                .map(|mask| self.render(mask))
                .collect();
            let probs = self.predictor.classify_batch(&images)?;
            for p in probs {
                let v = *p.get(self.target).ok_or_else(|| {
                    Error::invalid(format!(
                        "target class {} outside {} classes",
                        self.target,
                        p.len()
                    ))
                })?;
                out.push(v);
            }
        }
        Ok(out)
    }
}

/// Explains the predictor's `target_class` probability on one movie frame.
pub fn explain_image<P: Predictor + ?Sized>(
    predictor: &mut P,
    frame: &RgbImage,
    frame_index: usize,
    config: &ImageExplainConfig,
    seed: u64,
) -> Result<ImageExplanation> {
    if config.n_segments > MAX_SEGMENTS {
        return Err(Error::invalid(format!(
            "at most {MAX_SEGMENTS} segments are supported"
        )));
    }
    if config.target_class >= predictor.n_classes() {
        return Err(Error::invalid(format!(
            "target class {} outside {} classes",
            config.target_class,
            predictor.n_classes()
        )));
    }
    let transform = PadTransform::new(frame.width() as usize, frame.height() as usize, config.fit);
    let square = transform.apply(frame)?;
    let segments = segment_image(&square, config.n_segments, config.segment_mode)?;
    let side = transform.side;
    let border: Vec<bool> = (0..side * side)
        .map(|i| transform.is_border(i % side, i / side))
        .collect();
    let mut sum = [0u64; 3];
    let mut count = 0u64;
    for (i, px) in square.pixels().enumerate() {
        if !border[i] {
            for c in 0..3 {
                sum[c] += u64::from(px.0[c]);
            }
            count += 1;
        }
    }
    let fill = sum.map(|s| ((s as f64) / count.max(1) as f64).round() as u8);
    let mut game = MaskGame {
        predictor,
        square,
        segments: &segments,
        border,
        fill,
        target: config.target_class,
        batch: config.batch_size.max(1),
    };
    let explanation = match config.method {
        ImageMethod::Lime => lime_binary(
            &mut game,
            &LimeConfig {
                n_samples: config.n_samples,
                kernel_width: None,
                ridge_lambda: config.ridge_lambda,
            },
            seed,
        )?,
        ImageMethod::Shap => {
            kernel_shap_game(&mut game, ShapSampling::Sampled(config.n_samples), seed)?
        }
    };
    let square_scores: Vec<f32> = segments
        .labels
        .iter()
        .map(|&l| explanation.phi[l] as f32)
        .collect();
    let scores = transform.scores_to_original(&Tensor::new(vec![side, side], square_scores)?)?;
    Ok(ImageExplanation {
        heatmap: SaliencyHeatmap::new(frame_index, scores)?,
        segments,
        transform,
        explanation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictor::{ConstantPredictor, QuadrantBrightness};

    fn bright_top_left(w: u32, h: u32) -> RgbImage {
        RgbImage::from_fn(w, h, |x, y| {
            if x < w / 2 && y < h / 2 {
                image::Rgb([230, 220, 210])
            } else {
                image::Rgb([((x * 13) % 50) as u8, ((y * 7) % 50) as u8, 10])
            }
        })
    }

    #[test]
    fn quadrant_predictor_attribution() {
        let img = bright_top_left(48, 48);
        for method in [ImageMethod::Lime, ImageMethod::Shap] {
            let cfg = ImageExplainConfig {
                method,
                n_segments: 16,
                n_samples: 400,
                ..ImageExplainConfig::default()
            };
            let e = explain_image(&mut QuadrantBrightness, &img, 0, &cfg, 3).unwrap();
            let phi = &e.explanation.phi;
            // 4×4 grid: segments 0, 1, 4, 5 cover the top-left quadrant
            let tl = [0usize, 1, 4, 5];
            let argmax = (0..16).max_by(|&a, &b| phi[a].total_cmp(&phi[b])).unwrap();
            assert!(tl.contains(&argmax), "{method:?}: {phi:?}");
            let min_tl = tl.iter().map(|&i| phi[i]).fold(f64::INFINITY, f64::min);
            let max_other = (0..16)
                .filter(|i| !tl.contains(i))
                .map(|i| phi[i])
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(min_tl > max_other, "{method:?}: {phi:?}");
        }
    }

    #[test]
    fn constant_predictor_gives_zero_weights() {
        let img = bright_top_left(32, 20);
        let mut p = ConstantPredictor::new(vec![0.3, 0.7]).unwrap();
        for method in [ImageMethod::Lime, ImageMethod::Shap] {
            let cfg = ImageExplainConfig {
                method,
                n_segments: 8,
                n_samples: 100,
                ..ImageExplainConfig::default()
            };
            let e = explain_image(&mut p, &img, 0, &cfg, 1).unwrap();
            assert!(
                e.explanation.phi.iter().all(|v| v.abs() < 1e-9),
                "{:?}",
                e.explanation.phi
            );
        }
    }

    #[test]
    fn heatmap_in_movie_coordinates() {
        let img = bright_top_left(1280, 546);
        let cfg = ImageExplainConfig {
            n_segments: 4,
            n_samples: 12,
            batch_size: 4,
            ..ImageExplainConfig::default()
        };
        let e = explain_image(&mut QuadrantBrightness, &img, 7, &cfg, 1).unwrap();
        assert_eq!(e.heatmap.scores().dims(), &[546, 1280]);
        assert_eq!(e.heatmap.frame_index, 7);
    }

    #[test]
    fn rejects_too_many_segments() {
        let img = RgbImage::new(100, 100);
        let cfg = ImageExplainConfig {
            n_segments: 65,
            ..ImageExplainConfig::default()
        };
        assert!(explain_image(&mut QuadrantBrightness, &img, 0, &cfg, 0).is_err());
    }
}
