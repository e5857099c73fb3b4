//! Deterministic in-process predictors for tests and demos.

use image::RgbImage;
use serde::{Deserialize, Serialize};

use super::{validate_probs, Predictor};
use crate::{Error, Result};

/// Probabilities are kept inside `[EPS, 1 − EPS]`.
pub const EPS: f64 = 1e-6;

/// Two classes; class 1 has probability equal to the mean brightness of the
/// top-left quadrant.
#[derive(Debug, Clone, Copy, Default)]
pub struct QuadrantBrightness;

impl QuadrantBrightness {
    pub fn positive_prob(image: &RgbImage) -> f64 {
        let (w, h) = image.dimensions();
        let (qw, qh) = ((w / 2).max(1).min(w), (h / 2).max(1).min(h));
        if qw == 0 || qh == 0 {
            return EPS;
        }
        let mut sum = 0u64;
        for y in 0..qh {
            for x in 0..qw {
                let p = image.get_pixel(x, y).0;
                sum += u64::from(p[0]) + u64::from(p[1]) + u64::from(p[2]);
            }
        }
        let mean = sum as f64 / (3.0 * 255.0 * f64::from(qw) * f64::from(qh));
        mean.clamp(EPS, 1.0 - EPS)
    }
}

impl Predictor for QuadrantBrightness {
    fn n_classes(&self) -> usize {
        2
    }

    fn classify_batch(&mut self, images: &[RgbImage]) -> Result<Vec<Vec<f64>>> {
        Ok(images
            .iter()
            .map(|img| {
                let p = Self::positive_prob(img);
                vec![1.0 - p, p]
            })
            .collect())
    }
}

/// The same vector for every image.
#[derive(Debug, Clone)]
pub struct ConstantPredictor {
    probs: Vec<f64>,
}

impl ConstantPredictor {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        validate_probs(&probs, probs.len()).map_err(Error::InvalidInput)?;
        Ok(Self { probs })
    }
}

impl Predictor for ConstantPredictor {
    fn n_classes(&self) -> usize {
        self.probs.len()
    }

    fn classify_batch(&mut self, images: &[RgbImage]) -> Result<Vec<Vec<f64>>> {
        Ok(vec![self.probs.clone(); images.len()])
    }
}

/// Replays a table of probability vectors in request order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScriptedPredictor {
    table: Vec<Vec<f64>>,
    #[serde(skip)]
    cursor: usize,
}

impl ScriptedPredictor {
    pub fn new(table: Vec<Vec<f64>>) -> Result<Self> {
        let n = table
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::invalid("empty script"))?;
        for (i, row) in table.iter().enumerate() {
            validate_probs(row, n).map_err(|m| Error::invalid(format!("script row {i}: {m}")))?;
        }
        Ok(Self { table, cursor: 0 })
    }

    /// Number of rows replayed so far.
    pub fn position(&self) -> usize {
        self.cursor
    }
}

impl Predictor for ScriptedPredictor {
    fn n_classes(&self) -> usize {
        self.table[0].len()
    }

    fn classify_batch(&mut self, images: &[RgbImage]) -> Result<Vec<Vec<f64>>> {
        let end = self.cursor + images.len();
        if end > self.table.len() {
            return Err(Error::invalid(format!(
                "script exhausted: {} rows, request for rows {}..{end}",
                self.table.len(),
                self.cursor
            )));
        }
        let out = self.table[self.cursor..end].to_vec();
        self.cursor = end;
        Ok(out)
    }
}

/// Builds a toy predictor by name: `quadrant-brightness`, `constant` or `scripted`.
///
/// `constant` uses `table[0]` (or a uniform two-class vector); `scripted`
/// replays `table`.
pub fn builtin(kind: &str, table: Option<Vec<Vec<f64>>>) -> Result<Box<dyn Predictor + Send>> {
    Ok(match kind {
        "quadrant-brightness" => Box::new(QuadrantBrightness),
        "constant" => {
            let probs = table
                .and_then(|t| t.into_iter().next())
                .unwrap_or_else(|| vec![0.5, 0.5]);
            Box::new(ConstantPredictor::new(probs)?)
        }
        "scripted" => {
            Box::new(ScriptedPredictor::new(table.ok_or_else(|| {
                Error::invalid("scripted predictor needs a table")
            })?)?)
        }
        other => return Err(Error::invalid(format!("unknown toy predictor {other:?}"))),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn black_image_is_clamped() {
        let img = RgbImage::new(8, 8);
        let p = QuadrantBrightness.classify_batch(&[img]).unwrap();
        assert_eq!(p[0][1], EPS);
        assert_eq!(p[0][0], 1.0 - EPS);
    }

    #[test]
    fn quadrant_ignores_other_pixels() {
        let mut img = RgbImage::new(4, 4);
        for y in 0..4 {
            for x in 0..4 {
                if x >= 2 || y >= 2 {
                    img.put_pixel(x, y, image::Rgb([255, 255, 255]));
                }
            }
        }
        assert_eq!(QuadrantBrightness::positive_prob(&img), EPS);
        img.put_pixel(0, 0, image::Rgb([255, 255, 255]));
        assert!((QuadrantBrightness::positive_prob(&img) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn constant_and_scripted() {
        let mut c = ConstantPredictor::new(vec![0.2, 0.8]).unwrap();
        let imgs = vec![
            RgbImage::new(2, 2),
            RgbImage::from_pixel(3, 3, image::Rgb([9, 9, 9])),
        ];
        assert_eq!(c.classify_batch(&imgs).unwrap(), vec![vec![0.2, 0.8]; 2]);

        let table = vec![vec![1.0, 0.0], vec![0.3, 0.7], vec![0.5, 0.5]];
        let mut s = ScriptedPredictor::new(table.clone()).unwrap();
        let mut got = s.classify_batch(&imgs).unwrap();
        got.extend(s.classify_batch(&imgs[..1]).unwrap());
        assert_eq!(got, table);
        assert!(s.classify_batch(&imgs[..1]).is_err());
        assert!(ScriptedPredictor::new(vec![vec![0.5, 0.4]]).is_err());
    }
}
