//! PNG rendering of saliency heatmaps and text summaries of brain maps.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::OnceLock;

use image::{Rgb, RgbImage};

use crate::atlas::Atlas;
use crate::series::AttributionMap;
use crate::{Error, Result, Tensor};

const INFERNO_TXT: &str = include_str!("../data/inferno.txt");

/// Gaze marker colour.
pub const MARKER: Rgb<u8> = Rgb([0, 255, 255]);

/// 256-entry lookup table, darkest first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Colormap {
    table: Vec<[u8; 3]>,
}

impl Colormap {
    pub fn new(table: Vec<[u8; 3]>) -> Result<Self> {
        if table.len() < 2 {
            return Err(Error::invalid("a colormap needs at least two entries"));
        }
        Ok(Self { table })
    }

    /// Parses one `r g b` triple per line.
    pub fn parse(text: &str) -> Result<Self> {
        let table = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .enumerate()
            .map(|(i, l)| {
                let v: Vec<u8> = l
                    .split_whitespace()
                    .map(str::parse)
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| Error::invalid(format!("colormap line {}: {e}", i + 1)))?;
                <[u8; 3]>::try_from(v)
                    .map_err(|_| Error::invalid(format!("colormap line {} needs 3 values", i + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(table)
    }

    pub fn inferno() -> &'static Colormap {
        static CMAP: OnceLock<Colormap> = OnceLock::new();
        CMAP.get_or_init(|| Colormap::parse(INFERNO_TXT).expect("bundled colormap parses"))
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// Colour for `v ∈ [0, 1]`.
    pub fn map(&self, v: f64) -> Rgb<u8> {
        let last = self.table.len() - 1;
        let i = (v.clamp(0.0, 1.0) * last as f64).round() as usize;
        Rgb(self.table[i])
    }

    pub fn hottest(&self) -> Rgb<u8> {
        Rgb(self.table[self.table.len() - 1])
    }
}

/// Min-max scaling to `[0, 1]`; a constant input maps to 0.
pub fn normalize(values: &[f32]) -> Vec<f64> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(f64::from(v)), hi.max(f64::from(v)))
        });
    let span = hi - lo;
    values
        .iter()
        .map(|&v| {
            if span > 0.0 {
                (f64::from(v) - lo) / span
            } else {
                0.0
            }
        })
        .collect()
}

/// Colours an `H × W` score tensor; gaze points in pixel coordinates are
/// drawn as small crosses.
pub fn render_heatmap(scores: &Tensor, cmap: &Colormap, gaze: &[(f64, f64)]) -> Result<RgbImage> {
    let (h, w) = scores.shape2()?;
    let norm = normalize(scores.data());
    let mut img = RgbImage::from_fn(w as u32, h as u32, |x, y| {
        cmap.map(norm[y as usize * w + x as usize])
    });
    for &(gx, gy) in gaze {
        if !(gx >= 0.0 && gy >= 0.0 && gx < w as f64 && gy < h as f64) {
            continue;
        }
        let (cx, cy) = (gx.floor() as i64, gy.floor() as i64);
        for d in -2i64..=2 {
            for (x, y) in [(cx + d, cy), (cx, cy + d)] {
                if x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h {
                    img.put_pixel(x as u32, y as u32, MARKER);
                }
            }
        }
    }
    Ok(img)
}

pub fn save_png(img: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    img.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}

/// Markdown table of macro-area means, highest first.
pub fn macro_area_table(map: &AttributionMap, atlas: &Atlas) -> Result<String> {
    let mut rows = map.macro_area_scores(atlas)?;
    rows.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let mut out = format!(
        "| macro area | {} {} |\n|---|---:|\n",
        map.model_tag, map.explainer_tag
    );
    for (name, score) in rows {
        writeln!(out, "| {name} | {score:.4} |").expect("writing to a String");
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn colours(img: &RgbImage) -> HashSet<[u8; 3]> {
        img.pixels().map(|p| p.0).collect()
    }

    #[test]
    fn bundled_table() {
        let c = Colormap::inferno();
        assert_eq!(c.len(), 256);
        assert_eq!(c.map(0.0), Rgb([0, 0, 4]));
        assert_eq!(c.map(1.0), c.hottest());
    }

    #[test]
    fn constant_and_two_value_maps() {
        let c = Colormap::inferno();
        let flat = Tensor::new(vec![3, 4], vec![2.5; 12]).unwrap();
        assert_eq!(colours(&render_heatmap(&flat, c, &[]).unwrap()).len(), 1);
        let two = Tensor::new(vec![2, 2], vec![1.0, 5.0, 5.0, 1.0]).unwrap();
        assert_eq!(colours(&render_heatmap(&two, c, &[]).unwrap()).len(), 2);
    }

    #[test]
    fn affine_invariant() {
        let c = Colormap::inferno();
        let data: Vec<f32> = (0..30).map(|i| ((i * 7) % 11) as f32 * 0.5).collect();
        let a = Tensor::new(vec![5, 6], data.clone()).unwrap();
        let b = Tensor::new(vec![5, 6], data.iter().map(|v| 3.0 * v - 4.0).collect()).unwrap();
        assert_eq!(
            render_heatmap(&a, c, &[]).unwrap(),
            render_heatmap(&b, c, &[]).unwrap()
        );
    }

    #[test]
    fn ramp_argmax_is_hottest() {
        let c = Colormap::inferno();
        let t = Tensor::new(vec![4, 8], (0..32).map(|i| i as f32).collect()).unwrap();
        let img = render_heatmap(&t, c, &[]).unwrap();
        assert_eq!(*img.get_pixel(7, 3), c.hottest());
    }

    #[test]
    fn gaze_markers_drawn() {
        let c = Colormap::inferno();
        let t = Tensor::new(vec![10, 10], vec![0.0; 100]).unwrap();
        let img = render_heatmap(&t, c, &[(5.2, 5.9), (50.0, 1.0)]).unwrap();
        assert_eq!(*img.get_pixel(5, 5), MARKER);
        assert_eq!(*img.get_pixel(7, 5), MARKER);
        assert_eq!(*img.get_pixel(0, 0), c.map(0.0));
    }
}
