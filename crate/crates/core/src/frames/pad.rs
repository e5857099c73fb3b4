use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitMode {
    /// Zero borders around the whole frame; side = max(width, height).
    #[default]
    Pad,
    /// Centered crop; side = min(width, height).
    Crop,
}

/// Invertible map between original frame pixels and a square canvas.
///
/// Square coordinates are `original + offset`. In pad mode the first
/// `⌊(side − dim)/2⌋` rows (or columns) are border and the remainder goes
/// below (or right).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PadTransform {
    pub width: usize,
    pub height: usize,
    pub side: usize,
    pub offset_x: isize,
    pub offset_y: isize,
    pub mode: FitMode,
}

impl PadTransform {
    pub fn new(width: usize, height: usize, mode: FitMode) -> Self {
        let side = match mode {
            FitMode::Pad => width.max(height),
            FitMode::Crop => width.min(height),
        };
        let offset_x = (side as isize - width as isize).div_euclid(2);
        let offset_y = (side as isize - height as isize).div_euclid(2);
        Self {
            width,
            height,
            side,
            offset_x,
            offset_y,
            mode,
        }
    }

    pub fn pad_to_square(width: usize, height: usize) -> Self {
        Self::new(width, height, FitMode::Pad)
    }

    pub fn is_identity(&self) -> bool {
        self.offset_x == 0 && self.offset_y == 0 && self.width == self.height
    }

    /// Square coordinates of an original pixel, if it lands on the canvas.
    pub fn to_square(&self, x: usize, y: usize) -> Option<(usize, usize)> {
        let sx = x as isize + self.offset_x;
        let sy = y as isize + self.offset_y;
        let side = self.side as isize;
        (sx >= 0 && sy >= 0 && sx < side && sy < side).then_some((sx as usize, sy as usize))
    }

    /// Original coordinates of a square pixel; `None` for border pixels.
    pub fn to_original(&self, sx: usize, sy: usize) -> Option<(usize, usize)> {
        let x = sx as isize - self.offset_x;
        let y = sy as isize - self.offset_y;
        (x >= 0 && y >= 0 && x < self.width as isize && y < self.height as isize)
            .then_some((x as usize, y as usize))
    }

    pub fn is_border(&self, sx: usize, sy: usize) -> bool {
        self.to_original(sx, sy).is_none()
    }

    pub fn apply(&self, image: &RgbImage) -> Result<RgbImage> {
        self.check_image(image)?;
        let mut out = RgbImage::new(self.side as u32, self.side as u32);
        for sy in 0..self.side {
            for sx in 0..self.side {
                if let Some((x, y)) = self.to_original(sx, sy) {
                    out.put_pixel(sx as u32, sy as u32, *image.get_pixel(x as u32, y as u32));
                }
            }
        }
        Ok(out)
    }

    /// Maps a `side × side` score grid back to `height × width`.
    ///
    /// In crop mode, original pixels outside the crop receive the minimum
    /// score of the grid.
    pub fn scores_to_original(&self, square: &Tensor) -> Result<Tensor> {
        let (h, w) = square.shape2()?;
        if h != self.side || w != self.side {
            return Err(Error::invalid(format!(
                "expected a {0}×{0} score grid, got {h}×{w}",
                self.side
            )));
        }
        let fill = square.data().iter().cloned().fold(f32::INFINITY, f32::min);
        let mut out = vec![fill; self.width * self.height];
        for y in 0..self.height {
            for x in 0..self.width {
                if let Some((sx, sy)) = self.to_square(x, y) {
                    out[y * self.width + x] = square.data()[sy * self.side + sx];
                }
            }
        }
        Tensor::new(vec![self.height, self.width], out)
    }

    fn check_image(&self, image: &RgbImage) -> Result<()> {
        if image.width() as usize != self.width || image.height() as usize != self.height {
            return Err(Error::invalid(format!(
                "image is {}×{}, transform expects {}×{}",
                image.width(),
                image.height(),
                self.width,
                self.height
            )));
        }
        Ok(())
    }
}
