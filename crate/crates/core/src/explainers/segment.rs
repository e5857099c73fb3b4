use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentMode {
    /// Near-equal rectangles.
    #[default]
    Grid,
    /// k-means in (L, a, b, x, y) space.
    Slic,
}

/// Segment id per pixel, row-major `height × width`, ids contiguous from 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentMap {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<usize>,
    pub n_segments: usize,
}

impl SegmentMap {
    pub fn get(&self, x: usize, y: usize) -> usize {
        self.labels[y * self.width + x]
    }

    /// Pixel count per segment.
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.n_segments];
        for &l in &self.labels {
            s[l] += 1;
        }
        s
    }
}

/// SLIC compactness and iteration count.
pub const SLIC_COMPACTNESS: f64 = 10.0;
pub const SLIC_ITERATIONS: usize = 10;

pub fn segment_image(image: &RgbImage, n_segments: usize, mode: SegmentMode) -> Result<SegmentMap> {
    let (w, h) = (image.width() as usize, image.height() as usize);
    if n_segments < 2 {
        return Err(Error::invalid("need at least two segments"));
    }
    if n_segments > w * h {
        return Err(Error::invalid(format!(
            "{n_segments} segments exceed the {} pixels",
            w * h
        )));
    }
    match mode {
        SegmentMode::Grid => Ok(grid(w, h, n_segments)),
        SegmentMode::Slic => Ok(slic(image, n_segments, SLIC_COMPACTNESS)),
    }
}

/// Factor pair `rows × cols = n` whose cells are closest to square; the
/// first pair in order of increasing `rows` wins ties. Pairs that do not fit
/// the image are skipped.
fn grid_shape(w: usize, h: usize, n: usize) -> (usize, usize) {
    let mut best: Option<(f64, usize, usize)> = None;
    for r in 1..=n {
        if !n.is_multiple_of(r) {
            continue;
        }
        let c = n / r;
        if r > h || c > w {
            continue;
        }
        let aspect = ((h as f64 / r as f64) / (w as f64 / c as f64)).ln().abs();
        if best.is_none_or(|(a, _, _)| aspect < a - 1e-12) {
            best = Some((aspect, r, c));
        }
    }
    match best {
        Some((_, r, c)) => (r, c),
        // no exact factorization fits; fall back to a single strip
        None if n <= w => (1, n),
        None => (n, 1),
    }
}

fn grid(w: usize, h: usize, n: usize) -> SegmentMap {
    let (r, c) = grid_shape(w, h, n);
    let mut labels = vec![0; w * h];
    for y in 0..h {
        let row = y * r / h;
        for x in 0..w {
            labels[y * w + x] = row * c + x * c / w;
        }
    }
    relabel(w, h, labels)
}

fn relabel(width: usize, height: usize, labels: Vec<usize>) -> SegmentMap {
    let max = labels.iter().copied().max().unwrap_or(0);
    let mut map = vec![usize::MAX; max + 1];
    let mut next = 0;
    let labels = labels
        .into_iter()
        .map(|l| {
            if map[l] == usize::MAX {
                map[l] = next;
                next += 1;
            }
            map[l]
        })
        .collect();
    SegmentMap {
        width,
        height,
        labels,
        n_segments: next,
    }
}

fn srgb_to_lab(p: [u8; 3]) -> [f64; 3] {
    let lin = |c: u8| {
        let c = f64::from(c) / 255.0;
        if c <= 0.04045 {
            c / 12.92
        } else {
            ((c + 0.055) / 1.055).powf(2.4)
        }
    };
    let (r, g, b) = (lin(p[0]), lin(p[1]), lin(p[2]));
    // D65 white
    let x = (0.412_456_4 * r + 0.357_576_1 * g + 0.180_437_5 * b) / 0.95047;
    let y = 0.212_672_9 * r + 0.715_152_2 * g + 0.072_175 * b;
    let z = (0.019_333_9 * r + 0.119_192 * g + 0.950_304_1 * b) / 1.08883;
    let f = |t: f64| {
        if t > 216.0 / 24389.0 {
            t.cbrt()
        } else {
            (24389.0 / 27.0 * t + 16.0) / 116.0
        }
    };
    let (fx, fy, fz) = (f(x), f(y), f(z));
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

fn slic(image: &RgbImage, n: usize, compactness: f64) -> SegmentMap {
    let (w, h) = (image.width() as usize, image.height() as usize);
    let lab: Vec<[f64; 3]> = image.pixels().map(|p| srgb_to_lab(p.0)).collect();
    let (r, c) = grid_shape(w, h, n);
    let step = ((w * h) as f64 / n as f64).sqrt();
    // centers: [L, a, b, x, y]
    let mut centers: Vec<[f64; 5]> = Vec::with_capacity(r * c);
    for i in 0..r {
        for j in 0..c {
            let cx = ((j as f64 + 0.5) * w as f64 / c as f64)
                .floor()
                .min(w as f64 - 1.0);
            let cy = ((i as f64 + 0.5) * h as f64 / r as f64)
                .floor()
                .min(h as f64 - 1.0);
            let l = lab[cy as usize * w + cx as usize];
            centers.push([l[0], l[1], l[2], cx, cy]);
        }
    }
    let spatial = (compactness / step).powi(2);
    let mut labels = vec![usize::MAX; w * h];
    let mut dist = vec![f64::INFINITY; w * h];
    let reach = (2.0 * step).ceil() as isize;
    for _ in 0..SLIC_ITERATIONS {
        dist.iter_mut().for_each(|d| *d = f64::INFINITY);
        labels.iter_mut().for_each(|l| *l = usize::MAX);
        for (k, ctr) in centers.iter().enumerate() {
            let (cx, cy) = (ctr[3].round() as isize, ctr[4].round() as isize);
            let y0 = (cy - reach).max(0) as usize;
            let y1 = ((cy + reach) as usize).min(h - 1);
            let x0 = (cx - reach).max(0) as usize;
            let x1 = ((cx + reach) as usize).min(w - 1);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let p = &lab[y * w + x];
                    let dc =
                        (p[0] - ctr[0]).powi(2) + (p[1] - ctr[1]).powi(2) + (p[2] - ctr[2]).powi(2);
                    let ds = (x as f64 - ctr[3]).powi(2) + (y as f64 - ctr[4]).powi(2);
                    let d = dc + ds * spatial;
                    if d < dist[y * w + x] {
                        dist[y * w + x] = d;
                        labels[y * w + x] = k;
                    }
                }
            }
        }
        // pixels outside every window join the spatially nearest center
        for y in 0..h {
            for x in 0..w {
                if labels[y * w + x] == usize::MAX {
                    let k = (0..centers.len())
                        .min_by(|&a, &b| {
                            let da = (x as f64 - centers[a][3]).powi(2)
                                + (y as f64 - centers[a][4]).powi(2);
                            let db = (x as f64 - centers[b][3]).powi(2)
                                + (y as f64 - centers[b][4]).powi(2);
                            da.total_cmp(&db)
                        })
                        .expect("at least one center");
                    labels[y * w + x] = k;
                }
            }
        }
        let mut sums = vec![[0.0f64; 6]; centers.len()];
        for y in 0..h {
            for x in 0..w {
                let s = &mut sums[labels[y * w + x]];
                let p = &lab[y * w + x];
                s[0] += p[0];
                s[1] += p[1];
                s[2] += p[2];
                s[3] += x as f64;
                s[4] += y as f64;
                s[5] += 1.0;
            }
        }
        for (ctr, s) in centers.iter_mut().zip(&sums) {
            if s[5] > 0.0 {
                for d in 0..5 {
                    ctr[d] = s[d] / s[5];
                }
            }
        }
    }
    relabel(w, h, labels)
}
