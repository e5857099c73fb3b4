//! Movie frame datasets: TR resampling, label-based deduplication, face
//! labels and the square padding transform.

mod faces;
mod pad;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::predictor::{topk, Predictor};
use crate::Result;

pub use faces::{label_faces, AreaRule, FaceBox, FaceBoxes, FaceLabel};
pub use pad::{FitMode, PadTransform};

/// One frame sampled on the TR grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    /// Index of the frame in the source movie.
    pub frame_index: usize,
    /// Position on the TR grid.
    pub tr_index: usize,
    pub t_seconds: f64,
    pub image_ref: String,
    pub retained: bool,
    #[serde(default)]
    pub face_label: Option<FaceLabel>,
}

/// Movie frame indices sampled every `tr_seconds`.
///
/// Index `k` is `round(k · tr · fps)` for `k = 0..=⌊duration / tr⌋`, where
/// `duration` is the timestamp of the last frame, clipped to the last frame
/// and deduplicated.
pub fn resample_frames(total_frames: usize, fps: f64, tr_seconds: f64) -> Vec<usize> {
    assert!(fps > 0.0 && tr_seconds > 0.0, "fps and tr must be positive");
    if total_frames == 0 {
        return Vec::new();
    }
    let duration = (total_frames - 1) as f64 / fps;
    let steps = (duration / tr_seconds + 1e-9).floor() as usize;
    let mut out: Vec<usize> = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let idx = ((k as f64 * tr_seconds * fps).round() as usize).min(total_frames - 1);
        if out.last() != Some(&idx) {
            out.push(idx);
        }
    }
    out
}

/// Scans top-k label sets in time order and keeps a frame iff it shares fewer
/// than `overlap_threshold` labels with the most recently retained frame.
/// The first frame is always kept. Returns positions into `top_sets`.
pub fn dedup_top_labels(top_sets: &[Vec<usize>], overlap_threshold: usize) -> Vec<usize> {
    let mut retained: Vec<usize> = Vec::new();
    for (i, labels) in top_sets.iter().enumerate() {
        let keep = match retained.last() {
            None => true,
            Some(&anchor) => {
                let shared = labels
                    .iter()
                    .filter(|l| top_sets[anchor].contains(l))
                    .count();
                shared < overlap_threshold
            }
        };
        if keep {
            retained.push(i);
        }
    }
    retained
}

/// Top-`k` label indices for each image, classified in batches.
pub fn frame_top_labels<P: Predictor + ?Sized>(
    predictor: &mut P,
    images: &[RgbImage],
    k: usize,
    batch_size: usize,
) -> Result<Vec<Vec<usize>>> {
    let mut out = Vec::with_capacity(images.len());
    for (b, chunk) in images.chunks(batch_size.max(1)).enumerate() {
        let probs = predictor
            .classify_batch(chunk)
            .map_err(|e| e.at("frame", b * batch_size.max(1)))?;
        out.extend(probs.iter().map(|p| topk(p, k)));
    }
    Ok(out)
}

/// Positions of the frames kept by the label-overlap scan.
pub fn dedup_by_labels<P: Predictor + ?Sized>(
    predictor: &mut P,
    images: &[RgbImage],
    k: usize,
    overlap_threshold: usize,
) -> Result<Vec<usize>> {
    let sets = frame_top_labels(predictor, images, k, 16)?;
    Ok(dedup_top_labels(&sets, overlap_threshold))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictor::ScriptedPredictor;

    #[test]
    fn resample_small_movie() {
        assert_eq!(resample_frames(10, 1.0, 2.0), vec![0, 2, 4, 6, 8]);
        assert_eq!(resample_frames(9, 1.0, 2.0), vec![0, 2, 4, 6, 8]);
        assert_eq!(resample_frames(20, 2.5, 2.0), vec![0, 5, 10, 15]);
        assert!(resample_frames(0, 25.0, 2.0).is_empty());
    }

    #[test]
    fn two_hour_movie_count() {
        for fps in [23.976, 24.0, 25.0] {
            let n = resample_frames((7200.0 * fps) as usize, fps, 2.0).len();
            assert!((3599..=3601).contains(&n), "fps {fps}: {n}");
        }
        assert_eq!(resample_frames(172_405, 23.97, 2.0).len(), 3597);
    }

    /// Probability vector over 8 classes whose top-3 set is `top`.
    fn probs_with_top(top: [usize; 3]) -> Vec<f64> {
        let mut p = [0.02; 8];
        for (rank, &c) in top.iter().enumerate() {
            p[c] = 0.3 - 0.05 * rank as f64;
        }
        let s: f64 = p.iter().sum();
        p.iter().map(|v| v / s).collect()
    }

    #[test]
    fn identical_and_disjoint_neighbours() {
        let sets = vec![vec![0, 1, 2], vec![0, 1, 2], vec![3, 4, 5]];
        assert_eq!(dedup_top_labels(&sets, 1), vec![0, 2]);
    }

    #[test]
    fn five_frame_scan_compares_to_last_retained() {
        // Hand simulation with threshold 1 (any shared label removes):
        // f0 {0,1,2} kept (first)
        // f1 {2,3,4} shares 2 with f0        -> dropped
        // f2 {3,4,5} shares none with f0     -> kept (anchor is f0, not f1)
        // f3 {5,6,7} shares 5 with f2        -> dropped
        // f4 {0,1,6} shares none with f2     -> kept
        let tops = [[0, 1, 2], [2, 3, 4], [3, 4, 5], [5, 6, 7], [0, 1, 6]];
        let mut p =
            ScriptedPredictor::new(tops.iter().map(|&t| probs_with_top(t)).collect()).unwrap();
        let images = vec![RgbImage::new(2, 2); 5];
        assert_eq!(
            dedup_by_labels(&mut p, &images, 3, 1).unwrap(),
            vec![0, 2, 4]
        );
        // threshold 3 only removes frames sharing all three labels
        let sets: Vec<Vec<usize>> = tops.iter().map(|t| t.to_vec()).collect();
        assert_eq!(dedup_top_labels(&sets, 3), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn retained_is_ordered_subsequence() {
        use rand::Rng;
        let mut rng = crate::rng::stream(8);
        let sets: Vec<Vec<usize>> = (0..200)
            .map(|_| (0..3).map(|_| rng.random_range(0..12)).collect())
            .collect();
        let kept = dedup_top_labels(&sets, 1);
        assert_eq!(kept[0], 0);
        assert!(kept.windows(2).all(|w| w[0] < w[1]));
        for w in kept.windows(2) {
            assert!(!sets[w[1]].iter().any(|l| sets[w[0]].contains(l)));
        }
    }
}
