//! Synthetic subject with known ground truth.
//!
//! A hidden two-state process decides when the target emotion dominates.
//! Annotators rate all emotions with noise; the target is raised while the
//! state is on and some other emotion is raised while it is off. A handful of
//! planted regions carry the state (delayed by the hemodynamic lag) on top of
//! Gaussian noise; every other region is pure noise.
//!
//! A short synthetic movie comes along for the vision side: frames with one
//! bright disk, a gaze trace fixating that disk, and face boxes.

use image::{Rgb, RgbImage};
use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::atlas::Atlas;
use crate::frames::FaceBoxes;
use crate::series::{AnnotationSeries, GazeSample, GazeTrace, RegionTimeSeries};
use crate::{rng, Error, Result, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub n_regions: usize,
    pub n_planted: usize,
    pub n_times: usize,
    pub tr_seconds: f64,
    pub n_annotators: usize,
    pub emotions: Vec<String>,
    pub target_emotion: String,
    /// Mean length of an emotional episode, in TRs.
    pub episode_trs: f64,
    /// Planted-region shift between states, in noise standard deviations.
    pub effect_size: f64,
    pub lag_s: f64,
    pub voxels_per_region: usize,
    pub n_frames: usize,
    pub frame_width: usize,
    pub frame_height: usize,
    pub gaze_rate_hz: f64,
    pub subject_id: String,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_regions: 394,
            n_planted: 5,
            n_times: 600,
            tr_seconds: 2.0,
            n_annotators: 3,
            emotions: ["happiness", "fear", "sadness", "anger"]
                .map(String::from)
                .to_vec(),
            target_emotion: "fear".into(),
            episode_trs: 15.0,
            effect_size: 1.2,
            lag_s: 2.0,
            voxels_per_region: 2,
            n_frames: 24,
            frame_width: 160,
            frame_height: 68,
            gaze_rate_hz: 50.0,
            subject_id: "sub-01".into(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Synthetic {
    pub config: SyntheticConfig,
    pub atlas: Atlas,
    /// Informative region ids, ascending.
    pub planted: Vec<usize>,
    /// Hidden target-dominance state per TR.
    pub state: Vec<u8>,
    pub annotations: AnnotationSeries,
    /// `T × V` voxel series; parcellating with `voxel_labels` gives `regions`.
    pub voxels: Tensor,
    pub voxel_labels: Vec<usize>,
    pub regions: RegionTimeSeries,
    pub frames: Vec<RgbImage>,
    pub frame_times: Vec<f64>,
    /// Disk centre per frame.
    pub disk_centres: Vec<(f64, f64)>,
    pub gaze: GazeTrace,
    pub face_boxes: Vec<FaceBoxes>,
}

pub fn generate(config: &SyntheticConfig) -> Result<Synthetic> {
    let c = config;
    if c.n_planted == 0 || c.n_planted > c.n_regions {
        return Err(Error::invalid(format!(
            "cannot plant {} of {} regions",
            c.n_planted, c.n_regions
        )));
    }
    let target = c
        .emotions
        .iter()
        .position(|e| *e == c.target_emotion)
        .ok_or_else(|| {
            Error::invalid(format!(
                "target {:?} is not among the emotions",
                c.target_emotion
            ))
        })?;
    if c.n_annotators == 0 || c.n_times < 2 || c.voxels_per_region == 0 || !(c.episode_trs >= 1.0) {
        return Err(Error::invalid("synthetic sizes must be positive"));
    }
    let atlas = Atlas::synthetic(c.n_regions)?;
    let mut planted =
        index::sample(&mut rng::substream(c.seed, &[1]), c.n_regions, c.n_planted).into_vec();
    planted.sort_unstable();

    // hidden state and the emotion that dominates while it is off
    let mut srng = rng::substream(c.seed, &[2]);
    let switch = 1.0 / c.episode_trs;
    let others: Vec<usize> = (0..c.emotions.len()).filter(|&e| e != target).collect();
    let mut state = Vec::with_capacity(c.n_times);
    let mut off_emotion = Vec::with_capacity(c.n_times);
    let mut s = srng.random_bool(0.5);
    let mut other = others[srng.random_range(0..others.len())];
    for _ in 0..c.n_times {
        state.push(u8::from(s));
        off_emotion.push(other);
        if srng.random_bool(switch) {
            s = !s;
            other = others[srng.random_range(0..others.len())];
        }
    }

    let e_len = c.emotions.len();
    let mut arng = rng::substream(c.seed, &[3]);
    let mut ratings = vec![0f32; c.n_annotators * c.n_times * e_len];
    for a in 0..c.n_annotators {
        for t in 0..c.n_times {
            let raised = if state[t] == 1 {
                target
            } else {
                off_emotion[t]
            };
            for e in 0..e_len {
                let base: f64 = arng.random_range(0.0..1.0);
                let v = if e == raised { base + 2.0 } else { base };
                ratings[(a * c.n_times + t) * e_len + e] = v as f32;
            }
        }
    }
    let annotations = AnnotationSeries::new(
        c.emotions.clone(),
        c.tr_seconds,
        Tensor::new(vec![c.n_annotators, c.n_times, e_len], ratings)?,
    )?;

    let lag = (c.lag_s / c.tr_seconds).round() as usize;
    let mut nrng = rng::substream(c.seed, &[4]);
    let r_len = c.n_regions;
    let mut region_vals = vec![0f64; c.n_times * r_len];
    for t in 0..c.n_times {
        let driven = t.checked_sub(lag).map(|k| f64::from(state[k]) - 0.5);
        for r in 0..r_len {
            region_vals[t * r_len + r] = nrng.sample(StandardNormal);
        }
        if let Some(d) = driven {
            for (k, &r) in planted.iter().enumerate() {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                region_vals[t * r_len + r] += sign * c.effect_size * d;
            }
        }
    }
    // voxels: region value ± a voxel offset that cancels in the region mean
    let v_per = c.voxels_per_region;
    let mut voxel_labels: Vec<usize> = (0..r_len)
        .flat_map(|r| std::iter::repeat_n(r, v_per))
        .collect();
    let mut vrng = rng::substream(c.seed, &[5]);
    rand::seq::SliceRandom::shuffle(voxel_labels.as_mut_slice(), &mut vrng);
    let v_len = voxel_labels.len();
    let mut voxels = vec![0f64; c.n_times * v_len];
    let mut seen = vec![0usize; r_len];
    let jitter: Vec<f64> = (0..c.n_times * r_len)
        .map(|_| vrng.sample::<f64, _>(StandardNormal) * 0.1)
        .collect();
    for (v, &r) in voxel_labels.iter().enumerate() {
        let k = seen[r];
        seen[r] += 1;
        // offsets k − (v_per−1)/2 sum to zero within a region
        let w = k as f64 - (v_per as f64 - 1.0) / 2.0;
        for t in 0..c.n_times {
            voxels[t * v_len + v] = region_vals[t * r_len + r] + w * jitter[t * r_len + r];
        }
    }
    let voxels = Tensor::from_f64(vec![c.n_times, v_len], &voxels)?;
    let regions = RegionTimeSeries::new(
        c.subject_id.clone(),
        c.tr_seconds,
        crate::series::parcellate(&voxels, &voxel_labels, &atlas)?,
    )?;

    let (frames, frame_times, disk_centres) = movie(c);
    let gaze = gaze_trace(c, &frame_times, &disk_centres)?;
    let face_boxes = faces(c);

    Ok(Synthetic {
        config: c.clone(),
        atlas,
        planted,
        state,
        annotations,
        voxels,
        voxel_labels,
        regions,
        frames,
        frame_times,
        disk_centres,
        gaze,
        face_boxes,
    })
}

fn movie(c: &SyntheticConfig) -> (Vec<RgbImage>, Vec<f64>, Vec<(f64, f64)>) {
    let (w, h) = (c.frame_width as f64, c.frame_height as f64);
    let radius = (h / 6.0).max(1.0);
    let mut rng = rng::substream(c.seed, &[6]);
    let mut frames = Vec::with_capacity(c.n_frames);
    let mut times = Vec::with_capacity(c.n_frames);
    let mut centres = Vec::with_capacity(c.n_frames);
    for i in 0..c.n_frames {
        let cx = rng.random_range(radius..(w - radius).max(radius + 1.0));
        let cy = rng.random_range(radius..(h - radius).max(radius + 1.0));
        let tone: u8 = rng.random_range(20..60);
        let img = RgbImage::from_fn(c.frame_width as u32, c.frame_height as u32, |x, y| {
            let (dx, dy) = (f64::from(x) + 0.5 - cx, f64::from(y) + 0.5 - cy);
            if dx * dx + dy * dy <= radius * radius {
                Rgb([240, 230, 200])
            } else {
                let n = ((x * 31 + y * 17 + i as u32 * 7) % 23) as u8;
                Rgb([tone + n, tone / 2 + n, tone + 10])
            }
        });
        frames.push(img);
        times.push(i as f64 * c.tr_seconds);
        centres.push((cx, cy));
    }
    (frames, times, centres)
}

fn gaze_trace(
    c: &SyntheticConfig,
    frame_times: &[f64],
    centres: &[(f64, f64)],
) -> Result<GazeTrace> {
    let mut rng = rng::substream(c.seed, &[7]);
    let end = frame_times.last().map_or(0.0, |t| t + c.tr_seconds / 2.0);
    let n = (end * c.gaze_rate_hz).floor() as usize;
    let mut samples = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 / c.gaze_rate_hz;
        // look at the disk of the nearest frame
        let f = ((t / c.tr_seconds).round() as usize).min(centres.len().saturating_sub(1));
        let (cx, cy) = centres[f];
        let jx: f64 = rng.sample(StandardNormal);
        let jy: f64 = rng.sample(StandardNormal);
        samples.push(GazeSample {
            t_seconds: t,
            x_px: cx + jx,
            y_px: cy + jy,
            valid: !rng.random_bool(0.05),
        });
    }
    GazeTrace::new(
        c.subject_id.clone(),
        c.gaze_rate_hz,
        c.frame_width,
        c.frame_height,
        samples,
    )
}

fn faces(c: &SyntheticConfig) -> Vec<FaceBoxes> {
    let (w, h) = (c.frame_width as f64, c.frame_height as f64);
    let mut rng = rng::substream(c.seed, &[8]);
    (0..c.n_frames)
        .map(|i| {
            let n = rng.random_range(0..4usize);
            let boxes = (0..n)
                .map(|_| {
                    // side between 5% and 35% of the frame height
                    let side = h * rng.random_range(0.05..0.35);
                    let x = rng.random_range(0.0..(w - side));
                    let y = rng.random_range(0.0..(h - side));
                    [
                        x.floor(),
                        y.floor(),
                        side.floor().max(1.0),
                        side.floor().max(1.0),
                    ]
                })
                .collect();
            FaceBoxes { frame: i, boxes }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::{prepare_fmri, FmriPrepConfig};

    fn small() -> SyntheticConfig {
        SyntheticConfig {
            n_regions: 40,
            n_planted: 3,
            n_times: 200,
            n_frames: 4,
            ..SyntheticConfig::default()
        }
    }

    #[test]
    fn shapes_and_planting() {
        let s = generate(&small()).unwrap();
        assert_eq!(s.planted.len(), 3);
        assert_eq!(s.regions.values().dims(), &[200, 40]);
        assert_eq!(s.voxels.dims(), &[200, 80]);
        assert_eq!(s.annotations.values().dims(), &[3, 200, 4]);
        assert_eq!(s.frames.len(), 4);
        assert_eq!(s.face_boxes.len(), 4);
        // planted regions separate the lagged state; noise regions do not
        let lag = 1;
        let gap = |r: usize| {
            let (mut on, mut off, mut n_on, mut n_off) = (0.0, 0.0, 0.0, 0.0);
            for t in lag..200 {
                let v = f64::from(s.regions.values().get2(t, r));
                if s.state[t - lag] == 1 {
                    on += v;
                    n_on += 1.0;
                } else {
                    off += v;
                    n_off += 1.0;
                }
            }
            (on / n_on - off / n_off).abs()
        };
        for &r in &s.planted {
            assert!(gap(r) > 0.6, "{r}: {}", gap(r));
        }
        let noise_max = (0..40)
            .filter(|r| !s.planted.contains(r))
            .map(gap)
            .fold(0.0, f64::max);
        assert!(noise_max < 0.5, "{noise_max}");
    }

    #[test]
    fn labels_follow_state() {
        let s = generate(&small()).unwrap();
        let cfg = FmriPrepConfig {
            undersample: false,
            ..FmriPrepConfig::default()
        };
        let ds = prepare_fmri(&s.annotations, &s.regions, &cfg).unwrap();
        let agree = ds
            .labels()
            .iter()
            .zip(ds.provenance())
            .filter(|(&y, p)| y == s.state[p.t_index - 1])
            .count();
        assert!(agree as f64 / ds.n_rows() as f64 > 0.85);
    }

    #[test]
    fn deterministic() {
        let a = generate(&small()).unwrap();
        let b = generate(&small()).unwrap();
        assert_eq!(a.voxels, b.voxels);
        assert_eq!(a.gaze, b.gaze);
        assert_eq!(a.frames, b.frames);
    }
}
