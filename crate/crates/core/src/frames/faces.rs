use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// `[x, y, w, h]` in original pixel coordinates.
pub type FaceBox = [f64; 4];

/// One line of the face-box JSONL stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceBoxes {
    pub frame: usize,
    pub boxes: Vec<FaceBox>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FaceLabel {
    Positive,
    Negative,
    Excluded,
}

/// How the area threshold applies to frames with two faces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AreaRule {
    /// Every box must reach the threshold on its own.
    #[default]
    PerBox,
    /// The union of the boxes must reach the threshold.
    Union,
}

/// No faces → negative; one or two faces large enough → positive; anything
/// else is excluded from the face dataset.
pub fn label_faces(
    boxes: &[FaceBox],
    frame_width: f64,
    frame_height: f64,
    area_fraction: f64,
    rule: AreaRule,
) -> Result<FaceLabel> {
    if !(frame_width > 0.0 && frame_height > 0.0) {
        return Err(Error::invalid("frame area must be positive"));
    }
    for (i, b) in boxes.iter().enumerate() {
        let [x, y, w, h] = *b;
        let ok = w > 0.0
            && h > 0.0
            && x >= 0.0
            && y >= 0.0
            && x + w <= frame_width + 1e-9
            && y + h <= frame_height + 1e-9;
        if !ok {
            return Err(Error::invalid(format!("malformed face box {i}: {b:?}")));
        }
    }
    let threshold = area_fraction * frame_width * frame_height;
    let area = |b: &FaceBox| b[2] * b[3];
    Ok(match boxes.len() {
        0 => FaceLabel::Negative,
        1 | 2 => {
            let large = match rule {
                AreaRule::PerBox => boxes.iter().all(|b| area(b) >= threshold),
                AreaRule::Union => union_area(boxes) >= threshold,
            };
            if large {
                FaceLabel::Positive
            } else {
                FaceLabel::Excluded
            }
        }
        _ => FaceLabel::Excluded,
    })
}

fn union_area(boxes: &[FaceBox]) -> f64 {
    let total: f64 = boxes.iter().map(|b| b[2] * b[3]).sum();
    match boxes {
        [a, b] => {
            let ix = (a[0] + a[2]).min(b[0] + b[2]) - a[0].max(b[0]);
            let iy = (a[1] + a[3]).min(b[1] + b[3]) - a[1].max(b[1]);
            total - ix.max(0.0) * iy.max(0.0)
        }
        _ => total,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const W: f64 = 1280.0;
    const H: f64 = 546.0;

    fn box_of(fraction: f64) -> FaceBox {
        let side = (fraction * W * H).sqrt();
        [10.0, 10.0, side, side]
    }

    #[test]
    fn per_box_rules() {
        let label = |b: &[FaceBox]| label_faces(b, W, H, 0.04, AreaRule::PerBox).unwrap();
        assert_eq!(label(&[]), FaceLabel::Negative);
        assert_eq!(label(&[box_of(0.05)]), FaceLabel::Positive);
        assert_eq!(label(&[box_of(0.05), box_of(0.05)]), FaceLabel::Positive);
        assert_eq!(label(&[box_of(0.05), box_of(0.01)]), FaceLabel::Excluded);
        assert_eq!(label(&[box_of(0.01)]), FaceLabel::Excluded);
        assert_eq!(label(&[box_of(0.05); 3]), FaceLabel::Excluded);
    }

    #[test]
    fn threshold_is_inclusive() {
        let b = [0.0, 0.0, 128.0, 0.04 * W * H / 128.0];
        assert_eq!(
            label_faces(&[b], W, H, 0.04, AreaRule::PerBox).unwrap(),
            FaceLabel::Positive
        );
    }

    #[test]
    fn union_rule() {
        let a = [0.0, 0.0, 100.0, 100.0];
        let b = [300.0, 0.0, 200.0, 100.0];
        // each below 4% (27955 px), together above
        assert_eq!(
            label_faces(&[a, b], W, H, 0.04, AreaRule::PerBox).unwrap(),
            FaceLabel::Excluded
        );
        assert_eq!(
            label_faces(&[a, b], W, H, 0.04, AreaRule::Union).unwrap(),
            FaceLabel::Positive
        );
        // fully overlapping boxes count once
        assert_eq!(
            label_faces(&[b, b], W, H, 0.04, AreaRule::Union).unwrap(),
            FaceLabel::Excluded
        );
    }

    #[test]
    fn malformed_boxes() {
        assert!(label_faces(&[[0.0, 0.0, 0.0, 5.0]], W, H, 0.04, AreaRule::PerBox).is_err());
        assert!(label_faces(&[[1200.0, 0.0, 100.0, 5.0]], W, H, 0.04, AreaRule::PerBox).is_err());
        assert!(label_faces(&[], 0.0, H, 0.04, AreaRule::PerBox).is_err());
    }
}
