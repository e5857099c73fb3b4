//! Tabular and line-delimited file formats.
//!
//! | data | format |
//! |---|---|
//! | annotations | CSV `annotator,t_index,emotion,value` |
//! | binary labels | CSV `t_index,label,usable` |
//! | datasets | `features.xbt` + `labels.csv` (`row,label`) + `provenance.csv` (`row,subject,t_index`) |
//! | gaze | JSON lines `{"t","x","y","valid"}` |
//! | face boxes | JSON lines `{"frame","boxes":[[x,y,w,h],...]}` |
//! | frames | CSV with the [`FrameRecord`] fields |
//! | brain maps | CSV `region_id,name,macro_area,score,p,significant` |
//! | overlap series | CSV `frame_index,t_seconds,overlap` (empty when masked) |

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::atlas::Atlas;
use crate::frames::{FaceBoxes, FrameRecord};
use crate::preprocess::{Dataset, Provenance};
use crate::series::{AnnotationSeries, AttributionMap, BinaryLabelSeries, GazeSample, GazeTrace};
use crate::stats::{OverlapSeries, RegionSignificance};
use crate::{Error, Result, Tensor};

#[derive(Debug, Serialize, Deserialize)]
struct AnnotationRow {
    annotator: usize,
    t_index: usize,
    emotion: String,
    value: f32,
}

/// Reads long-format annotations. Emotions keep first-seen order; every
/// (annotator, t, emotion) cell must appear exactly once.
pub fn read_annotations<R: Read>(r: R, tr_seconds: f64) -> Result<AnnotationSeries> {
    let mut emotions: Vec<String> = Vec::new();
    let mut cells: BTreeMap<(usize, usize, usize), f32> = BTreeMap::new();
    let (mut a_len, mut t_len) = (0, 0);
    for (line, row) in csv::Reader::from_reader(r)
        .deserialize::<AnnotationRow>()
        .enumerate()
    {
        let row = row?;
        let e = match emotions.iter().position(|e| *e == row.emotion) {
            Some(e) => e,
            None => {
                emotions.push(row.emotion.clone());
                emotions.len() - 1
            }
        };
        if cells
            .insert((row.annotator, row.t_index, e), row.value)
            .is_some()
        {
            return Err(Error::invalid(format!(
                "duplicate value for annotator {}, t {}, {}",
                row.annotator, row.t_index, row.emotion
            ))
            .at("row", line));
        }
        a_len = a_len.max(row.annotator + 1);
        t_len = t_len.max(row.t_index + 1);
    }
    let e_len = emotions.len();
    if cells.len() != a_len * t_len * e_len {
        return Err(Error::invalid(format!(
            "annotation grid incomplete: {} of {} cells",
            cells.len(),
            a_len * t_len * e_len
        )));
    }
    // BTreeMap order is (annotator, t, emotion), the tensor's row-major order
    let data = cells.into_values().collect();
    AnnotationSeries::new(
        emotions,
        tr_seconds,
        Tensor::new(vec![a_len, t_len, e_len], data)?,
    )
}

pub fn write_annotations<W: Write>(w: W, s: &AnnotationSeries) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for a in 0..s.n_annotators() {
        for t in 0..s.n_times() {
            for (e, name) in s.emotions.iter().enumerate() {
                out.serialize(AnnotationRow {
                    annotator: a,
                    t_index: t,
                    emotion: name.clone(),
                    value: s.get(a, t, e),
                })?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct LabelRow {
    t_index: usize,
    label: u8,
    usable: bool,
}

pub fn write_labels<W: Write>(w: W, labels: &BinaryLabelSeries) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for (t, (&label, &usable)) in labels.values.iter().zip(&labels.usable).enumerate() {
        out.serialize(LabelRow {
            t_index: t,
            label,
            usable,
        })?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_labels<R: Read>(r: R, name: &str, tr_seconds: f64) -> Result<BinaryLabelSeries> {
    let mut values = Vec::new();
    let mut usable = Vec::new();
    for (line, row) in csv::Reader::from_reader(r)
        .deserialize::<LabelRow>()
        .enumerate()
    {
        let row = row?;
        if row.t_index != line {
            return Err(
                Error::invalid("label rows must be consecutive from t_index 0").at("row", line),
            );
        }
        values.push(row.label);
        usable.push(row.usable);
    }
    BinaryLabelSeries::new(name, tr_seconds, values, usable)
}

#[derive(Debug, Serialize, Deserialize)]
struct DatasetLabelRow {
    row: usize,
    label: u8,
}

#[derive(Debug, Serialize, Deserialize)]
struct ProvenanceRow {
    row: usize,
    subject: String,
    t_index: usize,
}

pub fn save_dataset(ds: &Dataset, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    ds.features().save(dir.join("features.xbt"))?;
    let mut labels = csv::Writer::from_path(dir.join("labels.csv"))?;
    for (row, &label) in ds.labels().iter().enumerate() {
        labels.serialize(DatasetLabelRow { row, label })?;
    }
    labels.flush()?;
    let mut prov = csv::Writer::from_path(dir.join("provenance.csv"))?;
    for (row, p) in ds.provenance().iter().enumerate() {
        prov.serialize(ProvenanceRow {
            row,
            subject: p.subject.clone(),
            t_index: p.t_index,
        })?;
    }
    prov.flush()?;
    Ok(())
}

pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();
    let features = Tensor::load(dir.join("features.xbt"))?;
    let labels: Vec<u8> = read_rows::<DatasetLabelRow>(&dir.join("labels.csv"))?
        .into_iter()
        .map(|r| r.label)
        .collect();
    let provenance = read_rows::<ProvenanceRow>(&dir.join("provenance.csv"))?
        .into_iter()
        .map(|r| Provenance {
            subject: r.subject,
            t_index: r.t_index,
        })
        .collect();
    Dataset::new(features, labels, provenance)
}

fn read_rows<T: DeserializeOwned + HasRow>(path: &Path) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, row) in csv::Reader::from_path(path)?.deserialize::<T>().enumerate() {
        let row = row?;
        if row.row() != i {
            return Err(Error::invalid(format!(
                "{}: rows must be numbered from 0 in order",
                path.display()
            ))
            .at("row", i));
        }
        out.push(row);
    }
    Ok(out)
}

trait HasRow {
    fn row(&self) -> usize;
}

impl HasRow for DatasetLabelRow {
    fn row(&self) -> usize {
        self.row
    }
}

impl HasRow for ProvenanceRow {
    fn row(&self) -> usize {
        self.row
    }
}

/// One JSON value per non-empty line.
pub fn read_jsonl<T: DeserializeOwned, R: Read>(r: R) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::from(e).at("line", i + 1))?);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize, W: Write>(mut w: W, items: &[T]) -> Result<()> {
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_gaze<R: Read>(
    r: R,
    subject_id: &str,
    sample_rate_hz: f64,
    frame_width: usize,
    frame_height: usize,
) -> Result<GazeTrace> {
    let samples: Vec<GazeSample> = read_jsonl(r)?;
    GazeTrace::new(
        subject_id,
        sample_rate_hz,
        frame_width,
        frame_height,
        samples,
    )
}

pub fn write_gaze<W: Write>(w: W, gaze: &GazeTrace) -> Result<()> {
    write_jsonl(w, gaze.samples())
}

pub fn read_face_boxes<R: Read>(r: R) -> Result<Vec<FaceBoxes>> {
    read_jsonl(r)
}

pub fn write_face_boxes<W: Write>(w: W, boxes: &[FaceBoxes]) -> Result<()> {
    write_jsonl(w, boxes)
}

pub fn write_frames<W: Write>(w: W, frames: &[FrameRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for f in frames {
        out.serialize(f)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_frames<R: Read>(r: R) -> Result<Vec<FrameRecord>> {
    csv::Reader::from_reader(r)
        .deserialize()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| Error::from(e).at("row", i)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrainMapRow {
    pub region_id: usize,
    pub name: String,
    pub macro_area: String,
    pub score: f64,
    pub p: Option<f64>,
    pub significant: Option<bool>,
}

/// Brain-map table; `p` and `significant` stay empty without a significance run.
pub fn write_brain_map<W: Write>(
    w: W,
    map: &AttributionMap,
    atlas: &Atlas,
    significance: Option<&[RegionSignificance]>,
) -> Result<()> {
    if map.region_scores.len() != atlas.len() {
        return Err(Error::DimensionMismatch {
            expected: atlas.len(),
            actual: map.region_scores.len(),
        });
    }
    if let Some(s) = significance {
        if s.len() != atlas.len() {
            return Err(Error::DimensionMismatch {
                expected: atlas.len(),
                actual: s.len(),
            });
        }
    }
    let mut out = csv::Writer::from_writer(w);
    for (r, region) in atlas.regions().iter().enumerate() {
        let sig = significance.map(|s| s[r]);
        out.serialize(BrainMapRow {
            region_id: region.id,
            name: region.name.clone(),
            macro_area: region.macro_area.clone(),
            score: map.region_scores[r],
            p: sig.map(|s| s.p),
            significant: sig.map(|s| s.significant),
        })?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_brain_map<R: Read>(r: R) -> Result<Vec<BrainMapRow>> {
    let rows: Vec<BrainMapRow> = csv::Reader::from_reader(r)
        .deserialize()
        .collect::<std::result::Result<_, _>>()?;
    if let Some(i) = rows
        .iter()
        .enumerate()
        .position(|(i, row)| row.region_id != i)
    {
        return Err(
            Error::invalid("brain-map rows must be ordered by region id from 0").at("row", i),
        );
    }
    Ok(rows)
}

/// Region scores from a brain-map table.
pub fn brain_map_scores(rows: &[BrainMapRow]) -> Vec<f64> {
    rows.iter().map(|r| r.score).collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct OverlapRow {
    frame_index: usize,
    t_seconds: f64,
    overlap: Option<f64>,
}

pub fn write_overlap<W: Write>(w: W, s: &OverlapSeries) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for ((&frame_index, &t_seconds), &overlap) in
        s.frame_indices.iter().zip(&s.times).zip(&s.scores)
    {
        out.serialize(OverlapRow {
            frame_index,
            t_seconds,
            overlap,
        })?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_overlap<R: Read>(r: R, window_s: f64) -> Result<OverlapSeries> {
    let mut s = OverlapSeries {
        frame_indices: Vec::new(),
        times: Vec::new(),
        scores: Vec::new(),
        window_s,
    };
    for row in csv::Reader::from_reader(r).deserialize::<OverlapRow>() {
        let row = row?;
        s.frame_indices.push(row.frame_index);
        s.times.push(row.t_seconds);
        s.scores.push(row.overlap);
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn annotations_roundtrip() {
        let csv = "annotator,t_index,emotion,value\n\
                   0,0,fear,1\n0,0,joy,2\n0,1,fear,3\n0,1,joy,0\n\
                   1,1,joy,5\n1,0,fear,0\n1,0,joy,1\n1,1,fear,4\n";
        let s = read_annotations(csv.as_bytes(), 2.0).unwrap();
        assert_eq!(s.emotions, vec!["fear", "joy"]);
        assert_eq!(s.get(1, 1, 1), 5.0);
        assert_eq!(s.get(0, 1, 0), 3.0);
        let mut buf = Vec::new();
        write_annotations(&mut buf, &s).unwrap();
        assert_eq!(read_annotations(buf.as_slice(), 2.0).unwrap(), s);
    }

    #[test]
    fn incomplete_annotations_rejected() {
        let csv = "annotator,t_index,emotion,value\n0,0,fear,1\n0,0,joy,2\n0,1,fear,3\n";
        assert!(read_annotations(csv.as_bytes(), 2.0).is_err());
        let dup = "annotator,t_index,emotion,value\n0,0,fear,1\n0,0,fear,2\n";
        assert!(read_annotations(dup.as_bytes(), 2.0).is_err());
    }

    #[test]
    fn dataset_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let ds =
            Dataset::from_rows("s", &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], 2, vec![0, 1, 1]).unwrap();
        save_dataset(&ds, dir.path()).unwrap();
        assert_eq!(load_dataset(dir.path()).unwrap(), ds);
    }

    #[test]
    fn gaze_and_faces_jsonl() {
        let text = "{\"t\":0.0,\"x\":1.5,\"y\":2.0,\"valid\":true}\n\n{\"t\":0.02,\"x\":99,\"y\":2,\"valid\":true}\n";
        let g = read_gaze(text.as_bytes(), "s", 50.0, 10, 10).unwrap();
        assert_eq!(g.samples().len(), 2);
        assert!(!g.samples()[1].valid);
        let faces = read_face_boxes("{\"frame\":3,\"boxes\":[[1,2,3,4]]}\n".as_bytes()).unwrap();
        assert_eq!(faces[0].frame, 3);
        assert_eq!(faces[0].boxes[0], [1.0, 2.0, 3.0, 4.0]);
        let err = read_face_boxes("{\"frame\":1}\nnot json\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line"), "{err}");
    }

    #[test]
    fn brain_map_table() {
        let atlas = Atlas::synthetic(4).unwrap();
        let map = AttributionMap {
            model_tag: "fear".into(),
            explainer_tag: "lime".into(),
            subject_id: "s".into(),
            region_scores: vec![0.5, 0.1, 0.2, 0.0],
            per_sample: None,
        };
        let mut buf = Vec::new();
        write_brain_map(&mut buf, &map, &atlas, None).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("region_id,name,macro_area,score,p,significant\n"));
        let rows = read_brain_map(text.as_bytes()).unwrap();
        assert_eq!(brain_map_scores(&rows), map.region_scores);
        assert_eq!(rows[0].p, None);
        let sig = vec![
            RegionSignificance {
                p: 0.01,
                significant: true
            };
            4
        ];
        let mut buf = Vec::new();
        write_brain_map(&mut buf, &map, &atlas, Some(&sig)).unwrap();
        assert_eq!(
            read_brain_map(buf.as_slice()).unwrap()[2].significant,
            Some(true)
        );
    }

    #[test]
    fn overlap_masked_rows() {
        let s = OverlapSeries {
            frame_indices: vec![0, 48],
            times: vec![0.0, 2.0],
            scores: vec![Some(0.75), None],
            window_s: 1.0,
        };
        let mut buf = Vec::new();
        write_overlap(&mut buf, &s).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "frame_index,t_seconds,overlap\n0,0.0,0.75\n48,2.0,\n"
        );
        assert_eq!(read_overlap(buf.as_slice(), 1.0).unwrap(), s);
    }
}
