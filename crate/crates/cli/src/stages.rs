//! Stage implementations. Each reads its inputs (defaulting to conventional
//! names in the output directory), writes outputs and a manifest.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::Args;
use emoxai::atlas::Atlas;
use emoxai::brainmap::{attribution_map, RowExplainer};
use emoxai::decoder::{
    evaluate, fixed_schedule, grid_search, load_model, save_model, train_folds, write_training_log,
    Evaluation, GridSearchResult, MlpConfig,
};
use emoxai::explainers::explain_image;
use emoxai::frames::{
    dedup_top_labels, frame_top_labels, label_faces, resample_frames, FaceLabel, FrameRecord,
};
use emoxai::io;
use emoxai::predictor::conformance::Transcript;
use emoxai::predictor::{builtin, ClientOptions, Predictor, ProtocolClient};
use emoxai::preprocess::{kfold_split, prepare_fmri, prepare_labels, FoldSplit};
use emoxai::render::{macro_area_table, render_heatmap, save_png, Colormap};
use emoxai::series::{AnnotationSeries, AttributionMap, RegionTimeSeries, SaliencyHeatmap};
use emoxai::stats::{
    attention_correlation_map, frame_tr_indices, gather_rows, ks_distance, null_importances_with,
    overlap_series, significance as region_significance, NullDistribution, SpinNull,
};
use emoxai::synth::generate;
use emoxai::{rng, Tensor};
use image::RgbImage;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::config::Config;
use crate::fail::{CliError, Kind};
use crate::manifest::Recorder;

pub struct Ctx {
    pub out: PathBuf,
    pub cfg: Config,
    pub predictor_cmd: Option<String>,
    pub predictor_tcp: Option<String>,
}

impl Ctx {
    /// `given`, or `name` inside the output directory; it must exist.
    fn input(&self, given: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
        let p = given.clone().unwrap_or_else(|| self.out.join(name));
        if !p.exists() {
            return Err(CliError::new(
                Kind::MissingInput,
                format!("missing input {}", p.display()),
            )
            .into());
        }
        Ok(p)
    }

    fn output(&self, name: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.out)
            .with_context(|| format!("creating {}", self.out.display()))?;
        Ok(self.out.join(name))
    }

    fn predictor(&self) -> Result<Box<dyn Predictor + Send>> {
        let opts = ClientOptions {
            timeout: Duration::from_millis(self.cfg.predictor.timeout_ms),
        };
        if let Some(cmd) = &self.predictor_cmd {
            return Ok(Box::new(ProtocolClient::spawn(cmd, opts)?));
        }
        if let Some(addr) = &self.predictor_tcp {
            return Ok(Box::new(ProtocolClient::connect_tcp(addr.as_str(), opts)?));
        }
        match &self.cfg.predictor.builtin {
            Some(kind) => Ok(builtin(kind, None)?),
            None => Err(CliError::new(
                Kind::Usage,
                "this stage needs --predictor-cmd, --predictor-tcp or predictor.builtin",
            )
            .into()),
        }
    }
}

/// Recording metadata of a subject: acquisition grid and movie geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub subject_id: String,
    pub tr_seconds: f64,
    pub n_times: usize,
    pub n_regions: usize,
    pub fps: f64,
    pub n_frames: usize,
    pub frame_width: usize,
    pub frame_height: usize,
    pub gaze_rate_hz: f64,
}

fn read_json<T: DeserializeOwned>(p: &Path) -> Result<T> {
    let f = File::open(p).with_context(|| format!("opening {}", p.display()))?;
    serde_json::from_reader(BufReader::new(f))
        .map_err(|e| CliError::new(Kind::Schema, format!("{}: {e}", p.display())).into())
}

fn write_json<T: Serialize>(p: &Path, v: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    fs::write(p, text).with_context(|| format!("writing {}", p.display()))
}

fn create(p: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(p).with_context(|| format!("creating {}", p.display()))?,
    ))
}

fn open(p: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(p).with_context(|| format!("opening {}", p.display()))?,
    ))
}

fn frame_name(i: usize) -> String {
    format!("frame_{i:05}.png")
}

fn load_regions(p: &Path, meta: &Meta) -> Result<RegionTimeSeries> {
    Ok(RegionTimeSeries::new(
        meta.subject_id.clone(),
        meta.tr_seconds,
        Tensor::load(p)?,
    )?)
}

fn load_annotations(p: &Path, meta: &Meta) -> Result<AnnotationSeries> {
    Ok(io::read_annotations(open(p)?, meta.tr_seconds)?)
}

/// Resets a directory output so stale files do not leak into its hash.
fn fresh_dir(p: &Path) -> Result<()> {
    if p.exists() {
        fs::remove_dir_all(p).with_context(|| format!("clearing {}", p.display()))?;
    }
    fs::create_dir_all(p)?;
    Ok(())
}

pub fn gen_synthetic(ctx: &Ctx) -> Result<()> {
    let c = &ctx.cfg.synthetic;
    let s = generate(c)?;
    let mut rec = Recorder::new(&ctx.out);

    let atlas = ctx.output("atlas.csv")?;
    s.atlas.save(&atlas)?;
    let ann = ctx.output("annotations.csv")?;
    io::write_annotations(create(&ann)?, &s.annotations)?;
    let regions = ctx.output("regions.xbt")?;
    s.regions.values().save(&regions)?;
    let meta = ctx.output("meta.json")?;
    write_json(
        &meta,
        &Meta {
            subject_id: c.subject_id.clone(),
            tr_seconds: c.tr_seconds,
            n_times: c.n_times,
            n_regions: c.n_regions,
            fps: 1.0 / c.tr_seconds,
            n_frames: c.n_frames,
            frame_width: c.frame_width,
            frame_height: c.frame_height,
            gaze_rate_hz: c.gaze_rate_hz,
        },
    )?;
    let truth = ctx.output("planted.json")?;
    write_json(
        &truth,
        &serde_json::json!({
            "target_emotion": c.target_emotion,
            "planted": s.planted,
            "state": s.state,
            "disk_centres": s.disk_centres,
        }),
    )?;
    let movie = ctx.output("movie")?;
    fresh_dir(&movie)?;
    for (i, f) in s.frames.iter().enumerate() {
        save_png(f, movie.join(frame_name(i)))?;
    }
    let gaze = ctx.output("gaze.jsonl")?;
    io::write_gaze(create(&gaze)?, &s.gaze)?;
    let faces = ctx.output("faces.jsonl")?;
    io::write_face_boxes(create(&faces)?, &s.face_boxes)?;

    for p in [&atlas, &ann, &regions, &meta, &truth, &movie, &gaze, &faces] {
        rec.output(p);
    }
    rec.finish(
        "gen-synthetic",
        ctx.cfg.seed,
        ctx.cfg.sections(&["synthetic"]),
    )?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct PrepAnnotations {
    #[arg(long)]
    annotations: Option<PathBuf>,
    #[arg(long)]
    meta: Option<PathBuf>,
}

pub fn prep_annotations(ctx: &Ctx, a: &PrepAnnotations) -> Result<()> {
    let ann_p = ctx.input(&a.annotations, "annotations.csv")?;
    let meta_p = ctx.input(&a.meta, "meta.json")?;
    let meta: Meta = read_json(&meta_p)?;
    let ann = load_annotations(&ann_p, &meta)?;
    let labels = prepare_labels(&ann, &ctx.cfg.fmri, meta.tr_seconds, meta.n_times)?;
    let out = ctx.output("labels.csv")?;
    io::write_labels(create(&out)?, &labels)?;
    let mut rec = Recorder::new(&ctx.out);
    rec.input(&ann_p);
    rec.input(&meta_p);
    rec.output(&out);
    rec.finish(
        "prep-annotations",
        ctx.cfg.seed,
        ctx.cfg.sections(&["fmri"]),
    )?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct PrepFmri {
    #[arg(long)]
    annotations: Option<PathBuf>,
    #[arg(long)]
    regions: Option<PathBuf>,
    #[arg(long)]
    meta: Option<PathBuf>,
}

pub fn prep_fmri(ctx: &Ctx, a: &PrepFmri) -> Result<()> {
    let ann_p = ctx.input(&a.annotations, "annotations.csv")?;
    let reg_p = ctx.input(&a.regions, "regions.xbt")?;
    let meta_p = ctx.input(&a.meta, "meta.json")?;
    let meta: Meta = read_json(&meta_p)?;
    let ds = prepare_fmri(
        &load_annotations(&ann_p, &meta)?,
        &load_regions(&reg_p, &meta)?,
        &ctx.cfg.fmri,
    )?;
    let out = ctx.output("dataset")?;
    fresh_dir(&out)?;
    io::save_dataset(&ds, &out)?;
    let (neg, pos) = ds.class_counts();
    eprintln!(
        "dataset: {} rows ({pos} positive, {neg} negative), {} regions",
        ds.n_rows(),
        ds.n_features()
    );
    let mut rec = Recorder::new(&ctx.out);
    rec.input(&ann_p);
    rec.input(&reg_p);
    rec.input(&meta_p);
    rec.output(&out);
    rec.finish("prep-fmri", ctx.cfg.seed, ctx.cfg.sections(&["fmri"]))?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct BuildFrames {
    /// Directory of `frame_NNNNN.png` movie frames.
    #[arg(long)]
    movie: Option<PathBuf>,
    #[arg(long)]
    meta: Option<PathBuf>,
    /// Face boxes; frames get no face label without them.
    #[arg(long)]
    faces: Option<PathBuf>,
}

pub fn build_frames(ctx: &Ctx, a: &BuildFrames) -> Result<()> {
    let movie = ctx.input(&a.movie, "movie")?;
    let meta_p = ctx.input(&a.meta, "meta.json")?;
    let meta: Meta = read_json(&meta_p)?;
    let faces_p = match &a.faces {
        Some(_) => Some(ctx.input(&a.faces, "")?),
        None => Some(ctx.out.join("faces.jsonl")).filter(|p| p.exists()),
    };
    let fc = &ctx.cfg.frames;

    let indices = resample_frames(meta.n_frames, meta.fps, meta.tr_seconds);
    let images: Vec<RgbImage> = indices
        .iter()
        .map(|&i| {
            let p = movie.join(frame_name(i));
            Ok(image::open(&p)
                .with_context(|| format!("reading {}", p.display()))?
                .to_rgb8())
        })
        .collect::<Result<_>>()?;
    let mut predictor = ctx.predictor()?;
    let sets = frame_top_labels(&mut predictor, &images, fc.top_k, fc.batch_size)?;
    let kept = dedup_top_labels(&sets, fc.overlap_threshold);

    let boxes: HashMap<usize, Vec<[f64; 4]>> = match &faces_p {
        Some(p) => io::read_face_boxes(open(p)?)?
            .into_iter()
            .map(|f| (f.frame, f.boxes))
            .collect(),
        None => HashMap::new(),
    };
    let movie_ref = crate::manifest::display_path(&movie, &ctx.out);
    let mut records = Vec::with_capacity(indices.len());
    for (pos, &i) in indices.iter().enumerate() {
        let t = i as f64 / meta.fps;
        let face_label: Option<FaceLabel> = match (&faces_p, boxes.get(&i)) {
            (None, _) => None,
            (Some(_), b) => Some(label_faces(
                b.map_or(&[][..], Vec::as_slice),
                meta.frame_width as f64,
                meta.frame_height as f64,
                fc.area_fraction,
                fc.area_rule,
            )?),
        };
        records.push(FrameRecord {
            frame_index: i,
            tr_index: (t / meta.tr_seconds).round() as usize,
            t_seconds: t,
            image_ref: format!("{movie_ref}/{}", frame_name(i)),
            retained: kept.binary_search(&pos).is_ok(),
            face_label,
        });
    }
    let out = ctx.output("frames.csv")?;
    io::write_frames(create(&out)?, &records)?;
    eprintln!(
        "frames: {} on the TR grid, {} retained",
        records.len(),
        kept.len()
    );

    let mut rec = Recorder::new(&ctx.out);
    rec.input(&movie);
    rec.input(&meta_p);
    if let Some(p) = &faces_p {
        rec.input(p);
    }
    rec.output(&out);
    let mut cfg = ctx.cfg.sections(&["frames"]);
    cfg["predictor"] = serde_json::json!({
        "cmd": ctx.predictor_cmd,
        "tcp": ctx.predictor_tcp,
        "builtin": ctx.cfg.predictor.builtin,
    });
    rec.finish("build-frames", ctx.cfg.seed, cfg)?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct TrainReport {
    evaluation: Evaluation,
    folds: FoldSplit,
    /// Config of the final model trained on every row.
    final_config: MlpConfig,
}

#[derive(Debug, Args)]
pub struct Train {
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Use the best config of a grid search instead of the decoder section.
    #[arg(long)]
    grid: Option<PathBuf>,
}

pub fn train(ctx: &Ctx, a: &Train) -> Result<()> {
    let ds_p = ctx.input(&a.dataset, "dataset")?;
    let ds = io::load_dataset(&ds_p)?;
    let grid_p = a
        .grid
        .as_ref()
        .map(|_| ctx.input(&a.grid, ""))
        .transpose()?;
    let decoder = match &grid_p {
        Some(p) => read_json::<GridSearchResult>(p)?.best,
        None => ctx.cfg.decoder.clone(),
    };
    let f = &ctx.cfg.folds;
    let folds = kfold_split(&ds, f.k, f.seed, f.mode)?;
    let models = train_folds(&ds, &folds, &decoder)?;
    let evaluation = evaluate(&models, &ds, &folds)?;
    let final_config = fixed_schedule(&decoder, &models)?;
    let model = emoxai::decoder::train(&ds, &final_config)?;
    eprintln!(
        "accuracy: in-sample {:.3}, out-of-sample {:.3}",
        evaluation.in_sample_acc, evaluation.out_sample_acc
    );

    let model_dir = ctx.output("model")?;
    fresh_dir(&model_dir)?;
    save_model(&model, &model_dir)?;
    let log = ctx.output("training_log.csv")?;
    write_training_log(&model, create(&log)?)?;
    let report = ctx.output("evaluation.json")?;
    write_json(
        &report,
        &TrainReport {
            evaluation,
            folds,
            final_config,
        },
    )?;

    let mut rec = Recorder::new(&ctx.out);
    rec.input(&ds_p);
    if let Some(p) = &grid_p {
        rec.input(p);
    }
    rec.output(&model_dir);
    rec.output(&log);
    rec.output(&report);
    let mut cfg = ctx.cfg.sections(&["folds"]);
    cfg["decoder"] = serde_json::to_value(&decoder)?;
    rec.finish("train", ctx.cfg.seed, cfg)?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct Gridsearch {
    #[arg(long)]
    dataset: Option<PathBuf>,
}

pub fn gridsearch(ctx: &Ctx, a: &Gridsearch) -> Result<()> {
    let ds_p = ctx.input(&a.dataset, "dataset")?;
    let ds = io::load_dataset(&ds_p)?;
    let f = &ctx.cfg.folds;
    let result = grid_search(&ds, &ctx.cfg.grid.configs(), f.k, f.seed, f.mode)?;
    eprintln!(
        "best: hidden {:?}, l2 {}",
        result.best.hidden_units, result.best.l2_lambda
    );
    let out = ctx.output("grid.json")?;
    write_json(&out, &result)?;
    let mut rec = Recorder::new(&ctx.out);
    rec.input(&ds_p);
    rec.output(&out);
    rec.finish(
        "gridsearch",
        ctx.cfg.seed,
        ctx.cfg.sections(&["folds", "grid"]),
    )?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ExplainTarget {
    /// Region attributions of the decoder.
    Brain,
    /// Saliency heatmaps of the predictor on retained frames.
    Frames,
}

#[derive(Debug, Args)]
pub struct Explain {
    #[arg(long, value_enum, default_value = "brain")]
    target: ExplainTarget,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    atlas: Option<PathBuf>,
    #[arg(long)]
    frames: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
struct AttributionRow {
    sample: usize,
    row: usize,
    t_index: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct HeatmapRow {
    frame_index: usize,
    t_seconds: f64,
    heatmap: String,
}

fn subject_of(ds: &emoxai::preprocess::Dataset) -> String {
    ds.provenance()
        .first()
        .map(|p| p.subject.clone())
        .unwrap_or_default()
}

pub fn explain(ctx: &Ctx, a: &Explain) -> Result<()> {
    match a.target {
        ExplainTarget::Brain => explain_brain(ctx, a),
        ExplainTarget::Frames => explain_frames(ctx, a),
    }
}

fn explain_brain(ctx: &Ctx, a: &Explain) -> Result<()> {
    let ds_p = ctx.input(&a.dataset, "dataset")?;
    let model_p = ctx.input(&a.model, "model")?;
    let atlas_p = ctx.input(&a.atlas, "atlas.csv")?;
    let ds = io::load_dataset(&ds_p)?;
    let model = load_model(&model_p)?;
    let atlas = Atlas::load(&atlas_p)?;
    let bc = &ctx.cfg.brain_map;
    let ex = RowExplainer::new(&ds, bc)?;
    let map = attribution_map(
        &ex,
        &model,
        bc,
        &ctx.cfg.fmri.target_emotion,
        &subject_of(&ds),
    )?;

    let map_p = ctx.output("brain_map.csv")?;
    io::write_brain_map(create(&map_p)?, &map, &atlas, None)?;
    let attr_p = ctx.output("attributions.xbt")?;
    map.per_sample
        .as_ref()
        .expect("attribution_map keeps per-sample values")
        .save(&attr_p)?;
    let rows_p = ctx.output("attribution_rows.csv")?;
    let mut w = csv::Writer::from_writer(create(&rows_p)?);
    for (sample, &row) in ex.rows().iter().enumerate() {
        w.serialize(AttributionRow {
            sample,
            row,
            t_index: ds.provenance()[row].t_index,
        })?;
    }
    w.flush()?;

    let mut rec = Recorder::new(&ctx.out);
    rec.input(&ds_p);
    rec.input(&model_p);
    rec.input(&atlas_p);
    rec.output(&map_p);
    rec.output(&attr_p);
    rec.output(&rows_p);
    rec.finish(
        "explain",
        ctx.cfg.seed,
        ctx.cfg.sections(&["brain_map", "fmri"]),
    )?;
    Ok(())
}

fn read_frames(p: &Path) -> Result<Vec<FrameRecord>> {
    Ok(io::read_frames(open(p)?)?)
}

/// `image_ref` is relative to the directory holding the frame table.
fn resolve_ref(table: &Path, r: &str) -> PathBuf {
    let p = Path::new(r);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        table.parent().unwrap_or(Path::new(".")).join(p)
    }
}

fn explain_frames(ctx: &Ctx, a: &Explain) -> Result<()> {
    let frames_p = ctx.input(&a.frames, "frames.csv")?;
    let frames: Vec<FrameRecord> = read_frames(&frames_p)?
        .into_iter()
        .filter(|f| f.retained)
        .collect();
    let mut predictor = ctx.predictor()?;
    let dir = ctx.output("heatmaps")?;
    fresh_dir(&dir)?;
    let mut rows = Vec::with_capacity(frames.len());
    let mut rec = Recorder::new(&ctx.out);
    rec.input(&frames_p);
    for f in &frames {
        let img_p = resolve_ref(&frames_p, &f.image_ref);
        let img = image::open(&img_p)
            .with_context(|| format!("reading {}", img_p.display()))?
            .to_rgb8();
        let seed = rng::derive_seed(ctx.cfg.seed, &[f.frame_index as u64]);
        let e = explain_image(&mut predictor, &img, f.frame_index, &ctx.cfg.image, seed)
            .with_context(|| format!("explaining frame {}", f.frame_index))?;
        let name = format!("frame_{:05}.xbt", f.frame_index);
        e.heatmap.scores().save(dir.join(&name))?;
        rows.push(HeatmapRow {
            frame_index: f.frame_index,
            t_seconds: f.t_seconds,
            heatmap: format!("heatmaps/{name}"),
        });
    }
    let table = ctx.output("heatmaps.csv")?;
    let mut w = csv::Writer::from_writer(create(&table)?);
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    rec.output(&dir);
    rec.output(&table);
    let mut cfg = ctx.cfg.sections(&["image"]);
    cfg["predictor"] = serde_json::json!({
        "cmd": ctx.predictor_cmd,
        "tcp": ctx.predictor_tcp,
        "builtin": ctx.cfg.predictor.builtin,
    });
    rec.finish("explain-frames", ctx.cfg.seed, cfg)?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct Nullmodel {
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// The final model; its training config is reused for every shuffle.
    #[arg(long)]
    model: Option<PathBuf>,
}

pub fn nullmodel(ctx: &Ctx, a: &Nullmodel) -> Result<()> {
    let ds_p = ctx.input(&a.dataset, "dataset")?;
    let model_p = ctx.input(&a.model, "model")?;
    let ds = io::load_dataset(&ds_p)?;
    let model = load_model(&model_p)?;
    let bc = &ctx.cfg.brain_map;
    let ex = RowExplainer::new(&ds, bc)?;
    let n = &ctx.cfg.null;
    let null = null_importances_with(&ds, &model.config, &ex, bc.signed, n.n_shuffles, n.seed)?;
    let out = ctx.output("null.csv")?;
    null.write_csv(create(&out)?)?;
    let mut rec = Recorder::new(&ctx.out);
    rec.input(&ds_p);
    rec.input(&model_p);
    rec.output(&out);
    rec.finish(
        "nullmodel",
        ctx.cfg.seed,
        ctx.cfg.sections(&["brain_map", "null"]),
    )?;
    Ok(())
}

fn load_map(p: &Path) -> Result<(Vec<io::BrainMapRow>, AttributionMap)> {
    let rows = io::read_brain_map(open(p)?)?;
    let map = AttributionMap {
        model_tag: String::new(),
        explainer_tag: String::new(),
        subject_id: String::new(),
        region_scores: io::brain_map_scores(&rows),
        per_sample: None,
    };
    Ok((rows, map))
}

#[derive(Debug, Args)]
pub struct Significance {
    #[arg(long)]
    brain_map: Option<PathBuf>,
    #[arg(long)]
    null: Option<PathBuf>,
    #[arg(long)]
    atlas: Option<PathBuf>,
}

pub fn significance(ctx: &Ctx, a: &Significance) -> Result<()> {
    let map_p = ctx.input(&a.brain_map, "brain_map.csv")?;
    let null_p = ctx.input(&a.null, "null.csv")?;
    let atlas_p = ctx.input(&a.atlas, "atlas.csv")?;
    let (_, map) = load_map(&map_p)?;
    let null = NullDistribution::read_csv(open(&null_p)?, ctx.cfg.null.seed)?;
    let atlas = Atlas::load(&atlas_p)?;
    let sig = region_significance(&map, &null, ctx.cfg.significance.alpha)?;
    let n_sig = sig.iter().filter(|s| s.significant).count();
    eprintln!("{n_sig} of {} regions significant", sig.len());
    let out = ctx.output("brain_map_significance.csv")?;
    io::write_brain_map(create(&out)?, &map, &atlas, Some(&sig))?;
    let mut rec = Recorder::new(&ctx.out);
    rec.input(&map_p);
    rec.input(&null_p);
    rec.input(&atlas_p);
    rec.output(&out);
    rec.finish(
        "significance",
        ctx.cfg.seed,
        ctx.cfg.sections(&["significance"]),
    )?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct Spin {
    /// First brain-map table.
    #[arg(long)]
    a: Option<PathBuf>,
    /// Second brain-map table.
    #[arg(long)]
    b: Option<PathBuf>,
    #[arg(long)]
    atlas: Option<PathBuf>,
}

pub fn spin(ctx: &Ctx, a: &Spin) -> Result<()> {
    let a_p = ctx.input(&a.a, "brain_map.csv")?;
    let b_p = ctx.input(&a.b, "attn_map.csv")?;
    let atlas_p = ctx.input(&a.atlas, "atlas.csv")?;
    let atlas = Atlas::load(&atlas_p)?;
    let (_, ma) = load_map(&a_p)?;
    let (_, mb) = load_map(&b_p)?;
    let s = &ctx.cfg.spin;
    let result =
        SpinNull::new(&atlas, s.n_perm, s.seed)?.test(&ma.region_scores, &mb.region_scores)?;
    eprintln!("rho {:.4}, spin p {:.4}", result.rho, result.p);
    let out = ctx.output("spin.json")?;
    write_json(&out, &result)?;
    let mut rec = Recorder::new(&ctx.out);
    rec.input(&a_p);
    rec.input(&b_p);
    rec.input(&atlas_p);
    rec.output(&out);
    rec.finish("spin", ctx.cfg.seed, ctx.cfg.sections(&["spin"]))?;
    Ok(())
}

fn read_heatmaps(p: &Path) -> Result<Vec<(HeatmapRow, SaliencyHeatmap)>> {
    let mut out = Vec::new();
    for row in csv::Reader::from_reader(open(p)?).deserialize::<HeatmapRow>() {
        let row = row?;
        let t = Tensor::load(resolve_ref(p, &row.heatmap))?;
        let h = SaliencyHeatmap::new(row.frame_index, t)?;
        out.push((row, h));
    }
    Ok(out)
}

#[derive(Debug, Args)]
pub struct Overlap {
    /// Table written by `explain --target frames`.
    #[arg(long)]
    heatmaps: Option<PathBuf>,
    #[arg(long)]
    gaze: Option<PathBuf>,
    #[arg(long)]
    meta: Option<PathBuf>,
}

fn load_gaze(p: &Path, meta: &Meta) -> Result<emoxai::series::GazeTrace> {
    Ok(io::read_gaze(
        open(p)?,
        &meta.subject_id,
        meta.gaze_rate_hz,
        meta.frame_width,
        meta.frame_height,
    )?)
}

pub fn overlap(ctx: &Ctx, a: &Overlap) -> Result<()> {
    let h_p = ctx.input(&a.heatmaps, "heatmaps.csv")?;
    let gaze_p = ctx.input(&a.gaze, "gaze.jsonl")?;
    let meta_p = ctx.input(&a.meta, "meta.json")?;
    let meta: Meta = read_json(&meta_p)?;
    let gaze = load_gaze(&gaze_p, &meta)?;
    let maps = read_heatmaps(&h_p)?;
    let pairs: Vec<(f64, &SaliencyHeatmap)> = maps.iter().map(|(r, h)| (r.t_seconds, h)).collect();
    let series = overlap_series(&pairs, &gaze, &ctx.cfg.overlap)?;
    let out = ctx.output("overlap.csv")?;
    io::write_overlap(create(&out)?, &series)?;
    let mut rec = Recorder::new(&ctx.out);
    rec.input(&h_p);
    rec.input(&ctx.out.join("heatmaps"));
    rec.input(&gaze_p);
    rec.input(&meta_p);
    rec.output(&out);
    rec.finish("overlap", ctx.cfg.seed, ctx.cfg.sections(&["overlap"]))?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct AttnMap {
    #[arg(long)]
    overlap: Option<PathBuf>,
    #[arg(long)]
    attributions: Option<PathBuf>,
    #[arg(long)]
    attribution_rows: Option<PathBuf>,
    #[arg(long)]
    meta: Option<PathBuf>,
    #[arg(long)]
    atlas: Option<PathBuf>,
}

pub fn attn_map(ctx: &Ctx, a: &AttnMap) -> Result<()> {
    let ov_p = ctx.input(&a.overlap, "overlap.csv")?;
    let attr_p = ctx.input(&a.attributions, "attributions.xbt")?;
    let rows_p = ctx.input(&a.attribution_rows, "attribution_rows.csv")?;
    let meta_p = ctx.input(&a.meta, "meta.json")?;
    let atlas_p = ctx.input(&a.atlas, "atlas.csv")?;
    let meta: Meta = read_json(&meta_p)?;
    let atlas = Atlas::load(&atlas_p)?;
    let series = io::read_overlap(open(&ov_p)?, ctx.cfg.overlap.window_s)?;
    let attr = Tensor::load(&attr_p)?;
    let row_t: Vec<usize> = csv::Reader::from_reader(open(&rows_p)?)
        .deserialize::<AttributionRow>()
        .map(|r| r.map(|r| r.t_index))
        .collect::<std::result::Result<_, _>>()?;
    let trs = frame_tr_indices(
        &series.times,
        ctx.cfg.fmri.lag_s,
        meta.tr_seconds,
        meta.n_times,
    );
    let (per_frame, present) = gather_rows(&attr, &row_t, &trs)?;
    let overlaps: Vec<Option<f64>> = series
        .scores
        .iter()
        .zip(&present)
        .map(|(s, &ok)| s.filter(|_| ok))
        .collect();
    let n_aligned = overlaps.iter().flatten().count();
    eprintln!(
        "{n_aligned} of {} frames have both overlap and attributions",
        overlaps.len()
    );
    let rho = attention_correlation_map(&overlaps, &per_frame)?;
    let map = AttributionMap {
        model_tag: ctx.cfg.fmri.target_emotion.clone(),
        explainer_tag: "attention".into(),
        subject_id: meta.subject_id.clone(),
        region_scores: rho,
        per_sample: None,
    };
    let out = ctx.output("attn_map.csv")?;
    io::write_brain_map(create(&out)?, &map, &atlas, None)?;
    let mut rec = Recorder::new(&ctx.out);
    for p in [&ov_p, &attr_p, &rows_p, &meta_p, &atlas_p] {
        rec.input(p);
    }
    rec.output(&out);
    let mut cfg = ctx.cfg.sections(&["overlap"]);
    cfg["lag_s"] = serde_json::json!(ctx.cfg.fmri.lag_s);
    rec.finish("attn-map", ctx.cfg.seed, cfg)?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct Ks {
    /// Brain-map table whose scores form the first sample.
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
}

#[derive(Debug, Serialize)]
struct KsReport {
    d: f64,
    n_a: usize,
    n_b: usize,
    /// Regions without a finite score (constant attribution columns).
    dropped_a: usize,
    dropped_b: usize,
}

pub fn ks(ctx: &Ctx, a: &Ks) -> Result<()> {
    let a_p = ctx.input(&Some(a.a.clone()), "")?;
    let b_p = ctx.input(&Some(a.b.clone()), "")?;
    let finite = |p: &Path| -> Result<(Vec<f64>, usize)> {
        let (_, m) = load_map(p)?;
        let n = m.region_scores.len();
        let v: Vec<f64> = m
            .region_scores
            .into_iter()
            .filter(|v| v.is_finite())
            .collect();
        let dropped = n - v.len();
        Ok((v, dropped))
    };
    let (sa, da) = finite(&a_p)?;
    let (sb, db) = finite(&b_p)?;
    let report = KsReport {
        d: ks_distance(&sa, &sb)?,
        n_a: sa.len(),
        n_b: sb.len(),
        dropped_a: da,
        dropped_b: db,
    };
    eprintln!("KS distance {:.4}", report.d);
    let out = ctx.output("ks.json")?;
    write_json(&out, &report)?;
    let mut rec = Recorder::new(&ctx.out);
    rec.input(&a_p);
    rec.input(&b_p);
    rec.output(&out);
    rec.finish("ks", ctx.cfg.seed, serde_json::json!({}))?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct Render {
    /// `H × W` score tensor to colour.
    #[arg(
        long,
        conflicts_with = "brain_map",
        required_unless_present = "brain_map"
    )]
    heatmap: Option<PathBuf>,
    /// Brain-map table to summarize by macro area.
    #[arg(long)]
    brain_map: Option<PathBuf>,
    #[arg(long)]
    atlas: Option<PathBuf>,
    /// Gaze trace to overlay; needs `--time`.
    #[arg(long, requires = "time")]
    gaze: Option<PathBuf>,
    #[arg(long)]
    meta: Option<PathBuf>,
    /// Frame time in seconds; gaze within the overlap window is drawn.
    #[arg(long)]
    time: Option<f64>,
    /// Output file; defaults to the input name with `.png` or `.md`.
    #[arg(long)]
    output: Option<PathBuf>,
}

pub fn render(ctx: &Ctx, a: &Render) -> Result<()> {
    let mut rec = Recorder::new(&ctx.out);
    let stem = |p: &Path| {
        p.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    };
    let out = if let Some(h) = &a.heatmap {
        let h_p = ctx.input(&Some(h.clone()), "")?;
        rec.input(&h_p);
        let scores = Tensor::load(&h_p)?;
        let cmap = match &ctx.cfg.render.colormap {
            Some(p) => {
                let p = ctx.input(&Some(p.clone()), "")?;
                rec.input(&p);
                Colormap::parse(&fs::read_to_string(&p)?)?
            }
            None => Colormap::inferno().clone(),
        };
        let mut points = Vec::new();
        if let (Some(g), Some(t)) = (&a.gaze, a.time) {
            let g_p = ctx.input(&Some(g.clone()), "")?;
            let meta_p = ctx.input(&a.meta, "meta.json")?;
            let meta: Meta = read_json(&meta_p)?;
            let gaze = load_gaze(&g_p, &meta)?;
            let half = ctx.cfg.overlap.window_s / 2.0;
            points = gaze
                .window(t - half, t + half)
                .iter()
                .filter(|s| s.valid)
                .map(|s| (s.x_px, s.y_px))
                .collect();
            rec.input(&g_p);
            rec.input(&meta_p);
        }
        let img = render_heatmap(&scores, &cmap, &points)?;
        let out = match &a.output {
            Some(p) => p.clone(),
            None => ctx.output(&format!("{}.png", stem(&h_p)))?,
        };
        save_png(&img, &out)?;
        out
    } else {
        let m_p = ctx.input(&a.brain_map, "brain_map.csv")?;
        let atlas_p = ctx.input(&a.atlas, "atlas.csv")?;
        let atlas = Atlas::load(&atlas_p)?;
        let (_, mut map) = load_map(&m_p)?;
        map.model_tag = ctx.cfg.fmri.target_emotion.clone();
        map.explainer_tag = ctx.cfg.brain_map.explainer.tag().to_string();
        let table = macro_area_table(&map, &atlas)?;
        let out = match &a.output {
            Some(p) => p.clone(),
            None => ctx.output(&format!("{}.md", stem(&m_p)))?,
        };
        fs::write(&out, table)?;
        rec.input(&m_p);
        rec.input(&atlas_p);
        out
    };
    rec.output(&out);
    let mut cfg = ctx.cfg.sections(&["render"]);
    cfg["window_s"] = serde_json::json!(ctx.cfg.overlap.window_s);
    rec.finish("render", ctx.cfg.seed, cfg)?;
    Ok(())
}

pub fn conformance(ctx: &Ctx, golden: Option<&str>) -> Result<()> {
    let Some(cmd) = &ctx.predictor_cmd else {
        bail!(CliError::new(
            Kind::Usage,
            "conformance needs --predictor-cmd"
        ));
    };
    let t = Transcript::bundled();
    let out = t.run_command(cmd, golden)?;
    let stdout = std::io::stdout();
    let mut w = stdout.lock();
    let mut failed = 0;
    for o in &out {
        if o.passed() {
            writeln!(w, "ok   step {}", o.step)?;
        } else {
            failed += 1;
            writeln!(w, "FAIL step {}: {}", o.step, o.failures.join("; "))?;
        }
    }
    writeln!(w, "{}/{} steps passed", out.len() - failed, out.len())?;
    if failed > 0 {
        bail!(CliError::new(
            Kind::Conformance,
            format!("{failed} transcript steps failed")
        ));
    }
    Ok(())
}
