//! Pipeline configuration: one JSON document with a section per stage.

use std::path::{Path, PathBuf};

use emoxai::brainmap::BrainMapConfig;
use emoxai::decoder::{GridSpace, MlpConfig};
use emoxai::explainers::ImageExplainConfig;
use emoxai::frames::AreaRule;
use emoxai::preprocess::{FmriPrepConfig, FoldMode};
use emoxai::stats::{OverlapConfig, DEFAULT_N_PERM};
use emoxai::synth::SyntheticConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::fail::{CliError, Kind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct Config {
    /// Root seed. `--seed` also overwrites every section seed.
    pub seed: u64,
    pub synthetic: SyntheticConfig,
    pub fmri: FmriPrepConfig,
    pub folds: FoldConfig,
    pub decoder: MlpConfig,
    pub grid: GridSpace,
    pub brain_map: BrainMapConfig,
    pub null: NullConfig,
    pub significance: SignificanceConfig,
    pub spin: SpinConfig,
    pub frames: FramesConfig,
    pub image: ImageExplainConfig,
    pub overlap: OverlapConfig,
    pub predictor: PredictorConfig,
    pub render: RenderConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FoldConfig {
    pub k: usize,
    pub mode: FoldMode,
    pub seed: u64,
}

impl Default for FoldConfig {
    fn default() -> Self {
        Self {
            k: 5,
            mode: FoldMode::Shuffled,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NullConfig {
    pub n_shuffles: usize,
    pub seed: u64,
}

impl Default for NullConfig {
    fn default() -> Self {
        Self {
            n_shuffles: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignificanceConfig {
    pub alpha: f64,
}

impl Default for SignificanceConfig {
    fn default() -> Self {
        Self { alpha: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpinConfig {
    pub n_perm: usize,
    pub seed: u64,
}

impl Default for SpinConfig {
    fn default() -> Self {
        Self {
            n_perm: DEFAULT_N_PERM,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FramesConfig {
    /// Labels compared between consecutive frames.
    pub top_k: usize,
    /// A frame is dropped once it shares this many labels with the last kept one.
    pub overlap_threshold: usize,
    pub area_fraction: f64,
    pub area_rule: AreaRule,
    pub batch_size: usize,
}

impl Default for FramesConfig {
    fn default() -> Self {
        Self {
            top_k: 3,
            overlap_threshold: 1,
            area_fraction: 0.04,
            area_rule: AreaRule::PerBox,
            batch_size: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictorConfig {
    /// In-process toy predictor used when neither `--predictor-cmd` nor
    /// `--predictor-tcp` is given.
    pub builtin: Option<String>,
    pub timeout_ms: u64,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            builtin: None,
            timeout_ms: 30_000,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderConfig {
    /// `r g b` lines; the bundled table when absent.
    pub colormap: Option<PathBuf>,
}

impl Config {
    /// Reads `path` (or the defaults), applies `key.path=value` overrides and
    /// then the seed override.
    pub fn load(
        path: Option<&Path>,
        overrides: &[String],
        seed: Option<u64>,
    ) -> Result<Self, CliError> {
        let mut doc = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    CliError::new(Kind::MissingInput, format!("config {}: {e}", p.display()))
                })?;
                serde_json::from_str(&text).map_err(|e| {
                    CliError::new(Kind::Schema, format!("config {}: {e}", p.display()))
                })?
            }
            None => serde_json::to_value(Config::default()).expect("default config serializes"),
        };
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let mut cfg: Config = serde_json::from_value(doc.clone())
            .map_err(|e| CliError::new(Kind::Schema, format!("config: {e}")))?;
        // sections accept missing keys, so catch misspelt ones here
        let canonical = serde_json::to_value(&cfg).expect("config serializes");
        if let Some(key) = unknown_key(&doc, &canonical, "") {
            return Err(CliError::new(
                Kind::Schema,
                format!("config: unknown key {key:?}"),
            ));
        }
        if let Some(s) = seed {
            cfg.set_seed(s);
        }
        Ok(cfg)
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.synthetic.seed = seed;
        self.fmri.seed = seed;
        self.folds.seed = seed;
        self.decoder.seed = seed;
        self.grid.base.seed = seed;
        self.brain_map.seed = seed;
        self.null.seed = seed;
        self.spin.seed = seed;
    }

    /// Named sections as one JSON object, for manifests.
    pub fn sections(&self, names: &[&str]) -> Value {
        let full = serde_json::to_value(self).expect("config serializes");
        let mut out = serde_json::Map::new();
        for &n in names {
            out.insert(n.to_string(), full[n].clone());
        }
        Value::Object(out)
    }
}

fn unknown_key(given: &Value, known: &Value, prefix: &str) -> Option<String> {
    let (Value::Object(g), Value::Object(k)) = (given, known) else {
        return None;
    };
    g.iter().find_map(|(name, v)| {
        let path = if prefix.is_empty() {
            name.clone()
        } else {
            format!("{prefix}.{name}")
        };
        match k.get(name) {
            None => Some(path),
            Some(kv) => unknown_key(v, kv, &path),
        }
    })
}

fn apply_override(doc: &mut Value, spec: &str) -> Result<(), CliError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::new(Kind::Usage, format!("override {spec:?} is not key=value")))?;
    // bare words that are not JSON are taken as strings
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = node.as_object_mut().ok_or_else(|| {
            CliError::new(
                Kind::Schema,
                format!(
                    "override {key:?}: {} is not an object",
                    parts[..i].join(".")
                ),
            )
        })?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(serde_json::Map::new()));
    }
    unreachable!("split yields at least one part")
}
