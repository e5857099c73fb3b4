//! Model files: a JSON header plus one `.xbt` tensor per weight matrix and
//! bias vector, all inside one directory.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{EpochRecord, MlpConfig, MlpModel, Standardizer};
use super::network::Network;
use crate::{Error, Result, Tensor};

const HEADER: &str = "model.json";
const FORMAT: &str = "emoxai-mlp";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    sizes: Vec<usize>,
    config: MlpConfig,
    standardizer: Standardizer,
    best_epoch: usize,
    history: Vec<EpochRecord>,
    tensors: Vec<String>,
}

/// Writes the model into `dir`, creating it if needed.
///
/// Weights are stored as 32-bit floats, so a reloaded model agrees with the
/// in-memory one to single precision.
pub fn save_model(model: &MlpModel, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut names = Vec::new();
    let sizes = model.network.sizes().to_vec();
    for l in 0..sizes.len() - 1 {
        let (w, b) = model.network.layer(l);
        let wn = format!("layer{l}_weight.xbt");
        let bn = format!("layer{l}_bias.xbt");
        Tensor::from_f64(vec![sizes[l + 1], sizes[l]], w)?.save(dir.join(&wn))?;
        Tensor::from_f64(vec![sizes[l + 1]], b)?.save(dir.join(&bn))?;
        names.push(wn);
        names.push(bn);
    }
    let header = Header {
        format: FORMAT.into(),
        version: 1,
        sizes,
        config: model.config.clone(),
        standardizer: model.standardizer.clone(),
        best_epoch: model.best_epoch,
        history: model.history.clone(),
        tensors: names,
    };
    let mut f = fs::File::create(dir.join(HEADER))?;
    serde_json::to_writer_pretty(&mut f, &header)?;
    f.write_all(b"\n")?;
    Ok(())
}

pub fn load_model(dir: impl AsRef<Path>) -> Result<MlpModel> {
    let dir = dir.as_ref();
    let header: Header = serde_json::from_reader(fs::File::open(dir.join(HEADER))?)?;
    if header.format != FORMAT || header.version != 1 {
        return Err(Error::invalid(format!(
            "unsupported model format {} v{}",
            header.format, header.version
        )));
    }
    let n_layers = header.sizes.len().saturating_sub(1);
    if header.tensors.len() != 2 * n_layers {
        return Err(Error::invalid(
            "model header lists the wrong number of tensors",
        ));
    }
    let mut params = Vec::new();
    for (i, name) in header.tensors.iter().enumerate() {
        let t = Tensor::load(dir.join(name)).map_err(|e| e.at("tensor", i))?;
        let l = i / 2;
        let expected: Vec<usize> = if i % 2 == 0 {
            vec![header.sizes[l + 1], header.sizes[l]]
        } else {
            vec![header.sizes[l + 1]]
        };
        if t.dims() != expected.as_slice() {
            return Err(Error::invalid(format!(
                "{name} has shape {:?}, expected {expected:?}",
                t.dims()
            )));
        }
        params.extend(t.to_f64());
    }
    let network = Network::from_params(header.sizes.clone(), params)
        .ok_or_else(|| Error::invalid("model parameters do not match the declared sizes"))?;
    if header.standardizer.mean.len() != header.sizes[0]
        || header.standardizer.scale.len() != header.sizes[0]
    {
        return Err(Error::invalid(
            "standardizer length does not match the input size",
        ));
    }
    Ok(MlpModel {
        config: header.config,
        standardizer: header.standardizer,
        network,
        history: header.history,
        best_epoch: header.best_epoch,
    })
}

/// `epoch,train_loss,val_loss` rows; `val_loss` is empty without early stopping.
pub fn write_training_log<W: std::io::Write>(model: &MlpModel, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["epoch", "train_loss", "val_loss"])?;
    for r in &model.history {
        w.write_record([
            r.epoch.to_string(),
            r.train_loss.to_string(),
            r.val_loss.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
