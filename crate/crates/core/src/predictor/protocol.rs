//! Newline-delimited JSON wire format, version 1.
//!
//! One JSON object per line in each direction. Requests:
//!
//! ```text
//! {"id":0,"op":"hello","version":1}
//! {"id":1,"op":"classify","width":W,"height":H,"pixels":"<base64 RGB rows>","top_k":3}
//! ```
//!
//! `top_k` is optional. Replies echo the request id:
//!
//! ```text
//! {"id":0,"op":"hello","version":1,"n_classes":1000}
//! {"id":1,"probs":[...]}
//! {"id":1,"top_k":[{"label_index":7,"prob":0.4},...]}
//! {"id":1,"error":"..."}
//! ```
//!
//! A server answers malformed or unknown requests with an error reply and
//! keeps serving.

use std::io::{BufRead, Write};

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use image::RgbImage;
use serde::{Deserialize, Serialize};

use super::{topk, validate_probs, Predictor};
use crate::Result;

pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HelloRequest {
    pub id: u64,
    pub op: String,
    pub version: u32,
}

impl HelloRequest {
    pub fn new(id: u64) -> Self {
        Self {
            id,
            op: "hello".into(),
            version: VERSION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyRequest {
    pub id: u64,
    pub op: String,
    pub width: u32,
    pub height: u32,
    pub pixels: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_k: Option<usize>,
}

impl ClassifyRequest {
    pub fn new(id: u64, image: &RgbImage, top_k: Option<usize>) -> Self {
        Self {
            id,
            op: "classify".into(),
            width: image.width(),
            height: image.height(),
            pixels: BASE64.encode(image.as_raw()),
            top_k,
        }
    }

    pub fn decode_image(&self) -> std::result::Result<RgbImage, String> {
        let raw = BASE64
            .decode(&self.pixels)
            .map_err(|e| format!("bad base64 pixels: {e}"))?;
        let expected = self.width as usize * self.height as usize * 3;
        if raw.len() != expected {
            return Err(format!(
                "pixel payload has {} bytes, {}x{} RGB needs {expected}",
                raw.len(),
                self.width,
                self.height
            ));
        }
        RgbImage::from_raw(self.width, self.height, raw).ok_or_else(|| "invalid raster".to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopKEntry {
    pub label_index: usize,
    pub prob: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Reply {
    pub id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub op: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_classes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_k: Option<Vec<TopKEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Reply {
    pub fn hello(id: u64, n_classes: usize) -> Self {
        Self {
            id,
            op: Some("hello".into()),
            version: Some(VERSION),
            n_classes: Some(n_classes),
            ..Self::default()
        }
    }

    pub fn probs(id: u64, probs: Vec<f64>) -> Self {
        Self {
            id,
            probs: Some(probs),
            ..Self::default()
        }
    }

    pub fn error(id: u64, message: impl Into<String>) -> Self {
        Self {
            id,
            error: Some(message.into()),
            ..Self::default()
        }
    }
}

/// Any request, before validation.
#[derive(Debug, Deserialize)]
struct RawRequest {
    id: Option<u64>,
    op: Option<String>,
    version: Option<u32>,
}

/// Answers one request line.
pub fn handle_line<P: Predictor + ?Sized>(predictor: &mut P, line: &str) -> Reply {
    let raw: RawRequest = match serde_json::from_str(line) {
        Ok(r) => r,
        Err(e) => return Reply::error(0, format!("malformed JSON: {e}")),
    };
    let id = raw.id.unwrap_or(0);
    match raw.op.as_deref() {
        Some("hello") => match raw.version {
            Some(VERSION) => Reply::hello(id, predictor.n_classes()),
            v => Reply::error(id, format!("unsupported protocol version {v:?}")),
        },
        Some("classify") => {
            let req: ClassifyRequest = match serde_json::from_str(line) {
                Ok(r) => r,
                Err(e) => return Reply::error(id, format!("malformed classify request: {e}")),
            };
            let image = match req.decode_image() {
                Ok(img) => img,
                Err(e) => return Reply::error(id, e),
            };
            let probs = match predictor.classify_batch(std::slice::from_ref(&image)) {
                Ok(mut p) if p.len() == 1 => p.remove(0),
                Ok(_) => return Reply::error(id, "predictor returned the wrong number of vectors"),
                Err(e) => return Reply::error(id, e.to_string()),
            };
            if let Err(e) = validate_probs(&probs, predictor.n_classes()) {
                return Reply::error(id, e);
            }
            match req.top_k {
                Some(k) => Reply {
                    id,
                    top_k: Some(
                        topk(&probs, k)
                            .into_iter()
                            .map(|i| TopKEntry {
                                label_index: i,
                                prob: probs[i],
                            })
                            .collect(),
                    ),
                    ..Reply::default()
                },
                None => Reply::probs(id, probs),
            }
        }
        Some(other) => Reply::error(id, format!("unknown op {other:?}")),
        None => Reply::error(id, "missing op"),
    }
}

/// Serves requests from `reader` until end of input.
pub fn serve<P, R, W>(predictor: &mut P, reader: R, mut writer: W) -> Result<()>
where
    P: Predictor + ?Sized,
    R: BufRead,
    W: Write,
{
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = handle_line(predictor, &line);
        serde_json::to_writer(&mut writer, &reply)?;
        writer.write_all(b"\n")?;
        writer.flush()?;
    }
    Ok(())
}
