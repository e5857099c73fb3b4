//! Golden request/reply transcript for predictor servers.
//!
//! The bundled transcript is predictor-independent: every reply is checked
//! structurally (ids, unit sums, top-k ordering, error replies). Steps may also
//! carry exact expected values for the built-in toy predictors, keyed by kind.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Command, Stdio};

use serde::Deserialize;

use super::protocol::{handle_line, Reply, VERSION};
use super::{Predictor, PROB_SUM_TOLERANCE};
use crate::{Error, Result};

const BUNDLED: &str = include_str!("../../data/conformance.jsonl");

/// Tolerance for golden values.
pub const GOLDEN_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpectKind {
    Hello,
    Probs,
    TopK,
    Error,
}

#[derive(Debug, Clone, Deserialize)]
pub struct Expect {
    pub kind: ExpectKind,
    /// Checked when present.
    pub id: Option<u64>,
    pub k: Option<usize>,
    /// Per predictor kind: a probability vector, or `[label_index, prob]` pairs.
    #[serde(default)]
    pub golden: HashMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct Step {
    /// Raw request line, possibly malformed on purpose.
    pub send: String,
    pub expect: Expect,
}

#[derive(Debug, Clone)]
pub struct Transcript {
    pub steps: Vec<Step>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub step: usize,
    pub request: String,
    pub reply: String,
    /// Empty when the step passed.
    pub failures: Vec<String>,
}

impl StepOutcome {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

impl Transcript {
    pub fn bundled() -> Self {
        Self::parse(BUNDLED).expect("bundled transcript parses")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let steps = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| Error::Format {
                    offset: i as u64 + 1,
                    message: format!("transcript step: {e}"),
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { steps })
    }

    /// Plays the transcript through a line exchange function.
    pub fn run_with<F>(&self, mut exchange: F, golden: Option<&str>) -> Result<Vec<StepOutcome>>
    where
        F: FnMut(&str) -> Result<String>,
    {
        let mut n_classes = None;
        let mut out = Vec::with_capacity(self.steps.len());
        for (i, step) in self.steps.iter().enumerate() {
            let reply = exchange(&step.send)?;
            let failures = check(step, &reply, &mut n_classes, golden);
            out.push(StepOutcome {
                step: i,
                request: step.send.clone(),
                reply,
                failures,
            });
        }
        Ok(out)
    }

    /// Plays the transcript over a pair of streams, one line per message.
    pub fn run_streams<R: BufRead, W: Write>(
        &self,
        mut reader: R,
        mut writer: W,
        golden: Option<&str>,
    ) -> Result<Vec<StepOutcome>> {
        self.run_with(
            |line| {
                writer.write_all(line.as_bytes())?;
                writer.write_all(b"\n")?;
                writer.flush()?;
                let mut reply = String::new();
                if reader.read_line(&mut reply)? == 0 {
                    return Err(Error::Io(std::io::Error::new(
                        std::io::ErrorKind::UnexpectedEof,
                        "predictor closed its output",
                    )));
                }
                Ok(reply.trim_end().to_string())
            },
            golden,
        )
    }

    /// Plays the transcript against an in-process predictor.
    pub fn run_predictor<P: Predictor + ?Sized>(
        &self,
        predictor: &mut P,
        golden: Option<&str>,
    ) -> Result<Vec<StepOutcome>> {
        self.run_with(
            |line| Ok(serde_json::to_string(&handle_line(predictor, line))?),
            golden,
        )
    }

    /// Launches `command` through `sh -c` and plays the transcript over its
    /// standard streams.
    pub fn run_command(&self, command: &str, golden: Option<&str>) -> Result<Vec<StepOutcome>> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        let result = self.run_streams(stdout, stdin, golden);
        let _ = child.kill();
        let _ = child.wait();
        result
    }
}

fn check(
    step: &Step,
    raw: &str,
    n_classes: &mut Option<usize>,
    golden: Option<&str>,
) -> Vec<String> {
    let mut f = Vec::new();
    let reply: Reply = match serde_json::from_str(raw) {
        Ok(r) => r,
        Err(e) => return vec![format!("reply is not a valid reply object: {e}")],
    };
    let e = &step.expect;
    if let Some(id) = e.id {
        if reply.id != id {
            f.push(format!(
                "reply id {} does not echo request id {id}",
                reply.id
            ));
        }
    }
    match e.kind {
        ExpectKind::Hello => {
            if let Some(err) = &reply.error {
                f.push(format!("unexpected error reply: {err}"));
            }
            if reply.op.as_deref() != Some("hello") {
                f.push("hello reply lacks op \"hello\"".into());
            }
            if reply.version != Some(VERSION) {
                f.push(format!("hello reply version {:?}", reply.version));
            }
            match reply.n_classes {
                Some(n) if n > 0 => {
                    if n_classes.is_some_and(|prev| prev != n) {
                        f.push("n_classes changed between handshakes".into());
                    }
                    *n_classes = Some(n);
                }
                _ => f.push("hello reply lacks a positive n_classes".into()),
            }
        }
        ExpectKind::Probs => {
            if let Some(err) = &reply.error {
                f.push(format!("unexpected error reply: {err}"));
            }
            match &reply.probs {
                None => f.push("reply carries no probs".into()),
                Some(p) => {
                    if let Some(n) = *n_classes {
                        if p.len() != n {
                            f.push(format!("{} probs for {n} classes", p.len()));
                        }
                    }
                    if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
                        f.push("probs must be finite and non-negative".into());
                    }
                    let sum: f64 = p.iter().sum();
                    if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
                        f.push(format!("probs sum to {sum}"));
                    }
                    if let Some(g) = golden.and_then(|k| e.golden.get(k)) {
                        match serde_json::from_value::<Vec<f64>>(g.clone()) {
                            Ok(g) => {
                                if g.len() != p.len()
                                    || g.iter()
                                        .zip(p)
                                        .any(|(a, b)| (a - b).abs() > GOLDEN_TOLERANCE)
                                {
                                    f.push(format!("probs {p:?} differ from golden {g:?}"));
                                }
                            }
                            Err(err) => f.push(format!("bad golden entry: {err}")),
                        }
                    }
                }
            }
        }
        ExpectKind::TopK => {
            if let Some(err) = &reply.error {
                f.push(format!("unexpected error reply: {err}"));
            }
            match &reply.top_k {
                None => f.push("reply carries no top_k".into()),
                Some(t) => {
                    if let (Some(k), Some(n)) = (e.k, *n_classes) {
                        if t.len() != k.min(n) {
                            f.push(format!("{} entries for k={k} with {n} classes", t.len()));
                        }
                    }
                    let mut seen = std::collections::HashSet::new();
                    for w in t.windows(2) {
                        let ordered = w[0].prob > w[1].prob
                            || (w[0].prob == w[1].prob && w[0].label_index < w[1].label_index);
                        if !ordered {
                            f.push("top_k entries are not in descending order".into());
                        }
                    }
                    for entry in t {
                        if !seen.insert(entry.label_index) {
                            f.push(format!("label {} repeated", entry.label_index));
                        }
                        if n_classes.is_some_and(|n| entry.label_index >= n) {
                            f.push(format!("label {} out of range", entry.label_index));
                        }
                    }
                    if let Some(g) = golden.and_then(|k| e.golden.get(k)) {
                        match serde_json::from_value::<Vec<(usize, f64)>>(g.clone()) {
                            Ok(g) => {
                                let same = g.len() == t.len()
                                    && g.iter().zip(t).all(|(a, b)| {
                                        a.0 == b.label_index
                                            && (a.1 - b.prob).abs() <= GOLDEN_TOLERANCE
                                    });
                                if !same {
                                    f.push(format!("top_k differs from golden {g:?}"));
                                }
                            }
                            Err(err) => f.push(format!("bad golden entry: {err}")),
                        }
                    }
                }
            }
        }
        ExpectKind::Error => match &reply.error {
            Some(m) if !m.is_empty() => {}
            _ => f.push("expected an error reply".into()),
        },
    }
    f
}
