//! Client side of the predictor protocol over a child process or TCP.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use image::RgbImage;

use super::protocol::{ClassifyRequest, HelloRequest, Reply, VERSION};
use super::{validate_probs, Predictor};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct ClientOptions {
    /// Maximum wait for any single reply.
    pub timeout: Duration,
}

impl Default for ClientOptions {
    fn default() -> Self {
        Self {
            timeout: Duration::from_secs(30),
        }
    }
}

pub struct ProtocolClient {
    writer: Box<dyn Write + Send>,
    replies: Receiver<std::io::Result<String>>,
    child: Option<Child>,
    n_classes: usize,
    next_id: u64,
    timeout: Duration,
}

impl std::fmt::Debug for ProtocolClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProtocolClient")
            .field("n_classes", &self.n_classes)
            .field("next_id", &self.next_id)
            .field("child", &self.child.as_ref().map(Child::id))
            .finish()
    }
}

impl ProtocolClient {
    /// Launches `command` through `sh -c` and talks over its standard streams.
    pub fn spawn(command: &str, opts: ClientOptions) -> Result<Self> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let mut client = Self::start(stdout, stdin, opts)?;
        client.child = Some(child);
        client.handshake()?;
        Ok(client)
    }

    pub fn connect_tcp(addr: impl ToSocketAddrs, opts: ClientOptions) -> Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        let read = stream.try_clone()?;
        let mut client = Self::start(read, stream, opts)?;
        client.handshake()?;
        Ok(client)
    }

    /// Uses arbitrary byte streams (e.g. in-memory pipes in tests).
    pub fn from_streams<R, W>(reader: R, writer: W, opts: ClientOptions) -> Result<Self>
    where
        R: Read + Send + 'static,
        W: Write + Send + 'static,
    {
        let mut client = Self::start(reader, writer, opts)?;
        client.handshake()?;
        Ok(client)
    }

    fn start<R, W>(reader: R, writer: W, opts: ClientOptions) -> Result<Self>
    where
        R: Read + Send + 'static,
        W: Write + Send + 'static,
    {
        let (tx, rx) = mpsc::channel();
        // Drain replies continuously so a large batch cannot deadlock on full pipes.
        thread::spawn(move || {
            let reader = BufReader::new(reader);
            for line in reader.lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    return;
                }
            }
            let _ = tx.send(Err(std::io::Error::new(
                std::io::ErrorKind::UnexpectedEof,
                "predictor closed its output",
            )));
        });
        Ok(Self {
            writer: Box::new(BufWriter::new(writer)),
            replies: rx,
            child: None,
            n_classes: 0,
            next_id: 0,
            timeout: opts.timeout,
        })
    }

    fn handshake(&mut self) -> Result<()> {
        let id = self.take_id();
        self.send_line(&serde_json::to_string(&HelloRequest::new(id))?)?;
        self.writer.flush()?;
        let reply = self.recv(Instant::now() + self.timeout)?;
        if reply.id != id {
            return Err(protocol(id, format!("handshake reply has id {}", reply.id)));
        }
        if let Some(e) = reply.error {
            return Err(protocol(id, e));
        }
        if reply.op.as_deref() != Some("hello") || reply.version != Some(VERSION) {
            return Err(protocol(id, "handshake reply is not a version 1 hello"));
        }
        self.n_classes = reply
            .n_classes
            .filter(|&n| n > 0)
            .ok_or_else(|| protocol(id, "handshake reply lacks n_classes"))?;
        Ok(())
    }

    fn take_id(&mut self) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    fn send_line(&mut self, line: &str) -> Result<()> {
        self.writer.write_all(line.as_bytes())?;
        self.writer.write_all(b"\n")?;
        Ok(())
    }

    fn recv(&mut self, deadline: Instant) -> Result<Reply> {
        let wait = deadline.saturating_duration_since(Instant::now());
        let line = match self.replies.recv_timeout(wait) {
            Ok(line) => line?,
            Err(RecvTimeoutError::Timeout) => return Err(Error::Timeout(self.timeout)),
            Err(RecvTimeoutError::Disconnected) => {
                return Err(Error::Io(std::io::Error::new(
                    std::io::ErrorKind::UnexpectedEof,
                    "predictor connection closed",
                )))
            }
        };
        serde_json::from_str(&line).map_err(|e| {
            protocol(
                salvage_id(&line).unwrap_or(0),
                format!("malformed reply: {e}"),
            )
        })
    }
}

/// Reads a leading `"id": N` from a reply that does not parse as a whole.
fn salvage_id(line: &str) -> Option<u64> {
    let rest = &line[line.find("\"id\"")? + 4..];
    let rest = rest.trim_start().strip_prefix(':')?.trim_start();
    let end = rest
        .find(|c: char| !c.is_ascii_digit())
        .unwrap_or(rest.len());
    rest[..end].parse().ok()
}

fn protocol(request_id: u64, message: impl Into<String>) -> Error {
    Error::Protocol {
        request_id,
        message: message.into(),
    }
}

impl Predictor for ProtocolClient {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn classify_batch(&mut self, images: &[RgbImage]) -> Result<Vec<Vec<f64>>> {
        let mut pending: HashMap<u64, usize> = HashMap::with_capacity(images.len());
        for (pos, img) in images.iter().enumerate() {
            let id = self.take_id();
            self.send_line(&serde_json::to_string(&ClassifyRequest::new(
                id, img, None,
            ))?)?;
            pending.insert(id, pos);
        }
        self.writer.flush()?;

        let mut out: Vec<Option<Vec<f64>>> = vec![None; images.len()];
        let mut deadline = Instant::now() + self.timeout;
        while !pending.is_empty() {
            let reply = self.recv(deadline)?;
            deadline = Instant::now() + self.timeout;
            let pos = pending.remove(&reply.id).ok_or_else(|| {
                protocol(reply.id, "reply to an unknown or already answered request")
            })?;
            if let Some(e) = reply.error {
                return Err(protocol(reply.id, e));
            }
            let probs = reply
                .probs
                .ok_or_else(|| protocol(reply.id, "reply carries no probability vector"))?;
            validate_probs(&probs, self.n_classes).map_err(|m| protocol(reply.id, m))?;
            out[pos] = Some(probs);
        }
        Ok(out
            .into_iter()
            .map(|p| p.expect("every request answered"))
            .collect())
    }
}

impl Drop for ProtocolClient {
    fn drop(&mut self) {
        let _ = self.writer.flush();
        if let Some(mut child) = self.child.take() {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}
