//! Out-of-process classifiers speaking a line-delimited JSON protocol over
//! standard streams.
//!
//! ```text
//! → {"op":"hello","columns":["age","workclass=Private",...]}
//! ← {"ok":true}
//! → {"op":"predict","rows":[[...],...]}
//! ← {"labels":[0,1,...],"probas":[0.1,0.8,...]}
//! → {"op":"bye"}
//! ```
//!
//! Every concurrent caller gets its own subprocess; idle processes are kept
//! in a pool and shut down when the model is dropped.

use std::io::{BufRead, BufReader, Read, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};

fn default_timeout() -> f64 {
    30.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalConfig {
    /// Program and arguments.
    pub command: Vec<String>,
    /// Per-request timeout in seconds.
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
}

impl ExternalConfig {
    pub fn new<S: Into<String>>(command: impl IntoIterator<Item = S>) -> Self {
        ExternalConfig { command: command.into_iter().map(Into::into).collect(), timeout_secs: default_timeout() }
    }
}

pub struct AdapterProcess {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
    stderr: Arc<Mutex<String>>,
    timeout: Duration,
}

impl AdapterProcess {
    /// Start the adapter and complete the handshake.
    pub fn spawn(config: &ExternalConfig, columns: &[String]) -> Result<Self> {
        let (program, args) = config
            .command
            .split_first()
            .ok_or_else(|| Error::Config("external model command is empty".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| Error::io(program, e))?;
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let stderr = Arc::new(Mutex::new(String::new()));
        if let Some(mut err) = child.stderr.take() {
            let sink = Arc::clone(&stderr);
            thread::spawn(move || {
                let mut buf = String::new();
                let _ = err.read_to_string(&mut buf);
                if let Ok(mut s) = sink.lock() {
                    s.push_str(&buf);
                }
            });
        }
        let timeout = if config.timeout_secs.is_finite() && config.timeout_secs > 0.0 {
            Duration::from_secs_f64(config.timeout_secs)
        } else {
            return Err(Error::Config(format!("adapter timeout {} must be positive", config.timeout_secs)));
        };
        let stdin = child.stdin.take();
        let mut proc = AdapterProcess { child, stdin, lines: rx, stderr, timeout };
        let reply = proc.request(&json!({"op": "hello", "columns": columns}))?;
        if reply.get("ok") != Some(&Value::Bool(true)) {
            return Err(Error::AdapterProtocol { row: None, reason: format!("handshake rejected: {reply}") });
        }
        Ok(proc)
    }

    fn exited(&mut self) -> Error {
        // give the stderr reader a moment to drain
        let deadline = Instant::now() + Duration::from_millis(500);
        let status = loop {
            match self.child.try_wait() {
                Ok(Some(s)) => break s.code(),
                Ok(None) if Instant::now() < deadline => thread::sleep(Duration::from_millis(10)),
                _ => break None,
            }
        };
        thread::sleep(Duration::from_millis(20));
        let stderr = self.stderr.lock().map(|s| s.trim().to_string()).unwrap_or_default();
        Error::AdapterExited { status, stderr }
    }

    fn request(&mut self, msg: &Value) -> Result<Value> {
        let line = format!("{msg}\n");
        let sent = match self.stdin.as_mut() {
            Some(w) => w.write_all(line.as_bytes()).and_then(|_| w.flush()).is_ok(),
            None => false,
        };
        if !sent {
            return Err(self.exited());
        }
        match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(text)) => serde_json::from_str(&text)
                .map_err(|e| Error::AdapterMalformed { line: text.clone(), reason: e.to_string() }),
            Ok(Err(_)) | Err(RecvTimeoutError::Disconnected) => Err(self.exited()),
            Err(RecvTimeoutError::Timeout) => {
                let _ = self.child.kill();
                Err(Error::AdapterTimeout { secs: self.timeout.as_secs_f64() })
            }
        }
    }

    /// Predict a batch; labels and probabilities come back in row order.
    pub fn predict(&mut self, rows: ArrayView2<'_, f64>) -> Result<(Vec<u8>, Vec<f64>)> {
        let payload: Vec<Vec<f64>> = rows.rows().into_iter().map(|r| r.to_vec()).collect();
        let reply = self.request(&json!({"op": "predict", "rows": payload}))?;
        parse_reply(&reply, rows.nrows())
    }
}

fn parse_reply(reply: &Value, n: usize) -> Result<(Vec<u8>, Vec<f64>)> {
    let proto = |row: Option<usize>, reason: String| Error::AdapterProtocol { row, reason };
    let labels = reply
        .get("labels")
        .and_then(Value::as_array)
        .ok_or_else(|| proto(None, "reply lacks a labels array".into()))?;
    let probas = reply
        .get("probas")
        .and_then(Value::as_array)
        .ok_or_else(|| proto(None, "reply lacks a probas array".into()))?;
    if labels.len() != n || probas.len() != n {
        return Err(proto(
            None,
            format!("expected {n} predictions, got {} labels and {} probas", labels.len(), probas.len()),
        ));
    }
    let mut ls = Vec::with_capacity(n);
    let mut ps = Vec::with_capacity(n);
    for (i, (l, p)) in labels.iter().zip(probas).enumerate() {
        let label = match l.as_f64() {
            Some(v) if v == 0.0 || v == 1.0 => v as u8,
            _ => return Err(proto(Some(i), format!("label {l} is not 0 or 1"))),
        };
        let proba = match p.as_f64() {
            Some(v) if (0.0..=1.0).contains(&v) => v,
            _ => return Err(proto(Some(i), format!("probability {p} outside [0, 1]"))),
        };
        ls.push(label);
        ps.push(proba);
    }
    Ok((ls, ps))
}

impl Drop for AdapterProcess {
    fn drop(&mut self) {
        if let Some(mut w) = self.stdin.take() {
            let _ = w.write_all(b"{\"op\":\"bye\"}\n");
            let _ = w.flush();
        }
        let deadline = Instant::now() + Duration::from_secs(2);
        loop {
            match self.child.try_wait() {
                Ok(Some(_)) => return,
                Ok(None) if Instant::now() < deadline => thread::sleep(Duration::from_millis(5)),
                _ => break,
            }
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Handle on an external classifier. Subprocesses are started on demand,
/// one per concurrent caller.
#[derive(Serialize, Deserialize)]
pub struct ExternalModel {
    pub config: ExternalConfig,
    pub columns: Vec<String>,
    #[serde(skip)]
    pool: Mutex<Vec<AdapterProcess>>,
}

impl std::fmt::Debug for ExternalModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalModel").field("config", &self.config).field("columns", &self.columns).finish()
    }
}

impl ExternalModel {
    /// Start one adapter to check the handshake, keeping it for reuse.
    pub fn connect(config: ExternalConfig, columns: Vec<String>) -> Result<Self> {
        let first = AdapterProcess::spawn(&config, &columns)?;
        Ok(ExternalModel { config, columns, pool: Mutex::new(vec![first]) })
    }

    pub fn predict(&self, rows: ArrayView2<'_, f64>) -> Result<(Vec<u8>, Vec<f64>)> {
        let idle = self.pool.lock().ok().and_then(|mut p| p.pop());
        let mut proc = match idle {
            Some(p) => p,
            None => AdapterProcess::spawn(&self.config, &self.columns)?,
        };
        let out = proc.predict(rows)?;
        if let Ok(mut p) = self.pool.lock() {
            p.push(proc);
        }
        Ok(out)
    }
}
