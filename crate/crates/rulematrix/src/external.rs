//! Oracles living in a subprocess that speaks JSON lines over stdin/stdout.
//!
//! ```text
//! -> {"op":"hello","features":k,"classes":null}
//! <- {"op":"hello","classes":C}
//! -> {"op":"predict","instances":[[...],...]}
//! <- {"op":"labels","labels":[...],"proba":[[...],...]}   (proba optional)
//! ```

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::time::Duration;

use rulematrix_core::error::OracleFailure;
use rulematrix_core::{DatasetSchema, FeatureKind, Instances, Oracle};
use serde::Deserialize;
use serde_json::{json, Number, Value};

use crate::error::{Error, Result};

pub const MAX_BATCH: usize = 4096;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

#[derive(Deserialize)]
struct Hello {
    op: String,
    classes: usize,
    #[serde(default)]
    features: Option<usize>,
}

#[derive(Deserialize)]
struct Labels {
    op: String,
    labels: Vec<usize>,
    #[serde(default)]
    proba: Option<Vec<Vec<f64>>>,
}

/// Labels plus, when the oracle sent them, class probabilities.
type Reply = (Vec<usize>, Option<Vec<Vec<f64>>>);

struct Channel {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

impl Channel {
    fn send(&mut self, msg: &Value) -> Result<()> {
        let mut line = serde_json::to_string(msg)?;
        line.push('\n');
        self.stdin
            .write_all(line.as_bytes())
            .and_then(|_| self.stdin.flush())
            .map_err(|e| Error::oracle(OracleFailure::Io, e.to_string()))
    }

    fn recv(&mut self, timeout: Duration) -> Result<String> {
        match self.lines.recv_timeout(timeout) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => Err(Error::oracle(OracleFailure::Io, e.to_string())),
            Err(RecvTimeoutError::Timeout) => {
                Err(Error::oracle(OracleFailure::OracleTimeout, format!("no reply within {timeout:?}")))
            }
            Err(RecvTimeoutError::Disconnected) => {
                Err(Error::oracle(OracleFailure::Io, "oracle process closed its output"))
            }
        }
    }
}

pub struct ExternalOracle {
    command: String,
    classes: usize,
    categorical: Vec<bool>,
    timeout: Duration,
    channel: Mutex<Channel>,
}

impl ExternalOracle {
    /// Launches `command` through `sh -c` and performs the handshake.
    pub fn spawn(command: &str, schema: &DatasetSchema, timeout: Duration) -> Result<Self> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::oracle(OracleFailure::HandshakeFailure, format!("cannot launch `{command}`: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let mut channel = Channel { child, stdin, lines: rx };

        let handshake = |channel: &mut Channel| -> Result<Hello> {
            channel.send(&json!({"op": "hello", "features": schema.width(), "classes": null}))?;
            let line = channel.recv(timeout)?;
            serde_json::from_str::<Hello>(&line)
                .map_err(|e| Error::oracle(OracleFailure::HandshakeFailure, format!("bad hello `{line}`: {e}")))
        };
        let hello = handshake(&mut channel).map_err(|e| match e {
            Error::Core(rulematrix_core::Error::Oracle { kind: OracleFailure::Io, message }) => {
                Error::oracle(OracleFailure::HandshakeFailure, message)
            }
            other => other,
        })?;
        let expected = schema.class_count();
        if hello.op != "hello" || hello.classes != expected || hello.features.is_some_and(|k| k != schema.width()) {
            return Err(Error::oracle(
                OracleFailure::HandshakeFailure,
                format!("oracle reports {} classes / {:?} features, schema has {expected} / {}", hello.classes, hello.features, schema.width()),
            ));
        }
        Ok(ExternalOracle {
            command: command.to_string(),
            classes: expected,
            categorical: schema.features.iter().map(|f| f.kind == FeatureKind::Categorical).collect(),
            timeout,
            channel: Mutex::new(channel),
        })
    }

    fn encode(&self, rows: &Instances) -> Value {
        let encoded: Vec<Value> = rows
            .rows()
            .map(|x| {
                x.iter()
                    .zip(&self.categorical)
                    .map(|(&v, &cat)| if cat { Value::from(v as u64) } else { Number::from_f64(v).map_or(Value::Null, Value::Number) })
                    .collect()
            })
            .collect();
        json!({"op": "predict", "instances": encoded})
    }

    fn query(&self, rows: &Instances) -> Result<Reply> {
        if rows.width() != self.categorical.len() {
            return Err(rulematrix_core::Error::SchemaMismatch { expected: self.categorical.len(), found: rows.width() }.into());
        }
        let mut labels = Vec::with_capacity(rows.len());
        let mut proba: Option<Vec<Vec<f64>>> = None;
        let mut channel = self.channel.lock().unwrap_or_else(|p| p.into_inner());
        for start in (0..rows.len()).step_by(MAX_BATCH) {
            let idx: Vec<usize> = (start..(start + MAX_BATCH).min(rows.len())).collect();
            let batch = rows.select(&idx);
            channel.send(&self.encode(&batch))?;
            let line = channel.recv(self.timeout)?;
            let violation = |msg: String| Error::oracle(OracleFailure::ProtocolViolation, msg);
            let reply: Labels = serde_json::from_str(&line).map_err(|e| violation(format!("malformed reply: {e}")))?;
            if reply.op != "labels" || reply.labels.len() != batch.len() {
                return Err(violation(format!("expected {} labels, got {}", batch.len(), reply.labels.len())));
            }
            if reply.labels.iter().any(|&y| y >= self.classes) {
                return Err(violation("label out of range".into()));
            }
            match reply.proba {
                Some(p) => {
                    check_proba(&p, &reply.labels, self.classes).map_err(violation)?;
                    if start == 0 {
                        proba = Some(Vec::with_capacity(rows.len()));
                    }
                    if let Some(all) = proba.as_mut() {
                        all.extend(p);
                    }
                }
                None => proba = None,
            }
            labels.extend(reply.labels);
        }
        Ok((labels, proba))
    }
}

fn check_proba(proba: &[Vec<f64>], labels: &[usize], classes: usize) -> std::result::Result<(), String> {
    if proba.len() != labels.len() {
        return Err(format!("{} probability rows for {} labels", proba.len(), labels.len()));
    }
    for (p, &y) in proba.iter().zip(labels) {
        let sum: f64 = p.iter().sum();
        if p.len() != classes || p.iter().any(|v| v.is_nan() || *v < 0.0) || (sum - 1.0).abs() > 1e-6 {
            return Err(format!("invalid probability vector {p:?}"));
        }
        if rulematrix_core::math::argmax(p) != y {
            return Err(format!("label {y} is not the argmax of {p:?}"));
        }
    }
    Ok(())
}

impl Oracle for ExternalOracle {
    fn class_count(&self) -> usize {
        self.classes
    }

    fn feature_count(&self) -> usize {
        self.categorical.len()
    }

    fn predict_proba(&self, rows: &Instances) -> rulematrix_core::Result<Vec<Vec<f64>>> {
        let (labels, proba) = self.query(rows).map_err(into_core)?;
        Ok(proba.unwrap_or_else(|| {
            labels
                .iter()
                .map(|&y| {
                    let mut p = vec![0.0; self.classes];
                    p[y] = 1.0;
                    p
                })
                .collect()
        }))
    }

    fn predict(&self, rows: &Instances) -> rulematrix_core::Result<Vec<usize>> {
        Ok(self.query(rows).map_err(into_core)?.0)
    }

    fn describe(&self) -> String {
        format!("external:{}", self.command)
    }
}

fn into_core(e: Error) -> rulematrix_core::Error {
    match e {
        Error::Core(c) => c,
        other => rulematrix_core::Error::Oracle { kind: OracleFailure::Io, message: other.to_string() },
    }
}

impl Drop for ExternalOracle {
    fn drop(&mut self) {
        let channel = self.channel.get_mut().unwrap_or_else(|p| p.into_inner());
        let _ = channel.child.kill();
        let _ = channel.child.wait();
    }
}
