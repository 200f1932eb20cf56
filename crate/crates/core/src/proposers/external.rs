//! Adapter protocol for proposers living outside the process.
//!
//! One request record per line goes to the adapter, one response record per
//! line comes back, UTF-8 JSON both ways. The HTTP variant posts the same
//! record as the request body and reads the response record from the reply
//! body. Any transport or format problem is a protocol error; the grounding
//! loop treats that as "no proposal".

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use serde::de::DeserializeOwned;

use crate::error::{Error, Result};
use crate::proposers::{
    ModelProposer, ModelRefiner, ModelsResponse, PolicyChoice, PolicySampler, ProposalEnv, ProposerRequest,
    RefineResponse,
};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExternalTarget {
    /// Program and arguments, whitespace separated.
    Command(String),
    Url(String),
}

impl ExternalTarget {
    /// Parses `cmd=<program>` or `url=<endpoint>`.
    pub fn parse(spec: &str) -> Result<Self> {
        if let Some(cmd) = spec.strip_prefix("cmd=") {
            if cmd.trim().is_empty() {
                return Err(Error::domain("empty adapter command"));
            }
            Ok(ExternalTarget::Command(cmd.to_string()))
        } else if let Some(url) = spec.strip_prefix("url=") {
            if !url.starts_with("http://") {
                return Err(Error::domain(format!("adapter url `{url}` must use http://")));
            }
            Ok(ExternalTarget::Url(url.to_string()))
        } else {
            Err(Error::domain(format!("adapter spec `{spec}` is neither cmd=... nor url=...")))
        }
    }
}

struct Process {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

pub struct ExternalAdapter {
    target: ExternalTarget,
    timeout: Duration,
    process: Mutex<Option<Process>>,
}

impl ExternalAdapter {
    /// Starts the adapter process right away for `cmd=` targets so a bad
    /// command fails before the run does.
    pub fn connect(target: ExternalTarget, timeout: Duration) -> Result<Self> {
        let process = match &target {
            ExternalTarget::Command(cmd) => Some(spawn(cmd)?),
            ExternalTarget::Url(_) => None,
        };
        Ok(ExternalAdapter {
            target,
            timeout,
            process: Mutex::new(process),
        })
    }

    /// Sends one request and returns the raw response line.
    pub fn roundtrip_raw(&self, req: &ProposerRequest) -> Result<String> {
        let line = req.to_line();
        match &self.target {
            ExternalTarget::Command(_) => {
                let mut guard = self.process.lock().map_err(|_| Error::Protocol("adapter lock poisoned".into()))?;
                let proc = guard
                    .as_mut()
                    .ok_or_else(|| Error::Protocol("adapter process is gone".into()))?;
                let sent = writeln!(proc.stdin, "{line}").and_then(|_| proc.stdin.flush());
                if let Err(e) = sent {
                    *guard = None;
                    return Err(Error::Protocol(format!("adapter input closed: {e}")));
                }
                match proc.lines.recv_timeout(self.timeout) {
                    Ok(Ok(reply)) => Ok(reply),
                    Ok(Err(e)) => Err(Error::Protocol(format!("reading adapter output: {e}"))),
                    Err(RecvTimeoutError::Timeout) => Err(Error::Protocol(format!(
                        "adapter gave no answer within {:?}",
                        self.timeout
                    ))),
                    Err(RecvTimeoutError::Disconnected) => {
                        *guard = None;
                        Err(Error::Protocol("adapter exited".into()))
                    }
                }
            }
            ExternalTarget::Url(url) => {
                let agent: ureq::Agent = ureq::Agent::config_builder()
                    .timeout_global(Some(self.timeout))
                    .build()
                    .into();
                let mut reply = agent
                    .post(url)
                    .header("Content-Type", "application/json")
                    .send(line)
                    .map_err(|e| Error::Protocol(format!("adapter request failed: {e}")))?;
                reply
                    .body_mut()
                    .read_to_string()
                    .map_err(|e| Error::Protocol(format!("adapter reply unreadable: {e}")))
            }
        }
    }

    fn roundtrip<T: DeserializeOwned>(&self, req: &ProposerRequest) -> Result<T> {
        let raw = self.roundtrip_raw(req)?;
        serde_json::from_str(raw.trim())
            .map_err(|e| Error::Protocol(format!("malformed {:?} response: {e}", req.phase)))
    }
}

fn spawn(cmd: &str) -> Result<Process> {
    let mut parts = cmd.split_whitespace();
    let program = parts.next().ok_or_else(|| Error::domain("empty adapter command"))?;
    let mut child = Command::new(program)
        .args(parts)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::inherit())
        .spawn()
        .map_err(|e| Error::Protocol(format!("cannot start adapter `{cmd}`: {e}")))?;
    let stdin = child.stdin.take().expect("piped");
    let stdout = child.stdout.take().expect("piped");
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for line in BufReader::new(stdout).lines() {
            let stop = line.is_err();
            if tx.send(line).is_err() || stop {
                break;
            }
        }
    });
    Ok(Process {
        child,
        stdin,
        lines: rx,
    })
}

impl Drop for ExternalAdapter {
    fn drop(&mut self) {
        if let Ok(mut guard) = self.process.lock() {
            if let Some(mut p) = guard.take() {
                drop(p.stdin);
                let _ = p.child.kill();
                let _ = p.child.wait();
            }
        }
    }
}

impl ModelProposer for Arc<ExternalAdapter> {
    fn propose(&self, req: &ProposerRequest, _env: &ProposalEnv<'_>) -> Result<ModelsResponse> {
        self.roundtrip(req)
    }
}

impl PolicySampler for Arc<ExternalAdapter> {
    fn sample(&self, req: &ProposerRequest, _env: &ProposalEnv<'_>) -> Result<PolicyChoice> {
        self.roundtrip(req)
    }
}

impl ModelRefiner for Arc<ExternalAdapter> {
    fn refine(&self, req: &ProposerRequest, _env: &ProposalEnv<'_>) -> Result<RefineResponse> {
        self.roundtrip(req)
    }
}
