//! Out-of-process trainers over line-delimited JSON.
//!
//! A command endpoint is spawned with piped standard streams and reused for
//! later requests; concurrent requests get their own processes. A TCP endpoint
//! opens one connection per request.

use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{TrainRequest, TrainResponse, Trainer, TrainerError};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(600);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum Endpoint {
    /// Program and arguments speaking the protocol on stdin/stdout.
    Command(Vec<String>),
    /// `host:port` of a listening trainer.
    Tcp(String),
}

struct Session {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

impl Drop for Session {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

pub struct ExternalTrainer {
    endpoint: Endpoint,
    timeout: Duration,
    idle: Mutex<Vec<Session>>,
}

impl ExternalTrainer {
    pub fn new(endpoint: Endpoint, timeout: Duration) -> Self {
        Self {
            endpoint,
            timeout,
            idle: Mutex::new(Vec::new()),
        }
    }

    fn spawn(&self, argv: &[String]) -> Result<Session, TrainerError> {
        let (program, args) = argv
            .split_first()
            .ok_or_else(|| TrainerError::InvalidRequest("empty trainer command".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Session { child, stdin, lines: rx })
    }

    fn via_command(&self, argv: &[String], line: &str) -> Result<String, TrainerError> {
        let pooled = self.idle.lock().expect("pool lock").pop();
        let mut session = match pooled {
            Some(s) => s,
            None => self.spawn(argv)?,
        };
        writeln!(session.stdin, "{line}")
            .and_then(|_| session.stdin.flush())
            .map_err(|e| TrainerError::ProtocolError(format!("trainer stdin closed: {e}")))?;
        let reply = match session.lines.recv_timeout(self.timeout) {
            Ok(Ok(reply)) => reply,
            Ok(Err(e)) => return Err(TrainerError::Io(e)),
            Err(RecvTimeoutError::Timeout) => return Err(TrainerError::Timeout(self.timeout)),
            Err(RecvTimeoutError::Disconnected) => {
                return Err(TrainerError::ProtocolError("trainer closed its output".into()))
            }
        };
        self.idle.lock().expect("pool lock").push(session);
        Ok(reply)
    }

    fn via_tcp(&self, addr: &str, line: &str) -> Result<String, TrainerError> {
        let mut stream = TcpStream::connect(addr)?;
        stream.set_read_timeout(Some(self.timeout))?;
        writeln!(stream, "{line}")?;
        stream.flush()?;
        let mut reply = String::new();
        match BufReader::new(&stream).read_line(&mut reply) {
            Ok(0) => Err(TrainerError::ProtocolError("trainer closed the connection".into())),
            Ok(_) => Ok(reply.trim_end_matches(['\r', '\n']).to_string()),
            Err(e) if matches!(e.kind(), std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut) => {
                Err(TrainerError::Timeout(self.timeout))
            }
            Err(e) => Err(e.into()),
        }
    }
}

/// Interpret one reply line.
pub(crate) fn parse_reply(line: &str) -> Result<TrainResponse, TrainerError> {
    let value: serde_json::Value =
        serde_json::from_str(line).map_err(|_| TrainerError::ProtocolError(line.to_string()))?;
    if let Some(err) = value.get("error") {
        let msg = err.as_str().map(str::to_string).unwrap_or_else(|| err.to_string());
        return Err(TrainerError::TrainerReportedError(msg));
    }
    serde_json::from_value(value).map_err(|_| TrainerError::ProtocolError(line.to_string()))
}

impl Trainer for ExternalTrainer {
    fn train(&self, request: &TrainRequest) -> Result<TrainResponse, TrainerError> {
        let line = serde_json::to_string(request).expect("request serialises");
        let reply = match &self.endpoint {
            Endpoint::Command(argv) => self.via_command(argv, &line)?,
            Endpoint::Tcp(addr) => self.via_tcp(addr, &line)?,
        };
        parse_reply(&reply)
    }
}
