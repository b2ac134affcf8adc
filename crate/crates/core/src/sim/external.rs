//! Client for simulators hosted in a child process.
//!
//! Framing is one UTF-8 JSON object per `\n`-terminated line. On start-up the
//! child announces its dimensions with `{"k": <int>, "n": <int>}`. Each request
//! `{"id": <int>, "theta": [...], "times": [...]}` is answered by either
//! `{"id": <int>, "values": [[...], ...]}` (one row per requested time) or
//! `{"id": <int>, "error": "<message>"}`.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{check_request, SimError, Simulator};
use crate::signal::Signal;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

#[derive(Deserialize)]
struct Handshake {
    k: usize,
    n: usize,
}

#[derive(Serialize)]
struct Request<'a> {
    id: u64,
    theta: &'a [f64],
    times: &'a [f64],
}

#[derive(Deserialize)]
struct Reply {
    id: u64,
    #[serde(default)]
    values: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    error: Option<String>,
}

/// One live child process. Requests on a worker are strictly serialized.
struct Worker {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
    next_id: u64,
}

impl Worker {
    fn spawn(command: &[String], timeout: Duration) -> Result<(Self, Handshake), SimError> {
        let (program, args) = command
            .split_first()
            .ok_or_else(|| SimError::Failure("empty simulator command".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| SimError::Failure(format!("cannot spawn {program:?}: {e}")))?;
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
        let mut worker = Worker { child, stdin, lines: rx, next_id: 0 };
        let line = worker.read_line(timeout)?;
        let hello: Handshake = serde_json::from_str(&line)
            .map_err(|e| SimError::Failure(format!("bad handshake {line:?}: {e}")))?;
        Ok((worker, hello))
    }

    fn read_line(&mut self, timeout: Duration) -> Result<String, SimError> {
        match self.lines.recv_timeout(timeout) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => Err(SimError::Failure(format!("reading from simulator: {e}"))),
            Err(RecvTimeoutError::Timeout) => {
                Err(SimError::Failure(format!("simulator timed out after {timeout:?}")))
            }
            Err(RecvTimeoutError::Disconnected) => {
                let status = self.child.try_wait().ok().flatten();
                Err(SimError::Failure(match status {
                    Some(s) => format!("simulator exited ({s})"),
                    None => "simulator closed its output".into(),
                }))
            }
        }
    }

    /// Sends one request. `Ok(Err(..))` is a well-formed error reply: the
    /// worker stays usable. `Err(..)` means the worker must be discarded.
    fn call(
        &mut self,
        theta: &[f64],
        times: &[f64],
        n: usize,
        timeout: Duration,
    ) -> Result<Result<Vec<f64>, SimError>, SimError> {
        let id = self.next_id;
        self.next_id += 1;
        let mut line = serde_json::to_string(&Request { id, theta, times })
            .map_err(|e| SimError::Failure(e.to_string()))?;
        line.push('\n');
        self.stdin
            .write_all(line.as_bytes())
            .and_then(|_| self.stdin.flush())
            .map_err(|e| SimError::Failure(format!("writing to simulator: {e}")))?;

        let text = self.read_line(timeout)?;
        let reply: Reply = serde_json::from_str(&text)
            .map_err(|e| SimError::Failure(format!("malformed reply {text:?}: {e}")))?;
        if reply.id != id {
            return Err(SimError::Failure(format!("reply id {} does not match request id {id}", reply.id)));
        }
        if let Some(msg) = reply.error {
            return Ok(Err(SimError::Failure(msg)));
        }
        let rows = reply
            .values
            .ok_or_else(|| SimError::Failure("reply has neither values nor error".into()))?;
        if rows.len() != times.len() {
            return Err(SimError::Failure(format!(
                "expected {} rows, simulator returned {}",
                times.len(),
                rows.len()
            )));
        }
        let mut flat = Vec::with_capacity(rows.len() * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(SimError::Failure(format!("row {i} has {} values, expected {n}", row.len())));
            }
            flat.extend_from_slice(row);
        }
        Ok(Ok(flat))
    }
}

impl Drop for Worker {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// A simulator backed by a pool of identical child processes. Each concurrent
/// caller checks out its own child, so the pool grows to the number of
/// threads calling [`Simulator::simulate`] at once.
pub struct ExternalSimulator {
    command: Vec<String>,
    timeout: Duration,
    k: usize,
    n: usize,
    idle: Mutex<Vec<Worker>>,
}

impl std::fmt::Debug for ExternalSimulator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalSimulator")
            .field("command", &self.command)
            .field("timeout", &self.timeout)
            .field("k", &self.k)
            .field("n", &self.n)
            .finish()
    }
}

impl ExternalSimulator {
    /// Spawns the first child and reads its handshake.
    pub fn spawn(command: Vec<String>) -> Result<Self, SimError> {
        Self::with_timeout(command, DEFAULT_TIMEOUT)
    }

    pub fn with_timeout(command: Vec<String>, timeout: Duration) -> Result<Self, SimError> {
        let (worker, hello) = Worker::spawn(&command, timeout)?;
        Ok(Self { command, timeout, k: hello.k, n: hello.n, idle: Mutex::new(vec![worker]) })
    }

    fn checkout(&self) -> Result<Worker, SimError> {
        if let Some(w) = self.idle.lock().expect("pool lock").pop() {
            return Ok(w);
        }
        let (worker, hello) = Worker::spawn(&self.command, self.timeout)?;
        if (hello.k, hello.n) != (self.k, self.n) {
            return Err(SimError::Failure(format!(
                "respawned simulator announced k={}, n={}; expected k={}, n={}",
                hello.k, hello.n, self.k, self.n
            )));
        }
        Ok(worker)
    }
}

impl Simulator for ExternalSimulator {
    fn param_dim(&self) -> usize {
        self.k
    }

    fn output_dim(&self) -> usize {
        self.n
    }

    fn simulate(&self, theta: &[f64], times: &[f64]) -> Result<Signal, SimError> {
        check_request(self, theta, times)?;
        let mut worker = self.checkout()?;
        // a worker that failed at the protocol level is dropped (and killed)
        let values = worker.call(theta, times, self.n, self.timeout)?;
        self.idle.lock().expect("pool lock").push(worker);
        Ok(Signal::from_flat(times.to_vec(), values?, self.n)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sh(script: &str) -> Vec<String> {
        vec!["sh".into(), "-c".into(), script.into()]
    }

    const HELLO: &str = r#"echo '{"k":1,"n":2}';"#;

    #[test]
    fn handshake_and_reply() {
        let script = format!(r#"{HELLO} while read l; do echo '{{"id":0,"values":[[1.5,2],[3,4]]}}'; done"#);
        let sim = ExternalSimulator::spawn(sh(&script)).unwrap();
        assert_eq!((sim.param_dim(), sim.output_dim()), (1, 2));
        let s = sim.simulate(&[0.0], &[0.0, 1.0]).unwrap();
        assert_eq!(s.sample(0), &[1.5, 2.0]);
        assert_eq!(s.sample(1), &[3.0, 4.0]);
    }

    #[test]
    fn error_reply_keeps_worker() {
        let script = format!(r#"{HELLO} while read l; do echo '{{"id":0,"error":"diverged"}}'; done"#);
        let sim = ExternalSimulator::spawn(sh(&script)).unwrap();
        assert_eq!(sim.simulate(&[0.0], &[0.0]), Err(SimError::Failure("diverged".into())));
        assert_eq!(sim.idle.lock().unwrap().len(), 1);
    }

    #[test]
    fn wrong_row_count_fails() {
        let script = format!(r#"{HELLO} while read l; do echo '{{"id":0,"values":[[1,2]]}}'; done"#);
        let sim = ExternalSimulator::spawn(sh(&script)).unwrap();
        let err = sim.simulate(&[0.0], &[0.0, 1.0]).unwrap_err();
        assert!(matches!(err, SimError::Failure(ref m) if m.contains("rows")), "{err}");
    }

    #[test]
    fn id_mismatch_fails() {
        let script = format!(r#"{HELLO} while read l; do echo '{{"id":7,"values":[[1,2]]}}'; done"#);
        let sim = ExternalSimulator::spawn(sh(&script)).unwrap();
        let err = sim.simulate(&[0.0], &[0.0]).unwrap_err();
        assert!(matches!(err, SimError::Failure(ref m) if m.contains("id")), "{err}");
    }

    #[test]
    fn crash_and_timeout_fail() {
        let crash = ExternalSimulator::spawn(sh(&format!("{HELLO} read l; exit 3"))).unwrap();
        assert!(matches!(crash.simulate(&[0.0], &[0.0]), Err(SimError::Failure(_))));

        let hang = ExternalSimulator::with_timeout(
            sh(&format!("{HELLO} read l; sleep 30")),
            Duration::from_millis(200),
        )
        .unwrap();
        let err = hang.simulate(&[0.0], &[0.0]).unwrap_err();
        assert!(matches!(err, SimError::Failure(ref m) if m.contains("timed out")), "{err}");
    }

    #[test]
    fn missing_handshake_fails() {
        assert!(matches!(ExternalSimulator::spawn(sh("exit 1")), Err(SimError::Failure(_))));
        assert!(matches!(ExternalSimulator::spawn(sh("echo hello")), Err(SimError::Failure(_))));
        assert!(matches!(
            ExternalSimulator::spawn(vec!["/nonexistent/simulator".into()]),
            Err(SimError::Failure(_))
        ));
    }
}
