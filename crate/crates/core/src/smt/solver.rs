//! External solver process speaking SMT-LIB 2 over stdio.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::ir::Value;

use super::encode::{value_of, Unrolling};
use super::sexp::{self, depth_delta, Sexp};
use super::SmtError;

/// Environment variable holding the solver command line.
pub const SOLVER_ENV: &str = "CTGEN_SOLVER";
/// Environment variable holding the per-query timeout in seconds.
pub const TIMEOUT_ENV: &str = "CTGEN_SOLVER_TIMEOUT";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub command: String,
    pub args: Vec<String>,
    /// Per `check-sat` timeout.
    pub timeout: Option<Duration>,
    /// Directory receiving one `.smt2` file per query, if set.
    pub dump_dir: Option<PathBuf>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            command: "z3".into(),
            args: vec!["-in".into()],
            timeout: Some(Duration::from_secs(60)),
            dump_dir: None,
        }
    }
}

impl SolverConfig {
    /// Parses a command line such as `z3 -in` or `cvc5 --lang smt2 --incremental`.
    pub fn from_command_line(cmd: &str) -> Option<SolverConfig> {
        let mut parts = cmd.split_whitespace().map(String::from);
        let command = parts.next()?;
        Some(SolverConfig {
            command,
            args: parts.collect(),
            ..SolverConfig::default()
        })
    }

    /// Defaults overridden by `CTGEN_SOLVER` and `CTGEN_SOLVER_TIMEOUT`.
    pub fn from_env() -> SolverConfig {
        let mut cfg = std::env::var(SOLVER_ENV)
            .ok()
            .and_then(|c| SolverConfig::from_command_line(&c))
            .unwrap_or_default();
        if let Some(t) = std::env::var(TIMEOUT_ENV)
            .ok()
            .and_then(|t| t.parse::<f64>().ok())
        {
            cfg.timeout = (t > 0.0).then(|| Duration::from_secs_f64(t));
        }
        cfg
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SatResult {
    Sat,
    Unsat,
    Unknown(String),
}

/// One live solver process. Not shared between threads.
pub struct Session {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<String>,
    timeout: Option<Duration>,
    transcript: Vec<String>,
    dump_dir: Option<PathBuf>,
    dump_name: String,
}

impl Session {
    pub fn start(cfg: &SolverConfig) -> Result<Session, SmtError> {
        let mut child = Command::new(&cfg.command)
            .args(&cfg.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| SmtError::Spawn(format!("{}: {}", cfg.command, e)))?;
        let stdin = child.stdin.take().expect("piped");
        let stdout = child.stdout.take().expect("piped");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Session {
            child,
            stdin,
            lines: rx,
            timeout: cfg.timeout,
            transcript: Vec::new(),
            dump_dir: cfg.dump_dir.clone(),
            dump_name: "query".into(),
        })
    }

    /// Name used for the dumped `.smt2` file.
    pub fn set_dump_name(&mut self, name: &str) {
        self.dump_name = name
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || c == '-' {
                    c
                } else {
                    '_'
                }
            })
            .collect();
    }

    pub fn send(&mut self, cmd: &str) -> Result<(), SmtError> {
        self.transcript.push(cmd.to_string());
        writeln!(self.stdin, "{}", cmd).map_err(|e| SmtError::Io(e.to_string()))
    }

    pub fn send_all<I: IntoIterator<Item = String>>(&mut self, cmds: I) -> Result<(), SmtError> {
        for c in cmds {
            self.send(&c)?;
        }
        Ok(())
    }

    pub fn push(&mut self) -> Result<(), SmtError> {
        self.send("(push 1)")
    }

    pub fn pop(&mut self) -> Result<(), SmtError> {
        self.send("(pop 1)")
    }

    fn flush(&mut self) -> Result<(), SmtError> {
        self.stdin.flush().map_err(|e| SmtError::Io(e.to_string()))
    }

    fn read_line(&mut self, deadline: Option<Instant>) -> Result<String, SmtError> {
        let res = match deadline {
            Some(d) => self
                .lines
                .recv_timeout(d.saturating_duration_since(Instant::now())),
            None => self
                .lines
                .recv()
                .map_err(|_| RecvTimeoutError::Disconnected),
        };
        match res {
            Ok(l) => Ok(l),
            Err(RecvTimeoutError::Timeout) => {
                let _ = self.child.kill();
                Err(SmtError::Timeout)
            }
            Err(RecvTimeoutError::Disconnected) => Err(SmtError::Crashed),
        }
    }

    /// Reads one complete S-expression (possibly spanning lines).
    fn read_sexp(&mut self, deadline: Option<Instant>) -> Result<String, SmtError> {
        let mut buf = String::new();
        loop {
            let line = self.read_line(deadline)?;
            if buf.is_empty() && line.trim().is_empty() {
                continue;
            }
            buf.push_str(&line);
            buf.push('\n');
            if depth_delta(&buf) <= 0 {
                return Ok(buf);
            }
        }
    }

    pub fn check_sat(&mut self) -> Result<SatResult, SmtError> {
        self.send("(check-sat)")?;
        self.flush()?;
        self.dump()?;
        let deadline = self.timeout.map(|t| Instant::now() + t);
        let mut errors = Vec::new();
        loop {
            let resp = self.read_sexp(deadline)?;
            let t = resp.trim();
            match t {
                "sat" => break errors_or(errors, SatResult::Sat),
                "unsat" => break errors_or(errors, SatResult::Unsat),
                "unknown" => {
                    let reason = self.reason_unknown(deadline).unwrap_or_default();
                    break errors_or(errors, SatResult::Unknown(reason));
                }
                "timeout" => break Err(SmtError::Timeout),
                _ if t.starts_with("(error") => errors.push(error_message(t)),
                _ if t == "success" => {}
                _ => {
                    break Err(SmtError::Malformed(format!(
                        "unexpected solver output `{}`",
                        t
                    )))
                }
            }
        }
    }

    fn reason_unknown(&mut self, deadline: Option<Instant>) -> Result<String, SmtError> {
        self.send("(get-info :reason-unknown)")?;
        self.flush()?;
        let r = self.read_sexp(deadline)?;
        Ok(r.trim().to_string())
    }

    /// Model values for every declared symbol of `u`. Symbols missing from
    /// `(get-model)` are requested with `(get-value ...)`.
    pub fn model(&mut self, u: &Unrolling) -> Result<BTreeMap<String, Value>, SmtError> {
        self.send("(get-model)")?;
        self.flush()?;
        let deadline = self.timeout.map(|t| Instant::now() + t);
        let text = self.read_sexp(deadline)?;
        if text.trim_start().starts_with("(error") {
            return Err(SmtError::Solver(error_message(text.trim())));
        }
        let mut vals = super::encode::decode_model(u, &text)?;
        let missing: Vec<&(String, crate::ir::Type)> = u
            .decls
            .iter()
            .filter(|(s, _)| !vals.contains_key(s.trim_matches('|')))
            .collect();
        if !missing.is_empty() {
            let names: Vec<&str> = missing.iter().map(|(s, _)| s.as_str()).collect();
            let more = self.get_values(&names)?;
            for (s, t) in missing {
                let key = s.trim_matches('|');
                let v = more
                    .get(key)
                    .ok_or_else(|| SmtError::MissingSymbol(key.to_string()))?;
                vals.insert(key.to_string(), value_of(v, *t)?);
            }
        }
        Ok(vals)
    }

    /// `(get-value ...)` for the given (quoted) symbols.
    pub fn get_values(&mut self, syms: &[&str]) -> Result<BTreeMap<String, Sexp>, SmtError> {
        self.send(&format!("(get-value ({}))", syms.join(" ")))?;
        self.flush()?;
        let deadline = self.timeout.map(|t| Instant::now() + t);
        let text = self.read_sexp(deadline)?;
        if text.trim_start().starts_with("(error") {
            return Err(SmtError::Solver(error_message(text.trim())));
        }
        let s = sexp::parse(&text).map_err(SmtError::Malformed)?;
        let mut out = BTreeMap::new();
        for pair in s.list().unwrap_or(&[]) {
            if let Some([k, v]) = pair.list() {
                if let Some(a) = k.atom() {
                    out.insert(a.to_string(), v.clone());
                }
            }
        }
        Ok(out)
    }

    /// Writes the commands sent so far to the dump directory.
    fn dump(&mut self) -> Result<(), SmtError> {
        let Some(dir) = &self.dump_dir else {
            return Ok(());
        };
        std::fs::create_dir_all(dir).map_err(|e| SmtError::Io(e.to_string()))?;
        let mut text = self.transcript.join("\n");
        text.push_str("\n(get-model)\n");
        let mut path = dir.join(format!("{}.smt2", self.dump_name));
        let mut n = 1;
        while path.exists() {
            n += 1;
            path = dir.join(format!("{}-{}.smt2", self.dump_name, n));
        }
        std::fs::write(&path, text).map_err(|e| SmtError::Io(e.to_string()))
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        let _ = writeln!(self.stdin, "(exit)");
        let _ = self.stdin.flush();
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn errors_or(errors: Vec<String>, r: SatResult) -> Result<SatResult, SmtError> {
    if errors.is_empty() {
        Ok(r)
    } else {
        Err(SmtError::Solver(errors.join("; ")))
    }
}

fn error_message(t: &str) -> String {
    match sexp::parse(t) {
        Ok(Sexp::List(l)) if l.len() == 2 => match &l[1] {
            Sexp::Str(s) => s.clone(),
            x => x.to_string(),
        },
        _ => t.to_string(),
    }
}
