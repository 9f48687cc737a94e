//! Runs an external SMT-LIB2 solver on scripts from `birlift_core::smt`.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use birlift_core::bir::{BExpr, Typing};
use birlift_core::smt::{implication_query, parse_answer, Answer, MalformedOutput, Model, SmtError};

/// Overrides the default solver path.
pub const SOLVER_ENV: &str = "BIRLIFT_SOLVER";
pub const DEFAULT_SOLVER: &str = "/usr/local/bin/z3";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    #[error("solver not found at {0}")]
    NotFound(PathBuf),
    #[error("cannot encode the query: {0}")]
    Encode(#[from] SmtError),
    #[error("{error}; solver said: {output}")]
    Malformed { error: MalformedOutput, output: String },
    #[error("solver i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug)]
pub struct Solver {
    pub path: PathBuf,
    pub args: Vec<String>,
    pub timeout: Duration,
}

impl Solver {
    /// The explicit path if given, else `$BIRLIFT_SOLVER`, else the default.
    pub fn resolve(explicit: Option<&Path>, timeout: Duration) -> Solver {
        let path = explicit
            .map(Path::to_path_buf)
            .or_else(|| std::env::var_os(SOLVER_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_SOLVER));
        let is_z3 = path.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("z3"));
        let args = if is_z3 { vec!["-in".to_string()] } else { Vec::new() };
        Solver { path, args, timeout }
    }

    pub fn available(&self) -> bool {
        self.path.is_file()
    }

    /// Feeds `script` on stdin and returns stdout, or `None` on timeout.
    pub fn run(&self, script: &str) -> Result<Option<String>, SolverError> {
        let mut child = Command::new(&self.path)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound | std::io::ErrorKind::PermissionDenied => {
                    SolverError::NotFound(self.path.clone())
                }
                _ => SolverError::Io(e),
            })?;
        let mut stdin = child.stdin.take().expect("piped stdin");
        let script = script.to_string();
        let writer = std::thread::spawn(move || stdin.write_all(script.as_bytes()));
        let mut stdout = child.stdout.take().expect("piped stdout");
        let reader = std::thread::spawn(move || {
            let mut s = String::new();
            stdout.read_to_string(&mut s).map(|_| s)
        });
        let start = Instant::now();
        loop {
            if child.try_wait()?.is_some() {
                break;
            }
            if start.elapsed() >= self.timeout {
                let _ = child.kill();
                let _ = child.wait();
                return Ok(None);
            }
            std::thread::sleep(Duration::from_millis(2));
        }
        // A solver that exits early closes the pipe; the write error is moot.
        let _ = writer.join();
        let out = reader.join().map_err(|_| std::io::Error::other("reader thread panicked"))??;
        Ok(Some(out))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Proof {
    Proved,
    Counterexample(Model),
    Unknown(String),
}

/// Checks `premise ⇒ conclusion` by asking for a model of
/// `premise ∧ ¬conclusion`.
pub fn prove_implication(
    premise: &BExpr,
    conclusion: &BExpr,
    typing: &Typing,
    solver: &Solver,
) -> Result<(Proof, String), SolverError> {
    let q = implication_query(premise, conclusion, typing)?;
    let Some(out) = solver.run(&q.script)? else {
        return Ok((Proof::Unknown("timeout".into()), q.script));
    };
    let answer = parse_answer(&out, &q.vars).map_err(|error| SolverError::Malformed { error, output: out.clone() })?;
    let proof = match answer {
        Answer::Unsat => Proof::Proved,
        Answer::Sat(m) => Proof::Counterexample(m),
        Answer::Unknown(r) => Proof::Unknown(r),
    };
    Ok((proof, q.script))
}
