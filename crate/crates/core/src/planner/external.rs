use std::io::{self, Read};
use std::path::Path;
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{debug, warn};

use super::{SolveOutcome, SolveResult, SolveStats};
use crate::pddl::extract_plan;

/// Command template with `{domain}` and `{problem}` placeholders, e.g.
/// `java -jar enhsp.jar -o {domain} -f {problem}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalSolverConfig {
    pub command: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_timeout() -> u64 {
    60
}

#[derive(Debug, Error)]
pub enum ExternalError {
    #[error("solver executable `{0}` not found")]
    MissingExecutable(String),
    #[error("solver timed out after {0:?}")]
    Timeout(Duration),
    #[error("invalid solver command template: {0}")]
    BadTemplate(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn drain(mut r: impl Read + Send + 'static) -> thread::JoinHandle<String> {
    thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = r.read_to_end(&mut buf);
        String::from_utf8_lossy(&buf).into_owned()
    })
}

pub fn external_solve(
    cfg: &ExternalSolverConfig,
    domain_file: &Path,
    problem_file: &Path,
) -> Result<SolveResult, ExternalError> {
    let words = shlex::split(&cfg.command).ok_or_else(|| ExternalError::BadTemplate(cfg.command.clone()))?;
    let (program, args) = words.split_first().ok_or_else(|| ExternalError::BadTemplate(cfg.command.clone()))?;
    let fill = |w: &str| {
        w.replace("{domain}", &domain_file.to_string_lossy()).replace("{problem}", &problem_file.to_string_lossy())
    };
    let started = Instant::now();
    let mut child = match Command::new(fill(program))
        .args(args.iter().map(|a| fill(a)))
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
    {
        Ok(c) => c,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(ExternalError::MissingExecutable(program.clone())),
        Err(e) => return Err(e.into()),
    };
    debug!(pid = child.id(), "solver started");
    let out = drain(child.stdout.take().expect("piped stdout"));
    let err = drain(child.stderr.take().expect("piped stderr"));
    let timeout = Duration::from_secs(cfg.timeout_secs);
    let status = loop {
        if let Some(status) = child.try_wait()? {
            break status;
        }
        if started.elapsed() > timeout {
            warn!("solver exceeded {timeout:?}; killing");
            let _ = child.kill();
            let _ = child.wait();
            return Err(ExternalError::Timeout(timeout));
        }
        thread::sleep(Duration::from_millis(10));
    };
    let stdout = out.join().unwrap_or_default();
    let stderr = err.join().unwrap_or_default();
    let stats = SolveStats { duration: started.elapsed(), stderr, ..SolveStats::default() };
    let plan = extract_plan(&stdout);
    let outcome = if !status.success() {
        SolveOutcome::LimitExceeded { reason: format!("solver exited with {status}") }
    } else if plan.is_empty() {
        SolveOutcome::LimitExceeded { reason: "no plan found in solver output".into() }
    } else {
        SolveOutcome::Solved { plan }
    };
    Ok(SolveResult { outcome, stats })
}
