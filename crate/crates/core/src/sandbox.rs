//! Ground-truth execution: runs untrusted Python programs in a scratch
//! directory under resource limits, grades candidates against tests and
//! drives the tracer shim.
//!
//! Isolation is a subprocess with `RLIMIT_AS`, its own process group, a
//! cleared environment and (where the kernel allows unprivileged user
//! namespaces) an empty network namespace. It is not a security boundary
//! against hostile code; run it inside a container or VM for that.

use std::io::{BufRead, BufReader, Read, Write};
use std::os::unix::process::{CommandExt, ExitStatusExt};
use std::path::PathBuf;
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Candidate, Corpus, Problem, TestCase};
use crate::outpred::{outputs_match, MatchPolicy};
use crate::trace::{ExecutionTrace, Feed, StreamReader, TraceCaps, TraceError, TraceOutcome};

/// Reference tracer shim shipped with the crate.
pub const BUNDLED_SHIM: &str = include_str!("../shim/trace_shim.py");

const STDERR_KEEP: usize = 64 * 1024;
const GRACE: Duration = Duration::from_secs(1);
const POLL: Duration = Duration::from_millis(2);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Limits {
    pub timeout_s: f64,
    pub max_output_bytes: u64,
    pub max_memory_bytes: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { timeout_s: 10.0, max_output_bytes: 8 << 20, max_memory_bytes: 512 << 20 }
    }
}

impl Limits {
    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_s.max(0.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunOutcome {
    Ok,
    NonzeroExit,
    Timeout,
    SpawnFailure,
    OutputCapExceeded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitStatus {
    Code(i32),
    Signal(i32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub stdout: String,
    pub stderr: String,
    pub exit_status: Option<ExitStatus>,
    pub wall_time: f64,
    pub outcome: RunOutcome,
}

impl RunResult {
    pub fn is_ok(&self) -> bool {
        self.outcome == RunOutcome::Ok
    }

    fn spawn_failure(message: String) -> Self {
        RunResult {
            stdout: String::new(),
            stderr: message,
            exit_status: None,
            wall_time: 0.0,
            outcome: RunOutcome::SpawnFailure,
        }
    }

    /// Stdout with a trailing marker line when the run did not finish
    /// cleanly, so a failed run never looks like a correct one.
    pub fn observed_output(&self) -> String {
        if self.is_ok() {
            return self.stdout.clone();
        }
        let mut out = self.stdout.clone();
        if !out.is_empty() && !out.ends_with('\n') {
            out.push('\n');
        }
        let outcome =
            serde_json::to_value(self.outcome).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
        match self.stderr.lines().rev().find(|l| !l.trim().is_empty()) {
            Some(last) => out.push_str(&format!("[execution failed: {outcome}: {}]\n", last.trim())),
            None => out.push_str(&format!("[execution failed: {outcome}]\n")),
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestSet {
    Public,
    Private,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub set: TestSet,
    pub index: usize,
    pub passed: bool,
    pub run: RunResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub problem_id: String,
    pub solution_id: String,
    /// Source length in characters.
    pub code_chars: usize,
    pub per_test: Vec<TestResult>,
    pub public_pass_count: usize,
    pub all_public: bool,
    pub all_private: bool,
}

impl Verdict {
    /// Passes every public and private test.
    pub fn correct(&self) -> bool {
        self.all_public && self.all_private
    }

    pub fn from_results(candidate: &Candidate, per_test: Vec<TestResult>) -> Self {
        let public_total = per_test.iter().filter(|t| t.set == TestSet::Public).count();
        let public_pass_count = per_test.iter().filter(|t| t.set == TestSet::Public && t.passed).count();
        let all_private = per_test.iter().filter(|t| t.set == TestSet::Private).all(|t| t.passed);
        Verdict {
            problem_id: candidate.problem_id.clone(),
            solution_id: candidate.solution_id.clone(),
            code_chars: candidate.code.chars().count(),
            public_pass_count,
            all_public: public_pass_count == public_total,
            all_private,
            per_test,
        }
    }
}

/// Where to find the tracer shim.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum ShimSource {
    #[default]
    Bundled,
    Path(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum TraceInput {
    Entry { entry_name: String, args: String },
    Stdin { stdin: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceLimits {
    pub caps: TraceCaps,
    pub timeout_s: f64,
    pub max_memory_bytes: u64,
}

impl Default for TraceLimits {
    fn default() -> Self {
        TraceLimits { caps: TraceCaps::default(), timeout_s: 30.0, max_memory_bytes: 1 << 30 }
    }
}

#[derive(Debug, Clone)]
pub struct Sandbox {
    pub python: String,
    pub python_args: Vec<String>,
    pub isolate_network: bool,
    pub policy: MatchPolicy,
    pub shim: ShimSource,
}

impl Default for Sandbox {
    fn default() -> Self {
        Sandbox {
            python: "python3".into(),
            // -I: ignore environment and user site; -S: skip `site` (fast start).
            python_args: vec!["-I".into(), "-S".into()],
            isolate_network: true,
            policy: MatchPolicy::default(),
            shim: ShimSource::Bundled,
        }
    }
}

struct Spawned {
    child: Child,
    _workdir: tempfile::TempDir,
}

impl Sandbox {
    pub fn with_policy(mut self, policy: MatchPolicy) -> Self {
        self.policy = policy;
        self
    }

    fn command(&self, workdir: &std::path::Path, script: &str, max_memory: u64) -> Command {
        let mut cmd = Command::new(&self.python);
        cmd.args(&self.python_args)
            .arg(script)
            .current_dir(workdir)
            .env_clear()
            .env("PATH", std::env::var_os("PATH").unwrap_or_else(|| "/usr/bin:/bin".into()))
            .env("HOME", workdir)
            .env("PYTHONHASHSEED", "0")
            .env("PYTHONIOENCODING", "utf-8")
            .env("PYTHONDONTWRITEBYTECODE", "1")
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped());
        let isolate = self.isolate_network;
        // SAFETY: only async-signal-safe libc calls between fork and exec.
        unsafe {
            cmd.pre_exec(move || {
                libc::setpgid(0, 0);
                let lim = libc::rlimit { rlim_cur: max_memory as libc::rlim_t, rlim_max: max_memory as libc::rlim_t };
                libc::setrlimit(libc::RLIMIT_AS, &lim);
                let core = libc::rlimit { rlim_cur: 0, rlim_max: 0 };
                libc::setrlimit(libc::RLIMIT_CORE, &core);
                if isolate {
                    // Best effort: fails without unprivileged user namespaces.
                    libc::unshare(libc::CLONE_NEWUSER | libc::CLONE_NEWNET);
                }
                Ok(())
            });
        }
        cmd
    }

    fn spawn(&self, file_name: &str, contents: &str, max_memory: u64) -> Result<Spawned, String> {
        let workdir = tempfile::tempdir().map_err(|e| format!("scratch dir: {e}"))?;
        std::fs::write(workdir.path().join(file_name), contents).map_err(|e| format!("write {file_name}: {e}"))?;
        let child = self
            .command(workdir.path(), file_name, max_memory)
            .spawn()
            .map_err(|e| format!("spawn {}: {e}", self.python))?;
        Ok(Spawned { child, _workdir: workdir })
    }

    /// Runs `code` with `stdin`. Failures are reported through the outcome.
    pub fn run_program(&self, code: &str, stdin: &str, limits: &Limits) -> RunResult {
        let start = Instant::now();
        let Spawned { mut child, _workdir } = match self.spawn("main.py", code, limits.max_memory_bytes) {
            Ok(s) => s,
            Err(e) => return RunResult::spawn_failure(e),
        };
        let pid = child.id() as i32;
        feed_stdin(&mut child, stdin.as_bytes().to_vec());

        let overflow = Arc::new(AtomicBool::new(false));
        let stdout_rx =
            spawn_reader(child.stdout.take().expect("piped"), limits.max_output_bytes as usize, Some(overflow.clone()));
        let stderr_rx = spawn_reader(child.stderr.take().expect("piped"), STDERR_KEEP, None);

        let deadline = start + limits.timeout();
        let mut timed_out = false;
        let status = loop {
            match child.try_wait() {
                Ok(Some(status)) => break Some(status),
                Ok(None) => {}
                Err(_) => break None,
            }
            if overflow.load(Ordering::Relaxed) {
                kill_group(pid);
                break child.wait().ok();
            }
            if Instant::now() >= deadline {
                timed_out = true;
                kill_group(pid);
                break child.wait().ok();
            }
            thread::sleep(POLL);
        };
        // Reap anything left in the group that might hold the pipes open.
        kill_group(pid);
        let grace = Instant::now() + GRACE;
        let stdout = recv_until(&stdout_rx, grace);
        let stderr = recv_until(&stderr_rx, grace);
        let wall_time = start.elapsed().as_secs_f64();

        let exit_status = status.map(|s| match s.code() {
            Some(c) => ExitStatus::Code(c),
            None => ExitStatus::Signal(s.signal().unwrap_or(0)),
        });
        let outcome = if overflow.load(Ordering::Relaxed) {
            RunOutcome::OutputCapExceeded
        } else if timed_out {
            RunOutcome::Timeout
        } else if exit_status == Some(ExitStatus::Code(0)) {
            RunOutcome::Ok
        } else {
            RunOutcome::NonzeroExit
        };
        RunResult {
            stdout: String::from_utf8_lossy(&stdout).into_owned(),
            stderr: String::from_utf8_lossy(&stderr).into_owned(),
            exit_status,
            wall_time,
            outcome,
        }
    }

    fn run_test(&self, code: &str, test: &TestCase, limits: &Limits) -> (bool, RunResult) {
        let run = self.run_program(code, &test.input, limits);
        let passed = run.is_ok() && outputs_match(&run.stdout, &test.expected_output, &self.policy);
        (passed, run)
    }

    /// Runs the candidate on every public then private test, sequentially.
    pub fn grade(&self, candidate: &Candidate, problem: &Problem, limits: &Limits) -> Verdict {
        let per_test = tests_of(problem)
            .map(|(set, index, test)| {
                let (passed, run) = self.run_test(&candidate.code, test, limits);
                TestResult { set, index, passed, run }
            })
            .collect();
        Verdict::from_results(candidate, per_test)
    }

    /// Grades many candidates on a pool of `jobs` workers; verdicts come back
    /// in candidate order. Candidates whose problem is missing are skipped.
    pub fn grade_all(&self, candidates: &[Candidate], corpus: &Corpus, limits: &Limits, jobs: usize) -> Vec<Verdict> {
        let work: Vec<(usize, TestSet, usize, &TestCase)> = candidates
            .iter()
            .enumerate()
            .filter_map(|(ci, c)| corpus.get(&c.problem_id).map(|p| (ci, p)))
            .flat_map(|(ci, p)| tests_of(p).map(move |(set, idx, t)| (ci, set, idx, t)))
            .collect();
        let results: Vec<(usize, TestResult)> = with_pool(jobs, || {
            work.par_iter()
                .map(|&(ci, set, index, test)| {
                    let (passed, run) = self.run_test(&candidates[ci].code, test, limits);
                    (ci, TestResult { set, index, passed, run })
                })
                .collect()
        });
        let mut per_candidate: Vec<Vec<TestResult>> = vec![Vec::new(); candidates.len()];
        for (ci, r) in results {
            per_candidate[ci].push(r);
        }
        candidates
            .iter()
            .zip(per_candidate)
            .filter(|(c, _)| corpus.get(&c.problem_id).is_some())
            .map(|(c, tests)| Verdict::from_results(c, tests))
            .collect()
    }

    /// Runs the tracer shim on `source` and validates its event stream.
    pub fn run_traced(
        &self,
        source: &str,
        input: &TraceInput,
        limits: &TraceLimits,
    ) -> Result<ExecutionTrace, TraceError> {
        let start = Instant::now();
        let shim_text = match &self.shim {
            ShimSource::Bundled => BUNDLED_SHIM.to_string(),
            ShimSource::Path(p) => std::fs::read_to_string(p)
                .map_err(|e| TraceError::SpawnFailure(format!("read shim {}: {e}", p.display())))?,
        };
        let Spawned { mut child, _workdir } =
            self.spawn("trace_shim.py", &shim_text, limits.max_memory_bytes).map_err(TraceError::SpawnFailure)?;
        let pid = child.id() as i32;

        let mut job = serde_json::to_value(input).expect("serializable job");
        job["source"] = source.into();
        job["limits"] = serde_json::json!({
            "max_events": limits.caps.max_events,
            "max_bytes": limits.caps.max_bytes,
        });
        feed_stdin(&mut child, job.to_string().into_bytes());

        let (tx, rx) = mpsc::channel::<std::io::Result<String>>();
        let stdout = child.stdout.take().expect("piped");
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        let stderr_rx = spawn_reader(child.stderr.take().expect("piped"), STDERR_KEEP, None);

        let deadline = start + Duration::from_secs_f64(limits.timeout_s.max(0.0));
        let mut reader = StreamReader::new(limits.caps);
        let interrupted = loop {
            let remaining = deadline.saturating_duration_since(Instant::now());
            match rx.recv_timeout(remaining) {
                Ok(Ok(line)) => match reader.feed(&line) {
                    Ok(Feed::Continue) => {}
                    Ok(Feed::CapExceeded) => break None,
                    Ok(Feed::Finished) => break None,
                    Err(e) => {
                        kill_group(pid);
                        let _ = child.wait();
                        return Err(e);
                    }
                },
                Ok(Err(_)) | Err(mpsc::RecvTimeoutError::Disconnected) => {
                    let _ = child.wait();
                    let stderr = recv_until(&stderr_rx, Instant::now() + GRACE);
                    let tail = String::from_utf8_lossy(&stderr);
                    let tail =
                        tail.lines().rev().find(|l| !l.trim().is_empty()).unwrap_or("stream ended without summary");
                    break Some(TraceOutcome::RuntimeError {
                        kind: "shim_aborted".into(),
                        message: tail.trim().to_string(),
                    });
                }
                Err(mpsc::RecvTimeoutError::Timeout) => break Some(TraceOutcome::Timeout),
            }
        };
        kill_group(pid);
        let _ = child.wait();
        Ok(reader.finish(interrupted.unwrap_or(TraceOutcome::Timeout)))
    }

    /// Re-executes `assert entry(call_args) == expected_literal` after `source`.
    /// Traces each `(source, input)` pair on at most `jobs` workers; results
    /// keep the input order.
    pub fn trace_all(
        &self,
        work: &[(&str, TraceInput)],
        limits: &TraceLimits,
        jobs: usize,
    ) -> Vec<Result<ExecutionTrace, TraceError>> {
        with_pool(jobs, || work.par_iter().map(|(source, input)| self.run_traced(source, input, limits)).collect())
    }

    pub fn check_assertion(&self, source: &str, call: &str, expected_literal: &str, limits: &Limits) -> bool {
        let program = format!("{}\nassert {call} == {expected_literal}\n", source.trim_end());
        self.run_program(&program, "", limits).is_ok()
    }
}

/// Public tests first, then private, each with its index within its set.
pub fn tests_of(problem: &Problem) -> impl Iterator<Item = (TestSet, usize, &TestCase)> {
    let public = problem.public_tests.iter().enumerate().map(|(i, t)| (TestSet::Public, i, t));
    let private = problem.private_tests.iter().enumerate().map(|(i, t)| (TestSet::Private, i, t));
    public.chain(private)
}

/// Runs `f` on a dedicated rayon pool of `jobs` threads (0 = logical CPUs).
pub fn with_pool<R: Send>(jobs: usize, f: impl FnOnce() -> R + Send) -> R {
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

fn feed_stdin(child: &mut Child, data: Vec<u8>) {
    if let Some(mut stdin) = child.stdin.take() {
        thread::spawn(move || {
            // The program may exit without reading; a broken pipe is fine.
            let _ = stdin.write_all(&data);
        });
    }
}

fn spawn_reader<R: Read + Send + 'static>(
    mut src: R,
    cap: usize,
    overflow: Option<Arc<AtomicBool>>,
) -> mpsc::Receiver<Vec<u8>> {
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let mut kept = Vec::new();
        let mut buf = [0u8; 8192];
        let mut total = 0usize;
        loop {
            match src.read(&mut buf) {
                Ok(0) | Err(_) => break,
                Ok(n) => {
                    total += n;
                    let room = cap.saturating_sub(kept.len());
                    kept.extend_from_slice(&buf[..n.min(room)]);
                    if total > cap {
                        if let Some(flag) = &overflow {
                            flag.store(true, Ordering::Relaxed);
                            break;
                        }
                    }
                }
            }
        }
        let _ = tx.send(kept);
    });
    rx
}

fn recv_until(rx: &mpsc::Receiver<Vec<u8>>, deadline: Instant) -> Vec<u8> {
    rx.recv_timeout(deadline.saturating_duration_since(Instant::now())).unwrap_or_default()
}

fn kill_group(pid: i32) {
    // SAFETY: plain syscall; the group id is the child's pid (setpgid in pre_exec).
    unsafe {
        libc::kill(-pid, libc::SIGKILL);
    }
}
