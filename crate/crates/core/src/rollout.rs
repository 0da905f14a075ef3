//! Multi-turn solve / simulate / judge rollouts with context switching, and
//! the agents that answer each turn.
//!
//! Every turn is a fresh single-turn prompt built only from what that turn
//! needs. Turns are numbered from 1 across the whole rollout; the simulate
//! calls of one round share a turn number and differ by `test_index`.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{self, Candidate, Corpus, CorpusError, Problem};
use crate::nlex::{TranslationJob, Translator};
use crate::outpred::{build_outpred_prompt, parse_outpred_response, MatchPolicy, PredictionAttempt, SIMULATION_FAILED};
use crate::sandbox::{self, Limits, RunResult, Sandbox};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Solve,
    Simulate,
    Judge,
    Translate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackItem {
    pub input: String,
    pub expected_output: String,
    pub predicted_output: String,
}

/// What an agent sees for one turn. `prompt` is all a model gets; the other
/// fields let scripted and executing agents answer without parsing it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentRequest {
    pub role: Role,
    pub turn: usize,
    pub test_index: Option<usize>,
    pub problem_id: String,
    pub solution_id: Option<String>,
    pub attempt: usize,
    pub prompt: String,
    pub code: Option<String>,
    pub stdin: Option<String>,
    pub feedback: Vec<FeedbackItem>,
    pub seed: u64,
}

impl AgentRequest {
    pub fn new(role: Role, turn: usize, problem_id: impl Into<String>, prompt: impl Into<String>, seed: u64) -> Self {
        AgentRequest {
            role,
            turn,
            test_index: None,
            problem_id: problem_id.into(),
            solution_id: None,
            attempt: 0,
            prompt: prompt.into(),
            code: None,
            stdin: None,
            feedback: Vec::new(),
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Reply {
    Text(String),
    /// Real execution; the observed output is used as the prediction.
    Execution(RunResult),
}

impl Reply {
    pub fn raw(&self) -> String {
        match self {
            Reply::Text(t) => t.clone(),
            Reply::Execution(run) => run.observed_output(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AgentError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("{0}")]
    Unsupported(String),
    #[error("no replay entry matches {0}")]
    NoReplay(String),
}

pub trait Agent: Send + Sync {
    fn respond(&self, request: &AgentRequest) -> Result<Reply, AgentError>;
}

impl<F> Agent for F
where
    F: Fn(&AgentRequest) -> Result<Reply, AgentError> + Send + Sync,
{
    fn respond(&self, request: &AgentRequest) -> Result<Reply, AgentError> {
        self(request)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Sampling {
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling { temperature: 1.0, top_p: 0.95, max_tokens: 32_768 }
    }
}

/// HTTP chat endpoint: POSTs `{"messages", "temperature", "top_p",
/// "max_tokens"}` and reads `{"content"}`.
#[derive(Debug, Clone)]
pub struct RemoteModel {
    pub endpoint: String,
    pub api_key: Option<String>,
    pub sampling: Sampling,
    client: reqwest::blocking::Client,
}

impl RemoteModel {
    pub fn new(
        endpoint: impl Into<String>,
        api_key: Option<String>,
        sampling: Sampling,
        timeout: Duration,
    ) -> Result<Self, AgentError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| AgentError::Transport(e.to_string()))?;
        Ok(RemoteModel { endpoint: endpoint.into(), api_key, sampling, client })
    }
}

#[derive(Deserialize)]
struct ModelResponse {
    content: String,
}

impl Agent for RemoteModel {
    fn respond(&self, request: &AgentRequest) -> Result<Reply, AgentError> {
        let body = serde_json::json!({
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": self.sampling.temperature,
            "top_p": self.sampling.top_p,
            "max_tokens": self.sampling.max_tokens,
        });
        let mut http = self.client.post(&self.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            http = http.bearer_auth(key);
        }
        let resp = http.send().map_err(|e| AgentError::Transport(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(AgentError::Transport(format!("HTTP {status}")));
        }
        let parsed: ModelResponse =
            resp.json().map_err(|e| AgentError::Transport(format!("bad response body: {e}")))?;
        Ok(Reply::Text(parsed.content))
    }
}

/// Ground-truth simulator: runs the code in the sandbox.
#[derive(Debug, Clone)]
pub struct OracleExecutor {
    pub sandbox: Sandbox,
    pub limits: Limits,
}

impl Agent for OracleExecutor {
    fn respond(&self, request: &AgentRequest) -> Result<Reply, AgentError> {
        if request.role != Role::Simulate {
            return Err(AgentError::Unsupported(format!("oracle executor cannot act as {:?}", request.role)));
        }
        let code = request.code.as_deref().unwrap_or("");
        let stdin = request.stdin.as_deref().unwrap_or("");
        Ok(Reply::Execution(self.sandbox.run_program(code, stdin, &self.limits)))
    }
}

/// Request fields a replay entry may pin; absent fields match anything.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayMatch {
    pub role: Option<Role>,
    pub turn: Option<usize>,
    pub test_index: Option<usize>,
    pub problem_id: Option<String>,
    pub solution_id: Option<String>,
    pub attempt: Option<usize>,
}

impl ReplayMatch {
    fn specificity(&self, req: &AgentRequest) -> Option<usize> {
        let mut score = 0;
        macro_rules! pin {
            ($field:ident, $value:expr) => {
                if let Some(v) = &self.$field {
                    if $value != Some(v) {
                        return None;
                    }
                    score += 1;
                }
            };
        }
        pin!(role, Some(&req.role));
        pin!(turn, Some(&req.turn));
        pin!(test_index, req.test_index.as_ref());
        pin!(problem_id, Some(&req.problem_id));
        pin!(solution_id, req.solution_id.as_ref());
        pin!(attempt, Some(&req.attempt));
        Some(score)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayEntry {
    #[serde(rename = "match")]
    pub matcher: ReplayMatch,
    pub response: String,
}

/// Answers from a fixture. The most specific matching entry wins; among
/// equally specific entries the earliest does.
#[derive(Debug, Clone, Default)]
pub struct ScriptedReplay {
    entries: Vec<ReplayEntry>,
}

impl ScriptedReplay {
    pub fn new(entries: Vec<ReplayEntry>) -> Self {
        ScriptedReplay { entries }
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        corpus::read_jsonl(path).map(ScriptedReplay::new)
    }

    pub fn entries(&self) -> &[ReplayEntry] {
        &self.entries
    }
}

impl Agent for ScriptedReplay {
    fn respond(&self, request: &AgentRequest) -> Result<Reply, AgentError> {
        let mut best: Option<(usize, &ReplayEntry)> = None;
        for e in &self.entries {
            if let Some(s) = e.matcher.specificity(request) {
                if best.is_none_or(|(b, _)| s > b) {
                    best = Some((s, e));
                }
            }
        }
        best.map(|(_, e)| Reply::Text(e.response.clone())).ok_or_else(|| {
            AgentError::NoReplay(format!(
                "role={:?} turn={} test_index={:?} problem_id={}",
                request.role, request.turn, request.test_index, request.problem_id
            ))
        })
    }
}

/// Serializable endpoint description used by configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgentEndpoint {
    RemoteModel {
        #[serde(default)]
        endpoint: Option<String>,
        #[serde(default, flatten)]
        sampling: Sampling,
        #[serde(default = "default_request_timeout")]
        timeout_s: f64,
    },
    OracleExecutor,
    ScriptedReplay {
        fixture: std::path::PathBuf,
    },
}

fn default_request_timeout() -> f64 {
    600.0
}

/// Shared inputs for turning an endpoint description into an agent.
#[derive(Debug, Clone, Default)]
pub struct AgentContext {
    pub sandbox: Sandbox,
    pub limits: Limits,
    /// Fallback endpoint address, normally `MODEL_ENDPOINT`.
    pub model_endpoint: Option<String>,
    /// Normally `MODEL_API_KEY`.
    pub api_key: Option<String>,
}

pub fn build_agent(endpoint: &AgentEndpoint, role: Role, ctx: &AgentContext) -> Result<Box<dyn Agent>, RolloutError> {
    match endpoint {
        AgentEndpoint::OracleExecutor if role != Role::Simulate => {
            Err(RolloutError::InvalidEndpoint(format!("oracle_executor is only valid for the simulator, not {role:?}")))
        }
        AgentEndpoint::OracleExecutor => {
            Ok(Box::new(OracleExecutor { sandbox: ctx.sandbox.clone(), limits: ctx.limits }))
        }
        AgentEndpoint::ScriptedReplay { fixture } => ScriptedReplay::load(fixture)
            .map(|r| Box::new(r) as Box<dyn Agent>)
            .map_err(|e| RolloutError::InvalidEndpoint(e.to_string())),
        AgentEndpoint::RemoteModel { endpoint, sampling, timeout_s } => {
            let url = endpoint.clone().or_else(|| ctx.model_endpoint.clone()).ok_or_else(|| {
                RolloutError::InvalidEndpoint("remote_model needs an endpoint (set MODEL_ENDPOINT)".into())
            })?;
            let model = RemoteModel::new(url, ctx.api_key.clone(), *sampling, Duration::from_secs_f64(*timeout_s))
                .map_err(|e| RolloutError::InvalidEndpoint(e.to_string()))?;
            Ok(Box::new(model))
        }
    }
}

/// Lets any agent serve as an NLEX translator.
pub struct AgentTranslator<'a>(pub &'a dyn Agent);

impl Translator for AgentTranslator<'_> {
    fn translate(&self, job: &TranslationJob) -> Result<String, String> {
        let mut req = AgentRequest::new(Role::Translate, 1, job.entry_name.clone(), job.prompt.clone(), 0);
        req.code = Some(job.source.clone());
        match self.0.respond(&req) {
            Ok(Reply::Text(t)) => Ok(t),
            Ok(Reply::Execution(_)) => Err("translator returned an execution".into()),
            Err(e) => Err(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RolloutError {
    #[error("no code found in response")]
    NoCodeFound,
    #[error("judge response has neither a submit marker nor code")]
    UnparseableJudge,
    #[error("judge turn needs at least one feedback item")]
    EmptyFeedback,
    #[error("simulate prompt leaks the expected output of test {0}")]
    ContextLeak(usize),
    #[error("invalid endpoint: {0}")]
    InvalidEndpoint(String),
    #[error("agent failed: {0}")]
    Agent(AgentError),
}

/// Printable form of test data inside prompts: newlines as `\n`.
pub fn escape_block(text: &str) -> String {
    text.replace('\\', "\\\\").replace('\r', "\\r").replace('\n', "\\n")
}

fn test_block(out: &mut String, index: usize, input: &str, expected: &str) {
    out.push_str(&format!(
        "----- Test {index} -----\n## Input\n`{}`\n\n## Expected Output\n`{}`\n",
        escape_block(input),
        escape_block(expected)
    ));
}

pub fn build_solve_prompt(problem: &Problem) -> String {
    let mut out = format!(
        "Provide a Python solution for the following competitive programming question: {}\n\n\
         The program must read from standard input and write to standard output. \
         Enclose the complete program in a markdown code block.\n\n\
         --------------- Example Tests------------\n",
        problem.statement.trim_end()
    );
    for (i, t) in problem.public_tests.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        test_block(&mut out, i, &t.input, &t.expected_output);
    }
    out
}

pub fn build_fix_prompt(problem: &Problem, solution: &str, feedback: &[FeedbackItem]) -> Result<String, RolloutError> {
    if feedback.is_empty() {
        return Err(RolloutError::EmptyFeedback);
    }
    let mut out = format!(
        "Review the provided code solution given the execution feedback and judge if it is correct or buggy. \
         If the code is correct, end your response with a markdown comment EXACTLY ```#SUBMIT```. \
         DO NOT repeat the given code. If the code is incorrect, provide a correct solution. \
         Enclose the corrected program in a markdown code block.\n\n\
         Problem: {}\n\
         Attempted Solution:\n```python\n{}\n```\n\n",
        problem.statement.trim_end(),
        solution.trim_end()
    );
    for (i, item) in feedback.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        test_block(&mut out, i, &item.input, &item.expected_output);
        out.push_str(&format!("\n## Output for the attempt\n`{}`\n", escape_block(&item.predicted_output)));
    }
    Ok(out)
}

/// Contents of every complete ``` fence pair, in order. Fences pair up
/// sequentially wherever they appear, so inline blocks such as
/// "```#SUBMIT```" count; a dangling final fence is ignored.
fn fenced_blocks(text: &str) -> Vec<(usize, &str)> {
    let marks: Vec<usize> = text.match_indices("```").map(|(i, _)| i).collect();
    marks.chunks_exact(2).map(|pair| (pair[1] + 3, &text[pair[0] + 3..pair[1]])).collect()
}

fn strip_language_tag(block: &str) -> &str {
    match block.split_once('\n') {
        Some((first, rest))
            if !first.is_empty()
                && first.chars().all(|c| c.is_ascii_alphanumeric() || "+-_.#".contains(c))
                && !rest.trim().is_empty() =>
        {
            rest
        }
        _ => block,
    }
}

fn is_submit_marker(block: &str) -> bool {
    block.trim() == "#SUBMIT"
}

const REGION_FINDER: &str = r#"
import ast, sys
lines = sys.stdin.read().split("\n")[:600]
def substantive(src):
    try:
        tree = ast.parse(src)
    except (SyntaxError, ValueError):
        return False
    for node in tree.body:
        if not isinstance(node, ast.Expr):
            return True
        if any(isinstance(n, ast.Call) for n in ast.walk(node)):
            return True
    return False
n = len(lines)
for size in range(n, 0, -1):
    for i in range(n - size + 1):
        chunk = lines[i:i + size]
        if not chunk[0].strip() or not chunk[-1].strip() or chunk[0][:1].isspace():
            continue
        src = "\n".join(chunk)
        if substantive(src):
            sys.stdout.write(src)
            sys.exit(0)
"#;

/// Longest run of lines that parses as Python and does something.
fn longest_python_region(text: &str) -> Option<String> {
    let mut child = Command::new("python3")
        .args(["-I", "-S", "-c", REGION_FINDER])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .ok()?;
    let mut stdin = child.stdin.take()?;
    let data = text.to_string();
    let writer = std::thread::spawn(move || {
        let _ = stdin.write_all(data.as_bytes());
    });
    let out = child.wait_with_output().ok()?;
    let _ = writer.join();
    let region = String::from_utf8(out.stdout).ok()?;
    (!region.trim().is_empty()).then_some(region)
}

/// The last fenced code block; failing that, the longest region of the
/// response that parses as Python.
pub fn parse_solution(response: &str) -> Result<String, RolloutError> {
    let code = fenced_blocks(response)
        .into_iter()
        .rev()
        .map(|(_, b)| strip_language_tag(b))
        .find(|b| !b.trim().is_empty() && !is_submit_marker(b));
    if let Some(code) = code {
        return Ok(code.trim_matches('\n').to_string() + "\n");
    }
    longest_python_region(response).map(|r| r + "\n").ok_or(RolloutError::NoCodeFound)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum JudgeAction {
    Submit,
    Fix { code: String },
}

/// Submit when the response ends with the fenced `#SUBMIT` marker.
pub fn parse_submit_or_fix(response: &str) -> Result<JudgeAction, RolloutError> {
    if let Some(&(end, block)) = fenced_blocks(response).last() {
        if is_submit_marker(block) && response[end..].trim().is_empty() {
            return Ok(JudgeAction::Submit);
        }
    }
    match parse_solution(response) {
        Ok(code) => Ok(JudgeAction::Fix { code }),
        Err(_) => Err(RolloutError::UnparseableJudge),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum ParsedAction {
    Solution { code: String },
    Prediction { predicted_output: String },
    Submit,
    Fix { code: String },
    Unparseable { reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnRecord {
    pub turn: usize,
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_index: Option<usize>,
    pub prompt: String,
    pub raw_response: String,
    pub parsed_action: ParsedAction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RolloutTranscript {
    pub problem_id: String,
    pub turns: Vec<TurnRecord>,
    pub solutions: Vec<String>,
    pub final_solution: String,
    pub submitted: bool,
    pub solution_turns_used: usize,
    pub k_max: usize,
    pub seed: u64,
}

impl RolloutTranscript {
    fn new(problem_id: &str, k_max: usize, seed: u64) -> Self {
        RolloutTranscript {
            problem_id: problem_id.to_string(),
            turns: Vec::new(),
            solutions: Vec::new(),
            final_solution: String::new(),
            submitted: false,
            solution_turns_used: 0,
            k_max,
            seed,
        }
    }

    fn close(&mut self) {
        self.final_solution = self.solutions.last().cloned().unwrap_or_default();
        self.solution_turns_used = self.solutions.len();
    }

    /// The roles in turn order, simulate calls of a round collapsed.
    pub fn role_sequence(&self) -> Vec<Role> {
        let mut seq: Vec<(usize, Role)> = self.turns.iter().map(|t| (t.turn, t.role)).collect();
        seq.dedup();
        seq.into_iter().map(|(_, r)| r).collect()
    }
}

/// A rollout that stopped early; the transcript holds every completed turn.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("rollout for {} aborted: {error}", transcript.problem_id)]
pub struct RolloutFailure {
    pub error: RolloutError,
    pub transcript: Box<RolloutTranscript>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutConfig {
    /// Maximum number of judge rounds after the initial solution.
    pub k_max: usize,
    pub seed: u64,
    /// Extra attempts after a transport failure.
    pub retries: usize,
    pub retry_backoff: Duration,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        RolloutConfig { k_max: 9, seed: 0, retries: 2, retry_backoff: Duration::from_millis(500) }
    }
}

pub struct Agents<'a> {
    pub solver: &'a dyn Agent,
    pub simulator: &'a dyn Agent,
    pub judge: &'a dyn Agent,
}

fn call_with_retries(
    agent: &dyn Agent,
    req: &AgentRequest,
    retries: usize,
    backoff: Duration,
) -> Result<Reply, AgentError> {
    let mut attempt = 0;
    loop {
        match agent.respond(req) {
            Err(AgentError::Transport(_)) if attempt < retries => {
                attempt += 1;
                std::thread::sleep(backoff * attempt as u32);
            }
            other => return other,
        }
    }
}

fn derive_seed(seed: u64, turn: usize, test_index: usize, attempt: usize) -> u64 {
    let mut h = seed ^ 0x9e37_79b9_7f4a_7c15;
    for v in [turn as u64, test_index as u64, attempt as u64] {
        h = (h ^ v).wrapping_mul(0x0100_0000_01b3).rotate_left(29);
    }
    h
}

fn predicted_from(reply: &Reply) -> String {
    match reply {
        Reply::Execution(run) => run.observed_output(),
        Reply::Text(t) => parse_outpred_response(t).unwrap_or_else(|_| SIMULATION_FAILED.to_string()),
    }
}

fn leaks_expected(prompt: &str, code: &str, stdin: &str, expected: &str) -> bool {
    let needle = expected.trim();
    if needle.is_empty() || code.contains(needle) || stdin.contains(needle) {
        return false;
    }
    prompt.contains(needle) && !build_outpred_prompt("", "").contains(needle)
}

/// Solve, then up to `k_max` rounds of simulate-every-public-test and judge.
/// Exhausting the budget keeps the latest solution unsubmitted.
pub fn run_rollout(
    problem: &Problem,
    agents: &Agents<'_>,
    config: &RolloutConfig,
) -> Result<RolloutTranscript, RolloutFailure> {
    let mut transcript = RolloutTranscript::new(&problem.id, config.k_max, config.seed);
    let fail = |mut transcript: RolloutTranscript, error: RolloutError| {
        transcript.close();
        RolloutFailure { error, transcript: Box::new(transcript) }
    };
    let call = |agent: &dyn Agent, req: &AgentRequest| {
        call_with_retries(agent, req, config.retries, config.retry_backoff).map_err(RolloutError::Agent)
    };

    let mut turn = 1;
    let prompt = build_solve_prompt(problem);
    let mut req =
        AgentRequest::new(Role::Solve, turn, &problem.id, prompt.clone(), derive_seed(config.seed, turn, 0, 0));
    req.solution_id = Some("0".into());
    let reply = match call(agents.solver, &req) {
        Ok(r) => r,
        Err(e) => return Err(fail(transcript, e)),
    };
    let raw = reply.raw();
    let (code, action) = match parse_solution(&raw) {
        Ok(code) => (code.clone(), ParsedAction::Solution { code }),
        Err(e) => (String::new(), ParsedAction::Unparseable { reason: e.to_string() }),
    };
    transcript.turns.push(TurnRecord {
        turn,
        role: Role::Solve,
        test_index: None,
        prompt,
        raw_response: raw,
        parsed_action: action,
    });
    transcript.solutions.push(code);

    for _round in 0..config.k_max {
        let current = transcript.solutions.last().cloned().unwrap_or_default();
        let solution_id = (transcript.solutions.len() - 1).to_string();
        turn += 1;
        let mut requests = Vec::with_capacity(problem.public_tests.len());
        for (i, test) in problem.public_tests.iter().enumerate() {
            let prompt = build_outpred_prompt(&current, &test.input);
            if leaks_expected(&prompt, &current, &test.input, &test.expected_output) {
                return Err(fail(transcript, RolloutError::ContextLeak(i)));
            }
            let mut req =
                AgentRequest::new(Role::Simulate, turn, &problem.id, prompt, derive_seed(config.seed, turn, i, 0));
            req.test_index = Some(i);
            req.solution_id = Some(solution_id.clone());
            req.code = Some(current.clone());
            req.stdin = Some(test.input.clone());
            requests.push(req);
        }
        let replies: Vec<Result<Reply, RolloutError>> =
            requests.par_iter().map(|req| call(agents.simulator, req)).collect();
        let mut feedback = Vec::with_capacity(requests.len());
        for ((req, reply), test) in requests.into_iter().zip(replies).zip(&problem.public_tests) {
            let reply = match reply {
                Ok(r) => r,
                Err(e) => return Err(fail(transcript, e)),
            };
            let predicted = predicted_from(&reply);
            transcript.turns.push(TurnRecord {
                turn,
                role: Role::Simulate,
                test_index: req.test_index,
                prompt: req.prompt,
                raw_response: reply.raw(),
                parsed_action: ParsedAction::Prediction { predicted_output: predicted.clone() },
            });
            feedback.push(FeedbackItem {
                input: test.input.clone(),
                expected_output: test.expected_output.clone(),
                predicted_output: predicted,
            });
        }

        turn += 1;
        let prompt = match build_fix_prompt(problem, &current, &feedback) {
            Ok(p) => p,
            Err(e) => return Err(fail(transcript, e)),
        };
        let mut req =
            AgentRequest::new(Role::Judge, turn, &problem.id, prompt.clone(), derive_seed(config.seed, turn, 0, 0));
        req.solution_id = Some(solution_id);
        req.code = Some(current.clone());
        req.feedback = feedback;
        let reply = match call(agents.judge, &req) {
            Ok(r) => r,
            Err(e) => return Err(fail(transcript, e)),
        };
        let raw = reply.raw();
        let (action, next) = match parse_submit_or_fix(&raw) {
            Ok(JudgeAction::Submit) => (ParsedAction::Submit, None),
            Ok(JudgeAction::Fix { code }) => (ParsedAction::Fix { code: code.clone() }, Some(code)),
            Err(e) => (ParsedAction::Unparseable { reason: e.to_string() }, Some(current)),
        };
        transcript.turns.push(TurnRecord {
            turn,
            role: Role::Judge,
            test_index: None,
            prompt,
            raw_response: raw,
            parsed_action: action,
        });
        match next {
            None => {
                transcript.submitted = true;
                break;
            }
            Some(code) => transcript.solutions.push(code),
        }
    }
    transcript.close();
    Ok(transcript)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub attempts: usize,
    pub seed: u64,
    pub retries: usize,
    pub jobs: usize,
    pub policy: MatchPolicy,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig { attempts: 5, seed: 0, retries: 2, jobs: 0, policy: MatchPolicy::default() }
    }
}

/// `attempts` independent output predictions per (candidate, public test).
/// Candidates whose problem is not in the corpus are skipped.
pub fn simulate_candidates(
    candidates: &[Candidate],
    corpus: &Corpus,
    simulator: &dyn Agent,
    config: &SimulationConfig,
) -> Result<Vec<PredictionAttempt>, AgentError> {
    let mut jobs = Vec::new();
    for c in candidates {
        let Some(problem) = corpus.get(&c.problem_id) else { continue };
        for (t, test) in problem.public_tests.iter().enumerate() {
            for a in 0..config.attempts {
                jobs.push((c, t, test, a));
            }
        }
    }
    let results: Vec<Result<PredictionAttempt, AgentError>> = sandbox::with_pool(config.jobs, || {
        jobs.par_iter()
            .map(|&(c, t, test, a)| {
                let mut req = AgentRequest::new(
                    Role::Simulate,
                    1,
                    &c.problem_id,
                    build_outpred_prompt(&c.code, &test.input),
                    derive_seed(config.seed, t, a, 0),
                );
                req.test_index = Some(t);
                req.solution_id = Some(c.solution_id.clone());
                req.attempt = a;
                req.code = Some(c.code.clone());
                req.stdin = Some(test.input.clone());
                let reply = call_with_retries(simulator, &req, config.retries, Duration::from_millis(500))?;
                Ok(PredictionAttempt::new(
                    &c.problem_id,
                    &c.solution_id,
                    t,
                    a,
                    predicted_from(&reply),
                    &test.expected_output,
                    &config.policy,
                ))
            })
            .collect()
    });
    results.into_iter().collect()
}

/// Sum over public tests of the per-test mean match rate, keyed by
/// (problem_id, solution_id).
pub fn simulated_scores(attempts: &[PredictionAttempt]) -> HashMap<(String, String), f64> {
    let mut per_test: HashMap<(String, String, usize), Vec<bool>> = HashMap::new();
    for a in attempts {
        per_test.entry((a.problem_id.clone(), a.solution_id.clone(), a.test_index)).or_default().push(a.matched);
    }
    let mut keys: Vec<_> = per_test.keys().cloned().collect();
    keys.sort();
    let mut scores: HashMap<(String, String), f64> = HashMap::new();
    for key in keys {
        let score = crate::selection::test_score(&per_test[&key]).expect("non-empty by construction");
        *scores.entry((key.0, key.1)).or_default() += score;
    }
    scores
}
