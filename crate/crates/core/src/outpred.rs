//! Output-prediction environment: canonicalising stdout, the shared match
//! predicate (used for both real and simulated outputs), the binary reward
//! and the prompt/response helpers for model-backed prediction.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance for numeric tokens.
pub const DEFAULT_FLOAT_TOL: f64 = 1e-5;

/// Substituted for the prediction when a simulate response has no
/// `<output>` tag.
pub const SIMULATION_FAILED: &str = "SIMULATION FAILED";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchPolicy {
    pub float_abs_tol: f64,
    pub normalize_trailing_ws: bool,
    pub normalize_final_newline: bool,
}

impl Default for MatchPolicy {
    fn default() -> Self {
        MatchPolicy { float_abs_tol: DEFAULT_FLOAT_TOL, normalize_trailing_ws: true, normalize_final_newline: true }
    }
}

impl MatchPolicy {
    /// Byte equality: no tolerance, no normalisation.
    pub fn exact() -> Self {
        MatchPolicy { float_abs_tol: 0.0, normalize_trailing_ws: false, normalize_final_newline: false }
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.float_abs_tol = tol;
        self
    }
}

/// One simulated (or oracle) prediction of a candidate's stdout on a test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionAttempt {
    pub problem_id: String,
    pub solution_id: String,
    pub test_index: usize,
    pub attempt: usize,
    pub predicted_stdout: String,
    pub matched: bool,
}

impl PredictionAttempt {
    pub fn new(
        problem_id: &str,
        solution_id: &str,
        test_index: usize,
        attempt: usize,
        predicted_stdout: String,
        expected: &str,
        policy: &MatchPolicy,
    ) -> Self {
        let matched = outputs_match(&predicted_stdout, expected, policy);
        PredictionAttempt {
            problem_id: problem_id.to_string(),
            solution_id: solution_id.to_string(),
            test_index,
            attempt,
            predicted_stdout,
            matched,
        }
    }
}

pub fn normalize_output(text: &str, policy: &MatchPolicy) -> Vec<String> {
    if text.is_empty() {
        return Vec::new();
    }
    let mut lines: Vec<String> = text
        .split('\n')
        .map(|l| if policy.normalize_trailing_ws { l.trim_end().to_string() } else { l.to_string() })
        .collect();
    if policy.normalize_final_newline && lines.last().is_some_and(|l| l.is_empty()) {
        lines.pop();
    }
    // Whitespace-only output normalises to no output at all.
    if lines.len() == 1 && lines[0].is_empty() && (policy.normalize_trailing_ws || policy.normalize_final_newline) {
        lines.clear();
    }
    lines
}

fn tokens_match(a: &str, b: &str, tol: f64) -> bool {
    if a == b {
        return true;
    }
    if tol <= 0.0 {
        return false;
    }
    match (a.parse::<f64>(), b.parse::<f64>()) {
        // A few ulps of slack so that decimal differences of exactly `tol`
        // still pass despite binary rounding.
        (Ok(x), Ok(y)) if x.is_finite() && y.is_finite() => {
            (x - y).abs() <= tol + 4.0 * f64::EPSILON * x.abs().max(y.abs()).max(1.0)
        }
        _ => false,
    }
}

/// Whitespace runs of a line, plus whether it starts with one.
fn ws_layout(s: &str) -> (bool, Vec<&str>) {
    let mut runs = Vec::new();
    let mut start = None;
    for (i, c) in s.char_indices() {
        if c.is_whitespace() {
            start.get_or_insert(i);
        } else if let Some(st) = start.take() {
            runs.push(&s[st..i]);
        }
    }
    if let Some(st) = start {
        runs.push(&s[st..]);
    }
    (s.starts_with(char::is_whitespace), runs)
}

fn lines_match(a: &str, b: &str, policy: &MatchPolicy) -> bool {
    if a == b {
        return true;
    }
    if !policy.normalize_trailing_ws && ws_layout(a) != ws_layout(b) {
        return false;
    }
    let mut ta = a.split_whitespace();
    let mut tb = b.split_whitespace();
    loop {
        match (ta.next(), tb.next()) {
            (None, None) => return true,
            (Some(x), Some(y)) if tokens_match(x, y, policy.float_abs_tol) => {}
            _ => return false,
        }
    }
}

pub fn outputs_match(pred: &str, expected: &str, policy: &MatchPolicy) -> bool {
    let p = normalize_output(pred, policy);
    let e = normalize_output(expected, policy);
    p.len() == e.len() && p.iter().zip(&e).all(|(a, b)| lines_match(a, b, policy))
}

/// +1 on match, -1 otherwise.
pub fn reward(pred: &str, expected: &str, policy: &MatchPolicy) -> i32 {
    if outputs_match(pred, expected, policy) {
        1
    } else {
        -1
    }
}

pub fn build_outpred_prompt(code: &str, stdin: &str) -> String {
    format!(
        "Simulate the execution of the following Python program and predict exactly what it \
         prints to standard output when run with the given standard input.\n\
         \n\
         ```python\n{code}\n```\n\
         \n\
         Standard input:\n```\n{stdin}```\n\
         \n\
         Reason through the execution step by step. End your response with the predicted \
         standard output enclosed in <output></output> tags.\n"
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OutpredError {
    #[error("response contains no <output>...</output> pair")]
    MissingOutputTag,
}

/// Content of the last `<output>...</output>` pair. Literal `\n` sequences
/// are unescaped only when the content has no raw newline.
pub fn parse_outpred_response(text: &str) -> Result<String, OutpredError> {
    const OPEN: &str = "<output>";
    const CLOSE: &str = "</output>";
    let close = text.rfind(CLOSE).ok_or(OutpredError::MissingOutputTag)?;
    let open = text[..close].rfind(OPEN).ok_or(OutpredError::MissingOutputTag)?;
    let content = &text[open + OPEN.len()..close];
    if content.contains('\n') {
        Ok(content.to_string())
    } else {
        Ok(content.replace("\\n", "\n"))
    }
}
