//! Natural-language execution traces: filtering raw traces by size, rendering
//! them for a translator, checking translated answers against ground truth
//! and emitting `[PYTHON]` / `[THOUGHT]` / `[ANSWER]` training examples.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{self, TraceableFunction};
use crate::literal::{self, Literal};
use crate::outpred::DEFAULT_FLOAT_TOL;
use crate::sandbox::{self, Limits, Sandbox, TraceInput, TraceLimits};
use crate::trace::{EventKind, ExecutionTrace, TraceCaps, TraceOutcome};

const TRANSLATION_TEMPLATE: &str = include_str!("translation_prompt.txt");

/// Longest walkthrough the deterministic explainer writes before eliding.
const EXPLAIN_MAX_STEPS: usize = 200;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NlexError {
    #[error("response lacks a well-formed [EXPLANATION]/[OUTPUT] pair")]
    MissingMarkers,
    #[error("{0} is not a valid literal")]
    UnparseableLiteral(LiteralSide),
    #[error("trace has no return value")]
    MissingReturnValue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LiteralSide {
    Output,
    GroundTruth,
}

impl std::fmt::Display for LiteralSide {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LiteralSide::Output => "predicted output",
            LiteralSide::GroundTruth => "ground truth",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    TooLong,
    TooLarge,
    Failed(TraceOutcome),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FilterDecision {
    Accept,
    Reject(RejectReason),
}

/// Caps are inclusive: exactly `max_events` events is still accepted.
pub fn filter_trace(trace: &ExecutionTrace, caps: &TraceCaps) -> FilterDecision {
    if trace.event_count > caps.max_events || trace.outcome == TraceOutcome::TooLong {
        FilterDecision::Reject(RejectReason::TooLong)
    } else if trace.serialized_bytes > caps.max_bytes || trace.outcome == TraceOutcome::TooLarge {
        FilterDecision::Reject(RejectReason::TooLarge)
    } else if !trace.outcome.is_ok() {
        FilterDecision::Reject(RejectReason::Failed(trace.outcome.clone()))
    } else {
        FilterDecision::Accept
    }
}

fn source_line(source: &str, line_no: u32) -> &str {
    (line_no as usize).checked_sub(1).and_then(|i| source.lines().nth(i)).map(str::trim).unwrap_or("")
}

/// One block per event: the `<code>` line, then changed locals and globals.
pub fn render_structured(trace: &ExecutionTrace, source: &str) -> String {
    let mut out = String::new();
    for (i, event) in trace.events.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str("<code> ");
        out.push_str(source_line(source, event.line_no));
        out.push('\n');
        for (k, v) in &event.locals_delta {
            out.push_str(&format!("<local> {k} = {v}\n"));
        }
        for (k, v) in &event.globals_delta {
            out.push_str(&format!("<global> {k} = {v}\n"));
        }
    }
    out
}

pub fn build_translation_prompt(source: &str, entry_name: &str, input_literal: &str, trace_text: &str) -> String {
    TRANSLATION_TEMPLATE
        .replace("{source_code}", source.trim_end_matches('\n'))
        .replace("{func_name}", entry_name)
        .replace("{input_str}", input_literal)
        .replace("{stack_trace_string}", trace_text.trim_end_matches('\n'))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Translation {
    pub explanation: String,
    pub output_literal: String,
}

fn last_pair<'a>(text: &'a str, open: &str, close: &str) -> Option<&'a str> {
    let end = text.rfind(close)?;
    let start = text[..end].rfind(open)? + open.len();
    Some(&text[start..end])
}

/// The last `[EXPLANATION]` and `[OUTPUT]` pairs, trimmed.
pub fn parse_translation(response: &str) -> Result<Translation, NlexError> {
    let explanation = last_pair(response, "[EXPLANATION]", "[/EXPLANATION]").ok_or(NlexError::MissingMarkers)?;
    let output = last_pair(response, "[OUTPUT]", "[/OUTPUT]").ok_or(NlexError::MissingMarkers)?;
    Ok(Translation { explanation: explanation.trim().to_string(), output_literal: output.trim().to_string() })
}

/// Structural literal equality with numeric leaves within 1e-5.
pub fn verify_example(output_literal: &str, ground_truth_literal: &str) -> Result<bool, NlexError> {
    let predicted = Literal::parse(output_literal).map_err(|_| NlexError::UnparseableLiteral(LiteralSide::Output))?;
    let truth =
        Literal::parse(ground_truth_literal).map_err(|_| NlexError::UnparseableLiteral(LiteralSide::GroundTruth))?;
    Ok(predicted.approx_eq(&truth, DEFAULT_FLOAT_TOL))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Deterministic,
    ModelTranslated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NlexExample {
    pub source: String,
    pub entry_name: String,
    /// Call arguments as they appear between the parentheses.
    pub input_literal: String,
    pub explanation: String,
    pub answer_literal: String,
    pub origin: Origin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NlexMeta {
    pub entry_name: String,
    pub input_literal: String,
    pub answer_literal: String,
    pub event_count: usize,
    pub serialized_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NlexRecord {
    pub prompt: String,
    pub completion: String,
    pub origin: Origin,
    pub meta: NlexMeta,
}

impl NlexExample {
    pub fn call(&self) -> String {
        format!("{}({})", self.entry_name, self.input_literal)
    }

    pub fn prompt(&self) -> String {
        format!("[PYTHON]\n{}\nassert {} == ??\n[/PYTHON]", self.source.trim_end_matches('\n'), self.call())
    }

    pub fn completion(&self) -> String {
        format!(
            "[THOUGHT]\n{}\n[/THOUGHT]\n[ANSWER]\nassert {} == {}\n[/ANSWER]",
            self.explanation.trim(),
            self.call(),
            self.answer_literal
        )
    }

    pub fn to_record(&self, trace: &ExecutionTrace) -> NlexRecord {
        NlexRecord {
            prompt: self.prompt(),
            completion: self.completion(),
            origin: self.origin,
            meta: NlexMeta {
                entry_name: self.entry_name.clone(),
                input_literal: self.input_literal.clone(),
                answer_literal: self.answer_literal.clone(),
                event_count: trace.event_count,
                serialized_bytes: trace.serialized_bytes,
            },
        }
    }
}

/// The answer is always the traced return value, never the translator's.
pub fn emit_example(
    trace: &ExecutionTrace,
    source: &str,
    entry_name: &str,
    input_literal: &str,
    explanation: &str,
    origin: Origin,
) -> Result<NlexExample, NlexError> {
    let answer = trace.return_value_literal.as_deref().ok_or(NlexError::MissingReturnValue)?;
    Literal::parse(answer).map_err(|_| NlexError::UnparseableLiteral(LiteralSide::GroundTruth))?;
    Ok(NlexExample {
        source: source.trim_end_matches('\n').to_string(),
        entry_name: entry_name.to_string(),
        input_literal: input_literal.to_string(),
        explanation: explanation.trim().to_string(),
        answer_literal: answer.to_string(),
        origin,
    })
}

fn describe_delta(names: &indexmap::IndexMap<String, String>) -> String {
    let parts: Vec<String> = names.iter().map(|(k, v)| format!("`{k}` becomes `{v}`")).collect();
    match parts.len() {
        0 => String::new(),
        1 => parts[0].clone(),
        _ => {
            let (last, rest) = parts.split_last().expect("non-empty");
            format!("{} and {last}", rest.join(", "))
        }
    }
}

/// Offline stand-in for a model translator: a numbered walkthrough of the
/// executed lines and the values they produced.
pub fn explain_trace(trace: &ExecutionTrace, source: &str, entry_name: &str, input_literal: &str) -> String {
    let mut lines = Vec::new();
    let mut step = 0usize;
    let mut elided = 0usize;
    for event in &trace.events {
        let code = source_line(source, event.line_no);
        let locals = describe_delta(&event.locals_delta);
        let globals = describe_delta(&event.globals_delta);
        let text = match event.event_kind {
            EventKind::Call if step == 0 => {
                if locals.is_empty() {
                    format!("`{entry_name}({input_literal})` is called with no arguments.")
                } else {
                    format!("`{entry_name}({input_literal})` is called, so {locals}.")
                }
            }
            EventKind::Call => {
                if locals.is_empty() {
                    format!("A nested call enters `{code}`.")
                } else {
                    format!("A nested call enters `{code}` with {locals}.")
                }
            }
            EventKind::Return => format!("Line {} (`{code}`) returns from the current call.", event.line_no),
            EventKind::Exception => format!("Line {} (`{code}`) raises an exception.", event.line_no),
            EventKind::Line => {
                let mut effects: Vec<String> = [locals, globals].into_iter().filter(|s| !s.is_empty()).collect();
                if !event.stdout_delta.is_empty() {
                    effects.push(format!("it prints {:?}", event.stdout_delta));
                }
                if effects.is_empty() {
                    format!("Line {} runs `{code}`.", event.line_no)
                } else {
                    format!("Line {} runs `{code}`: {}.", event.line_no, effects.join("; "))
                }
            }
        };
        step += 1;
        if lines.len() < EXPLAIN_MAX_STEPS {
            lines.push(format!("{step}. {text}"));
        } else {
            elided += 1;
        }
    }
    if elided > 0 {
        lines.push(format!("The same pattern continues for {elided} more steps."));
    }
    if let Some(ret) = &trace.return_value_literal {
        lines.push(format!("The call `{entry_name}({input_literal})` therefore returns `{ret}`."));
    }
    lines.join("\n")
}

/// Everything the model-backed path needs to translate one trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TranslationJob {
    pub source: String,
    pub entry_name: String,
    pub input_literal: String,
    pub prompt: String,
}

pub trait Translator: Sync {
    fn translate(&self, job: &TranslationJob) -> Result<String, String>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct NlexConfig {
    pub trace: TraceLimits,
    pub fuzz_budget: usize,
    pub seed: u64,
    pub jobs: usize,
    pub verify_limits: Limits,
}

impl Default for NlexConfig {
    fn default() -> Self {
        NlexConfig {
            trace: TraceLimits::default(),
            fuzz_budget: 4,
            seed: 0,
            jobs: 0,
            verify_limits: Limits { timeout_s: 10.0, ..Limits::default() },
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NlexStats {
    pub functions: usize,
    pub inputs: usize,
    pub trace_errors: usize,
    pub rejected_too_long: usize,
    pub rejected_too_large: usize,
    pub rejected_failed: usize,
    pub translation_failures: usize,
    pub discarded_mismatch: usize,
    pub discarded_unparseable: usize,
    pub discarded_reexecution: usize,
    pub emitted: usize,
}

#[derive(Debug, Clone, Default)]
pub struct NlexRun {
    pub records: Vec<NlexRecord>,
    pub examples: Vec<NlexExample>,
    pub stats: NlexStats,
}

#[derive(Debug)]
enum JobResult {
    Emitted(Box<(NlexExample, NlexRecord)>),
    TraceError,
    Rejected(RejectReason),
    TranslationFailed,
    Mismatch,
    Unparseable,
    Reexecution,
}

fn process(
    sandbox: &Sandbox,
    config: &NlexConfig,
    translator: Option<&dyn Translator>,
    function: &TraceableFunction,
    args: &str,
) -> JobResult {
    let input_literal = match literal::parse_args(args) {
        Ok(a) => literal::render_call_args(&a),
        Err(_) => return JobResult::Unparseable,
    };
    let input = TraceInput::Entry { entry_name: function.entry_name.clone(), args: args.to_string() };
    let trace = match sandbox.run_traced(&function.source, &input, &config.trace) {
        Ok(t) => t,
        Err(_) => return JobResult::TraceError,
    };
    if let FilterDecision::Reject(reason) = filter_trace(&trace, &config.trace.caps) {
        return JobResult::Rejected(reason);
    }
    let Some(truth) = trace.return_value_literal.clone() else {
        return JobResult::Unparseable;
    };
    let (explanation, origin) = match translator {
        None => (explain_trace(&trace, &function.source, &function.entry_name, &input_literal), Origin::Deterministic),
        Some(t) => {
            let trace_text = render_structured(&trace, &function.source);
            let prompt = build_translation_prompt(&function.source, &function.entry_name, &input_literal, &trace_text);
            let job = TranslationJob {
                source: function.source.clone(),
                entry_name: function.entry_name.clone(),
                input_literal: input_literal.clone(),
                prompt,
            };
            let Ok(response) = t.translate(&job) else {
                return JobResult::TranslationFailed;
            };
            let Ok(parsed) = parse_translation(&response) else {
                return JobResult::TranslationFailed;
            };
            match verify_example(&parsed.output_literal, &truth) {
                Ok(true) => (parsed.explanation, Origin::ModelTranslated),
                Ok(false) => return JobResult::Mismatch,
                Err(_) => return JobResult::Unparseable,
            }
        }
    };
    let example =
        match emit_example(&trace, &function.source, &function.entry_name, &input_literal, &explanation, origin) {
            Ok(e) => e,
            Err(_) => return JobResult::Unparseable,
        };
    if !sandbox.check_assertion(&example.source, &example.call(), &example.answer_literal, &config.verify_limits) {
        return JobResult::Reexecution;
    }
    let record = example.to_record(&trace);
    JobResult::Emitted(Box::new((example, record)))
}

/// Traces every seed input plus `fuzz_budget` fuzzed inputs per function and
/// keeps the examples that survive filtering, verification and re-execution.
/// Output order follows function order, then input order.
pub fn build_dataset(
    functions: &[TraceableFunction],
    sandbox: &Sandbox,
    config: &NlexConfig,
    translator: Option<&dyn Translator>,
) -> NlexRun {
    let mut stats = NlexStats { functions: functions.len(), ..NlexStats::default() };
    let mut jobs: Vec<(usize, String)> = Vec::new();
    for (i, f) in functions.iter().enumerate() {
        for s in &f.seed_inputs {
            jobs.push((i, s.clone()));
        }
        let fuzz_seed = config.seed.wrapping_add(i as u64);
        if let Ok(extra) = corpus::fuzz_inputs(f, config.fuzz_budget, fuzz_seed) {
            jobs.extend(extra.into_iter().map(|a| (i, a)));
        }
    }
    stats.inputs = jobs.len();
    let results: Vec<JobResult> = sandbox::with_pool(config.jobs, || {
        jobs.par_iter().map(|(i, args)| process(sandbox, config, translator, &functions[*i], args)).collect()
    });
    let mut run = NlexRun::default();
    for r in results {
        match r {
            JobResult::Emitted(pair) => {
                let (example, record) = *pair;
                run.examples.push(example);
                run.records.push(record);
                stats.emitted += 1;
            }
            JobResult::TraceError => stats.trace_errors += 1,
            JobResult::Rejected(RejectReason::TooLong) => stats.rejected_too_long += 1,
            JobResult::Rejected(RejectReason::TooLarge) => stats.rejected_too_large += 1,
            JobResult::Rejected(RejectReason::Failed(_)) => stats.rejected_failed += 1,
            JobResult::TranslationFailed => stats.translation_failures += 1,
            JobResult::Mismatch => stats.discarded_mismatch += 1,
            JobResult::Unparseable => stats.discarded_unparseable += 1,
            JobResult::Reexecution => stats.discarded_reexecution += 1,
        }
    }
    run.stats = stats;
    run
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::TraceEvent;
    use indexmap::IndexMap;

    fn event(step: u64, kind: EventKind, line_no: u32, locals: &[(&str, &str)]) -> TraceEvent {
        TraceEvent {
            step,
            event_kind: kind,
            line_no,
            locals_delta: locals.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
            globals_delta: IndexMap::new(),
            stdout_delta: String::new(),
        }
    }

    fn trace(events: Vec<TraceEvent>, ret: Option<&str>) -> ExecutionTrace {
        ExecutionTrace {
            event_count: events.len(),
            serialized_bytes: 1000,
            events,
            return_value_literal: ret.map(str::to_owned),
            stdout: String::new(),
            outcome: TraceOutcome::Ok,
        }
    }

    #[test]
    fn filter_boundaries() {
        let caps = TraceCaps::default();
        let mut t = trace(vec![], Some("1"));
        t.event_count = 10_000;
        assert_eq!(filter_trace(&t, &caps), FilterDecision::Accept);
        t.event_count = 10_001;
        assert_eq!(filter_trace(&t, &caps), FilterDecision::Reject(RejectReason::TooLong));
        t.event_count = 5;
        t.serialized_bytes = 1_048_577;
        assert_eq!(filter_trace(&t, &caps), FilterDecision::Reject(RejectReason::TooLarge));
        t.serialized_bytes = 10;
        t.outcome = TraceOutcome::Timeout;
        assert_eq!(filter_trace(&t, &caps), FilterDecision::Reject(RejectReason::Failed(TraceOutcome::Timeout)));
    }

    #[test]
    fn structured_rendering() {
        let src = "def f():\n    x = 1\n    return x\n";
        let t = trace(
            vec![
                event(0, EventKind::Call, 1, &[]),
                event(1, EventKind::Line, 2, &[("x", "1")]),
                event(2, EventKind::Line, 3, &[]),
            ],
            Some("1"),
        );
        let text = render_structured(&t, src);
        assert_eq!(text, "<code> def f():\n\n<code> x = 1\n<local> x = 1\n\n<code> return x\n");
        assert_eq!(render_structured(&t, src), text);
    }

    #[test]
    fn translation_prompt_substitution() {
        let p = build_translation_prompt("def f(a):\n    return a", "f", "(1,)", "");
        assert!(p.contains("NEVER refer to or mention the trace itself"));
        assert!(p.contains("Explain the line by line execution of f((1,)), followed by"));
        assert!(p.contains("```\ndef f(a):\n    return a\n```"));
        assert!(!p.contains("{func_name}") && !p.contains("{stack_trace_string}"));
        assert!(p.trim_end().ends_with("is the result of running f((1,))."));
    }

    #[test]
    fn translation_parsing() {
        let t = parse_translation("[EXPLANATION]steps[/EXPLANATION] [OUTPUT]6[/OUTPUT]").unwrap();
        assert_eq!(t, Translation { explanation: "steps".into(), output_literal: "6".into() });
        let t = parse_translation(
            "[EXPLANATION]a[/EXPLANATION][OUTPUT]1[/OUTPUT]\n[EXPLANATION]b[/EXPLANATION][OUTPUT] 2 [/OUTPUT]",
        )
        .unwrap();
        assert_eq!(t.output_literal, "2");
        assert_eq!(t.explanation, "b");
        assert_eq!(parse_translation("[EXPLANATION]x[/EXPLANATION]"), Err(NlexError::MissingMarkers));
        assert_eq!(parse_translation("[OUTPUT]1[/OUTPUT]"), Err(NlexError::MissingMarkers));
    }

    #[test]
    fn verification() {
        assert_eq!(verify_example("6", "6"), Ok(true));
        assert_eq!(verify_example("[125.0, 250.0]", "[125.0, 250.0000049]"), Ok(true));
        assert_eq!(verify_example("'a'", "1"), Ok(false));
        assert_eq!(verify_example("foo(", "1"), Err(NlexError::UnparseableLiteral(LiteralSide::Output)));
        assert_eq!(verify_example("1", "<object>"), Err(NlexError::UnparseableLiteral(LiteralSide::GroundTruth)));
    }

    #[test]
    fn emitted_blocks() {
        let src = "def maxSubArrayDP(arr):\n    return 1\n";
        let t = trace(vec![event(0, EventKind::Call, 1, &[("arr", "[1, 0]")])], Some("1"));
        let ex = emit_example(&t, src, "maxSubArrayDP", "[1, 0, 0, 0, 0, 0]", "walk", Origin::Deterministic).unwrap();
        assert_eq!(ex.origin, Origin::Deterministic);
        assert_eq!(
            ex.prompt(),
            "[PYTHON]\ndef maxSubArrayDP(arr):\n    return 1\nassert maxSubArrayDP([1, 0, 0, 0, 0, 0]) == ??\n[/PYTHON]"
        );
        assert_eq!(
            ex.completion(),
            "[THOUGHT]\nwalk\n[/THOUGHT]\n[ANSWER]\nassert maxSubArrayDP([1, 0, 0, 0, 0, 0]) == 1\n[/ANSWER]"
        );
        let no_ret = trace(vec![], None);
        assert_eq!(emit_example(&no_ret, src, "f", "", "", Origin::Deterministic), Err(NlexError::MissingReturnValue));
    }

    #[test]
    fn explainer_mentions_values() {
        let src = "def f(a):\n    b = a + 1\n    return b\n";
        let t = trace(
            vec![
                event(0, EventKind::Call, 1, &[("a", "1")]),
                event(1, EventKind::Line, 2, &[("b", "2")]),
                event(2, EventKind::Line, 3, &[]),
                event(3, EventKind::Return, 3, &[]),
            ],
            Some("2"),
        );
        let text = explain_trace(&t, src, "f", "1");
        assert!(text.starts_with("1. `f(1)` is called, so `a` becomes `1`."));
        assert!(text.contains("Line 2 runs `b = a + 1`: `b` becomes `2`."));
        assert!(text.ends_with("returns `2`."));
        assert!(!text.to_lowercase().contains("trace"));
    }
}
