//! Execution-grounded code reasoning: ground-truth sandboxed execution,
//! natural-language execution traces, output prediction, selection by
//! simulated execution and multi-turn self-verifying rollouts.

pub mod corpus;
pub mod literal;
pub mod nlex;
pub mod outpred;
pub mod report;
pub mod rollout;
pub mod sandbox;
pub mod selection;
pub mod trace;

pub use corpus::{Candidate, Corpus, CorpusError, Problem, TestCase, TraceableFunction};
pub use literal::{Literal, LiteralError};
pub use nlex::{NlexError, NlexExample, NlexRecord, Origin};
pub use outpred::{MatchPolicy, PredictionAttempt};
pub use report::{ConfusionMatrix, Curve, EvalReport, ReportError, ReportFormat};
pub use rollout::{
    Agent, AgentEndpoint, AgentError, AgentRequest, FeedbackItem, Reply, Role, RolloutConfig, RolloutError,
    RolloutTranscript,
};
pub use sandbox::{Limits, RunOutcome, RunResult, Sandbox, TestResult, TestSet, TraceInput, TraceLimits, Verdict};
pub use selection::{ScoredSample, SelectionError, SelectionOutcome};
pub use trace::{ExecutionTrace, TraceCaps, TraceError, TraceEvent, TraceOutcome};
