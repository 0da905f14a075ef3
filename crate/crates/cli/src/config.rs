use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use execsim::trace::{DEFAULT_MAX_BYTES, DEFAULT_MAX_EVENTS};
use execsim::{AgentEndpoint, Limits, MatchPolicy, TraceCaps, TraceLimits};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackMode {
    /// Ground-truth execution of each public test.
    Oracle,
    /// The simulator endpoint predicts the output.
    #[default]
    Predicted,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub problems: Option<PathBuf>,
    pub candidates: Option<PathBuf>,
    pub functions: Option<PathBuf>,
    pub verdicts: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
    pub transcripts: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LimitsSection {
    pub timeout_s: f64,
    pub max_output_bytes: u64,
    pub max_memory_bytes: u64,
    /// Worker threads; 0 means one per logical CPU.
    pub jobs: usize,
}

impl Default for LimitsSection {
    fn default() -> Self {
        let l = Limits::default();
        LimitsSection {
            timeout_s: l.timeout_s,
            max_output_bytes: l.max_output_bytes,
            max_memory_bytes: l.max_memory_bytes,
            jobs: 0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceSection {
    pub max_events: usize,
    pub max_bytes: u64,
    pub timeout_s: f64,
    pub max_memory_bytes: u64,
}

impl Default for TraceSection {
    fn default() -> Self {
        let t = TraceLimits::default();
        TraceSection {
            max_events: DEFAULT_MAX_EVENTS,
            max_bytes: DEFAULT_MAX_BYTES,
            timeout_s: t.timeout_s,
            max_memory_bytes: t.max_memory_bytes,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchSection {
    pub float_tol: f64,
    pub normalize_ws: bool,
}

impl Default for MatchSection {
    fn default() -> Self {
        let p = MatchPolicy::default();
        MatchSection { float_tol: p.float_abs_tol, normalize_ws: p.normalize_trailing_ws }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionSection {
    pub n: usize,
    /// Defaults to 1, 2, 5, 10, 20 and n, clipped to n.
    pub ks: Option<Vec<usize>>,
    pub attempts: usize,
    pub seed: u64,
}

impl Default for SelectionSection {
    fn default() -> Self {
        SelectionSection { n: 20, ks: None, attempts: 5, seed: 0 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RolloutSection {
    pub k_max: usize,
    pub feedback: FeedbackMode,
    pub retries: usize,
}

impl Default for RolloutSection {
    fn default() -> Self {
        RolloutSection { k_max: 9, feedback: FeedbackMode::default(), retries: 2 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NlexSection {
    pub fuzz_budget: usize,
}

impl Default for NlexSection {
    fn default() -> Self {
        NlexSection { fuzz_budget: 4 }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Endpoints {
    pub solver: Option<AgentEndpoint>,
    pub simulator: Option<AgentEndpoint>,
    pub judge: Option<AgentEndpoint>,
    pub translator: Option<AgentEndpoint>,
}

/// Everything a subcommand may need. Loaded from TOML, then overridden by
/// command-line flags.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub limits: LimitsSection,
    pub trace: TraceSection,
    #[serde(rename = "match")]
    pub matching: MatchSection,
    pub selection: SelectionSection,
    pub rollout: RolloutSection,
    pub nlex: NlexSection,
    pub endpoints: Endpoints,
}

impl SelectionSection {
    pub fn ks(&self) -> Vec<usize> {
        match &self.ks {
            Some(ks) => ks.clone(),
            None => {
                let mut ks: Vec<usize> = [1, 2, 5, 10, 20].into_iter().filter(|k| *k <= self.n).collect();
                if !ks.contains(&self.n) {
                    ks.push(self.n);
                }
                ks
            }
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn sandbox_limits(&self) -> Limits {
        Limits {
            timeout_s: self.limits.timeout_s,
            max_output_bytes: self.limits.max_output_bytes,
            max_memory_bytes: self.limits.max_memory_bytes,
        }
    }

    pub fn trace_limits(&self) -> TraceLimits {
        TraceLimits {
            caps: TraceCaps { max_events: self.trace.max_events, max_bytes: self.trace.max_bytes },
            timeout_s: self.trace.timeout_s,
            max_memory_bytes: self.trace.max_memory_bytes,
        }
    }

    pub fn policy(&self) -> MatchPolicy {
        MatchPolicy {
            float_abs_tol: self.matching.float_tol,
            normalize_trailing_ws: self.matching.normalize_ws,
            normalize_final_newline: self.matching.normalize_ws,
        }
    }

    // Negated comparisons so that NaN is rejected too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> anyhow::Result<()> {
        if !(self.limits.timeout_s > 0.0) || !(self.trace.timeout_s > 0.0) {
            bail!("timeouts must be positive");
        }
        if !(self.matching.float_tol >= 0.0) {
            bail!("float_tol must be non-negative");
        }
        if self.selection.n == 0 {
            bail!("n must be at least 1");
        }
        if self.selection.attempts == 0 {
            bail!("attempts must be at least 1");
        }
        let ks = self.selection.ks();
        if ks.is_empty() {
            bail!("ks must not be empty");
        }
        if let Some(k) = ks.iter().find(|k| **k == 0 || **k > self.selection.n) {
            bail!("k={k} is outside 1..={}", self.selection.n);
        }
        Ok(())
    }
}

/// `oracle`, `remote`, or `replay:PATH`.
pub fn parse_endpoint(text: &str) -> Result<AgentEndpoint, String> {
    match text {
        "oracle" => Ok(AgentEndpoint::OracleExecutor),
        "remote" => toml::from_str("kind = \"remote_model\"").map_err(|e| e.to_string()),
        _ => match text.strip_prefix("replay:") {
            Some(path) if !path.is_empty() => Ok(AgentEndpoint::ScriptedReplay { fixture: PathBuf::from(path) }),
            _ => Err(format!("expected oracle, remote or replay:PATH, got {text:?}")),
        },
    }
}
