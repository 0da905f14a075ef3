mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use execsim::corpus::{self, TraceableFunction};
use execsim::nlex::{build_dataset, NlexConfig, Translator};
use execsim::report::{build_report, confusion, render_report, transcript_candidates};
use execsim::rollout::{
    build_agent, run_rollout, simulate_candidates, AgentContext, AgentTranslator, Agents, OracleExecutor,
    RolloutConfig, SimulationConfig,
};
use execsim::sandbox::{self, RunOutcome};
use execsim::{
    Agent, AgentEndpoint, Corpus, EvalReport, PredictionAttempt, ReportFormat, Role, RolloutTranscript, Sandbox,
    TestSet, TraceInput, Verdict,
};
use serde::Serialize;

use config::{parse_endpoint, FeedbackMode, RunConfig};

#[derive(Parser)]
#[command(
    name = "execsim",
    version,
    about = "Execution tracing, output-prediction rewards, best@k selection and self-execution rollouts"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct Common {
    /// TOML configuration file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    timeout_s: Option<f64>,
    #[arg(long, global = true)]
    max_output_bytes: Option<u64>,
    #[arg(long, global = true)]
    max_memory_bytes: Option<u64>,
    /// Worker threads (default: logical CPU count).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Absolute tolerance for numeric tokens.
    #[arg(long, global = true)]
    float_tol: Option<f64>,
    /// Compare trailing whitespace and final newlines byte for byte.
    #[arg(long, global = true)]
    no_normalize_ws: bool,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file, overwritten on each run (default: stdout).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Trace function seed inputs, or one program, and emit traces as JSONL.
    Trace(TraceArgs),
    /// Build the natural-language execution dataset.
    Nlex(NlexArgs),
    /// Run candidates against public and private tests and emit verdicts.
    Grade(GradeArgs),
    /// Predict each candidate's output on each public test.
    OutpredEval(OutpredArgs),
    /// Per-k best@k, pass@k and short1@k curves.
    Bestk(BestkArgs),
    /// Multi-turn solve, simulate and fix rollouts.
    Rollout(RolloutArgs),
    /// Aggregate verdicts, predictions and transcripts into a report.
    Report(ReportArgs),
}

#[derive(Args)]
struct TraceArgs {
    /// Function records to trace on their seed inputs.
    #[arg(long, conflicts_with = "source")]
    functions: Option<PathBuf>,
    /// A Python source file to trace.
    #[arg(long)]
    source: Option<PathBuf>,
    /// Entry function in `--source`.
    #[arg(long, requires = "source", requires = "args")]
    entry: Option<String>,
    /// Argument tuple literal, e.g. "([1, 2],)".
    #[arg(long, requires = "entry")]
    args: Option<String>,
    /// Feed this file on stdin and trace the whole program.
    #[arg(long, requires = "source", conflicts_with = "entry")]
    stdin: Option<PathBuf>,
    #[arg(long)]
    max_events: Option<usize>,
    #[arg(long)]
    max_bytes: Option<u64>,
}

#[derive(Args)]
struct NlexArgs {
    #[arg(long)]
    functions: Option<PathBuf>,
    /// Fuzzed inputs per function on top of the seeds.
    #[arg(long)]
    fuzz_budget: Option<usize>,
    /// Translator endpoint: remote or replay:PATH. Without one the
    /// deterministic explainer is used.
    #[arg(long, value_parser = parse_endpoint)]
    translator: Option<AgentEndpoint>,
    #[arg(long)]
    max_events: Option<usize>,
    #[arg(long)]
    max_bytes: Option<u64>,
}

#[derive(Args)]
struct GradeArgs {
    #[arg(long)]
    problems: Option<PathBuf>,
    #[arg(long)]
    candidates: Option<PathBuf>,
}

#[derive(Args)]
struct OutpredArgs {
    #[arg(long)]
    problems: Option<PathBuf>,
    #[arg(long)]
    candidates: Option<PathBuf>,
    /// Prediction attempts per (candidate, public test).
    #[arg(long)]
    attempts: Option<usize>,
    /// oracle, remote or replay:PATH.
    #[arg(long, value_parser = parse_endpoint)]
    simulator: Option<AgentEndpoint>,
}

#[derive(Args)]
struct BestkArgs {
    #[arg(long)]
    verdicts: Option<PathBuf>,
    /// PredictionAttempt records; without them bestk_sim is null.
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// Samples per problem.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    ks: Option<Vec<usize>>,
    /// Prediction attempts used per test.
    #[arg(long)]
    attempts: Option<usize>,
}

#[derive(Args)]
struct RolloutArgs {
    #[arg(long)]
    problems: Option<PathBuf>,
    /// Judge rounds after the initial solution.
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long, value_enum)]
    feedback: Option<FeedbackMode>,
    #[arg(long, value_parser = parse_endpoint)]
    solver: Option<AgentEndpoint>,
    #[arg(long, value_parser = parse_endpoint)]
    simulator: Option<AgentEndpoint>,
    #[arg(long, value_parser = parse_endpoint)]
    judge: Option<AgentEndpoint>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    verdicts: Option<PathBuf>,
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// Rollout transcripts; their initial and submitted solutions are graded
    /// against `--problems` for the confusion matrix.
    #[arg(long, requires = "problems")]
    transcripts: Option<PathBuf>,
    #[arg(long)]
    problems: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    ks: Option<Vec<usize>>,
    #[arg(long)]
    attempts: Option<usize>,
    #[arg(long, value_enum, default_value = "human")]
    format: FormatArg,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum FormatArg {
    Human,
    Jsonl,
}

enum Failure {
    /// Bad configuration or inputs, detected before any work starts.
    Config(anyhow::Error),
    /// Some job failed; partial output may have been written.
    Job(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Job(e)
    }
}

trait OrConfig<T> {
    fn or_config(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> OrConfig<T> for Result<T, E> {
    fn or_config(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Config(e.into()))
    }
}

fn config_error(msg: impl std::fmt::Display) -> Failure {
    Failure::Config(anyhow!("{msg}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("configuration error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Job(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn merge(common: &Common) -> Result<RunConfig, Failure> {
    let mut c = match &common.config {
        Some(path) => RunConfig::load(path).or_config()?,
        None => RunConfig::default(),
    };
    if let Some(v) = common.timeout_s {
        c.limits.timeout_s = v;
    }
    if let Some(v) = common.max_output_bytes {
        c.limits.max_output_bytes = v;
    }
    if let Some(v) = common.max_memory_bytes {
        c.limits.max_memory_bytes = v;
    }
    if let Some(v) = common.jobs {
        c.limits.jobs = v;
    }
    if let Some(v) = common.float_tol {
        c.matching.float_tol = v;
    }
    if common.no_normalize_ws {
        c.matching.normalize_ws = false;
    }
    if let Some(v) = common.seed {
        c.selection.seed = v;
    }
    if common.out.is_some() {
        c.paths.out = common.out.clone();
    }
    Ok(c)
}

fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

fn set_path(slot: &mut Option<PathBuf>, flag: &Option<PathBuf>) {
    if flag.is_some() {
        *slot = flag.clone();
    }
}

fn required<'a>(path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, Failure> {
    let p = path.as_deref().ok_or_else(|| config_error(format!("--{flag} is required")))?;
    if !p.is_file() {
        return Err(config_error(format!("--{flag}: {} does not exist", p.display())));
    }
    Ok(p)
}

fn optional<'a>(path: &'a Option<PathBuf>, flag: &str) -> Result<Option<&'a Path>, Failure> {
    match path {
        Some(_) => required(path, flag).map(Some),
        None => Ok(None),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut c = merge(&cli.common)?;
    match cli.command {
        Command::Trace(a) => {
            set_path(&mut c.paths.functions, &a.functions);
            set(&mut c.trace.max_events, a.max_events);
            set(&mut c.trace.max_bytes, a.max_bytes);
            c.validate().or_config()?;
            trace(&c, &a)
        }
        Command::Nlex(a) => {
            set_path(&mut c.paths.functions, &a.functions);
            set(&mut c.nlex.fuzz_budget, a.fuzz_budget);
            set(&mut c.trace.max_events, a.max_events);
            set(&mut c.trace.max_bytes, a.max_bytes);
            if a.translator.is_some() {
                c.endpoints.translator = a.translator;
            }
            c.validate().or_config()?;
            nlex(&c)
        }
        Command::Grade(a) => {
            set_path(&mut c.paths.problems, &a.problems);
            set_path(&mut c.paths.candidates, &a.candidates);
            c.validate().or_config()?;
            grade(&c)
        }
        Command::OutpredEval(a) => {
            set_path(&mut c.paths.problems, &a.problems);
            set_path(&mut c.paths.candidates, &a.candidates);
            set(&mut c.selection.attempts, a.attempts);
            if a.simulator.is_some() {
                c.endpoints.simulator = a.simulator;
            }
            c.validate().or_config()?;
            outpred_eval(&c)
        }
        Command::Bestk(a) => {
            set_path(&mut c.paths.verdicts, &a.verdicts);
            set_path(&mut c.paths.predictions, &a.predictions);
            set(&mut c.selection.n, a.n);
            if a.ks.is_some() {
                c.selection.ks = a.ks;
            }
            set(&mut c.selection.attempts, a.attempts);
            c.validate().or_config()?;
            bestk(&c)
        }
        Command::Rollout(a) => {
            set_path(&mut c.paths.problems, &a.problems);
            set(&mut c.rollout.k_max, a.k_max);
            set(&mut c.rollout.feedback, a.feedback);
            for (slot, flag) in [
                (&mut c.endpoints.solver, a.solver),
                (&mut c.endpoints.simulator, a.simulator),
                (&mut c.endpoints.judge, a.judge),
            ] {
                if flag.is_some() {
                    *slot = flag;
                }
            }
            c.validate().or_config()?;
            rollout(&c)
        }
        Command::Report(a) => {
            set_path(&mut c.paths.verdicts, &a.verdicts);
            set_path(&mut c.paths.predictions, &a.predictions);
            set_path(&mut c.paths.transcripts, &a.transcripts);
            set_path(&mut c.paths.problems, &a.problems);
            set(&mut c.selection.n, a.n);
            if a.ks.is_some() {
                c.selection.ks = a.ks;
            }
            set(&mut c.selection.attempts, a.attempts);
            c.validate().or_config()?;
            let format = match a.format {
                FormatArg::Human => ReportFormat::Human,
                FormatArg::Jsonl => ReportFormat::Jsonl,
            };
            report(&c, format)
        }
    }
}

fn sandbox(c: &RunConfig) -> Sandbox {
    Sandbox::default().with_policy(c.policy())
}

fn agent_context(c: &RunConfig) -> AgentContext {
    AgentContext {
        sandbox: sandbox(c),
        limits: c.sandbox_limits(),
        model_endpoint: std::env::var("MODEL_ENDPOINT").ok().filter(|s| !s.is_empty()),
        api_key: std::env::var("MODEL_API_KEY").ok().filter(|s| !s.is_empty()),
    }
}

fn agent(
    endpoint: &Option<AgentEndpoint>,
    fallback: AgentEndpoint,
    role: Role,
    ctx: &AgentContext,
) -> Result<Box<dyn Agent>, Failure> {
    build_agent(endpoint.as_ref().unwrap_or(&fallback), role, ctx).or_config()
}

fn remote() -> AgentEndpoint {
    parse_endpoint("remote").expect("static endpoint")
}

/// Writes `text` to `--out` (truncating) or stdout.
fn emit(c: &RunConfig, text: &str) -> Result<(), Failure> {
    match &c.paths.out {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).context("writing stdout")?;
            out.flush().context("writing stdout")?;
        }
    }
    Ok(())
}

fn jsonl<T: Serialize>(rows: &[T]) -> anyhow::Result<String> {
    let mut text = String::new();
    for r in rows {
        text.push_str(&serde_json::to_string(r)?);
        text.push('\n');
    }
    Ok(text)
}

fn load_corpus(c: &RunConfig) -> Result<Corpus, Failure> {
    corpus::load_problems(required(&c.paths.problems, "problems")?).or_config()
}

#[derive(Serialize)]
struct TraceRow<'a> {
    entry_name: Option<&'a str>,
    args: Option<&'a str>,
    trace: Option<execsim::ExecutionTrace>,
    error: Option<String>,
}

fn trace(c: &RunConfig, a: &TraceArgs) -> Result<(), Failure> {
    let functions: Vec<TraceableFunction> = match (&c.paths.functions, &a.source) {
        (_, Some(src)) => {
            let source =
                std::fs::read_to_string(src).with_context(|| format!("reading {}", src.display())).or_config()?;
            if let Some(stdin_path) = &a.stdin {
                let stdin = std::fs::read_to_string(stdin_path)
                    .with_context(|| format!("reading {}", stdin_path.display()))
                    .or_config()?;
                let result = sandbox(c).run_traced(&source, &TraceInput::Stdin { stdin }, &c.trace_limits());
                let failed = result.is_err();
                let (trace, error) = match result {
                    Ok(t) => (Some(t), None),
                    Err(e) => (None, Some(e.to_string())),
                };
                emit(c, &jsonl(&[TraceRow { entry_name: None, args: None, trace, error }])?)?;
                return if failed { Err(anyhow!("tracing failed").into()) } else { Ok(()) };
            }
            let entry = a.entry.clone().ok_or_else(|| config_error("--source needs --entry and --args, or --stdin"))?;
            let args = a.args.clone().ok_or_else(|| config_error("--entry needs --args"))?;
            vec![TraceableFunction { source, entry_name: entry, seed_inputs: vec![args] }]
        }
        (Some(_), None) => corpus::load_functions(required(&c.paths.functions, "functions")?).or_config()?,
        (None, None) => return Err(config_error("either --functions or --source is required")),
    };
    for f in &functions {
        for s in &f.seed_inputs {
            execsim::literal::parse_args(s).map_err(|e| config_error(format!("{}: {s}: {e}", f.entry_name)))?;
        }
    }
    let jobs: Vec<(&TraceableFunction, &str)> =
        functions.iter().flat_map(|f| f.seed_inputs.iter().map(move |s| (f, s.as_str()))).collect();
    let work: Vec<(&str, TraceInput)> = jobs
        .iter()
        .map(|(f, args)| {
            (f.source.as_str(), TraceInput::Entry { entry_name: f.entry_name.clone(), args: args.to_string() })
        })
        .collect();
    let results = sandbox(c).trace_all(&work, &c.trace_limits(), c.limits.jobs);
    let mut failures = 0;
    let rows: Vec<TraceRow> = jobs
        .iter()
        .zip(results)
        .map(|((f, args), r)| {
            let (trace, error) = match r {
                Ok(t) => (Some(t), None),
                Err(e) => {
                    failures += 1;
                    (None, Some(e.to_string()))
                }
            };
            TraceRow { entry_name: Some(&f.entry_name), args: Some(args), trace, error }
        })
        .collect();
    emit(c, &jsonl(&rows)?)?;
    if failures > 0 {
        return Err(anyhow!("{failures} of {} traces failed", rows.len()).into());
    }
    Ok(())
}

fn nlex(c: &RunConfig) -> Result<(), Failure> {
    let functions = corpus::load_functions(required(&c.paths.functions, "functions")?).or_config()?;
    let ctx = agent_context(c);
    let agent = match &c.endpoints.translator {
        Some(endpoint) => Some(build_agent(endpoint, Role::Translate, &ctx).or_config()?),
        None => None,
    };
    let translator = agent.as_deref().map(AgentTranslator);
    let config = NlexConfig {
        trace: c.trace_limits(),
        fuzz_budget: c.nlex.fuzz_budget,
        seed: c.selection.seed,
        jobs: c.limits.jobs,
        verify_limits: c.sandbox_limits(),
    };
    let run = build_dataset(&functions, &ctx.sandbox, &config, translator.as_ref().map(|t| t as &dyn Translator));
    emit(c, &jsonl(&run.records)?)?;
    eprintln!("{}", serde_json::to_string(&run.stats).context("serializing stats")?);
    if run.stats.trace_errors > 0 {
        return Err(anyhow!("{} inputs could not be traced", run.stats.trace_errors).into());
    }
    Ok(())
}

fn spawn_failures(verdicts: &[Verdict]) -> usize {
    verdicts.iter().flat_map(|v| &v.per_test).filter(|t| t.run.outcome == RunOutcome::SpawnFailure).count()
}

fn grade(c: &RunConfig) -> Result<(), Failure> {
    let corpus = load_corpus(c)?;
    let candidates = corpus::load_candidates(required(&c.paths.candidates, "candidates")?, &corpus).or_config()?;
    let verdicts = sandbox(c).grade_all(&candidates, &corpus, &c.sandbox_limits(), c.limits.jobs);
    emit(c, &jsonl(&verdicts)?)?;
    match spawn_failures(&verdicts) {
        0 => Ok(()),
        n => Err(anyhow!("{n} test runs could not start the interpreter").into()),
    }
}

fn outpred_eval(c: &RunConfig) -> Result<(), Failure> {
    let corpus = load_corpus(c)?;
    let candidates = corpus::load_candidates(required(&c.paths.candidates, "candidates")?, &corpus).or_config()?;
    let ctx = agent_context(c);
    let simulator = agent(&c.endpoints.simulator, remote(), Role::Simulate, &ctx)?;
    let config = SimulationConfig {
        attempts: c.selection.attempts,
        seed: c.selection.seed,
        retries: c.rollout.retries,
        jobs: c.limits.jobs,
        policy: c.policy(),
    };
    let attempts = simulate_candidates(&candidates, &corpus, simulator.as_ref(), &config).context("simulation")?;
    emit(c, &jsonl(&attempts)?)?;
    let hits = attempts.iter().filter(|a| a.matched).count();
    eprintln!("{hits}/{} predictions matched", attempts.len());
    Ok(())
}

fn load_predictions(c: &RunConfig) -> Result<Option<Vec<PredictionAttempt>>, Failure> {
    let Some(path) = optional(&c.paths.predictions, "predictions")? else {
        return Ok(None);
    };
    let all: Vec<PredictionAttempt> = corpus::read_jsonl(path).or_config()?;
    Ok(Some(all.into_iter().filter(|a| a.attempt < c.selection.attempts).collect()))
}

fn eval_report(c: &RunConfig, verdicts: &[Verdict]) -> Result<EvalReport, Failure> {
    let predictions = load_predictions(c)?;
    let s = &c.selection;
    Ok(build_report(verdicts, predictions.as_deref(), &s.ks(), s.n, s.seed).context("building report")?)
}

#[derive(Serialize)]
struct BestkRow {
    k: usize,
    bestk_sim: Option<f64>,
    bestk_exec: f64,
    passk: f64,
    short1k: f64,
}

fn bestk(c: &RunConfig) -> Result<(), Failure> {
    let verdicts: Vec<Verdict> = corpus::read_jsonl(required(&c.paths.verdicts, "verdicts")?).or_config()?;
    let r = eval_report(c, &verdicts)?;
    let rows: Vec<BestkRow> =
        r.ks.iter()
            .map(|k| BestkRow {
                k: *k,
                bestk_sim: r.bestk_sim.as_ref().and_then(|s| s.get(k).copied()),
                bestk_exec: r.bestk_exec[k],
                passk: r.pass_at_k[k],
                short1k: r.short1_at_k[k],
            })
            .collect();
    emit(c, &jsonl(&rows)?)
}

fn rollout(c: &RunConfig) -> Result<(), Failure> {
    let corpus = load_corpus(c)?;
    let ctx = agent_context(c);
    let solver = agent(&c.endpoints.solver, remote(), Role::Solve, &ctx)?;
    let judge = agent(&c.endpoints.judge, remote(), Role::Judge, &ctx)?;
    let simulator: Box<dyn Agent> = match c.rollout.feedback {
        FeedbackMode::Oracle => Box::new(OracleExecutor { sandbox: ctx.sandbox.clone(), limits: ctx.limits }),
        FeedbackMode::Predicted => agent(&c.endpoints.simulator, remote(), Role::Simulate, &ctx)?,
    };
    let agents = Agents { solver: solver.as_ref(), simulator: simulator.as_ref(), judge: judge.as_ref() };
    let config = RolloutConfig {
        k_max: c.rollout.k_max,
        seed: c.selection.seed,
        retries: c.rollout.retries,
        ..RolloutConfig::default()
    };
    let mut transcripts: Vec<RolloutTranscript> = Vec::new();
    let mut failures = Vec::new();
    sandbox::with_pool(c.limits.jobs, || {
        for problem in corpus.problems() {
            match run_rollout(problem, &agents, &config) {
                Ok(t) => transcripts.push(t),
                Err(f) => {
                    failures.push(format!("{}: {}", problem.id, f.error));
                    transcripts.push(*f.transcript);
                }
            }
        }
    });
    emit(c, &jsonl(&transcripts)?)?;
    if !failures.is_empty() {
        return Err(anyhow!("{} rollouts failed: {}", failures.len(), failures.join("; ")).into());
    }
    Ok(())
}

fn report(c: &RunConfig, format: ReportFormat) -> Result<(), Failure> {
    let verdicts = optional(&c.paths.verdicts, "verdicts")?;
    let transcripts = optional(&c.paths.transcripts, "transcripts")?;
    if verdicts.is_none() && transcripts.is_none() {
        return Err(config_error("report needs --verdicts, --transcripts, or both"));
    }
    let mut r = match verdicts {
        Some(path) => {
            let vs: Vec<Verdict> = corpus::read_jsonl(path).or_config()?;
            eval_report(c, &vs)?
        }
        None => EvalReport::empty(c.selection.seed, &c.selection.ks()),
    };
    if let Some(path) = transcripts {
        let corpus = load_corpus(c)?;
        let ts: Vec<RolloutTranscript> = corpus::read_jsonl(path).or_config()?;
        let (initial, submitted) = transcript_candidates(&ts, "rollout");
        let sb = sandbox(c);
        let limits = c.sandbox_limits();
        let vi = sb.grade_all(&initial, &corpus, &limits, c.limits.jobs);
        let vs = sb.grade_all(&submitted, &corpus, &limits, c.limits.jobs);
        let m = confusion(&vi, &vs, TestSet::Public).context("confusion matrix")?;
        r.public = Some(m.final_pass_rate());
        r.confusion = Some(m);
    }
    emit(c, &render_report(&r, format))
}
