//! Evaluation quantities over verdicts, prediction attempts and rollout
//! transcripts: pass@k curves, best@k by executed or simulated public-test
//! score, the simulation gap and the initial-vs-submitted confusion matrix.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Candidate;
use crate::outpred::PredictionAttempt;
use crate::rollout::{simulated_scores, RolloutTranscript};
use crate::sandbox::{TestSet, Verdict};
use crate::selection::{self, ScoredSample, SelectionError};

/// k → value.
pub type Curve = BTreeMap<usize, f64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReportError {
    #[error("no problems to aggregate")]
    EmptyInput,
    #[error("verdict sets are not aligned: {0}")]
    MisalignedIds(String),
    #[error("curves are defined on different k grids")]
    KeyMismatch,
    #[error(transparent)]
    Domain(#[from] SelectionError),
}

/// Rows: initial solution, columns: submitted solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub fail_fail: f64,
    pub fail_pass: f64,
    pub pass_fail: f64,
    pub pass_pass: f64,
}

impl ConfusionMatrix {
    pub fn from_counts(
        fail_fail: usize,
        fail_pass: usize,
        pass_fail: usize,
        pass_pass: usize,
    ) -> Result<Self, ReportError> {
        let total = (fail_fail + fail_pass + pass_fail + pass_pass) as f64;
        if total == 0.0 {
            return Err(ReportError::EmptyInput);
        }
        Ok(ConfusionMatrix {
            fail_fail: fail_fail as f64 / total,
            fail_pass: fail_pass as f64 / total,
            pass_fail: pass_fail as f64 / total,
            pass_pass: pass_pass as f64 / total,
        })
    }

    pub fn total(&self) -> f64 {
        self.fail_fail + self.fail_pass + self.pass_fail + self.pass_pass
    }

    pub fn initial_pass_rate(&self) -> f64 {
        self.pass_fail + self.pass_pass
    }

    pub fn final_pass_rate(&self) -> f64 {
        self.fail_pass + self.pass_pass
    }
}

fn passes(v: &Verdict, set: TestSet) -> bool {
    match set {
        TestSet::Public => v.all_public,
        TestSet::Private => v.all_private,
    }
}

/// Proportions over problems; both slices must hold one verdict per problem
/// for the same problem ids.
pub fn confusion(initial: &[Verdict], submitted: &[Verdict], set: TestSet) -> Result<ConfusionMatrix, ReportError> {
    if initial.is_empty() && submitted.is_empty() {
        return Err(ReportError::EmptyInput);
    }
    let index = |vs: &[Verdict]| -> Result<HashMap<String, bool>, ReportError> {
        let mut map = HashMap::new();
        for v in vs {
            if map.insert(v.problem_id.clone(), passes(v, set)).is_some() {
                return Err(ReportError::MisalignedIds(format!("problem {} appears twice", v.problem_id)));
            }
        }
        Ok(map)
    };
    let init = index(initial)?;
    let sub = index(submitted)?;
    if init.len() != sub.len() {
        return Err(ReportError::MisalignedIds(format!("{} initial vs {} submitted problems", init.len(), sub.len())));
    }
    let mut counts = [0usize; 4];
    for (id, &a) in &init {
        let &b =
            sub.get(id).ok_or_else(|| ReportError::MisalignedIds(format!("problem {id} has no submitted verdict")))?;
        counts[(a as usize) * 2 + b as usize] += 1;
    }
    ConfusionMatrix::from_counts(counts[0], counts[1], counts[2], counts[3])
}

/// Initial and submitted solutions of each transcript as gradable candidates.
pub fn transcript_candidates(transcripts: &[RolloutTranscript], producer: &str) -> (Vec<Candidate>, Vec<Candidate>) {
    let make = |t: &RolloutTranscript, id: &str, code: &str| Candidate {
        problem_id: t.problem_id.clone(),
        solution_id: id.to_string(),
        code: code.to_string(),
        producer: producer.to_string(),
    };
    transcripts
        .iter()
        .map(|t| {
            let first = t.solutions.first().map(String::as_str).unwrap_or("");
            (make(t, "initial", first), make(t, "submitted", &t.final_solution))
        })
        .unzip()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemRow {
    pub problem_id: String,
    pub n: usize,
    pub correct: usize,
    pub public_pass: usize,
}

/// Verdicts grouped by problem in first-appearance order, at most `n` each.
pub fn group_verdicts(verdicts: &[Verdict], n: usize) -> Vec<(String, Vec<&Verdict>)> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<&str, Vec<&Verdict>> = HashMap::new();
    for v in verdicts {
        let g = groups.entry(&v.problem_id).or_insert_with(|| {
            order.push(v.problem_id.clone());
            Vec::new()
        });
        if g.len() < n {
            g.push(v);
        }
    }
    order
        .into_iter()
        .map(|id| {
            let g = groups.remove(id.as_str()).unwrap_or_default();
            (id, g)
        })
        .collect()
}

pub fn problem_rows(groups: &[(String, Vec<&Verdict>)]) -> Vec<ProblemRow> {
    groups
        .iter()
        .map(|(id, vs)| ProblemRow {
            problem_id: id.clone(),
            n: vs.len(),
            correct: vs.iter().filter(|v| v.correct()).count(),
            public_pass: vs.iter().filter(|v| v.all_public).count(),
        })
        .collect()
}

fn check_ks(ks: &[usize], min_n: usize) -> Result<(), ReportError> {
    match ks.iter().find(|&&k| k == 0 || k > min_n) {
        Some(k) => Err(SelectionError::Domain(format!("k={k} outside 1..={min_n}")).into()),
        None => Ok(()),
    }
}

/// Mean over problems of the unbiased pass@k estimate.
pub fn aggregate_pass_at_k(rows: &[ProblemRow], ks: &[usize]) -> Result<Curve, ReportError> {
    let min_n = rows.iter().map(|r| r.n).min().ok_or(ReportError::EmptyInput)?;
    check_ks(ks, min_n)?;
    let mut curve = Curve::new();
    for &k in ks {
        let total: f64 = rows.iter().map(|r| selection::pass_at_k(r.n, r.correct, k)).sum::<Result<f64, _>>()?;
        curve.insert(k, total / rows.len() as f64);
    }
    Ok(curve)
}

/// Mean over pools of `estimator(pool, k)`.
pub fn selection_curve(
    pools: &[Vec<ScoredSample>],
    ks: &[usize],
    estimator: fn(&[ScoredSample], usize) -> Result<f64, SelectionError>,
) -> Result<Curve, ReportError> {
    let min_n = pools.iter().map(Vec::len).min().ok_or(ReportError::EmptyInput)?;
    check_ks(ks, min_n)?;
    let mut curve = Curve::new();
    for &k in ks {
        let total: f64 = pools.iter().map(|p| estimator(p, k)).sum::<Result<f64, _>>()?;
        curve.insert(k, total / pools.len() as f64);
    }
    Ok(curve)
}

/// Pools scored by the number of public tests actually passed.
pub fn exec_pools(groups: &[(String, Vec<&Verdict>)]) -> Vec<Vec<ScoredSample>> {
    groups
        .iter()
        .map(|(_, vs)| {
            vs.iter()
                .map(|v| {
                    ScoredSample::new(v.solution_id.clone(), v.public_pass_count as f64, v.correct(), v.code_chars)
                })
                .collect()
        })
        .collect()
}

/// Pools scored by simulated public-test score; unsimulated candidates score 0.
pub fn sim_pools(groups: &[(String, Vec<&Verdict>)], attempts: &[PredictionAttempt]) -> Vec<Vec<ScoredSample>> {
    let scores = simulated_scores(attempts);
    groups
        .iter()
        .map(|(pid, vs)| {
            vs.iter()
                .map(|v| {
                    let score = scores.get(&(pid.clone(), v.solution_id.clone())).copied().unwrap_or(0.0);
                    ScoredSample::new(v.solution_id.clone(), score, v.correct(), v.code_chars)
                })
                .collect()
        })
        .collect()
}

/// Pointwise `exec - sim`.
pub fn simulation_gap(sim: &Curve, exec: &Curve) -> Result<Curve, ReportError> {
    if !sim.keys().eq(exec.keys()) {
        return Err(ReportError::KeyMismatch);
    }
    Ok(exec.iter().map(|(k, e)| (*k, e - sim[k])).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub seed: u64,
    pub ks: Vec<usize>,
    pub problems: Vec<ProblemRow>,
    pub pass_at_k: Curve,
    pub bestk_exec: Curve,
    pub bestk_sim: Option<Curve>,
    pub short1_at_k: Curve,
    pub simulation_gap: Option<Curve>,
    /// Mean over problems of the fraction of samples passing all public tests.
    pub public: Option<f64>,
    pub confusion: Option<ConfusionMatrix>,
}

impl EvalReport {
    pub fn empty(seed: u64, ks: &[usize]) -> Self {
        EvalReport {
            seed,
            ks: ks.to_vec(),
            problems: Vec::new(),
            pass_at_k: Curve::new(),
            bestk_exec: Curve::new(),
            bestk_sim: None,
            short1_at_k: Curve::new(),
            simulation_gap: None,
            public: None,
            confusion: None,
        }
    }
}

/// Builds every curve from verdicts (and, when given, simulated attempts),
/// using at most `n` samples per problem.
pub fn build_report(
    verdicts: &[Verdict],
    attempts: Option<&[PredictionAttempt]>,
    ks: &[usize],
    n: usize,
    seed: u64,
) -> Result<EvalReport, ReportError> {
    let groups = group_verdicts(verdicts, n);
    if groups.is_empty() {
        return Err(ReportError::EmptyInput);
    }
    let problems = problem_rows(&groups);
    let pass_at_k = aggregate_pass_at_k(&problems, ks)?;
    let bestk_exec = selection_curve(&exec_pools(&groups), ks, selection::rank_score_at_k)?;
    let short1_at_k = selection_curve(&exec_pools(&groups), ks, selection::short1_at_k)?;
    let (bestk_sim, simulation_gap) = match attempts {
        Some(a) => {
            let sim = selection_curve(&sim_pools(&groups, a), ks, selection::rank_score_at_k)?;
            let gap = self::simulation_gap(&sim, &bestk_exec)?;
            (Some(sim), Some(gap))
        }
        None => (None, None),
    };
    let public = problems.iter().map(|r| r.public_pass as f64 / r.n as f64).sum::<f64>() / problems.len() as f64;
    Ok(EvalReport {
        seed,
        ks: ks.to_vec(),
        problems,
        pass_at_k,
        bestk_exec,
        bestk_sim,
        short1_at_k,
        simulation_gap,
        public: Some(public),
        confusion: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Jsonl,
    Human,
}

#[derive(Serialize)]
struct CurveRow {
    kind: &'static str,
    k: usize,
    passk: Option<f64>,
    bestk_exec: Option<f64>,
    bestk_sim: Option<f64>,
    short1k: Option<f64>,
    simulation_gap: Option<f64>,
}

fn pct(v: f64) -> String {
    format!("{:.1}", v * 100.0)
}

fn cell(curve: Option<&Curve>, k: usize) -> String {
    curve.and_then(|c| c.get(&k)).map(|v| pct(*v)).unwrap_or_else(|| "no data".into())
}

pub fn render_report(report: &EvalReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Jsonl => render_jsonl(report),
        ReportFormat::Human => render_human(report),
    }
}

fn render_jsonl(report: &EvalReport) -> String {
    let mut out = String::new();
    let summary = serde_json::json!({
        "kind": "summary",
        "seed": report.seed,
        "ks": report.ks,
        "problems": report.problems.len(),
        "public": report.public,
        "no_data": report.problems.is_empty(),
    });
    out.push_str(&summary.to_string());
    out.push('\n');
    for &k in &report.ks {
        let row = CurveRow {
            kind: "curve",
            k,
            passk: report.pass_at_k.get(&k).copied(),
            bestk_exec: report.bestk_exec.get(&k).copied(),
            bestk_sim: report.bestk_sim.as_ref().and_then(|c| c.get(&k).copied()),
            short1k: report.short1_at_k.get(&k).copied(),
            simulation_gap: report.simulation_gap.as_ref().and_then(|c| c.get(&k).copied()),
        };
        out.push_str(&serde_json::to_string(&row).expect("serializable"));
        out.push('\n');
    }
    if let Some(c) = &report.confusion {
        let mut v = serde_json::to_value(c).expect("serializable");
        v["kind"] = "confusion".into();
        out.push_str(&v.to_string());
        out.push('\n');
    }
    for p in &report.problems {
        let mut v = serde_json::to_value(p).expect("serializable");
        v["kind"] = "problem".into();
        out.push_str(&v.to_string());
        out.push('\n');
    }
    out
}

fn render_human(report: &EvalReport) -> String {
    let mut out = String::from("# Evaluation report\n\n");
    let _ = writeln!(out, "problems: {}, seed: {}\n", report.problems.len(), report.seed);
    if report.problems.is_empty() && report.confusion.is_none() {
        out.push_str("no data\n");
        return out;
    }
    if !report.ks.is_empty() {
        out.push_str("| selection |");
        for k in &report.ks {
            let _ = write!(out, " pass@{k} |");
        }
        out.push_str(" public |\n|---|");
        for _ in 0..=report.ks.len() {
            out.push_str("---:|");
        }
        out.push('\n');
        let public = report.public.map(pct).unwrap_or_else(|| "no data".into());
        let rows: [(&str, Option<&Curve>, &str); 4] = [
            ("pass@k", Some(&report.pass_at_k), public.as_str()),
            ("best@k exec", Some(&report.bestk_exec), "-"),
            ("best@k simulate", report.bestk_sim.as_ref(), "-"),
            ("short1@k", Some(&report.short1_at_k), "-"),
        ];
        for (name, curve, last) in rows {
            let _ = write!(out, "| {name} |");
            for &k in &report.ks {
                let _ = write!(out, " {} |", cell(curve, k));
            }
            let _ = writeln!(out, " {last} |");
        }
        if let Some(gap) = &report.simulation_gap {
            out.push_str("| simulation gap |");
            for &k in &report.ks {
                let _ = write!(out, " {} |", cell(Some(gap), k));
            }
            out.push_str(" - |\n");
        }
    }
    if let Some(c) = &report.confusion {
        out.push_str("\n| Init \\ Sub | fail | pass |\n|---|---:|---:|\n");
        let _ = writeln!(out, "| fail | {} | {} |", pct(c.fail_fail), pct(c.fail_pass));
        let _ = writeln!(out, "| pass | {} | {} |", pct(c.pass_fail), pct(c.pass_pass));
    }
    out
}
