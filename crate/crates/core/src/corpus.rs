//! Problems, candidate solutions and traceable functions, loaded from
//! line-delimited JSON, plus the seeded mutation fuzzer that widens a
//! function's seed inputs.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use num_bigint::BigInt;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::literal::{self, Literal};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed record on line {line}: {message}")]
    MalformedRecord { line: usize, message: String },
    #[error("duplicate problem id {0:?}")]
    DuplicateId(String),
    #[error("candidate references unknown problem {0:?}")]
    UnknownProblem(String),
    #[error("function has no seed inputs to mutate")]
    NoSeeds,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCase {
    pub input: String,
    #[serde(rename = "output")]
    pub expected_output: String,
}

impl TestCase {
    pub fn new(input: impl Into<String>, expected_output: impl Into<String>) -> Self {
        TestCase { input: input.into(), expected_output: expected_output.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Problem {
    pub id: String,
    pub statement: String,
    pub public_tests: Vec<TestCase>,
    pub private_tests: Vec<TestCase>,
}

impl Problem {
    fn validate(&self) -> Result<(), String> {
        if self.statement.trim().is_empty() {
            return Err("empty statement".into());
        }
        if self.public_tests.is_empty() {
            return Err(format!("problem {:?} has no public tests", self.id));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub problem_id: String,
    pub solution_id: String,
    pub code: String,
    pub producer: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceableFunction {
    pub source: String,
    pub entry_name: String,
    /// Argument tuples as source literals, e.g. `"([1, 2, 3],)"`.
    pub seed_inputs: Vec<String>,
}

impl TraceableFunction {
    fn validate(&self) -> Result<(), String> {
        let defines = self.source.lines().any(|l| {
            let t = l.trim_start();
            t.strip_prefix("def ")
                .map(|rest| {
                    rest.trim_start().starts_with(&self.entry_name) && {
                        let after = rest.trim_start()[self.entry_name.len()..].trim_start();
                        after.starts_with('(')
                    }
                })
                .unwrap_or(false)
        });
        if !defines {
            return Err(format!("entry {:?} is not defined in source", self.entry_name));
        }
        for s in &self.seed_inputs {
            literal::parse_args(s).map_err(|e| format!("seed input {s:?}: {e}"))?;
        }
        Ok(())
    }
}

/// Loaded problems, immutable after construction.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    problems: Vec<Problem>,
    index: HashMap<String, usize>,
}

impl Corpus {
    pub fn new(problems: Vec<Problem>) -> Result<Self, CorpusError> {
        let mut index = HashMap::with_capacity(problems.len());
        for (i, p) in problems.iter().enumerate() {
            p.validate().map_err(|message| CorpusError::MalformedRecord { line: i + 1, message })?;
            if index.insert(p.id.clone(), i).is_some() {
                return Err(CorpusError::DuplicateId(p.id.clone()));
            }
        }
        Ok(Corpus { problems, index })
    }

    pub fn problems(&self) -> &[Problem] {
        &self.problems
    }

    pub fn get(&self, id: &str) -> Option<&Problem> {
        self.index.get(id).map(|&i| &self.problems[i])
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.problems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.problems.is_empty()
    }
}

fn open(path: &Path) -> Result<BufReader<File>, CorpusError> {
    File::open(path).map(BufReader::new).map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })
}

/// Parses every non-blank line of `reader` as one `T`.
pub fn read_records<T: DeserializeOwned>(reader: impl BufRead) -> Result<Vec<(usize, T)>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| CorpusError::MalformedRecord { line: line_no, message: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line)
            .map_err(|e| CorpusError::MalformedRecord { line: line_no, message: e.to_string() })?;
        out.push((line_no, record));
    }
    Ok(out)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CorpusError> {
    Ok(read_records(open(path)?)?.into_iter().map(|(_, r)| r).collect())
}

/// Writes one JSON record per line, replacing any existing file.
pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), CorpusError> {
    let io_err = |source| CorpusError::Io { path: path.to_path_buf(), source };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| io_err(e.into()))?;
        w.write_all(b"\n").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn parse_problems(reader: impl BufRead) -> Result<Corpus, CorpusError> {
    let mut seen = HashSet::new();
    let mut problems = Vec::new();
    for (line, p) in read_records::<Problem>(reader)? {
        p.validate().map_err(|message| CorpusError::MalformedRecord { line, message })?;
        if !seen.insert(p.id.clone()) {
            return Err(CorpusError::DuplicateId(p.id));
        }
        problems.push(p);
    }
    Corpus::new(problems)
}

pub fn load_problems(path: &Path) -> Result<Corpus, CorpusError> {
    parse_problems(open(path)?)
}

pub fn parse_candidates(reader: impl BufRead, corpus: &Corpus) -> Result<Vec<Candidate>, CorpusError> {
    let mut out = Vec::new();
    for (line, c) in read_records::<Candidate>(reader)? {
        if c.code.trim().is_empty() {
            return Err(CorpusError::MalformedRecord { line, message: "empty code".into() });
        }
        let pos = corpus.position(&c.problem_id).ok_or_else(|| CorpusError::UnknownProblem(c.problem_id.clone()))?;
        out.push((pos, c));
    }
    // Stable: file order survives within each problem.
    out.sort_by_key(|(pos, _)| *pos);
    Ok(out.into_iter().map(|(_, c)| c).collect())
}

/// Candidates grouped by problem in corpus order, file order within a group.
pub fn load_candidates(path: &Path, corpus: &Corpus) -> Result<Vec<Candidate>, CorpusError> {
    parse_candidates(open(path)?, corpus)
}

/// Borrowing view of candidates per problem id, in first-seen order.
pub fn group_by_problem(candidates: &[Candidate]) -> Vec<(&str, Vec<&Candidate>)> {
    let mut order: Vec<(&str, Vec<&Candidate>)> = Vec::new();
    let mut slot: HashMap<&str, usize> = HashMap::new();
    for c in candidates {
        let i = *slot.entry(&c.problem_id).or_insert_with(|| {
            order.push((&c.problem_id, Vec::new()));
            order.len() - 1
        });
        order[i].1.push(c);
    }
    order
}

pub fn load_functions(path: &Path) -> Result<Vec<TraceableFunction>, CorpusError> {
    let mut out = Vec::new();
    for (line, f) in read_records::<TraceableFunction>(open(path)?)? {
        f.validate().map_err(|message| CorpusError::MalformedRecord { line, message })?;
        out.push(f);
    }
    Ok(out)
}

/// Stop after this many consecutive draws that produced nothing new.
const MAX_STALE_DRAWS: usize = 256;

/// Up to `budget` distinct argument tuples derived from the seed inputs by
/// type-directed mutation. The draw sequence does not depend on `budget`, so
/// a smaller budget yields a prefix of a larger one.
pub fn fuzz_inputs(function: &TraceableFunction, budget: usize, seed: u64) -> Result<Vec<String>, CorpusError> {
    if function.seed_inputs.is_empty() {
        return Err(CorpusError::NoSeeds);
    }
    let seeds: Vec<Vec<Literal>> = function
        .seed_inputs
        .iter()
        .enumerate()
        .map(|(i, s)| {
            literal::parse_args(s).map_err(|e| CorpusError::MalformedRecord { line: i + 1, message: e.to_string() })
        })
        .collect::<Result<_, _>>()?;
    let mut seen: HashSet<String> = seeds.iter().map(|s| literal::render_tuple(s)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut stale = 0;
    while out.len() < budget && stale < MAX_STALE_DRAWS {
        let mut args = seeds[rng.random_range(0..seeds.len())].clone();
        let rounds = if rng.random_bool(1.0 / 3.0) { 2 } else { 1 };
        let mut changed = false;
        for _ in 0..rounds {
            changed |= mutate_args(&mut args, &mut rng);
        }
        let rendered = literal::render_tuple(&args);
        if changed && seen.insert(rendered.clone()) {
            out.push(rendered);
            stale = 0;
        } else {
            stale += 1;
        }
    }
    Ok(out)
}

/// Mutates one randomly chosen mutable node; false when none exists.
fn mutate_args(args: &mut [Literal], rng: &mut ChaCha8Rng) -> bool {
    let total: usize = args.iter().map(count_sites).sum();
    if total == 0 {
        return false;
    }
    let mut target = rng.random_range(0..total);
    for arg in args.iter_mut() {
        let n = count_sites(arg);
        if target < n {
            return mutate_at(arg, target, rng);
        }
        target -= n;
    }
    unreachable!("site index within total")
}

fn is_site(v: &Literal) -> bool {
    !matches!(v, Literal::None | Literal::Tuple(_))
}

fn count_sites(v: &Literal) -> usize {
    let own = is_site(v) as usize;
    own + match v {
        Literal::List(items) | Literal::Tuple(items) | Literal::Set(items) => items.iter().map(count_sites).sum(),
        Literal::Dict(pairs) => pairs.iter().map(|(_, v)| count_sites(v)).sum(),
        _ => 0,
    }
}

fn mutate_at(v: &mut Literal, mut target: usize, rng: &mut ChaCha8Rng) -> bool {
    if is_site(v) {
        if target == 0 {
            return mutate_node(v, rng);
        }
        target -= 1;
    }
    let children: Vec<&mut Literal> = match v {
        Literal::List(items) | Literal::Tuple(items) | Literal::Set(items) => items.iter_mut().collect(),
        Literal::Dict(pairs) => pairs.iter_mut().map(|(_, v)| v).collect(),
        _ => Vec::new(),
    };
    for child in children {
        let n = count_sites(child);
        if target < n {
            return mutate_at(child, target, rng);
        }
        target -= n;
    }
    false
}

fn perturbation(rng: &mut ChaCha8Rng) -> i64 {
    let magnitude = rng.random_range(1..=10);
    if rng.random_bool(0.5) {
        magnitude
    } else {
        -magnitude
    }
}

fn mutate_node(v: &mut Literal, rng: &mut ChaCha8Rng) -> bool {
    match v {
        Literal::Int(i) => {
            if rng.random_bool(0.2) {
                *i = BigInt::from(0);
            } else {
                *i += perturbation(rng);
            }
        }
        Literal::Float(x) => {
            if rng.random_bool(0.2) {
                *x = 0.0;
            } else {
                *x += perturbation(rng) as f64;
            }
        }
        Literal::Bool(b) => *b = !*b,
        Literal::Str(s) => {
            let chars: Vec<char> = s.chars().collect();
            match rng.random_range(0..4) {
                0 => s.clear(),
                1 => *s = chars.first().map(|c| c.to_string()).unwrap_or_default(),
                _ if chars.is_empty() => s.push(random_char(rng)),
                _ => {
                    let mut chars = chars;
                    let at = rng.random_range(0..chars.len());
                    chars[at] = random_char(rng);
                    *s = chars.into_iter().collect();
                }
            }
        }
        Literal::Bytes(b) => match rng.random_range(0..3) {
            0 => b.clear(),
            _ if b.is_empty() => b.push(random_char(rng) as u8),
            _ => {
                let at = rng.random_range(0..b.len());
                b[at] = random_char(rng) as u8;
            }
        },
        Literal::List(items) => mutate_sequence(items, true, rng),
        Literal::Set(items) => mutate_sequence(items, false, rng),
        Literal::Dict(pairs) => {
            if pairs.is_empty() || rng.random_bool(0.5) {
                pairs.clear();
            } else {
                let at = rng.random_range(0..pairs.len());
                pairs.remove(at);
            }
        }
        Literal::None | Literal::Tuple(_) => return false,
    }
    true
}

fn mutate_sequence(items: &mut Vec<Literal>, ordered: bool, rng: &mut ChaCha8Rng) {
    let op = rng.random_range(0..5);
    match op {
        0 => {
            let fresh = match items.choose(rng) {
                Some(template) => {
                    let mut t = template.clone();
                    mutate_at(&mut t, 0, rng);
                    t
                }
                None => Literal::int(0),
            };
            let at = rng.random_range(0..=items.len());
            items.insert(at, fresh);
        }
        1 if !items.is_empty() => {
            let at = rng.random_range(0..items.len());
            items.remove(at);
        }
        2 if ordered && items.len() > 1 => items.shuffle(rng),
        3 => items.clear(),
        _ => items.truncate(1),
    }
}

fn random_char(rng: &mut ChaCha8Rng) -> char {
    (b'a' + rng.random_range(0..26u8)) as char
}
