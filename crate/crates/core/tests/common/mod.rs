#![allow(dead_code)]

use std::path::PathBuf;

use execsim::corpus;
use execsim::{Corpus, Problem};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn backspace() -> Problem {
    let corpus = corpus::load_problems(&fixture("backspace_problem.jsonl")).unwrap();
    corpus.problems()[0].clone()
}

pub fn gap_corpus() -> Corpus {
    corpus::load_problems(&fixture("gap_problems.jsonl")).unwrap()
}

/// Writes `body` as a stand-in tracer shim and returns its path.
pub fn fake_shim(dir: &tempfile::TempDir, body: &str) -> PathBuf {
    let path = dir.path().join("shim.py");
    std::fs::write(&path, body).unwrap();
    path
}
