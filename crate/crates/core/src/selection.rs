//! Estimators and selectors over sampled solutions: the unbiased pass@k
//! estimator, best@k selection by (simulated or executed) public-test score,
//! its unbiased `rank_score@k` estimate, and the short1@k baseline.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SelectionError {
    #[error("no attempts to aggregate")]
    EmptyAttempts,
    #[error("cannot select from an empty pool")]
    EmptyPool,
    #[error("domain error: {0}")]
    Domain(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSample {
    pub id: String,
    pub score: f64,
    pub correct: bool,
    pub length: usize,
}

impl ScoredSample {
    pub fn new(id: impl Into<String>, score: f64, correct: bool, length: usize) -> Self {
        ScoredSample { id: id.into(), score, correct, length }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionOutcome {
    pub chosen: String,
    pub tied_set: Vec<String>,
    pub rng_seed: u64,
}

/// Fraction of attempts whose prediction matched.
pub fn test_score(attempt_matches: &[bool]) -> Result<f64, SelectionError> {
    if attempt_matches.is_empty() {
        return Err(SelectionError::EmptyAttempts);
    }
    let hits = attempt_matches.iter().filter(|m| **m).count();
    Ok(hits as f64 / attempt_matches.len() as f64)
}

/// Picks uniformly among the samples sharing the maximum score.
pub fn best_select(samples: &[ScoredSample], seed: u64) -> Result<SelectionOutcome, SelectionError> {
    let best = samples
        .iter()
        .map(|s| s.score)
        .fold(None, |acc: Option<f64>, s| Some(acc.map_or(s, |a| a.max(s))))
        .ok_or(SelectionError::EmptyPool)?;
    if !best.is_finite() {
        return Err(SelectionError::Domain("scores must be finite".into()));
    }
    let tied_set: Vec<String> = samples.iter().filter(|s| s.score == best).map(|s| s.id.clone()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen = tied_set[rng.random_range(0..tied_set.len())].clone();
    Ok(SelectionOutcome { chosen, tied_set, rng_seed: seed })
}

/// C(m, k) / C(n, k) as a product of ratios; zero when m < k.
fn binom_ratio(m: usize, n: usize, k: usize) -> f64 {
    debug_assert!(m <= n && k <= n);
    if m < k {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (m - i) as f64 / (n - i) as f64)
}

/// Unbiased pass@k: `1 - C(n-c, k) / C(n, k)`.
pub fn pass_at_k(n: usize, c: usize, k: usize) -> Result<f64, SelectionError> {
    if c > n || k == 0 || k > n {
        return Err(SelectionError::Domain(format!("pass@k needs 0 <= c <= n and 1 <= k <= n (n={n}, c={c}, k={k})")));
    }
    if n - c < k {
        return Ok(1.0);
    }
    Ok(1.0 - binom_ratio(n - c, n, k))
}

/// Expected correctness of the best-scoring member of a uniformly drawn
/// k-subset, with ties broken uniformly within the subset.
///
/// For each distinct score level `v` holding `g` samples (`c_v` correct) with
/// `b` samples strictly below it, the subsets whose maximum is `v` number
/// `C(g + b, k) - C(b, k)`, and each contributes `c_v / g` in expectation.
pub fn rank_score_at_k(samples: &[ScoredSample], k: usize) -> Result<f64, SelectionError> {
    let n = samples.len();
    if k == 0 || k > n {
        return Err(SelectionError::Domain(format!("rank_score@k needs 1 <= k <= n (n={n}, k={k})")));
    }
    if samples.iter().any(|s| !s.score.is_finite()) {
        return Err(SelectionError::Domain("scores must be finite".into()));
    }
    let mut sorted: Vec<(f64, bool)> = samples.iter().map(|s| (s.score, s.correct)).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut total = 0.0;
    let mut below = 0;
    let mut i = 0;
    while i < n {
        let level = sorted[i].0;
        let mut j = i;
        let mut correct = 0usize;
        while j < n && sorted[j].0 == level {
            correct += sorted[j].1 as usize;
            j += 1;
        }
        let group = j - i;
        if correct > 0 {
            let subsets = binom_ratio(group + below, n, k) - binom_ratio(below, n, k);
            total += correct as f64 / group as f64 * subsets;
        }
        below += group;
        i = j;
    }
    Ok(total)
}

/// rank_score@k with the score taken as negative length.
pub fn short1_at_k(samples: &[ScoredSample], k: usize) -> Result<f64, SelectionError> {
    let by_length: Vec<ScoredSample> =
        samples.iter().map(|s| ScoredSample { score: -(s.length as f64), ..s.clone() }).collect();
    rank_score_at_k(&by_length, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pool(scores: &[f64], correct: &[bool]) -> Vec<ScoredSample> {
        scores
            .iter()
            .zip(correct)
            .enumerate()
            .map(|(i, (&s, &c))| ScoredSample::new(format!("s{i}"), s, c, 0))
            .collect()
    }

    #[test]
    fn test_score_examples() {
        assert_eq!(test_score(&[true; 5]).unwrap(), 1.0);
        assert!((test_score(&[true, true, false, false, false]).unwrap() - 0.4).abs() < 1e-15);
        assert_eq!(test_score(&[]), Err(SelectionError::EmptyAttempts));
    }

    #[test]
    fn best_select_unique_and_ties() {
        let p = vec![
            ScoredSample::new("A", 2.0, false, 1),
            ScoredSample::new("B", 3.0, true, 1),
            ScoredSample::new("C", 1.0, false, 1),
        ];
        let out = best_select(&p, 0).unwrap();
        assert_eq!(out.chosen, "B");
        assert_eq!(out.tied_set, vec!["B"]);

        let zeros = pool(&[0.0, 0.0, 0.0], &[true, false, false]);
        let out = best_select(&zeros, 3).unwrap();
        assert_eq!(out.tied_set.len(), 3);
        assert!(best_select(&[], 0).is_err());
    }

    #[test]
    fn pass_at_k_examples() {
        assert_eq!(pass_at_k(20, 20, 5).unwrap(), 1.0);
        assert!((pass_at_k(2, 1, 1).unwrap() - 0.5).abs() < 1e-15);
        // Brute force: of the C(5,3)=10 subsets only {the 3 incorrect} misses.
        assert!((pass_at_k(5, 2, 3).unwrap() - 0.9).abs() < 1e-12);
        assert!(pass_at_k(3, 4, 1).is_err());
        assert!(pass_at_k(3, 1, 0).is_err());
        assert!(pass_at_k(3, 1, 4).is_err());
        let big = pass_at_k(10_000, 17, 100).unwrap();
        assert!(big.is_finite() && (0.0..=1.0).contains(&big));
    }

    #[test]
    fn rank_score_examples() {
        let p = pool(&[2.0, 1.0, 0.0], &[true, false, false]);
        assert!((rank_score_at_k(&p, 3).unwrap() - 1.0).abs() < 1e-12);
        assert!((rank_score_at_k(&p, 1).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        // Six pairs: {0,1} 0.5, {0,2} 1, {0,3} 1, {1,2} 0, {1,3} 0, {2,3} 0.5.
        let p = pool(&[1.0, 1.0, 0.0, 0.0], &[true, false, true, false]);
        assert!((rank_score_at_k(&p, 2).unwrap() - 0.5).abs() < 1e-12);
        assert!(rank_score_at_k(&p, 0).is_err());
        assert!(rank_score_at_k(&p, 5).is_err());
    }

    #[test]
    fn short1_examples() {
        let p = vec![ScoredSample::new("a", 0.0, true, 10), ScoredSample::new("b", 0.0, false, 20)];
        assert!((short1_at_k(&p, 2).unwrap() - 1.0).abs() < 1e-12);
        let eq = vec![ScoredSample::new("a", 0.0, true, 10), ScoredSample::new("b", 0.0, false, 10)];
        assert!((short1_at_k(&eq, 2).unwrap() - 0.5).abs() < 1e-12);
        assert!((short1_at_k(&p, 1).unwrap() - 0.5).abs() < 1e-12);
    }
}
