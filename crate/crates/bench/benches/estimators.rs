use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use execsim::literal::Literal;
use execsim::outpred::outputs_match;
use execsim::selection::{best_select, pass_at_k, rank_score_at_k, short1_at_k};
use execsim::{MatchPolicy, ScoredSample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pool(n: usize, seed: u64) -> Vec<ScoredSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let score = f64::from(rng.random_range(0..6u8)) / 5.0;
            ScoredSample::new(format!("s{i}"), score, rng.random_bool(0.3), rng.random_range(100..2000))
        })
        .collect()
}

fn estimators(c: &mut Criterion) {
    let mut g = c.benchmark_group("estimators");
    g.bench_function("pass_at_k/n200", |b| {
        b.iter(|| (1..=200).map(|k| pass_at_k(black_box(200), black_box(37), k).unwrap()).sum::<f64>())
    });
    for n in [20, 200, 2000] {
        let samples = pool(n, 7);
        g.bench_with_input(BenchmarkId::new("rank_score_at_k", n), &samples, |b, s| {
            b.iter(|| rank_score_at_k(black_box(s), n / 2).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("short1_at_k", n), &samples, |b, s| {
            b.iter(|| short1_at_k(black_box(s), n / 2).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("best_select", n), &samples, |b, s| {
            b.iter(|| best_select(black_box(s), 11).unwrap())
        });
    }
    g.finish();
}

fn matching(c: &mut Criterion) {
    let policy = MatchPolicy::default();
    let lines: Vec<String> = (0..1000).map(|i| format!("case {i}: {:.6} {}", i as f64 / 7.0, i * 3)).collect();
    let expected = lines.join("\n") + "\n";
    let predicted = lines.iter().map(|l| format!("{l}  ")).collect::<Vec<_>>().join("\n");
    c.bench_function("outputs_match/1000_lines", |b| {
        b.iter(|| outputs_match(black_box(&predicted), black_box(&expected), &policy))
    });
    let literal = format!(
        "{{'xs': [{}], 'name': 'bench', 'pairs': [{}]}}",
        (0..500).map(|i| (i as f64 * 0.5).to_string()).collect::<Vec<_>>().join(", "),
        (0..200).map(|i| format!("({i}, '{i}')")).collect::<Vec<_>>().join(", ")
    );
    c.bench_function("literal_parse", |b| b.iter(|| Literal::parse(black_box(&literal)).unwrap()));
}

criterion_group!(benches, estimators, matching);
criterion_main!(benches);
