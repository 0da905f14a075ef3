use execsim::corpus::{self, fuzz_inputs, TraceableFunction};
use execsim::literal::Literal;
use execsim::nlex::{filter_trace, parse_translation, FilterDecision};
use execsim::outpred::{normalize_output, outputs_match, reward};
use execsim::selection::{best_select, pass_at_k, rank_score_at_k};
use execsim::{ExecutionTrace, MatchPolicy, ScoredSample, TestCase, TraceCaps, TraceOutcome};
use num_bigint::BigInt;
use proptest::prelude::*;

fn policy() -> impl Strategy<Value = MatchPolicy> {
    (prop_oneof![Just(0.0), Just(1e-5), Just(1e-3)], any::<bool>(), any::<bool>()).prop_map(|(tol, ws, nl)| {
        MatchPolicy { float_abs_tol: tol, normalize_trailing_ws: ws, normalize_final_newline: nl }
    })
}

fn output_text() -> impl Strategy<Value = String> {
    prop::collection::vec(
        prop_oneof![
            "[a-z]{1,4}".prop_map(|s| s),
            (-1000.0f64..1000.0).prop_map(|x| format!("{x}")),
            (-50i64..50).prop_map(|x| x.to_string()),
            Just(" ".to_string()),
            Just("\n".to_string()),
            Just("\t".to_string()),
            Just("\r\n".to_string()),
        ],
        0..12,
    )
    .prop_map(|parts| parts.concat())
}

fn literal() -> impl Strategy<Value = Literal> {
    let leaf = prop_oneof![
        Just(Literal::None),
        any::<bool>().prop_map(Literal::Bool),
        any::<i64>().prop_map(|i| Literal::Int(BigInt::from(i) * BigInt::from(1_000_003))),
        (-1e12f64..1e12).prop_map(Literal::Float),
        ".{0,8}".prop_map(Literal::Str),
        prop::collection::vec(any::<u8>(), 0..6).prop_map(Literal::Bytes),
    ];
    leaf.prop_recursive(3, 24, 4, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..4).prop_map(Literal::List),
            prop::collection::vec(inner.clone(), 0..4).prop_map(Literal::Tuple),
            prop::collection::vec(inner.clone(), 1..4).prop_map(Literal::Set),
            prop::collection::vec(("[a-z]{1,3}".prop_map(Literal::Str), inner), 0..3).prop_map(Literal::Dict),
        ]
    })
}

fn pool() -> impl Strategy<Value = Vec<ScoredSample>> {
    prop::collection::vec((0u8..4, any::<bool>()), 1..9).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (s, c))| ScoredSample::new(format!("s{i}"), f64::from(s) / 2.0, c, i))
            .collect()
    })
}

fn brute_force(samples: &[ScoredSample], k: usize) -> f64 {
    let n = samples.len();
    let mut total = 0.0;
    let mut count = 0usize;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let subset: Vec<&ScoredSample> = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| &samples[i]).collect();
        let best = subset.iter().map(|s| s.score).fold(f64::MIN, f64::max);
        let top: Vec<_> = subset.iter().filter(|s| s.score == best).collect();
        total += top.iter().filter(|s| s.correct).count() as f64 / top.len() as f64;
        count += 1;
    }
    total / count as f64
}

fn trace(events: usize, bytes: u64, outcome: TraceOutcome) -> ExecutionTrace {
    ExecutionTrace {
        events: Vec::new(),
        return_value_literal: Some("0".into()),
        stdout: String::new(),
        outcome,
        event_count: events,
        serialized_bytes: bytes,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn match_reflexive_and_symmetric(a in output_text(), b in output_text(), p in policy()) {
        prop_assert!(outputs_match(&a, &a, &p));
        prop_assert_eq!(outputs_match(&a, &b, &p), outputs_match(&b, &a, &p));
    }

    #[test]
    fn normalize_is_idempotent(a in output_text(), p in policy()) {
        let once = normalize_output(&a, &p);
        let text = if p.normalize_final_newline {
            once.iter().map(|l| format!("{l}\n")).collect::<String>()
        } else {
            once.join("\n")
        };
        prop_assert_eq!(normalize_output(&text, &p), once);
    }

    #[test]
    fn reward_is_plus_or_minus_one(a in output_text(), b in output_text(), p in policy()) {
        let r = reward(&a, &b, &p);
        prop_assert!(r == 1 || r == -1);
        prop_assert_eq!(r == 1, outputs_match(&a, &b, &p));
    }

    #[test]
    fn exact_policy_is_byte_equality(a in output_text(), b in output_text()) {
        prop_assert_eq!(outputs_match(&a, &b, &MatchPolicy::exact()), a == b);
    }

    #[test]
    fn pass_at_k_bounded_and_monotone(n in 1usize..40, c_frac in 0.0f64..=1.0) {
        let c = ((n as f64) * c_frac).round() as usize;
        let mut prev = 0.0;
        for k in 1..=n {
            let p = pass_at_k(n, c, k).unwrap();
            prop_assert!((0.0..=1.0).contains(&p));
            prop_assert!(p + 1e-12 >= prev);
            prev = p;
        }
        if c < n {
            prop_assert!(pass_at_k(n, c + 1, 1).unwrap() >= pass_at_k(n, c, 1).unwrap());
        }
    }

    #[test]
    fn rank_score_matches_enumeration(samples in pool()) {
        for k in 1..=samples.len() {
            let fast = rank_score_at_k(&samples, k).unwrap();
            let slow = brute_force(&samples, k);
            prop_assert!((fast - slow).abs() <= 1e-12, "k={} fast={} slow={}", k, fast, slow);
        }
    }

    #[test]
    fn best_select_stays_in_argmax(samples in pool(), seed in any::<u64>()) {
        let out = best_select(&samples, seed).unwrap();
        let best = samples.iter().map(|s| s.score).fold(f64::MIN, f64::max);
        let chosen = samples.iter().find(|s| s.id == out.chosen).unwrap();
        prop_assert_eq!(chosen.score, best);
        prop_assert!(out.tied_set.contains(&out.chosen));
        prop_assert_eq!(best_select(&samples, seed).unwrap(), out);
    }

    #[test]
    fn fuzzing_is_prefix_stable(seed in any::<u64>(), small in 0usize..6, extra in 0usize..6) {
        let f = TraceableFunction {
            source: "def f(xs, s, k):\n    return k\n".into(),
            entry_name: "f".into(),
            seed_inputs: vec!["([1, 2, 3], 'abc', 4)".into(), "([], '', -1.5)".into()],
        };
        let a = fuzz_inputs(&f, small, seed).unwrap();
        let b = fuzz_inputs(&f, small + extra, seed).unwrap();
        prop_assert_eq!(&b[..a.len()], &a[..]);
        for args in &b {
            prop_assert!(execsim::literal::parse_args(args).is_ok());
        }
    }

    #[test]
    fn literal_round_trip(lit in literal()) {
        let text = lit.render();
        let back = Literal::parse(&text).unwrap();
        prop_assert!(back.approx_eq(&lit, 0.0), "{}", text);
        prop_assert_eq!(back.render(), text);
    }

    #[test]
    fn translation_round_trip(expl in "[A-Za-z0-9 .,\n]{0,40}", lit in literal()) {
        let out = lit.render();
        let response = format!("Sure.\n[EXPLANATION]\n{expl}\n[/EXPLANATION]\n[OUTPUT]\n{out}\n[/OUTPUT]\n");
        let t = parse_translation(&response).unwrap();
        prop_assert_eq!(t.explanation, expl.trim());
        prop_assert_eq!(t.output_literal, out.trim());
    }

    #[test]
    fn tighter_caps_never_accept_more(events in 0usize..200, bytes in 0u64..5000, me in 0usize..200, mb in 0u64..5000) {
        let t = trace(events, bytes, TraceOutcome::Ok);
        let loose = TraceCaps { max_events: me + 10, max_bytes: mb + 100 };
        let tight = TraceCaps { max_events: me, max_bytes: mb };
        if filter_trace(&t, &tight) == FilterDecision::Accept {
            prop_assert_eq!(filter_trace(&t, &loose), FilterDecision::Accept);
        }
        prop_assert_eq!(
            filter_trace(&t, &tight) == FilterDecision::Accept,
            events <= me && bytes <= mb
        );
    }

    #[test]
    fn jsonl_round_trip(cases in prop::collection::vec(("\\PC{0,20}", "\\PC{0,20}"), 0..6)) {
        let records: Vec<TestCase> = cases.into_iter().map(|(i, o)| TestCase::new(i, o)).collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        corpus::write_jsonl(&path, &records).unwrap();
        let back: Vec<TestCase> = corpus::read_jsonl(&path).unwrap();
        prop_assert_eq!(back, records);
    }
}
