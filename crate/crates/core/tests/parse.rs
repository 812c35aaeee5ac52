mod common;

use common::corpus::{corpus, Expect, IDS, K};
use proptest::prelude::*;
use vecorch::orchestrators::llm::llm_decide_detailed;
use vecorch::orchestrators::{llm_decide, parse_decision, solve_per_slot, LlmConfig, MockClient};
use vecorch::{BetaWeights, PredictiveState};

fn state() -> PredictiveState {
    let p = common::params(K);
    let mut s = common::random_state(&mut common::rng(2), IDS.len(), K, &p);
    s.vehicle_ids = IDS.to_vec();
    s
}

#[test]
fn corpus_has_fifty_cases_of_every_kind() {
    let c = corpus();
    assert_eq!(c.len(), 50);
    for kind in [Expect::Valid, Expect::Clamped, Expect::Rescaled, Expect::Both, Expect::Malformed] {
        assert!(c.iter().any(|(_, e)| *e == kind));
    }
}

#[test]
fn corpus_outcomes() {
    for (i, (text, expect)) in corpus().into_iter().enumerate() {
        let got = parse_decision(text, &IDS, K, 5);
        match (expect, got) {
            (Expect::Malformed, Err(_)) => {}
            (Expect::Malformed, Ok(d)) => panic!("case {i} parsed: {d:?}"),
            (_, Err(e)) => panic!("case {i} rejected: {e}"),
            (e, Ok(d)) => {
                d.validate(K).unwrap();
                assert_eq!(d.vehicle_ids, IDS.to_vec());
                assert!(d.alloc_sum() <= 1.0, "case {i}");
                let want = (matches!(e, Expect::Clamped | Expect::Both), matches!(e, Expect::Rescaled | Expect::Both));
                assert_eq!((d.flags.clamped, d.flags.rescaled), want, "case {i}: {text}");
                assert!(!d.flags.fallback);
            }
        }
    }
}

#[test]
fn malformed_outputs_fall_back_to_the_solver() {
    let s = state();
    let p = common::params(K);
    let beta = BetaWeights::balanced();
    let cfg = LlmConfig::default();
    let mut expected = solve_per_slot(&s, &beta, &p, &cfg.solver);
    for (i, (text, expect)) in corpus().into_iter().enumerate() {
        let mut client = MockClient::new(vec![text.to_string()]);
        let out = llm_decide_detailed(&s, "goal", &beta, &mut client, &p, &[], &cfg);
        assert_eq!(out.decision.flags.fallback, expect == Expect::Malformed, "case {i}");
        if expect == Expect::Malformed {
            expected.policy = out.decision.policy;
            expected.flags = out.decision.flags;
            assert_eq!(out.decision, expected, "case {i}");
            assert!(out.fallback.is_some());
        }
    }
}

#[test]
fn valid_model_output_is_used_verbatim() {
    let s = state();
    let p = common::params(K);
    let text = r#"{"w": [[0.5, 0.5], [0.2, 0.0]], "a": [[0.3, 0.2], [0.1, 0.0]]}"#;
    let mut client = MockClient::new(vec![text.into()]);
    let d = llm_decide(&s, "goal", &BetaWeights::balanced(), &mut client, &p, &LlmConfig::default());
    assert_eq!(d.offload, vec![vec![0.5, 0.5], vec![0.2, 0.0]]);
    assert_eq!(d.alloc, vec![vec![0.3, 0.2], vec![0.1, 0.0]]);
    assert!(!d.flags.fallback);
}

proptest! {
    #[test]
    fn arbitrary_text_never_panics(text in ".{0,400}") {
        if let Ok(d) = parse_decision(&text, &IDS, K, 0) {
            prop_assert!(d.validate(K).is_ok());
        }
    }

    #[test]
    fn arbitrary_matrices_parse_to_valid_decisions(
        w in proptest::collection::vec(proptest::collection::vec(-2.0f64..3.0, 1..4), 0..4),
        a in proptest::collection::vec(proptest::collection::vec(-2.0f64..3.0, 1..4), 0..4),
        prefix in "[a-zA-Z :]{0,20}",
    ) {
        let text = format!("{prefix}{}", serde_json::json!({"w": w, "a": a}));
        if let Ok(d) = parse_decision(&text, &IDS, K, 0) {
            prop_assert!(d.validate(K).is_ok());
            prop_assert!(d.alloc_sum() <= 1.0);
        }
    }
}
