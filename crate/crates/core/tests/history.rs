use amqcfa_core::exact::{rat, BigRational};
use amqcfa_core::history::{
    analyze_history_protocol, build_history_verifier, build_ntm_history_verifier, cheating_prover,
    honest_history, honest_history_prover, honest_run, CheatKind, HistoryVerifierParams,
    StreamProver,
};
use amqcfa_core::machine::{Limits, Verdict};
use amqcfa_core::turing::{machines, validate_history, HistoryVerdict, TmSpec};
use amqcfa_core::Error;
use num_bigint::BigUint;
use num_traits::Zero;

fn words(max_len: usize) -> Vec<String> {
    let mut out = vec![String::new()];
    let mut layer = vec![String::new()];
    for _ in 0..max_len {
        layer = layer
            .iter()
            .flat_map(|w| ['0', '1'].map(|c| format!("{w}{c}")))
            .collect();
        out.extend(layer.iter().cloned());
    }
    out
}

fn pow(base: u64, e: usize) -> BigRational {
    BigRational::from_integer(BigUint::from(base).pow(e as u32).into())
}

fn deciders() -> Vec<(&'static str, TmSpec)> {
    vec![
        ("parity", machines::parity()),
        ("palindrome", machines::palindrome()),
    ]
}

#[test]
fn honest_histories_decide_with_certainty() {
    for (name, spec) in deciders() {
        for w in words(4) {
            let v = build_history_verifier(&HistoryVerifierParams::new(spec.clone(), &w)).unwrap();
            let text = honest_history(&spec, &w, false).unwrap();
            let accepted = match validate_history(&spec, &w, &text, false) {
                HistoryVerdict::Valid { accepted } => accepted,
                other => panic!("{name} on {w:?}: {other:?}"),
            };
            let a = analyze_history_protocol(&v, &StreamProver::new(&text), None).unwrap();
            let l = text.chars().count() - 1;
            let d = v.denominator();
            let leaf = pow(d, 2 * l).recip();
            let it = &a.iteration;
            assert_eq!(it.total(), rat(1));
            assert_eq!(it.leaves.len(), 1, "{name} on {w:?}");
            assert_eq!(it.leaves[0].steps, l);
            assert_eq!(it.leaves[0].probability, leaf);
            if accepted {
                assert_eq!(it.p_accept, leaf);
                assert!(it.p_reject.is_zero());
                assert_eq!(a.overall_accept(), rat(1));
            } else {
                assert_eq!(it.p_reject, leaf);
                assert!(it.p_accept.is_zero());
                assert_eq!(a.overall_reject(), rat(1));
            }
            assert_eq!(it.p_restart, rat(1) - &leaf);
            assert_eq!(a.outcome.expected_iterations, Some(pow(d, 2 * l)));
        }
    }
}

fn mutations(spec: &TmSpec, w: &str) -> Vec<CheatKind> {
    let (h, _) = honest_run(spec, w).unwrap();
    let mut alphabet: Vec<char> = spec.tape_alphabet().to_vec();
    alphabet.extend(spec.states());
    let mut out = Vec::new();
    for (block, c) in h.iter().enumerate().skip(1) {
        for (offset, &x) in c.symbols().iter().enumerate() {
            for &r in &alphabet {
                if r != x {
                    out.push(CheatKind::SymbolMutation {
                        block,
                        offset,
                        replacement: r,
                    });
                }
            }
        }
    }
    out
}

#[test]
fn mutated_histories_are_rejected() {
    let mut checked = 0;
    for (name, spec) in deciders() {
        for w in ["", "1", "10", "011"] {
            let (h, _) = honest_run(&spec, w).unwrap();
            for kind in mutations(&spec, w) {
                let prover = cheating_prover(&spec, kind, &h, None).unwrap();
                assert!(!matches!(
                    validate_history(&spec, w, &prover.text(), false),
                    HistoryVerdict::Valid { .. }
                ));
                for c in [3u64, 5] {
                    let params = HistoryVerifierParams::new(spec.clone(), w).with_coefficient(c);
                    let v = build_history_verifier(&params).unwrap();
                    let a = analyze_history_protocol(&v, &prover, None).unwrap();
                    let it = &a.iteration;
                    assert_eq!(it.total(), rat(1));
                    let c2 = BigRational::from_integer((c * c).into());
                    assert!(it.p_reject >= &c2 * &it.p_accept, "{name} {w:?} {kind:?}");
                    assert!(
                        a.overall_reject() >= &c2 / (&c2 + rat(1)),
                        "{name} {w:?} {kind:?}"
                    );
                }
                checked += 1;
            }
        }
    }
    assert!(checked >= 20, "{checked}");
}

#[test]
fn mismatch_fires_exactly_when_values_differ() {
    let spec = machines::parity();
    let (h, _) = honest_run(&spec, "11").unwrap();
    let v = build_history_verifier(&HistoryVerifierParams::new(spec.clone(), "11")).unwrap();
    let kind = CheatKind::SymbolMutation {
        block: 2,
        offset: 1,
        replacement: '#',
    };
    let prover = cheating_prover(&spec, kind, &h, None).unwrap();
    assert_eq!(
        validate_history(&spec, "11", &prover.text(), false),
        HistoryVerdict::Mismatch(3)
    );
    let a = analyze_history_protocol(&v, &prover, None).unwrap();
    let mismatch_leaves: Vec<_> = a
        .iteration
        .leaves
        .iter()
        .filter(|l| l.verdict == Verdict::Reject)
        .collect();
    assert!(!mismatch_leaves.is_empty());
    // the honest stream has no mismatch leaves at all
    let honest = analyze_history_protocol(
        &v,
        &honest_history_prover(&spec, "11", false).unwrap(),
        None,
    )
    .unwrap();
    assert!(honest.iteration.p_reject.is_zero());
}

#[test]
fn deterministic_checks_reject_outright() {
    let spec = machines::palindrome();
    let w = "0110";
    let (h, _) = honest_run(&spec, w).unwrap();
    let v = build_history_verifier(&HistoryVerifierParams::new(spec.clone(), w)).unwrap();
    for kind in [
        CheatKind::SeparatorMiscount { block: 1 },
        CheatKind::OverlongConfig { block: 2 },
        CheatKind::Truncated,
        CheatKind::SymbolMutation {
            block: 0,
            offset: 3,
            replacement: '0',
        },
    ] {
        let prover = cheating_prover(&spec, kind, &h, None).unwrap();
        let a = analyze_history_protocol(&v, &prover, None).unwrap();
        assert_eq!(a.overall_reject(), rat(1), "{kind:?}");
        assert!(a.iteration.p_accept.is_zero(), "{kind:?}");
    }
    for kind in [
        CheatKind::WrongHaltType,
        CheatKind::SwappedConfigs { a: 1, b: 2 },
    ] {
        let prover = cheating_prover(&spec, kind, &h, None).unwrap();
        let a = analyze_history_protocol(&v, &prover, None).unwrap();
        assert!(
            a.overall_reject() >= BigRational::new(9.into(), 10.into()),
            "{kind:?}"
        );
    }
}

#[test]
fn endless_stream_hits_the_depth_limit() {
    let spec = machines::parity();
    let (h, _) = honest_run(&spec, "10").unwrap();
    let v = build_history_verifier(&HistoryVerifierParams::new(spec.clone(), "10")).unwrap();
    let prover = cheating_prover(&spec, CheatKind::Endless, &h, None).unwrap();
    let err = analyze_history_protocol(&v, &prover, None).unwrap_err();
    assert!(matches!(err, Error::DepthLimitExceeded(_)));
    let err = analyze_history_protocol(&v, &prover, Some(Limits { max_depth: 50 })).unwrap_err();
    assert_eq!(err, Error::DepthLimitExceeded(50));
}

#[test]
fn coefficient_below_three_is_refused() {
    let params = HistoryVerifierParams::new(machines::parity(), "1").with_coefficient(2);
    assert!(build_history_verifier(&params).is_err());
}

#[test]
fn ntm_honest_labels_accept() {
    let spec = machines::contains_one();
    for w in ["1", "01", "0010", "1000"] {
        let v = build_ntm_history_verifier(&HistoryVerifierParams::new(spec.clone(), w)).unwrap();
        let text = honest_history(&spec, w, true).unwrap();
        assert_eq!(
            validate_history(&spec, w, &text, true),
            HistoryVerdict::Valid { accepted: true }
        );
        let a = analyze_history_protocol(&v, &StreamProver::new(&text), None).unwrap();
        assert_eq!(a.overall_accept(), rat(1), "{w}");
        assert!(a.iteration.p_reject.is_zero());
    }
}

/// Every label sequence over a short run of the machine, including labels
/// the machine does not know.
fn label_sequences(len: usize) -> Vec<Vec<char>> {
    let alphabet = ['a', 'b', '-', 'z'];
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|p: Vec<char>| {
                alphabet.map(|c| {
                    let mut q = p.clone();
                    q.push(c);
                    q
                })
            })
            .collect();
    }
    out
}

#[test]
fn ntm_adversarial_labels_never_accept_non_members() {
    let spec = machines::contains_one();
    for w in ["", "0", "00", "000"] {
        let v = build_ntm_history_verifier(&HistoryVerifierParams::new(spec.clone(), w)).unwrap();
        let (h, honest_labels) = honest_run(&spec, w).unwrap();
        let honest = honest_history(&spec, w, true).unwrap();
        let a = analyze_history_protocol(&v, &StreamProver::new(&honest), None).unwrap();
        assert_eq!(a.overall_reject(), rat(1), "{w:?}");
        for labels in label_sequences(h.len().min(4)) {
            let mut labels = labels;
            labels.extend(honest_labels.iter().skip(labels.len()));
            let text = amqcfa_core::turing::serialize_history(&h, Some(&labels));
            let a = analyze_history_protocol(&v, &StreamProver::new(&text), None).unwrap();
            assert!(a.iteration.p_accept.is_zero(), "{w:?} {labels:?}");
        }
    }
}

#[test]
fn ntm_rejecting_branch_and_bad_labels() {
    let spec = machines::contains_one();
    let w = "010";
    let v = build_ntm_history_verifier(&HistoryVerifierParams::new(spec.clone(), w)).unwrap();
    // a run that keeps moving right never accepts
    let (h, labels) = spec
        .run_with_choices(w, &['b', 'b', 'b', 'b', 'b'], 100)
        .unwrap();
    let text = amqcfa_core::turing::serialize_history(&h, Some(&labels));
    let a = analyze_history_protocol(&v, &StreamProver::new(&text), None).unwrap();
    assert!(a.iteration.p_accept.is_zero());
    // an unknown label rejects before any superoperator
    let a = analyze_history_protocol(&v, &StreamProver::new("z"), None).unwrap();
    assert_eq!(a.iteration.p_reject, rat(1));
}
