use amqcfa_core::exact::rat;
use amqcfa_core::knapsack::{honest_prover, parse_instance, KnapsackVerifier};
use amqcfa_core::machine::{
    chi_square_test, run_exact, run_sampled, sample_step, sample_superoperator, Limits, StepKind,
};
use amqcfa_core::superop::{coin_flip, Denominator};

const SAMPLES: u64 = 100_000;
const ALPHA: f64 = 0.001;
const MEMBER_1: &str = "101;A(1,10)E(100,11)";

#[test]
fn coin_flip_frequencies_match() {
    for d in [2, 3, 5] {
        let coin = coin_flip(4, d).unwrap();
        let s =
            sample_superoperator(&coin, &[rat(1), rat(0), rat(0), rat(0)], 11, SAMPLES).unwrap();
        assert_eq!(s.counts.iter().sum::<u64>(), SAMPLES);
        let chi = chi_square_test(&s.counts, &s.probabilities, ALPHA);
        assert!(chi.passed, "D = {d}: {chi:?}");
    }
}

#[test]
fn decision_step_frequencies_match() {
    let inst = parse_instance(MEMBER_1).unwrap();
    let v = KnapsackVerifier::new(MEMBER_1, Denominator::Auto).unwrap();
    let p = honest_prover(&inst).unwrap();
    let s = sample_step(
        &v,
        &p,
        StepKind::Decision,
        0,
        12,
        SAMPLES,
        Limits::default(),
    )
    .unwrap();
    assert_eq!(s.kind, Some(StepKind::Decision));
    let chi = chi_square_test(&s.counts, &s.probabilities, ALPHA);
    assert!(chi.passed, "{chi:?}");
    let total: amqcfa_core::exact::BigRational = s.probabilities.iter().sum();
    assert_eq!(total, rat(1));
    let accept = &s.probabilities[v.ops().decide.main_indices()[0]];
    assert!(*accept > rat(0));
}

#[test]
fn sampling_is_reproducible() {
    let coin = coin_flip(2, 3).unwrap();
    let a = sample_superoperator(&coin, &[rat(1), rat(0)], 5, 1000).unwrap();
    let b = sample_superoperator(&coin, &[rat(1), rat(0)], 5, 1000).unwrap();
    let c = sample_superoperator(&coin, &[rat(1), rat(0)], 6, 1000).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.counts, c.counts);
}

#[test]
fn full_iterations_match_exact_outcomes() {
    let inst = parse_instance(MEMBER_1).unwrap();
    let v = KnapsackVerifier::new(MEMBER_1, Denominator::Auto).unwrap();
    let p = honest_prover(&inst).unwrap();
    let exact = run_exact(&v, &p, Limits::default()).unwrap();
    let counts = run_sampled(&v, &p, 3, 20_000, Limits::default()).unwrap();
    assert_eq!(counts.accept + counts.reject + counts.restart, 20_000);
    assert_eq!(counts.reject, 0);
    let chi = chi_square_test(
        &[counts.accept, counts.reject, counts.restart],
        &[exact.p_accept, exact.p_reject, exact.p_restart],
        ALPHA,
    );
    assert!(chi.passed, "{chi:?}");
}
