//! Acceptance suite: one line per criterion, nonzero exit on any failure.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use amqcfa_core::compose::{
    analyze_all_strategies, analyze_composed, compose, ProverPair,
    COPIER_NON_MEMBER_WORST_REJECTION,
};
use amqcfa_core::exact::{
    decimal_approx, fraction_string, parse_fraction, rat, ratio, BigRational, RationalMatrix,
};
use amqcfa_core::history::{
    analyze_history_protocol, build_history_verifier, build_ntm_history_verifier, cheating_prover,
    honest_history, honest_history_prover, honest_run, CheatKind, HistoryVerifierParams,
    StreamProver,
};
use amqcfa_core::knapsack::{
    analyze, honest_prover, parse_instance, KnapsackInstance, KnapsackVerifier,
};
use amqcfa_core::machine::{
    chi_square_test, run_exact, sample_step, sample_superoperator, total_outcome,
    truncated_series_check, Controller, IterationAnalysis, Limits, StepKind, Verdict,
};
use amqcfa_core::superop::{coin_flip, complete, encoder_payload, Denominator};
use amqcfa_core::turing::{
    machines, serialize_history, streaming_successor, validate_history, HistoryVerdict, TmSpec,
};
use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MEMBER_1: &str = "101;A(1,10)E(100,11)";
const NON_MEMBER_1: &str = "101;A(1,10)E(100,100)";
const MEMBER_2: &str = "1010;A(1,10)E(100,11)A(1,10)E(100,11)";
const NON_MEMBER_2: &str = "1010;A(1,10)E(100,11)A(1,10)E(100,100)";

/// Analyses checked for mass conservation across the whole suite.
static CONSERVED: AtomicUsize = AtomicUsize::new(0);

fn conserved(a: &IterationAnalysis) {
    assert_eq!(a.total(), rat(1), "p_acc + p_rej + p_restart != 1");
    CONSERVED.fetch_add(1, Ordering::Relaxed);
}

fn pow(base: u64, e: usize) -> BigRational {
    BigRational::from_integer(BigUint::from(base).pow(e as u32).into())
}

fn words(alphabet: &[char], max_len: usize) -> Vec<String> {
    let mut out = vec![String::new()];
    let mut layer = vec![String::new()];
    for _ in 0..max_len {
        layer = layer
            .iter()
            .flat_map(|w| alphabet.iter().map(move |c| format!("{w}{c}")))
            .collect();
        out.extend(layer.iter().cloned());
    }
    out
}

/// Brute-force membership: some answer table indexed by universal prefixes
/// wins against every universal vector.
fn oracle_member(inst: &KnapsackInstance) -> bool {
    let n = inst.n();
    let table_len = (1usize << (n + 1)) - 2;
    (0..1u64 << table_len).any(|table| {
        (0..1usize << n).all(|xs| {
            let mut sum = BigUint::zero();
            for i in 0..n {
                let r = &inst.rounds[i];
                sum += if xs >> (n - 1 - i) & 1 == 1 {
                    &r.b
                } else {
                    &r.a
                };
                let index = (1usize << (i + 1)) - 2 + (xs >> (n - 1 - i));
                sum += if table >> (table_len - 1 - index) & 1 == 1 {
                    &r.f
                } else {
                    &r.e
                };
            }
            sum == inst.s
        })
    })
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

type Outcome = Result<String, String>;

fn superoperator_validity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for trial in 0..100 {
        let dim = rng.random_range(1..=4);
        let count = rng.random_range(1..=3);
        let mains: Vec<RationalMatrix> = (0..count)
            .map(|_| {
                let mut m = RationalMatrix::zeros(dim, dim);
                for i in 0..dim {
                    for j in 0..dim {
                        m[(i, j)] = ratio(rng.random_range(-4..=4), rng.random_range(1..=3));
                    }
                }
                m
            })
            .collect();
        let s = complete(&mains, Denominator::Auto).map_err(|e| format!("trial {trial}: {e}"))?;
        let mut sum = RationalMatrix::zeros(dim, dim);
        for e in s.elements() {
            sum = &sum + &(&e.transpose() * &e);
        }
        ensure(sum == RationalMatrix::identity(dim), || {
            format!("trial {trial}: Σ EᵀE != I")
        })?;
    }
    Ok("100 random completions, Σ EᵀE = I exactly".into())
}

fn encoding_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for trial in 0..500 {
        let m: u64 = rng.random_range(2..=5);
        let len = rng.random_range(0..=12);
        let digits: Vec<u64> = (0..len).map(|_| rng.random_range(0..m)).collect();
        let mut state = vec![rat(1), rat(0)];
        for &k in &digits {
            state = encoder_payload(k, m, (0, 1), 2)
                .and_then(|p| p.mul_vec(&state))
                .map_err(|e| e.to_string())?;
            ensure(state[0] == rat(1), || {
                format!("trial {trial}: first coordinate {}", state[0])
            })?;
        }
        let value = digits.iter().fold(BigInt::zero(), |acc, &k| acc * m + k);
        ensure(state[1] == BigRational::from_integer(value), || {
            format!("trial {trial}: wrong value")
        })?;
    }
    Ok("500 random strings encode to (1, value)".into())
}

fn knapsack_completeness() -> Outcome {
    for text in [MEMBER_1, MEMBER_2] {
        let inst = parse_instance(text).map_err(|e| e.to_string())?;
        ensure(oracle_member(&inst), || {
            format!("{text}: oracle says non-member")
        })?;
        let n = inst.n();
        let v = KnapsackVerifier::new(text, Denominator::Auto).map_err(|e| e.to_string())?;
        let l = v.tape().len();
        let a = run_exact(
            &v,
            &honest_prover(&inst).map_err(|e| e.to_string())?,
            Limits::default(),
        )
        .map_err(|e| e.to_string())?;
        conserved(&a);
        ensure(a.p_reject.is_zero(), || {
            format!("{text}: p_reject = {}", a.p_reject)
        })?;
        ensure(total_outcome(&a).overall_accept == Some(rat(1)), || {
            format!("{text}: overall accept != 1")
        })?;
        let leaf = pow(v.denominator(), 2 * l).recip() * pow(16, n).recip();
        ensure(a.leaves.len() == 1 << n, || {
            format!("{text}: {} leaves", a.leaves.len())
        })?;
        for lf in &a.leaves {
            ensure(
                lf.verdict == Verdict::Accept && lf.probability == leaf,
                || format!("{text}: leaf {}", lf.probability),
            )?;
        }
    }
    Ok("n = 1, 2 members: p_reject = 0, accept = 1, leaf = D^-2l 16^-n".into())
}

fn knapsack_soundness() -> Outcome {
    let mut worst_all = BigRational::one();
    for text in [NON_MEMBER_1, NON_MEMBER_2] {
        let inst = parse_instance(text).map_err(|e| e.to_string())?;
        ensure(!oracle_member(&inst), || {
            format!("{text}: oracle says member")
        })?;
        let n = inst.n();
        let report = analyze(&inst, Denominator::Auto, true, 2, Limits::default())
            .map_err(|e| e.to_string())?;
        let expect = if n == 1 { 4 } else { 64 };
        ensure(report.strategies.len() == expect, || {
            format!("{text}: {} strategies", report.strategies.len())
        })?;
        let bound = pow(8, n);
        for s in &report.strategies {
            conserved(&s.iteration);
            ensure(
                s.iteration.p_reject >= &bound * &s.iteration.p_accept,
                || format!("{text}: ratio below 8^n"),
            )?;
        }
        let worst = report.worst_case_rejection();
        ensure(worst >= &bound / (&bound + rat(1)), || {
            format!("{text}: worst {}", fraction_string(&worst))
        })?;
        ensure(worst > ratio(888, 1000), || {
            format!("{text}: worst {}", fraction_string(&worst))
        })?;
        worst_all = worst_all.min(worst);
    }
    Ok(format!(
        "4 + 64 strategies, worst rejection {}",
        decimal_approx(&worst_all, 6)
    ))
}

fn history_params(spec: &TmSpec, w: &str, c: u64) -> HistoryVerifierParams {
    HistoryVerifierParams::new(spec.clone(), w).with_coefficient(c)
}

fn fact1() -> Outcome {
    let deciders = [
        ("parity", machines::parity()),
        ("palindrome", machines::palindrome()),
    ];
    let mut honest = 0;
    for (name, spec) in &deciders {
        for w in words(&['0', '1'], 4) {
            let v =
                build_history_verifier(&history_params(spec, &w, 3)).map_err(|e| e.to_string())?;
            let (h, _) = honest_run(spec, &w).map_err(|e| e.to_string())?;
            let accepted = spec.is_accepting(h.last().expect("nonempty").state());
            let p = honest_history_prover(spec, &w, false).map_err(|e| e.to_string())?;
            let a = analyze_history_protocol(&v, &p, None).map_err(|e| e.to_string())?;
            conserved(&a.iteration);
            let expect = if accepted {
                a.overall_accept()
            } else {
                a.overall_reject()
            };
            ensure(expect == rat(1), || {
                format!("{name} on {w:?}: decision probability {expect}")
            })?;
            honest += 1;
        }
    }
    let mut mutated = 0;
    for (name, spec) in &deciders {
        for w in ["10", "011"] {
            let (h, _) = honest_run(spec, w).map_err(|e| e.to_string())?;
            let mut alphabet: Vec<char> = spec.tape_alphabet().to_vec();
            alphabet.extend(spec.states());
            for block in 1..h.len() {
                for offset in 0..h[block].len() {
                    for &r in &alphabet {
                        if r == h[block].symbols()[offset] {
                            continue;
                        }
                        let kind = CheatKind::SymbolMutation {
                            block,
                            offset,
                            replacement: r,
                        };
                        let p = cheating_prover(spec, kind, &h, None).map_err(|e| e.to_string())?;
                        for (c, num, den) in [(3, 9, 10), (5, 25, 26)] {
                            let v = build_history_verifier(&history_params(spec, w, c))
                                .map_err(|e| e.to_string())?;
                            let a = analyze_history_protocol(&v, &p, None)
                                .map_err(|e| e.to_string())?;
                            conserved(&a.iteration);
                            ensure(a.overall_reject() >= ratio(num, den), || {
                                format!(
                                    "{name} {w:?} {kind:?} c={c}: {}",
                                    fraction_string(&a.overall_reject())
                                )
                            })?;
                        }
                        mutated += 1;
                    }
                }
            }
        }
    }
    ensure(mutated >= 20, || format!("only {mutated} mutations"))?;
    Ok(format!("{honest} honest histories decide exactly; {mutated} mutations reject >= 9/10 (c=3), >= 25/26 (c=5)"))
}

fn fact2() -> Outcome {
    let spec = machines::contains_one();
    for w in ["1", "01", "0010", "1000"] {
        let v =
            build_ntm_history_verifier(&history_params(&spec, w, 3)).map_err(|e| e.to_string())?;
        let p = honest_history_prover(&spec, w, true).map_err(|e| e.to_string())?;
        let a = analyze_history_protocol(&v, &p, None).map_err(|e| e.to_string())?;
        conserved(&a.iteration);
        ensure(a.overall_accept() == rat(1), || {
            format!("{w}: accept {}", a.overall_accept())
        })?;
    }
    let mut adversarial = 0;
    for w in ["", "0", "00", "000"] {
        let v =
            build_ntm_history_verifier(&history_params(&spec, w, 3)).map_err(|e| e.to_string())?;
        let (h, honest_labels) = honest_run(&spec, w).map_err(|e| e.to_string())?;
        for labels in words(&['a', 'b', '-', 'z'], h.len().min(4)) {
            let mut labels: Vec<char> = labels.chars().collect();
            labels.extend(honest_labels.iter().skip(labels.len()));
            let text = serialize_history(&h, Some(&labels));
            let a = analyze_history_protocol(&v, &StreamProver::new(&text), None)
                .map_err(|e| e.to_string())?;
            conserved(&a.iteration);
            ensure(a.iteration.p_accept.is_zero(), || {
                format!("{w:?} {labels:?}: accepted")
            })?;
            adversarial += 1;
        }
    }
    Ok(format!(
        "honest labels accept exactly; {adversarial} adversarial label streams never accept"
    ))
}

fn composition() -> Outcome {
    let copier = machines::copier();
    let v = compose(&copier, MEMBER_1, 3, Denominator::Auto).map_err(|e| e.to_string())?;
    let mut bits = honest_prover(&parse_instance(MEMBER_1).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    bits.register = 1;
    let history = honest_history_prover(&copier, MEMBER_1, false).map_err(|e| e.to_string())?;
    let a = analyze_composed(&v, &ProverPair { history, bits }, None).map_err(|e| e.to_string())?;
    conserved(&a.iteration);
    ensure(a.iteration.p_reject.is_zero(), || {
        "member: p_reject != 0".into()
    })?;
    ensure(a.overall_accept() == rat(1), || {
        format!("member: accept {}", a.overall_accept())
    })?;

    let v = compose(&copier, NON_MEMBER_1, 3, Denominator::Auto).map_err(|e| e.to_string())?;
    let history = honest_history_prover(&copier, NON_MEMBER_1, false).map_err(|e| e.to_string())?;
    let report = analyze_all_strategies(&v, &history, None, None).map_err(|e| e.to_string())?;
    for s in &report.strategies {
        conserved(&s.iteration);
    }
    let worst = report.worst_case_rejection();
    ensure(worst > ratio(4, 5), || {
        format!("worst {}", fraction_string(&worst))
    })?;
    let frozen = parse_fraction(COPIER_NON_MEMBER_WORST_REJECTION).expect("fraction constant");
    ensure(worst == frozen, || {
        format!(
            "worst {} != frozen {}",
            fraction_string(&worst),
            COPIER_NON_MEMBER_WORST_REJECTION
        )
    })?;
    Ok(format!(
        "member accepted exactly; non-member worst rejection {} (frozen)",
        fraction_string(&worst)
    ))
}

fn arithmetization() -> Outcome {
    let mut checked = 0;
    for (name, spec) in machines::all() {
        let inputs = if name == "copier" {
            let mut v = words(&['0', '1', ';'], 3);
            v.extend([
                MEMBER_1.to_string(),
                NON_MEMBER_1.to_string(),
                "0;A(0,0)E(0,0)".to_string(),
            ]);
            v
        } else {
            words(spec.input_alphabet(), 4)
        };
        for w in inputs {
            for c in spec.reachable(&w, 50).map_err(|e| e.to_string())? {
                if spec.is_halting(c.state()) {
                    continue;
                }
                let rules = spec.rules(c.state(), c.scanned());
                let choices: Vec<Option<char>> = if rules.len() > 1 {
                    rules.iter().map(|r| r.choice).collect()
                } else {
                    vec![None]
                };
                for choice in choices {
                    let next = spec
                        .next_config(&c, choice)
                        .map_err(|e| e.to_string())?
                        .expect("successor");
                    let streamed = streaming_successor(&spec, c.symbols(), choice)
                        .map_err(|e| e.to_string())?;
                    ensure(streamed == next.symbols(), || {
                        format!("{name}: stream differs on {c}")
                    })?;
                    let (a, b) = (c.symbols(), next.symbols());
                    ensure(a.len().abs_diff(b.len()) <= 1, || {
                        format!("{name}: length jump on {c}")
                    })?;
                    let prefix = a.iter().zip(b).take_while(|(x, y)| x == y).count();
                    let room = a.len().min(b.len()) - prefix;
                    let suffix = a
                        .iter()
                        .rev()
                        .zip(b.iter().rev())
                        .take(room)
                        .take_while(|(x, y)| x == y)
                        .count();
                    ensure(
                        a.len() - prefix - suffix <= 3 && b.len() - prefix - suffix <= 3,
                        || format!("{name}: change wider than 3 on {c}"),
                    )?;
                    checked += 1;
                }
            }
        }
    }
    Ok(format!(
        "{checked} reachable configurations: stream = next_config, |Δ| <= 1, window <= 3"
    ))
}

fn plumbing() -> Outcome {
    // truncated series against the closed form
    let inst = parse_instance(MEMBER_1).map_err(|e| e.to_string())?;
    let v = KnapsackVerifier::new(MEMBER_1, Denominator::Auto).map_err(|e| e.to_string())?;
    let a = run_exact(
        &v,
        &honest_prover(&inst).map_err(|e| e.to_string())?,
        Limits::default(),
    )
    .map_err(|e| e.to_string())?;
    conserved(&a);
    let overall = total_outcome(&a).overall_accept.expect("decides");
    for n in [1, 5, 20, 50] {
        let partial = truncated_series_check(&a, n);
        ensure(
            &overall - &partial == &overall * a.p_restart.pow(n as i32),
            || format!("series N = {n}"),
        )?;
        ensure(&overall - &partial <= a.p_restart.pow(n as i32), || {
            format!("series bound N = {n}")
        })?;
    }
    // expected iterations of valid histories
    let mut valid = 0;
    for spec in [machines::parity(), machines::palindrome()] {
        for w in words(&['0', '1'], 3) {
            let text = honest_history(&spec, &w, false).map_err(|e| e.to_string())?;
            ensure(
                matches!(
                    validate_history(&spec, &w, &text, false),
                    HistoryVerdict::Valid { .. }
                ),
                || "invalid honest history".into(),
            )?;
            let hv =
                build_history_verifier(&history_params(&spec, &w, 3)).map_err(|e| e.to_string())?;
            let a = analyze_history_protocol(&hv, &StreamProver::new(&text), None)
                .map_err(|e| e.to_string())?;
            conserved(&a.iteration);
            let l = text.chars().count() - 1;
            ensure(
                a.outcome.expected_iterations == Some(pow(hv.denominator(), 2 * l)),
                || format!("expected iterations on {w:?}"),
            )?;
            ensure(
                a.iteration.p_restart == rat(1) - pow(hv.denominator(), 2 * l).recip(),
                || format!("p_restart on {w:?}"),
            )?;
            valid += 1;
        }
    }
    Ok(format!(
        "{} analyses conserve mass; series within p_restart^N; E[iterations] = D^2l on {valid} histories",
        CONSERVED.load(Ordering::Relaxed)
    ))
}

fn sampling() -> Outcome {
    const SAMPLES: u64 = 100_000;
    let coin = coin_flip(4, 3).map_err(|e| e.to_string())?;
    let s = sample_superoperator(&coin, &[rat(1), rat(0), rat(0), rat(0)], 2024, SAMPLES)
        .map_err(|e| e.to_string())?;
    let chi_coin = chi_square_test(&s.counts, &s.probabilities, 0.001);
    ensure(chi_coin.passed, || format!("coin: {chi_coin:?}"))?;
    let inst = parse_instance(MEMBER_1).map_err(|e| e.to_string())?;
    let v = KnapsackVerifier::new(MEMBER_1, Denominator::Auto).map_err(|e| e.to_string())?;
    let p = honest_prover(&inst).map_err(|e| e.to_string())?;
    let s = sample_step(
        &v,
        &p,
        StepKind::Decision,
        0,
        2025,
        SAMPLES,
        Limits::default(),
    )
    .map_err(|e| e.to_string())?;
    let chi_dec = chi_square_test(&s.counts, &s.probabilities, 0.001);
    ensure(chi_dec.passed, || format!("decision: {chi_dec:?}"))?;
    Ok(format!(
        "10^5 samples: coin p = {:.3}, $-decision p = {:.3}",
        chi_coin.p_value, chi_dec.p_value
    ))
}

type Criterion = (&'static str, Duration, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        (
            "superoperator validity",
            Duration::from_secs(30),
            superoperator_validity,
        ),
        (
            "encoding correctness",
            Duration::from_secs(10),
            encoding_correctness,
        ),
        (
            "knapsack completeness",
            Duration::from_secs(60),
            knapsack_completeness,
        ),
        (
            "knapsack soundness",
            Duration::from_secs(300),
            knapsack_soundness,
        ),
        ("DTM history protocol", Duration::from_secs(300), fact1),
        ("NTM history protocol", Duration::MAX, fact2),
        ("composition", Duration::MAX, composition),
        (
            "configuration arithmetization",
            Duration::from_secs(60),
            arithmetization,
        ),
        ("probability plumbing", Duration::MAX, plumbing),
        ("sampling cross-check", Duration::MAX, sampling),
    ];
    let mut failed = 0;
    for (i, (name, limit, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(msg)
        });
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(_) if elapsed > *limit => Err(format!("took {elapsed:.1?}, limit {limit:?}")),
            o => o,
        };
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d.clone()),
            Err(d) => {
                failed += 1;
                ("FAIL", d.clone())
            }
        };
        println!(
            "[{tag}] criterion {:>2} {name}: {detail} ({elapsed:.2?})",
            i + 1
        );
    }
    if failed > 0 {
        println!("{failed} of 10 criteria failed");
        std::process::exit(1);
    }
    println!("all 10 criteria passed");
}
