//! The alternating knapsack game and its verifier.
//!
//! An instance `S;A(a₁,b₁)E(e₁,f₁)A(a₂,b₂)E(e₂,f₂)…` is a member when the
//! existential player can answer every universal choice `xᵢ ∈ {aᵢ,bᵢ}` with
//! `yᵢ ∈ {eᵢ,fᵢ}`, knowing `x₁..xᵢ`, so that `S = Σ (xᵢ + yᵢ)`. Numbers are
//! written in binary.

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::exact::{rat, ratio, BigRational, RationalMatrix};
use crate::machine::{
    run_exact, total_outcome, Action, ChannelEvent, Controller, IterationAnalysis, Limits, Prover,
    StepKind, Transition, Verdict, VerdictDistribution,
};
use crate::superop::{
    coin_flip, complete, encoder_payload, identity_sop, Denominator, Superoperator,
};

/// Symbol the verifier writes when it asks for an existential bit.
pub const BIT_REQUEST: char = '?';

/// Register dimension: `q₁` constant, `q₂` running difference, `q₃` current
/// number, `q₄` decision weight.
pub const DIM: usize = 4;

/// Default limit for exhaustive strategy enumeration.
pub const STRATEGY_CAP: usize = 2;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Round {
    pub a: BigUint,
    pub b: BigUint,
    pub e: BigUint,
    pub f: BigUint,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KnapsackInstance {
    pub s: BigUint,
    pub rounds: Vec<Round>,
    text: String,
}

impl KnapsackInstance {
    pub fn n(&self) -> usize {
        self.rounds.len()
    }

    /// The instance exactly as written, leading zeros included.
    pub fn text(&self) -> &str {
        &self.text
    }
}

/// Position of one tape symbol in the instance grammar.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    /// Digit of `S`.
    Target(u8),
    /// Punctuation: `;`, `(` and `,`.
    Punctuation,
    /// `A`: the universal choice.
    Universal,
    /// `E`: the existential choice.
    Existential,
    /// Digit of the first (`first == true`) or second number of a pair.
    Digit { first: bool, digit: u8 },
    /// `)`: subtract the chosen number.
    Close,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Expect {
    TargetFirst,
    Target,
    Universal,
    Existential,
    Open(bool),
    FirstNumber(bool, bool),
    SecondNumber(bool, bool),
    AfterRound,
}

/// Incremental recognizer of the instance grammar
/// `BIN ; ( A(BIN,BIN) E(BIN,BIN) )+`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Grammar {
    expect: Expect,
    position: usize,
}

impl Default for Grammar {
    fn default() -> Self {
        Self::new()
    }
}

impl Grammar {
    pub fn new() -> Self {
        Self {
            expect: Expect::TargetFirst,
            position: 0,
        }
    }

    fn error(&self, message: &str) -> Error {
        Error::Syntax {
            position: self.position,
            message: message.to_string(),
        }
    }

    pub fn feed(&mut self, c: char) -> Result<Role> {
        use Expect::*;
        let digit = match c {
            '0' => Some(0u8),
            '1' => Some(1u8),
            _ => None,
        };
        let (role, next) = match (self.expect, c, digit) {
            (TargetFirst | Target, _, Some(d)) => (Role::Target(d), Target),
            (Target, ';', _) => (Role::Punctuation, Universal),
            (Universal | AfterRound, 'A', _) => (Role::Universal, Open(true)),
            (Existential, 'E', _) => (Role::Existential, Open(false)),
            (Open(u), '(', _) => (Role::Punctuation, FirstNumber(u, false)),
            (FirstNumber(u, _), _, Some(d)) => (
                Role::Digit {
                    first: true,
                    digit: d,
                },
                FirstNumber(u, true),
            ),
            (FirstNumber(u, true), ',', _) => (Role::Punctuation, SecondNumber(u, false)),
            (SecondNumber(u, _), _, Some(d)) => (
                Role::Digit {
                    first: false,
                    digit: d,
                },
                SecondNumber(u, true),
            ),
            (SecondNumber(u, true), ')', _) => {
                (Role::Close, if u { Existential } else { AfterRound })
            }
            _ => return Err(self.error(&format!("unexpected {c:?}"))),
        };
        self.expect = next;
        self.position += 1;
        Ok(role)
    }

    /// Checks that the input may end here.
    pub fn finish(&self) -> Result<()> {
        if self.expect == Expect::AfterRound {
            Ok(())
        } else {
            Err(self.error("incomplete instance"))
        }
    }
}

fn binary(digits: &str) -> BigUint {
    digits.bytes().fold(BigUint::zero(), |acc, b| {
        (acc << 1u32) + BigUint::from(b - b'0')
    })
}

pub fn parse_instance(text: &str) -> Result<KnapsackInstance> {
    let text = text.trim();
    let mut g = Grammar::new();
    for c in text.chars() {
        g.feed(c)?;
    }
    g.finish()?;
    let (s, rest) = text.split_once(';').expect("grammar checked");
    let mut rounds = Vec::new();
    let numbers: Vec<BigUint> = rest
        .split(|c: char| !c.is_ascii_digit())
        .filter(|p| !p.is_empty())
        .map(binary)
        .collect();
    for q in numbers.chunks(4) {
        rounds.push(Round {
            a: q[0].clone(),
            b: q[1].clone(),
            e: q[2].clone(),
            f: q[3].clone(),
        });
    }
    Ok(KnapsackInstance {
        s: binary(s),
        rounds,
        text: text.to_string(),
    })
}

/// Brute-force game evaluation.
pub fn is_member(inst: &KnapsackInstance) -> bool {
    fn wins(inst: &KnapsackInstance, i: usize, sum: &BigUint) -> bool {
        if i == inst.n() {
            return *sum == inst.s;
        }
        let r = &inst.rounds[i];
        [&r.a, &r.b].iter().all(|x| {
            [&r.e, &r.f]
                .iter()
                .any(|y| wins(inst, i + 1, &(sum + *x + *y)))
        })
    }
    wins(inst, 0, &BigUint::zero())
}

/// The existential player's answers: one bit (`false` picks `eᵢ`) for every
/// universal prefix `x₁..xᵢ` (`false` picks `aᵢ`).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ProverStrategy {
    n: usize,
    bits: Vec<bool>,
}

fn prefix_index(prefix: &[bool]) -> usize {
    let len = prefix.len();
    let value = prefix
        .iter()
        .fold(0usize, |acc, &b| acc * 2 + usize::from(b));
    (1usize << len) - 2 + value
}

impl ProverStrategy {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Answer after the universal choices `prefix` (length 1..=n).
    pub fn answer(&self, prefix: &[bool]) -> bool {
        self.bits[prefix_index(prefix)]
    }

    /// Compact rendering: the answer bits in prefix order.
    pub fn code(&self) -> String {
        self.bits
            .iter()
            .map(|&b| if b { '1' } else { '0' })
            .collect()
    }

    fn table_len(n: usize) -> usize {
        (1usize << (n + 1)) - 2
    }
}

fn prefixes(len: usize) -> impl Iterator<Item = Vec<bool>> {
    (0..1usize << len).map(move |v| (0..len).rev().map(|i| v >> i & 1 == 1).collect())
}

/// Every total strategy, in lexicographic order of [`ProverStrategy::code`].
pub fn enumerate_strategies(inst: &KnapsackInstance, cap: usize) -> Result<Vec<ProverStrategy>> {
    let n = inst.n();
    if n > cap {
        return Err(Error::CapExceeded { n, cap });
    }
    let len = ProverStrategy::table_len(n);
    Ok((0..1u64 << len)
        .map(|v| ProverStrategy {
            n,
            bits: (0..len).rev().map(|i| v >> i & 1 == 1).collect(),
        })
        .collect())
}

/// A winning strategy if one exists; otherwise each answer still keeps a win
/// reachable where possible and defaults to `eᵢ`.
pub fn best_effort_strategy(inst: &KnapsackInstance) -> ProverStrategy {
    fn wins_from(inst: &KnapsackInstance, i: usize, sum: &BigUint) -> bool {
        if i == inst.n() {
            return *sum == inst.s;
        }
        let r = &inst.rounds[i];
        [&r.a, &r.b].iter().all(|x| {
            [&r.e, &r.f]
                .iter()
                .any(|y| wins_from(inst, i + 1, &(sum + *x + *y)))
        })
    }
    let n = inst.n();
    let mut bits = vec![false; ProverStrategy::table_len(n)];
    for len in 1..=n {
        for prefix in prefixes(len) {
            let mut sum = BigUint::zero();
            for (i, &x) in prefix.iter().enumerate() {
                let r = &inst.rounds[i];
                sum += if x { &r.b } else { &r.a };
                if i + 1 < len {
                    sum += if bits[prefix_index(&prefix[..=i])] {
                        &r.f
                    } else {
                        &r.e
                    };
                }
            }
            let r = &inst.rounds[len - 1];
            let pick_f =
                !wins_from(inst, len, &(&sum + &r.e)) && wins_from(inst, len, &(&sum + &r.f));
            bits[prefix_index(&prefix)] = pick_f;
        }
    }
    ProverStrategy { n, bits }
}

/// Plays `strategy`, reading the universal choices from the published coin
/// outcomes of the transcript.
#[derive(Clone, Debug)]
pub struct StrategyProver {
    pub strategy: ProverStrategy,
    /// Register whose coin outcomes are the universal choices.
    pub register: usize,
}

impl StrategyProver {
    pub fn new(strategy: ProverStrategy) -> Self {
        Self {
            strategy,
            register: 0,
        }
    }
}

/// Universal choices published so far on `register`.
pub fn coin_prefix(transcript: &[ChannelEvent], register: usize) -> Vec<bool> {
    transcript
        .iter()
        .filter_map(|e| match e {
            ChannelEvent::Outcome(p) => Some(p),
            _ => None,
        })
        .flatten()
        .filter(|p| p.kind == StepKind::Coin && p.register == register)
        .map(|p| p.index == 1)
        .collect()
}

impl Prover for StrategyProver {
    fn respond(&self, transcript: &[ChannelEvent]) -> char {
        let prefix = coin_prefix(transcript, self.register);
        if prefix.is_empty() || prefix.len() > self.strategy.n() {
            return '0';
        }
        if self.strategy.answer(&prefix) {
            '1'
        } else {
            '0'
        }
    }
}

pub fn honest_prover(inst: &KnapsackInstance) -> Result<StrategyProver> {
    if !is_member(inst) {
        return Err(Error::NotAMember);
    }
    Ok(StrategyProver::new(best_effort_strategy(inst)))
}

/// The superoperators used by the verifier, all with the same denominator.
#[derive(Clone, Debug)]
pub struct KnapsackOps {
    pub denominator: u64,
    pub prepare: Superoperator,
    pub target: [Superoperator; 2],
    pub chosen: [Superoperator; 2],
    pub identity: Superoperator,
    pub coin: Superoperator,
    pub close: Superoperator,
    pub decide: Superoperator,
}

impl KnapsackOps {
    /// `(1,0,0,0) ↦ (1,0,0,1)`.
    pub fn prepare_payload() -> RationalMatrix {
        let mut p = RationalMatrix::zeros(DIM, DIM);
        p[(0, 0)] = rat(1);
        p[(3, 0)] = rat(1);
        p
    }

    /// `(1,s,v,h) ↦ (1, s−v, 0, h/2)`.
    pub fn close_payload() -> RationalMatrix {
        let mut p = RationalMatrix::zeros(DIM, DIM);
        p[(0, 0)] = rat(1);
        p[(1, 1)] = rat(1);
        p[(1, 2)] = rat(-1);
        p[(3, 3)] = ratio(1, 2);
        p
    }

    /// Accept reads `q₄`, reject reads `q₂`.
    pub fn decision_payloads() -> [RationalMatrix; 2] {
        let mut accept = RationalMatrix::zeros(DIM, DIM);
        accept[(3, 3)] = rat(1);
        let mut reject = RationalMatrix::zeros(DIM, DIM);
        reject[(1, 1)] = rat(1);
        [accept, reject]
    }

    /// Smallest denominator admitting every payload and the coin.
    pub fn minimal_denominator() -> Result<u64> {
        let mut d = 2; // a coin needs at least two outcomes
        let mut all: Vec<Vec<RationalMatrix>> = vec![
            vec![Self::prepare_payload()],
            vec![Self::close_payload()],
            Self::decision_payloads().to_vec(),
        ];
        for k in 0..2 {
            all.push(vec![encoder_payload(k, 2, (0, 1), DIM)?]);
            all.push(vec![encoder_payload(k, 2, (0, 2), DIM)?]);
        }
        for mains in &all {
            d = d.max(crate::superop::minimal_denominator(mains)?);
        }
        Ok(d)
    }

    pub fn new(denominator: Denominator) -> Result<Self> {
        let d = match denominator {
            Denominator::Auto => Self::minimal_denominator()?,
            Denominator::Fixed(d) => d,
        };
        let fixed = Denominator::Fixed(d);
        let enc = |k, target| -> Result<Superoperator> {
            complete(&[encoder_payload(k, 2, target, DIM)?], fixed)
        };
        Ok(Self {
            denominator: d,
            prepare: complete(&[Self::prepare_payload()], fixed)?,
            target: [enc(0, (0, 1))?, enc(1, (0, 1))?],
            chosen: [enc(0, (0, 2))?, enc(1, (0, 2))?],
            identity: identity_sop(DIM, d)?,
            coin: coin_flip(DIM, d)?,
            close: complete(&[Self::close_payload()], fixed)?,
            decide: complete(&Self::decision_payloads(), fixed)?,
        })
    }

    pub fn all(&self) -> Vec<&Superoperator> {
        vec![
            &self.prepare,
            &self.target[0],
            &self.target[1],
            &self.chosen[0],
            &self.chosen[1],
            &self.identity,
            &self.coin,
            &self.close,
            &self.decide,
        ]
    }
}

/// Per-iteration classical state of the knapsack reader, shared with the
/// composed verifier.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ReaderState {
    /// Which number of the current pair is chosen (`true`: the first).
    pub first_chosen: bool,
    /// The prover has answered for the current `E`.
    pub answered: bool,
}

impl ReaderState {
    pub fn step<'a>(&self, ops: &'a KnapsackOps, role: Role) -> (&'a Superoperator, StepKind) {
        match role {
            Role::Target(d) => (&ops.target[d as usize], StepKind::Encode),
            Role::Punctuation | Role::Existential => (&ops.identity, StepKind::Identity),
            Role::Universal => (&ops.coin, StepKind::Coin),
            Role::Digit { first, digit } => {
                if first == self.first_chosen {
                    (&ops.chosen[digit as usize], StepKind::Encode)
                } else {
                    (&ops.identity, StepKind::Identity)
                }
            }
            Role::Close => (&ops.close, StepKind::Subtract),
        }
    }

    /// State after a main outcome of the step for `role`.
    pub fn after(&self, role: Role, main: usize) -> Self {
        let mut next = *self;
        match role {
            Role::Universal => next.first_chosen = main == 0,
            Role::Existential => next.answered = false,
            _ => {}
        }
        next
    }

    /// Records the prover's bit; `None` for a malformed answer.
    pub fn answer(&self, symbol: char) -> Option<Self> {
        let first_chosen = match symbol {
            '0' => true,
            '1' => false,
            _ => return None,
        };
        Some(Self {
            first_chosen,
            answered: true,
        })
    }
}

/// Verifier for one instance written on the tape as `¢ text $`.
#[derive(Clone, Debug)]
pub struct KnapsackVerifier {
    tape: Vec<char>,
    roles: Option<Vec<Role>>,
    ops: KnapsackOps,
}

impl KnapsackVerifier {
    /// A malformed instance gives a verifier that rejects at once.
    pub fn new(text: &str, denominator: Denominator) -> Result<Self> {
        let mut tape = vec!['¢'];
        tape.extend(text.chars());
        tape.push('$');
        let mut g = Grammar::new();
        let roles: Result<Vec<Role>> = text.chars().map(|c| g.feed(c)).collect();
        let roles = roles.and_then(|r| g.finish().map(|_| r)).ok();
        Ok(Self {
            tape,
            roles,
            ops: KnapsackOps::new(denominator)?,
        })
    }

    pub fn ops(&self) -> &KnapsackOps {
        &self.ops
    }

    pub fn denominator(&self) -> u64 {
        self.ops.denominator
    }

    pub fn is_well_formed(&self) -> bool {
        self.roles.is_some()
    }
}

impl Controller for KnapsackVerifier {
    type Memory = ReaderState;

    fn tape(&self) -> &[char] {
        &self.tape
    }

    fn initial_registers(&self) -> Vec<Vec<BigRational>> {
        vec![vec![rat(1), rat(0), rat(0), rat(0)]]
    }

    fn initial_memory(&self) -> ReaderState {
        ReaderState::default()
    }

    fn action<'a>(&'a self, mem: &ReaderState, head: usize) -> Action<'a> {
        let roles = match &self.roles {
            Some(r) => r,
            None => return Action::Decide(Verdict::Reject),
        };
        if head == 0 {
            return Action::Read(vec![(0, &self.ops.prepare, StepKind::Prepare)]);
        }
        if head == self.tape.len() - 1 {
            return Action::Read(vec![(0, &self.ops.decide, StepKind::Decision)]);
        }
        let role = roles[head - 1];
        if role == Role::Existential && !mem.answered {
            return Action::Communicate(BIT_REQUEST);
        }
        let (sop, kind) = mem.step(&self.ops, role);
        Action::Read(vec![(0, sop, kind)])
    }

    fn on_response(&self, mem: &ReaderState, _: usize, symbol: char) -> Transition<ReaderState> {
        match mem.answer(symbol) {
            Some(next) => Transition::go(next, 0),
            None => Transition::stop(*mem, Verdict::Reject),
        }
    }

    fn on_outcome(
        &self,
        mem: &ReaderState,
        head: usize,
        mains: &[usize],
    ) -> Transition<ReaderState> {
        if head == 0 {
            return Transition::go(*mem, 1);
        }
        if head == self.tape.len() - 1 {
            let verdict = if mains[0] == 0 {
                Verdict::Accept
            } else {
                Verdict::Reject
            };
            return Transition::stop(*mem, verdict);
        }
        let role = self.roles.as_ref().expect("checked in action")[head - 1];
        Transition::go(mem.after(role, mains[0]), 1)
    }
}

/// Exact analysis of one prover strategy.
#[derive(Clone, Debug)]
pub struct StrategyAnalysis {
    pub strategy: Option<ProverStrategy>,
    pub iteration: IterationAnalysis,
    pub outcome: VerdictDistribution,
}

impl StrategyAnalysis {
    pub fn overall_reject(&self) -> BigRational {
        self.outcome
            .overall_reject
            .clone()
            .unwrap_or_else(BigRational::zero)
    }
}

#[derive(Clone, Debug)]
pub struct KnapsackAnalysis {
    pub instance: KnapsackInstance,
    pub member: bool,
    pub denominator: u64,
    pub steps: usize,
    pub strategies: Vec<StrategyAnalysis>,
}

impl KnapsackAnalysis {
    /// Smallest overall rejection over the analysed strategies.
    pub fn worst_case_rejection(&self) -> BigRational {
        self.strategies
            .iter()
            .map(StrategyAnalysis::overall_reject)
            .min()
            .unwrap_or_else(BigRational::one)
    }

    /// Smallest `p_reject / p_accept` over the strategies with accept mass.
    pub fn min_reject_accept_ratio(&self) -> Option<BigRational> {
        self.strategies
            .iter()
            .filter(|s| !s.iteration.p_accept.is_zero())
            .map(|s| &s.iteration.p_reject / &s.iteration.p_accept)
            .min()
    }
}

pub fn analyze_strategy(
    verifier: &KnapsackVerifier,
    strategy: &ProverStrategy,
    limits: Limits,
) -> Result<StrategyAnalysis> {
    let prover = StrategyProver::new(strategy.clone());
    let iteration = run_exact(verifier, &prover, limits)?;
    let outcome = total_outcome(&iteration);
    Ok(StrategyAnalysis {
        strategy: Some(strategy.clone()),
        iteration,
        outcome,
    })
}

/// With `all_strategies`, every strategy up to `cap` rounds; otherwise the
/// honest strategy for members and the best-effort one for non-members.
pub fn analyze(
    inst: &KnapsackInstance,
    denominator: Denominator,
    all_strategies: bool,
    cap: usize,
    limits: Limits,
) -> Result<KnapsackAnalysis> {
    let verifier = KnapsackVerifier::new(inst.text(), denominator)?;
    let strategies = if all_strategies {
        enumerate_strategies(inst, cap)?
    } else {
        vec![best_effort_strategy(inst)]
    };
    let analyses = strategies
        .iter()
        .map(|s| analyze_strategy(&verifier, s, limits))
        .collect::<Result<Vec<_>>>()?;
    Ok(KnapsackAnalysis {
        instance: inst.clone(),
        member: is_member(inst),
        denominator: verifier.denominator(),
        steps: verifier.tape().len(),
        strategies: analyses,
    })
}
