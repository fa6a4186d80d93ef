//! Operational semantics of a verifier with a classical controller and a
//! constant-size quantum register, talking to a deterministic prover.
//!
//! [`run_exact`] walks the whole branch tree of one iteration with exact
//! arithmetic. [`run_sampled`] and [`sample_step`] draw outcomes at random
//! and exist only as a statistical cross-check of the exact numbers.

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::exact::{norm_sq, BigRational};
use crate::superop::Superoperator;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Verdict {
    Accept,
    Reject,
    Restart,
}

/// Tag attached to every superoperator application; published with the
/// outcome so provers can read coin results.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StepKind {
    Prepare,
    Encode,
    Coin,
    Identity,
    Subtract,
    Mismatch,
    Decision,
}

impl StepKind {
    pub fn name(self) -> &'static str {
        match self {
            StepKind::Prepare => "prepare",
            StepKind::Encode => "encode",
            StepKind::Coin => "coin",
            StepKind::Identity => "identity",
            StepKind::Subtract => "subtract",
            StepKind::Mismatch => "mismatch",
            StepKind::Decision => "decision",
        }
    }
}

/// One published measurement result: which main element (by position in the
/// main list) was observed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Published {
    pub register: usize,
    pub kind: StepKind,
    pub index: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ChannelEvent {
    Request(char),
    Response(char),
    Outcome(Vec<Published>),
}

/// What the controller does in the current classical state.
pub enum Action<'a> {
    /// Write a symbol on the channel and wait for the prover.
    Communicate(char),
    /// Apply one superoperator to each listed register simultaneously.
    Read(Vec<(usize, &'a Superoperator, StepKind)>),
    /// Halt the iteration with a classical verdict.
    Decide(Verdict),
}

#[derive(Clone, Debug)]
pub struct Transition<M> {
    pub memory: M,
    pub head_move: i8,
    pub verdict: Option<Verdict>,
}

impl<M> Transition<M> {
    pub fn go(memory: M, head_move: i8) -> Self {
        Self {
            memory,
            head_move,
            verdict: None,
        }
    }

    pub fn stop(memory: M, verdict: Verdict) -> Self {
        Self {
            memory,
            head_move: 0,
            verdict: Some(verdict),
        }
    }
}

/// Classical part of a verifier. The head starts on `¢` (index 0).
pub trait Controller {
    type Memory: Clone;

    /// `¢ w $`.
    fn tape(&self) -> &[char];

    /// Initial unnormalized state of every register.
    fn initial_registers(&self) -> Vec<Vec<BigRational>>;

    fn initial_memory(&self) -> Self::Memory;

    fn action<'a>(&'a self, memory: &Self::Memory, head: usize) -> Action<'a>;

    fn on_response(
        &self,
        memory: &Self::Memory,
        head: usize,
        symbol: char,
    ) -> Transition<Self::Memory>;

    /// Called when every register of a `Read` produced a main outcome;
    /// `mains[r]` is the main position observed for the r-th listed register.
    fn on_outcome(
        &self,
        memory: &Self::Memory,
        head: usize,
        mains: &[usize],
    ) -> Transition<Self::Memory>;
}

/// A deterministic prover: the next symbol is a function of the transcript.
pub trait Prover {
    fn respond(&self, transcript: &[ChannelEvent]) -> char;
}

impl<P: Prover + ?Sized> Prover for &P {
    fn respond(&self, transcript: &[ChannelEvent]) -> char {
        (**self).respond(transcript)
    }
}

/// Number of `Response` events so far, i.e. the position of the next symbol
/// in a streamed answer.
pub fn responses_so_far(transcript: &[ChannelEvent]) -> usize {
    transcript
        .iter()
        .filter(|e| matches!(e, ChannelEvent::Response(_)))
        .count()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    /// Maximum number of controller actions on one branch.
    pub max_depth: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            max_depth: 1_000_000,
        }
    }
}

/// A register value kept as `payload / scale`, where `scale` is the product
/// of the denominators applied so far.
#[derive(Clone, Debug)]
struct Register {
    payload: Vec<BigRational>,
    scale: BigInt,
}

impl Register {
    fn mass(&self) -> BigRational {
        norm_sq(&self.payload) / BigRational::from_integer(&self.scale * &self.scale)
    }
}

#[derive(Clone, Debug)]
struct Branch<M> {
    memory: M,
    head: usize,
    registers: Vec<Register>,
    steps: usize,
    actions: usize,
    transcript: Vec<ChannelEvent>,
}

#[derive(Clone, Debug)]
pub struct Leaf {
    pub verdict: Verdict,
    pub probability: BigRational,
    /// Superoperator applications on the path.
    pub steps: usize,
    pub payloads: Vec<Vec<BigRational>>,
    pub scales: Vec<BigInt>,
    pub transcript: Vec<ChannelEvent>,
}

#[derive(Clone, Debug)]
pub struct IterationAnalysis {
    pub p_accept: BigRational,
    pub p_reject: BigRational,
    pub p_restart: BigRational,
    pub leaves: Vec<Leaf>,
    /// Largest number of superoperator applications on a decision path.
    pub steps: usize,
}

impl IterationAnalysis {
    pub fn total(&self) -> BigRational {
        &self.p_accept + &self.p_reject + &self.p_restart
    }

    /// `Some(l)` if every decision leaf sits at the same depth `l`.
    pub fn uniform_steps(&self) -> Option<usize> {
        let first = self.leaves.first()?.steps;
        self.leaves
            .iter()
            .all(|l| l.steps == first)
            .then_some(first)
    }
}

/// Closed form of the restart loop.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerdictDistribution {
    pub overall_accept: Option<BigRational>,
    pub overall_reject: Option<BigRational>,
    pub expected_iterations: Option<BigRational>,
    pub expected_steps: Option<BigRational>,
}

impl VerdictDistribution {
    /// The loop never terminates: no decision mass at all.
    pub fn is_infinite(&self) -> bool {
        self.expected_iterations.is_none()
    }
}

pub fn total_outcome(iter: &IterationAnalysis) -> VerdictDistribution {
    total_outcome_from(&iter.p_accept, &iter.p_reject, iter.steps)
}

pub fn total_outcome_from(
    p_accept: &BigRational,
    p_reject: &BigRational,
    steps: usize,
) -> VerdictDistribution {
    let decided = p_accept + p_reject;
    if decided.is_zero() {
        return VerdictDistribution {
            overall_accept: None,
            overall_reject: None,
            expected_iterations: None,
            expected_steps: None,
        };
    }
    let iterations = decided.recip();
    VerdictDistribution {
        overall_accept: Some(p_accept / &decided),
        overall_reject: Some(p_reject / &decided),
        expected_steps: Some(&iterations * BigRational::from_integer(BigInt::from(steps))),
        expected_iterations: Some(iterations),
    }
}

/// `Σ_{t<n} p_restart^t · p_accept`.
pub fn truncated_series_check(iter: &IterationAnalysis, n: usize) -> BigRational {
    let mut sum = BigRational::zero();
    let mut power = BigRational::one();
    for _ in 0..n {
        sum += &power * &iter.p_accept;
        power *= &iter.p_restart;
    }
    sum
}

fn move_head(tape_len: usize, head: usize, delta: i8) -> Result<usize> {
    let next = head as isize + delta as isize;
    if next < 0 || next as usize >= tape_len {
        return Err(Error::HeadOutOfRange(next));
    }
    Ok(next as usize)
}

struct Accumulator {
    p_accept: BigRational,
    p_reject: BigRational,
    p_restart: BigRational,
    leaves: Vec<Leaf>,
}

impl Accumulator {
    fn record<M>(&mut self, verdict: Verdict, branch: Branch<M>) {
        let probability = branch
            .registers
            .iter()
            .fold(BigRational::one(), |acc, r| acc * r.mass());
        match verdict {
            Verdict::Restart => {
                self.p_restart += probability;
                return;
            }
            Verdict::Accept => self.p_accept += &probability,
            Verdict::Reject => self.p_reject += &probability,
        }
        self.leaves.push(Leaf {
            verdict,
            probability,
            steps: branch.steps,
            payloads: branch.registers.iter().map(|r| r.payload.clone()).collect(),
            scales: branch.registers.iter().map(|r| r.scale.clone()).collect(),
            transcript: branch.transcript,
        });
    }
}

fn initial_branch<C: Controller>(controller: &C) -> Branch<C::Memory> {
    Branch {
        memory: controller.initial_memory(),
        head: 0,
        registers: controller
            .initial_registers()
            .into_iter()
            .map(|payload| Register {
                payload,
                scale: BigInt::one(),
            })
            .collect(),
        steps: 0,
        actions: 0,
        transcript: Vec::new(),
    }
}

/// Explores one iteration exactly. Auxiliary outcomes add their mass to
/// `p_restart`; main outcomes branch; verdicts end a branch.
pub fn run_exact<C: Controller, P: Prover + ?Sized>(
    controller: &C,
    prover: &P,
    limits: Limits,
) -> Result<IterationAnalysis> {
    let tape_len = controller.tape().len();
    let mut acc = Accumulator {
        p_accept: BigRational::zero(),
        p_reject: BigRational::zero(),
        p_restart: BigRational::zero(),
        leaves: Vec::new(),
    };
    let mut stack = vec![initial_branch(controller)];

    while let Some(mut branch) = stack.pop() {
        if branch.actions >= limits.max_depth {
            return Err(Error::DepthLimitExceeded(limits.max_depth));
        }
        branch.actions += 1;
        match controller.action(&branch.memory, branch.head) {
            Action::Decide(verdict) => acc.record(verdict, branch),
            Action::Communicate(symbol) => {
                branch.transcript.push(ChannelEvent::Request(symbol));
                let answer = prover.respond(&branch.transcript);
                branch.transcript.push(ChannelEvent::Response(answer));
                let t = controller.on_response(&branch.memory, branch.head, answer);
                branch.head = move_head(tape_len, branch.head, t.head_move)?;
                branch.memory = t.memory;
                match t.verdict {
                    Some(v) => acc.record(v, branch),
                    None => stack.push(branch),
                }
            }
            Action::Read(ops) => {
                expand_read(controller, &ops, branch, tape_len, &mut acc, &mut stack)?;
            }
        }
    }

    let steps = acc.leaves.iter().map(|l| l.steps).max().unwrap_or(0);
    Ok(IterationAnalysis {
        p_accept: acc.p_accept,
        p_reject: acc.p_reject,
        p_restart: acc.p_restart,
        leaves: acc.leaves,
        steps,
    })
}

/// Main outcomes of one component: `(main position, new payload, mass)`.
type MainOutcomes = Vec<(usize, Vec<BigRational>, BigRational)>;

fn expand_read<C: Controller>(
    controller: &C,
    ops: &[(usize, &Superoperator, StepKind)],
    branch: Branch<C::Memory>,
    tape_len: usize,
    acc: &mut Accumulator,
    stack: &mut Vec<Branch<C::Memory>>,
) -> Result<()> {
    let mut touched = vec![false; branch.registers.len()];
    let mut untouched_mass = BigRational::one();
    let mut per_component: Vec<MainOutcomes> = Vec::with_capacity(ops.len());
    let mut product_total = BigRational::one();
    let mut product_main = BigRational::one();

    for &(reg, sop, _) in ops {
        let register = branch
            .registers
            .get(reg)
            .ok_or_else(|| Error::InvalidParameter(format!("no register {reg}")))?;
        if touched[reg] {
            return Err(Error::InvalidParameter(format!(
                "register {reg} read twice in one step"
            )));
        }
        touched[reg] = true;
        if register.payload.len() != sop.dim() {
            return Err(Error::DimensionMismatch(format!(
                "register {reg} has dimension {}, superoperator {}",
                register.payload.len(),
                sop.dim()
            )));
        }
        let new_scale = &register.scale * BigInt::from(sop.denominator());
        let s2 = BigRational::from_integer(&new_scale * &new_scale);
        let mut mains = Vec::new();
        let mut main_mass = BigRational::zero();
        for (pos, &j) in sop.main_indices().iter().enumerate() {
            let v = sop.payloads()[j].mul_vec(&register.payload)?;
            let m = norm_sq(&v) / &s2;
            main_mass += &m;
            if !m.is_zero() {
                mains.push((pos, v, m));
            }
        }
        let aux_mass = sop.aux_gram().quadratic_form(&register.payload)? / &s2;
        product_total *= &main_mass + aux_mass;
        product_main *= main_mass;
        per_component.push(mains);
    }
    for (r, register) in branch.registers.iter().enumerate() {
        if !touched[r] {
            untouched_mass *= register.mass();
        }
    }
    acc.p_restart += &untouched_mass * (product_total - product_main);

    // cartesian product over the main outcomes of every component
    let mut choice = vec![0usize; ops.len()];
    if per_component.iter().any(|c| c.is_empty()) {
        return Ok(());
    }
    loop {
        let mut next = branch.clone();
        next.steps += 1;
        let mut positions = Vec::with_capacity(ops.len());
        let mut published = Vec::with_capacity(ops.len());
        for (k, &(reg, sop, kind)) in ops.iter().enumerate() {
            let (pos, payload, _) = &per_component[k][choice[k]];
            next.registers[reg] = Register {
                payload: payload.clone(),
                scale: &branch.registers[reg].scale * BigInt::from(sop.denominator()),
            };
            positions.push(*pos);
            published.push(Published {
                register: reg,
                kind,
                index: *pos,
            });
        }
        next.transcript.push(ChannelEvent::Outcome(published));
        let t = controller.on_outcome(&next.memory, next.head, &positions);
        next.head = move_head(tape_len, next.head, t.head_move)?;
        next.memory = t.memory;
        match t.verdict {
            Some(v) => acc.record(v, next),
            None => stack.push(next),
        }

        // advance the mixed-radix counter
        let mut k = 0;
        loop {
            if k == choice.len() {
                return Ok(());
            }
            choice[k] += 1;
            if choice[k] < per_component[k].len() {
                break;
            }
            choice[k] = 0;
            k += 1;
        }
    }
}

/// Empirical outcome counts of one superoperator application.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepSample {
    pub kind: Option<StepKind>,
    /// Exact outcome probabilities of the normalized state, by element index.
    pub probabilities: Vec<BigRational>,
    pub counts: Vec<u64>,
}

impl StepSample {
    pub fn samples(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Samples `samples` outcomes of `sop` applied to the normalized `state`.
pub fn sample_superoperator(
    sop: &Superoperator,
    state: &[BigRational],
    seed: u64,
    samples: u64,
) -> Result<StepSample> {
    let probabilities = outcome_probabilities(sop, state)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = weighted(&probabilities)?;
    let mut counts = vec![0u64; probabilities.len()];
    for _ in 0..samples {
        counts[dist.sample(&mut rng)] += 1;
    }
    Ok(StepSample {
        kind: None,
        probabilities,
        counts,
    })
}

fn outcome_probabilities(sop: &Superoperator, state: &[BigRational]) -> Result<Vec<BigRational>> {
    let total = norm_sq(state);
    if total.is_zero() {
        return Err(Error::InvalidParameter(
            "cannot sample from the zero vector".into(),
        ));
    }
    Ok(sop
        .apply(state)?
        .into_iter()
        .map(|o| o.probability / &total)
        .collect())
}

fn weighted(probabilities: &[BigRational]) -> Result<WeightedIndex<f64>> {
    let weights: Vec<f64> = probabilities
        .iter()
        .map(|p| p.to_f64().unwrap_or(0.0))
        .collect();
    WeightedIndex::new(weights)
        .map_err(|e| Error::InvalidParameter(format!("sampling weights: {e}")))
}

/// Follows the iteration along its first nonzero main outcome and samples
/// the `occurrence`-th application tagged `kind` (register listed first in
/// the step).
pub fn sample_step<C: Controller, P: Prover + ?Sized>(
    controller: &C,
    prover: &P,
    kind: StepKind,
    occurrence: usize,
    seed: u64,
    samples: u64,
    limits: Limits,
) -> Result<StepSample> {
    let tape_len = controller.tape().len();
    let mut branch = initial_branch(controller);
    let mut seen = 0usize;
    loop {
        if branch.actions >= limits.max_depth {
            return Err(Error::DepthLimitExceeded(limits.max_depth));
        }
        branch.actions += 1;
        let t = match controller.action(&branch.memory, branch.head) {
            Action::Decide(_) => {
                return Err(Error::InvalidParameter(format!(
                    "iteration ended before step `{}` #{occurrence}",
                    kind.name()
                )))
            }
            Action::Communicate(symbol) => {
                branch.transcript.push(ChannelEvent::Request(symbol));
                let answer = prover.respond(&branch.transcript);
                branch.transcript.push(ChannelEvent::Response(answer));
                controller.on_response(&branch.memory, branch.head, answer)
            }
            Action::Read(ops) => {
                if let Some(&(reg, sop, _)) = ops.iter().find(|(_, _, k)| *k == kind) {
                    if seen == occurrence {
                        let mut s = sample_superoperator(
                            sop,
                            &branch.registers[reg].payload,
                            seed,
                            samples,
                        )?;
                        s.kind = Some(kind);
                        return Ok(s);
                    }
                    seen += 1;
                }
                let mut positions = Vec::new();
                let mut published = Vec::new();
                for &(reg, sop, k) in &ops {
                    let register = &branch.registers[reg];
                    let found = sop
                        .main_indices()
                        .iter()
                        .enumerate()
                        .map(|(pos, &j)| Ok((pos, sop.payloads()[j].mul_vec(&register.payload)?)))
                        .collect::<Result<Vec<_>>>()?
                        .into_iter()
                        .find(|(_, v)| !norm_sq(v).is_zero());
                    let (pos, payload) = found.ok_or_else(|| {
                        Error::InvalidParameter("no main outcome with nonzero amplitude".into())
                    })?;
                    let scale = &register.scale * BigInt::from(sop.denominator());
                    branch.registers[reg] = Register { payload, scale };
                    positions.push(pos);
                    published.push(Published {
                        register: reg,
                        kind: k,
                        index: pos,
                    });
                }
                branch.steps += 1;
                branch.transcript.push(ChannelEvent::Outcome(published));
                controller.on_outcome(&branch.memory, branch.head, &positions)
            }
        };
        branch.head = move_head(tape_len, branch.head, t.head_move)?;
        branch.memory = t.memory;
        if t.verdict.is_some() {
            return Err(Error::InvalidParameter(format!(
                "iteration ended before step `{}` #{occurrence}",
                kind.name()
            )));
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct IterationCounts {
    pub accept: u64,
    pub reject: u64,
    pub restart: u64,
}

/// Simulates `samples` whole iterations, drawing every measurement outcome.
/// Only practical for tiny `D` and short tapes.
pub fn run_sampled<C: Controller, P: Prover + ?Sized>(
    controller: &C,
    prover: &P,
    seed: u64,
    samples: u64,
    limits: Limits,
) -> Result<IterationCounts> {
    let tape_len = controller.tape().len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = IterationCounts::default();
    for _ in 0..samples {
        let mut branch = initial_branch(controller);
        let verdict = loop {
            if branch.actions >= limits.max_depth {
                return Err(Error::DepthLimitExceeded(limits.max_depth));
            }
            branch.actions += 1;
            let t = match controller.action(&branch.memory, branch.head) {
                Action::Decide(v) => break v,
                Action::Communicate(symbol) => {
                    branch.transcript.push(ChannelEvent::Request(symbol));
                    let answer = prover.respond(&branch.transcript);
                    branch.transcript.push(ChannelEvent::Response(answer));
                    controller.on_response(&branch.memory, branch.head, answer)
                }
                Action::Read(ops) => {
                    let mut positions = Vec::new();
                    let mut published = Vec::new();
                    let mut restarted = false;
                    for &(reg, sop, kind) in &ops {
                        let register = &branch.registers[reg];
                        let probs = outcome_probabilities(sop, &register.payload)?;
                        let j = weighted(&probs)?.sample(&mut rng);
                        match sop.main_indices().iter().position(|&m| m == j) {
                            Some(pos) => {
                                let payload = sop.payloads()[j].mul_vec(&register.payload)?;
                                let scale = &register.scale * BigInt::from(sop.denominator());
                                branch.registers[reg] = Register { payload, scale };
                                positions.push(pos);
                                published.push(Published {
                                    register: reg,
                                    kind,
                                    index: pos,
                                });
                            }
                            None => restarted = true,
                        }
                    }
                    if restarted {
                        break Verdict::Restart;
                    }
                    branch.steps += 1;
                    branch.transcript.push(ChannelEvent::Outcome(published));
                    controller.on_outcome(&branch.memory, branch.head, &positions)
                }
            };
            branch.head = move_head(tape_len, branch.head, t.head_move)?;
            branch.memory = t.memory;
            if let Some(v) = t.verdict {
                break v;
            }
        };
        match verdict {
            Verdict::Accept => counts.accept += 1,
            Verdict::Reject => counts.reject += 1,
            Verdict::Restart => counts.restart += 1,
        }
    }
    Ok(counts)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
    pub passed: bool,
}

/// Pearson goodness-of-fit of `counts` against exact `probabilities`.
///
/// Cells with expected count below 5 are pooled. A positive count in a cell of
/// probability zero fails outright.
pub fn chi_square_test(
    counts: &[u64],
    probabilities: &[BigRational],
    alpha: f64,
) -> ChiSquareResult {
    let n: u64 = counts.iter().sum();
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut pooled = (0.0f64, 0.0f64);
    let mut impossible = false;
    for (&c, p) in counts.iter().zip(probabilities) {
        let p = p.to_f64().unwrap_or(0.0);
        let expected = p * n as f64;
        if p == 0.0 {
            impossible |= c > 0;
            continue;
        }
        if expected < 5.0 {
            pooled.0 += c as f64;
            pooled.1 += expected;
        } else {
            cells.push((c as f64, expected));
        }
    }
    if pooled.1 > 0.0 {
        if pooled.1 < 5.0 && !cells.is_empty() {
            let last = cells.len() - 1;
            cells[last].0 += pooled.0;
            cells[last].1 += pooled.1;
        } else {
            cells.push(pooled);
        }
    }
    let statistic: f64 = cells.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let df = cells.len().saturating_sub(1);
    let p_value = if impossible {
        0.0
    } else if df == 0 {
        1.0
    } else {
        1.0 - ChiSquared::new(df as f64)
            .expect("positive df")
            .cdf(statistic)
    };
    ChiSquareResult {
        statistic,
        degrees_of_freedom: df,
        p_value,
        passed: p_value >= alpha,
    }
}
