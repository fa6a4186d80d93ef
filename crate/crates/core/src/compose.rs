//! Parallel composition of the history verifier for a reducer machine and
//! the knapsack verifier reading the reducer's output.
//!
//! Register 0 carries the history pipeline and register 1 the knapsack
//! pipeline. Each output symbol, known once the transition of its block has
//! been read, drives one knapsack step at the first separator of the block.
//! The knapsack preparation runs with the first history symbol and its
//! decision follows an accepting `$`.

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::exact::BigRational;
use crate::history::{
    honest_history, HistoryCore, HistoryOps, HistoryState, HistoryVerifierParams, StreamProver,
    HISTORY_REQUEST,
};
use crate::knapsack::{
    enumerate_strategies, parse_instance, Grammar, KnapsackInstance, KnapsackOps, ReaderState,
    Role, StrategyProver, BIT_REQUEST, STRATEGY_CAP,
};
use crate::machine::{
    run_exact, total_outcome, Action, ChannelEvent, Controller, IterationAnalysis, Limits, Prover,
    StepKind, Transition, Verdict, VerdictDistribution,
};
use crate::superop::{Denominator, Superoperator};
use crate::turing::{DigitMap, TmSpec};

/// Exact worst-case overall rejection of the copier reducer on
/// `101;A(1,10)E(100,100)` with `c = 3` and AUTO denominator, over every
/// bit strategy. Recorded from the exact analyzer.
pub const COPIER_NON_MEMBER_WORST_REJECTION: &str = "8/9";

/// The knapsack step owed together with the pending history step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum KnapsackStep {
    Prepare,
    Read(Role),
    Decide,
}

#[derive(Clone, Debug)]
pub struct ComposedState {
    history: HistoryState,
    grammar: Grammar,
    reader: ReaderState,
    started: bool,
    knapsack: Option<KnapsackStep>,
    asking_bit: bool,
}

#[derive(Clone, Debug)]
pub struct ComposedVerifier {
    v1: HistoryCore,
    v2: KnapsackOps,
}

/// Builds the composed verifier for `reducer` on `w`. With AUTO the common
/// denominator is the larger of the two minimal ones.
pub fn compose(
    reducer: &TmSpec,
    w: &str,
    coefficient: u64,
    denominator: Denominator,
) -> Result<ComposedVerifier> {
    if !reducer.is_deterministic() {
        return Err(Error::MachineFormat("reducer must be deterministic".into()));
    }
    if reducer.states().iter().any(|&s| reducer.is_rejecting(s)) {
        return Err(Error::MachineFormat(
            "reducer must halt only by accepting".into(),
        ));
    }
    let d = match denominator {
        Denominator::Fixed(d) => d,
        Denominator::Auto => {
            let base = DigitMap::for_spec(reducer).base();
            HistoryOps::minimal_denominator(base, coefficient)?
                .max(KnapsackOps::minimal_denominator()?)
        }
    };
    let params = HistoryVerifierParams::new(reducer.clone(), w)
        .with_coefficient(coefficient)
        .with_denominator(Denominator::Fixed(d));
    Ok(ComposedVerifier {
        v1: HistoryCore::new(&params, false)?,
        v2: KnapsackOps::new(Denominator::Fixed(d))?,
    })
}

impl ComposedVerifier {
    pub fn denominator(&self) -> u64 {
        self.v2.denominator
    }

    pub fn history(&self) -> &HistoryCore {
        &self.v1
    }

    /// Output of the reducer on the input, i.e. the knapsack text an honest
    /// history streams.
    pub fn reduced_text(&self) -> Result<String> {
        self.v1
            .spec()
            .output(&self.v1.input(), crate::history::RUN_STEPS)
    }

    pub fn honest_history(&self) -> Result<String> {
        honest_history(self.v1.spec(), &self.v1.input(), false)
    }

    /// Ten times the number of actions an honest iteration takes.
    pub fn default_limits(&self) -> Limits {
        match (self.honest_history(), self.reduced_text()) {
            (Ok(h), Ok(u)) => Limits {
                max_depth: 10 * (2 * h.chars().count() + 2 * u.chars().count() + 2),
            },
            _ => Limits::default(),
        }
    }

    fn knapsack_op(&self, st: &ComposedState, step: KnapsackStep) -> (&Superoperator, StepKind) {
        match step {
            KnapsackStep::Prepare => (&self.v2.prepare, StepKind::Prepare),
            KnapsackStep::Read(role) => st.reader.step(&self.v2, role),
            KnapsackStep::Decide => (&self.v2.decide, StepKind::Decision),
        }
    }
}

impl Controller for ComposedVerifier {
    type Memory = ComposedState;

    fn tape(&self) -> &[char] {
        self.v1.tape()
    }

    fn initial_registers(&self) -> Vec<Vec<BigRational>> {
        vec![self.v1.initial_register(), self.v1.initial_register()]
    }

    fn initial_memory(&self) -> ComposedState {
        ComposedState {
            history: self.v1.initial_state(),
            grammar: Grammar::new(),
            reader: ReaderState::default(),
            started: false,
            knapsack: None,
            asking_bit: false,
        }
    }

    fn action<'a>(&'a self, st: &ComposedState, _: usize) -> Action<'a> {
        if st.asking_bit {
            return Action::Communicate(BIT_REQUEST);
        }
        let mut ops = Vec::with_capacity(2);
        if let Some((sop, kind)) = self.v1.pending_step(&st.history) {
            ops.push((0, sop, kind));
        }
        if let Some(step) = st.knapsack {
            let (sop, kind) = self.knapsack_op(st, step);
            ops.push((1, sop, kind));
        }
        if ops.is_empty() {
            Action::Communicate(HISTORY_REQUEST)
        } else {
            Action::Read(ops)
        }
    }

    fn on_response(
        &self,
        st: &ComposedState,
        head: usize,
        symbol: char,
    ) -> Transition<ComposedState> {
        let mut next = st.clone();
        if st.asking_bit {
            return match st.reader.answer(symbol) {
                Some(r) => {
                    next.reader = r;
                    next.asking_bit = false;
                    Transition::go(next, 0)
                }
                None => Transition::stop(next, Verdict::Reject),
            };
        }
        let r = self.v1.receive(&st.history, head, symbol);
        next.history = r.state;
        match r.verdict {
            Some(Verdict::Accept) => {
                if st.grammar.finish().is_err() {
                    return Transition::stop(next, Verdict::Reject);
                }
                next.knapsack = Some(KnapsackStep::Decide);
                return Transition::go(next, 0);
            }
            Some(v) => return Transition::stop(next, v),
            None => {}
        }
        if !st.started {
            next.started = true;
            next.knapsack = Some(KnapsackStep::Prepare);
        }
        if let Some(x) = r.emit {
            let role = match next.grammar.feed(x) {
                Ok(role) => role,
                Err(_) => return Transition::stop(next, Verdict::Reject),
            };
            next.knapsack = Some(KnapsackStep::Read(role));
            next.asking_bit = role == Role::Existential && !st.reader.answered;
        }
        Transition::go(next, r.head_move)
    }

    fn on_outcome(
        &self,
        st: &ComposedState,
        _: usize,
        mains: &[usize],
    ) -> Transition<ComposedState> {
        let mut next = st.clone();
        let mut k = 0;
        if self.v1.pending_step(&st.history).is_some() {
            let (h, verdict) = self.v1.outcome(&st.history, mains[0]);
            next.history = h;
            k = 1;
            if let Some(v) = verdict {
                return Transition::stop(next, v);
            }
        }
        if let Some(step) = next.knapsack.take() {
            let main = mains[k];
            match step {
                KnapsackStep::Prepare => {}
                KnapsackStep::Read(role) => next.reader = st.reader.after(role, main),
                KnapsackStep::Decide => {
                    let v = if main == 0 {
                        Verdict::Accept
                    } else {
                        Verdict::Reject
                    };
                    return Transition::stop(next, v);
                }
            }
        }
        Transition::go(next, 0)
    }
}

/// Two provers on one channel: history requests go to `history`, bit
/// requests to `bits`.
#[derive(Clone, Debug)]
pub struct ProverPair<H, B> {
    pub history: H,
    pub bits: B,
}

impl<H: Prover, B: Prover> Prover for ProverPair<H, B> {
    fn respond(&self, transcript: &[ChannelEvent]) -> char {
        match transcript.last() {
            Some(ChannelEvent::Request(BIT_REQUEST)) => self.bits.respond(transcript),
            _ => self.history.respond(transcript),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ComposedAnalysis {
    pub denominator: u64,
    pub iteration: IterationAnalysis,
    pub outcome: VerdictDistribution,
}

impl ComposedAnalysis {
    pub fn overall_reject(&self) -> BigRational {
        self.outcome
            .overall_reject
            .clone()
            .unwrap_or_else(BigRational::zero)
    }

    pub fn overall_accept(&self) -> BigRational {
        self.outcome
            .overall_accept
            .clone()
            .unwrap_or_else(BigRational::zero)
    }
}

pub fn analyze_composed<H: Prover, B: Prover>(
    verifier: &ComposedVerifier,
    provers: &ProverPair<H, B>,
    limits: Option<Limits>,
) -> Result<ComposedAnalysis> {
    let limits = limits.unwrap_or_else(|| verifier.default_limits());
    let iteration = run_exact(verifier, provers, limits)?;
    let outcome = total_outcome(&iteration);
    Ok(ComposedAnalysis {
        denominator: verifier.denominator(),
        iteration,
        outcome,
    })
}

/// One analysis per bit strategy for the reduced instance, all against the
/// same history prover.
#[derive(Clone, Debug)]
pub struct ComposedReport {
    pub instance: KnapsackInstance,
    pub member: bool,
    pub denominator: u64,
    pub strategies: Vec<ComposedAnalysis>,
}

impl ComposedReport {
    pub fn worst_case_rejection(&self) -> BigRational {
        self.strategies
            .iter()
            .map(ComposedAnalysis::overall_reject)
            .min()
            .unwrap_or_else(BigRational::one)
    }
}

/// Analyzes `history` against every bit strategy for the reducer's output
/// (up to `cap` rounds).
pub fn analyze_all_strategies(
    verifier: &ComposedVerifier,
    history: &StreamProver,
    cap: Option<usize>,
    limits: Option<Limits>,
) -> Result<ComposedReport> {
    let inst = parse_instance(&verifier.reduced_text()?)?;
    let strategies = enumerate_strategies(&inst, cap.unwrap_or(STRATEGY_CAP))?;
    let analyses = strategies
        .into_iter()
        .map(|s| {
            let pair = ProverPair {
                history: history.clone(),
                bits: StrategyProver {
                    strategy: s,
                    register: 1,
                },
            };
            analyze_composed(verifier, &pair, limits)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ComposedReport {
        member: crate::knapsack::is_member(&inst),
        instance: inst,
        denominator: verifier.denominator(),
        strategies: analyses,
    })
}
