//! Verification of configuration histories of linear-space machines.
//!
//! The prover streams `c₁@@@@c₂@@@@…@@@@c_f@@@@$`, one symbol per request.
//! Classical control checks the format; a 4-dimensional register holds
//! `(1, next(c_{i-1}), val(c_i), next(c_i))` and a mismatch between the
//! second and third coordinate is observed with amplitude `c·(u − v)` at the
//! fourth separator of each block. For a nondeterministic machine every
//! block starts with the label of the chosen transition.

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::exact::{rat, BigRational, RationalMatrix};
use crate::machine::{
    run_exact, total_outcome, Action, ChannelEvent, Controller, IterationAnalysis, Limits, Prover,
    StepKind, Transition, Verdict, VerdictDistribution,
};
use crate::superop::{complete, identity_sop, minimal_denominator, Denominator, Superoperator};
use crate::turing::{
    serialize_history, Configuration, DigitMap, SuccessorStream, TmSpec, BLANK, END, NO_CHOICE,
    SEPARATOR,
};

/// Symbol the verifier writes when it asks for the next history symbol.
pub const HISTORY_REQUEST: char = '>';

/// `q₁` constant, `q₂` successor of the previous block, `q₃` current value,
/// `q₄` successor of the current block.
pub const DIM: usize = 4;

pub const DEFAULT_COEFFICIENT: u64 = 3;

/// Step budget for the machine runs behind the honest provers.
pub const RUN_STEPS: usize = 100_000;

#[derive(Clone, Debug)]
pub struct HistoryVerifierParams {
    pub tm: TmSpec,
    pub input: String,
    /// Mismatch coefficient `c ≥ 3`.
    pub coefficient: u64,
    pub denominator: Denominator,
}

impl HistoryVerifierParams {
    pub fn new(tm: TmSpec, input: &str) -> Self {
        Self {
            tm,
            input: input.to_string(),
            coefficient: DEFAULT_COEFFICIENT,
            denominator: Denominator::Auto,
        }
    }

    pub fn with_coefficient(mut self, c: u64) -> Self {
        self.coefficient = c;
        self
    }

    pub fn with_denominator(mut self, d: Denominator) -> Self {
        self.denominator = d;
        self
    }
}

/// Every superoperator of the protocol, at one denominator.
#[derive(Clone, Debug)]
pub struct HistoryOps {
    pub denominator: u64,
    pub base: u64,
    pub coefficient: u64,
    /// Indexed by `(dv + 1)·(m + 1) + (de + 1)` with `-1` for "no digit".
    encoders: Vec<Superoperator>,
    pub identity: Superoperator,
    pub mismatch: Superoperator,
    pub mismatch_last: Superoperator,
}

impl HistoryOps {
    /// `q₃ ← m·q₃ + dv·q₁` and `q₄ ← m·q₄ + de·q₁`; a missing digit leaves
    /// the coordinate alone.
    pub fn encoder_payload(m: u64, dv: Option<u64>, de: Option<u64>) -> RationalMatrix {
        let mut p = RationalMatrix::identity(DIM);
        if let Some(k) = dv {
            p[(2, 0)] = rat(k as i64);
            p[(2, 2)] = rat(m as i64);
        }
        if let Some(k) = de {
            p[(3, 0)] = rat(k as i64);
            p[(3, 3)] = rat(m as i64);
        }
        p
    }

    /// `M₁: (1,u,v,w) ↦ (c(u−v),0,0,0)` and `M₂: (1,u,v,w) ↦ (1,w,0,0)`;
    /// for the last block `M₂` clears the register instead.
    pub fn mismatch_payloads(c: u64, last: bool) -> [RationalMatrix; 2] {
        let mut m1 = RationalMatrix::zeros(DIM, DIM);
        m1[(0, 1)] = rat(c as i64);
        m1[(0, 2)] = rat(-(c as i64));
        let mut m2 = RationalMatrix::zeros(DIM, DIM);
        m2[(0, 0)] = rat(1);
        if !last {
            m2[(1, 3)] = rat(1);
        }
        [m1, m2]
    }

    /// The largest encoder dominates the other encoders entrywise, so its
    /// bound covers all of them.
    pub fn minimal_denominator(m: u64, c: u64) -> Result<u64> {
        let top = Self::encoder_payload(m, Some(m - 1), Some(m - 1));
        let mut d = minimal_denominator(&[top])?;
        for last in [false, true] {
            d = d.max(minimal_denominator(&Self::mismatch_payloads(c, last))?);
        }
        Ok(d)
    }

    pub fn new(base: u64, coefficient: u64, denominator: Denominator) -> Result<Self> {
        if coefficient < 3 {
            return Err(Error::InvalidParameter(format!(
                "mismatch coefficient must be at least 3, got {coefficient}"
            )));
        }
        if base < 2 {
            return Err(Error::InvalidParameter(format!("digit base {base}")));
        }
        let d = match denominator {
            Denominator::Auto => Self::minimal_denominator(base, coefficient)?,
            Denominator::Fixed(d) => d,
        };
        let fixed = Denominator::Fixed(d);
        let digits: Vec<Option<u64>> = std::iter::once(None).chain((0..base).map(Some)).collect();
        let mut encoders = Vec::with_capacity(digits.len() * digits.len());
        for &dv in &digits {
            for &de in &digits {
                encoders.push(complete(&[Self::encoder_payload(base, dv, de)], fixed)?);
            }
        }
        Ok(Self {
            denominator: d,
            base,
            coefficient,
            encoders,
            identity: identity_sop(DIM, d)?,
            mismatch: complete(&Self::mismatch_payloads(coefficient, false), fixed)?,
            mismatch_last: complete(&Self::mismatch_payloads(coefficient, true), fixed)?,
        })
    }

    pub fn encoder(&self, dv: Option<u64>, de: Option<u64>) -> &Superoperator {
        let slot = |x: Option<u64>| x.map_or(0, |k| k as usize + 1);
        &self.encoders[slot(dv) * (self.base as usize + 1) + slot(de)]
    }

    pub fn all(&self) -> Vec<&Superoperator> {
        let mut out: Vec<&Superoperator> = self.encoders.iter().collect();
        out.extend([&self.identity, &self.mismatch, &self.mismatch_last]);
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Phase {
    /// Waiting for the choice label of a new block.
    Label,
    /// Reading configuration symbols; zero symbols read means a block may
    /// also end the history here.
    Config,
    /// Number of separators read after the configuration.
    Separators(u8),
}

/// The superoperator owed for the last symbol received.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Pending {
    Identity,
    Encode { dv: Option<u64>, de: Option<u64> },
    Mismatch { last: bool },
}

/// Classical memory of the history verifier during one iteration.
#[derive(Clone, Debug)]
pub struct HistoryState {
    block: usize,
    phase: Phase,
    label: Option<char>,
    symbols: usize,
    state: Option<char>,
    scanned: Option<char>,
    stream: SuccessorStream,
    /// Halting type of the current block, known once its state is read.
    halting: Option<bool>,
    /// Halting type of the previous block.
    previous_halting: Option<bool>,
    pending: Option<Pending>,
}

impl HistoryState {
    pub fn block(&self) -> usize {
        self.block
    }
}

/// Classical effect of one prover symbol.
#[derive(Clone, Debug)]
pub struct Received {
    pub state: HistoryState,
    pub head_move: i8,
    pub verdict: Option<Verdict>,
    /// Output symbol of the block's transition, reported at its first
    /// separator.
    pub emit: Option<char>,
}

/// Classical control and operators shared by the standalone history
/// verifier and the composed verifier.
#[derive(Clone, Debug)]
pub struct HistoryCore {
    spec: TmSpec,
    input: Vec<char>,
    tape: Vec<char>,
    digits: DigitMap,
    bound: usize,
    labelled: bool,
    ops: HistoryOps,
}

impl HistoryCore {
    pub fn new(params: &HistoryVerifierParams, labelled: bool) -> Result<Self> {
        let spec = params.tm.clone();
        for c in params.input.chars() {
            if !spec.input_alphabet().contains(&c) {
                return Err(Error::InvalidInputSymbol(c));
            }
        }
        let input: Vec<char> = params.input.chars().collect();
        let mut tape = vec!['¢'];
        tape.extend(&input);
        tape.push('$');
        let digits = DigitMap::for_spec(&spec);
        let ops = HistoryOps::new(digits.base(), params.coefficient, params.denominator)?;
        Ok(Self {
            bound: spec.length_bound(input.len()),
            spec,
            input,
            tape,
            digits,
            labelled,
            ops,
        })
    }

    pub fn spec(&self) -> &TmSpec {
        &self.spec
    }

    pub fn input(&self) -> String {
        self.input.iter().collect()
    }

    pub fn tape(&self) -> &[char] {
        &self.tape
    }

    pub fn ops(&self) -> &HistoryOps {
        &self.ops
    }

    pub fn denominator(&self) -> u64 {
        self.ops.denominator
    }

    pub fn is_labelled(&self) -> bool {
        self.labelled
    }

    pub fn initial_register(&self) -> Vec<BigRational> {
        vec![rat(1), rat(0), rat(0), rat(0)]
    }

    pub fn initial_state(&self) -> HistoryState {
        HistoryState {
            block: 0,
            phase: self.block_start(),
            label: None,
            symbols: 0,
            state: None,
            scanned: None,
            stream: SuccessorStream::new(None),
            halting: None,
            previous_halting: None,
            pending: None,
        }
    }

    fn block_start(&self) -> Phase {
        if self.labelled {
            Phase::Label
        } else {
            Phase::Config
        }
    }

    /// The superoperator owed for the last symbol, if any.
    pub fn pending_step(&self, st: &HistoryState) -> Option<(&Superoperator, StepKind)> {
        st.pending.map(|p| match p {
            Pending::Identity => (&self.ops.identity, StepKind::Identity),
            Pending::Encode { dv, de } => (self.ops.encoder(dv, de), StepKind::Encode),
            Pending::Mismatch { last: false } => (&self.ops.mismatch, StepKind::Mismatch),
            Pending::Mismatch { last: true } => (&self.ops.mismatch_last, StepKind::Mismatch),
        })
    }

    fn reject(st: &HistoryState) -> Received {
        Received {
            state: st.clone(),
            head_move: 0,
            verdict: Some(Verdict::Reject),
            emit: None,
        }
    }

    fn pop_digit(&self, st: &mut HistoryState) -> Option<u64> {
        st.stream.pop().and_then(|c| self.digits.digit(c).ok())
    }

    /// Expected symbol of `c₁` at position `j`, read off the tape under the
    /// head where the input is involved.
    fn first_config_symbol(&self, j: usize, head: usize) -> Option<char> {
        let n = self.input.len();
        match j {
            0 => Some(self.spec.start()),
            1 => Some(BLANK),
            _ if j <= n + 1 => Some(self.tape[head]),
            _ if j == n + 2 && self.tape[head] == '$' => Some(BLANK),
            _ => None,
        }
    }

    /// Classical processing of one prover symbol.
    pub fn receive(&self, st: &HistoryState, head: usize, symbol: char) -> Received {
        let mut next = st.clone();
        let at_block_start = match st.phase {
            Phase::Label => true,
            Phase::Config => st.symbols == 0 && !self.labelled,
            Phase::Separators(_) => false,
        };

        if symbol == END {
            if !at_block_start || st.block == 0 {
                return Self::reject(st);
            }
            let verdict = match st.previous_halting {
                Some(true) => Verdict::Accept,
                _ => Verdict::Reject,
            };
            return Received {
                state: next,
                head_move: 0,
                verdict: Some(verdict),
                emit: None,
            };
        }
        if at_block_start && st.previous_halting.is_some() {
            return Self::reject(st);
        }

        match st.phase {
            Phase::Label => {
                if symbol != NO_CHOICE && !self.spec.choice_labels().contains(&symbol) {
                    return Self::reject(st);
                }
                next.label = Some(symbol);
                next.stream = SuccessorStream::new(Some(symbol).filter(|&c| c != NO_CHOICE));
                next.phase = Phase::Config;
                next.pending = Some(Pending::Identity);
                Received {
                    state: next,
                    head_move: 0,
                    verdict: None,
                    emit: None,
                }
            }
            Phase::Config if symbol == SEPARATOR => {
                if st.symbols == 0 || st.scanned.is_none() {
                    return Self::reject(st);
                }
                if st.block == 0 && st.symbols != self.input.len() + 3 {
                    return Self::reject(st);
                }
                if next.stream.finish(&self.spec).is_err() {
                    return Self::reject(st);
                }
                let emit = next.stream.emitted();
                let de = self.pop_digit(&mut next);
                next.phase = Phase::Separators(1);
                next.pending = Some(Pending::Encode { dv: None, de });
                Received {
                    state: next,
                    head_move: 0,
                    verdict: None,
                    emit,
                }
            }
            Phase::Config => self.config_symbol(st, next, head, symbol),
            Phase::Separators(n) => {
                if symbol != SEPARATOR {
                    return Self::reject(st);
                }
                if n < 3 {
                    let de = self.pop_digit(&mut next);
                    next.phase = Phase::Separators(n + 1);
                    next.pending = Some(Pending::Encode { dv: None, de });
                } else {
                    if next.stream.pending() > 0 {
                        return Self::reject(st);
                    }
                    next.pending = Some(Pending::Mismatch {
                        last: st.halting.is_some(),
                    });
                }
                Received {
                    state: next,
                    head_move: 0,
                    verdict: None,
                    emit: None,
                }
            }
        }
    }

    fn config_symbol(
        &self,
        st: &HistoryState,
        mut next: HistoryState,
        head: usize,
        symbol: char,
    ) -> Received {
        let spec = &self.spec;
        let is_state = spec.is_state(symbol);
        if !is_state && !spec.is_tape_symbol(symbol) {
            return Self::reject(st);
        }
        // no leading zero digit: a configuration starts with a blank or a state
        if st.symbols == 0 && symbol != BLANK && !is_state {
            return Self::reject(st);
        }
        if st.symbols + 1 > self.bound {
            return Self::reject(st);
        }
        let mut head_move = 0;
        if st.block == 0 {
            let j = st.symbols;
            if self.first_config_symbol(j, head) != Some(symbol) {
                return Self::reject(st);
            }
            if j >= 1 && j <= self.input.len() + 1 {
                head_move = 1;
            }
        }
        if is_state {
            if st.state.is_some() {
                return Self::reject(st);
            }
            next.state = Some(symbol);
            if spec.is_halting(symbol) {
                next.halting = Some(spec.is_accepting(symbol));
            }
        } else if let (Some(s), None) = (st.state, st.scanned) {
            next.scanned = Some(symbol);
            if self.labelled {
                let label = st.label.unwrap_or(NO_CHOICE);
                let needs_label = !spec.is_halting(s) && spec.rules(s, symbol).len() > 1;
                if needs_label != (label != NO_CHOICE) {
                    return Self::reject(st);
                }
            }
        }
        if next.stream.push(spec, symbol).is_err() {
            return Self::reject(st);
        }
        next.symbols += 1;
        let de = if next.symbols >= 3 {
            self.pop_digit(&mut next)
        } else {
            None
        };
        let dv = if st.block == 0 {
            None
        } else {
            Some(self.digits.digit(symbol).expect("alphabet symbol"))
        };
        next.pending = Some(Pending::Encode { dv, de });
        Received {
            state: next,
            head_move,
            verdict: None,
            emit: None,
        }
    }

    /// Classical processing of the main outcome observed for the pending
    /// superoperator.
    pub fn outcome(&self, st: &HistoryState, main: usize) -> (HistoryState, Option<Verdict>) {
        let mut next = st.clone();
        let pending = next.pending.take();
        if let Some(Pending::Mismatch { .. }) = pending {
            if main == 0 {
                return (next, Some(Verdict::Reject));
            }
            next.block += 1;
            next.phase = self.block_start();
            next.label = None;
            next.symbols = 0;
            next.state = None;
            next.scanned = None;
            next.stream = SuccessorStream::new(None);
            next.previous_halting = next.halting.take();
        }
        (next, None)
    }
}

/// The history verifier as a stand-alone controller.
#[derive(Clone, Debug)]
pub struct HistoryVerifier {
    core: HistoryCore,
}

pub fn build_history_verifier(params: &HistoryVerifierParams) -> Result<HistoryVerifier> {
    Ok(HistoryVerifier {
        core: HistoryCore::new(params, false)?,
    })
}

/// Variant for nondeterministic machines: every block starts with the
/// label of the chosen transition (`-` where nothing branches).
pub fn build_ntm_history_verifier(params: &HistoryVerifierParams) -> Result<HistoryVerifier> {
    Ok(HistoryVerifier {
        core: HistoryCore::new(params, true)?,
    })
}

impl HistoryVerifier {
    pub fn core(&self) -> &HistoryCore {
        &self.core
    }

    pub fn denominator(&self) -> u64 {
        self.core.denominator()
    }

    /// The honest stream for this verifier, or `None` when the machine has
    /// no history within [`RUN_STEPS`].
    pub fn honest_history(&self) -> Option<String> {
        honest_history(
            self.core.spec(),
            &self.core.input(),
            self.core.is_labelled(),
        )
        .ok()
    }

    /// Ten times the number of actions an honest iteration takes.
    pub fn default_limits(&self) -> Limits {
        match self.honest_history() {
            Some(h) => Limits {
                max_depth: 10 * (2 * h.chars().count() + 1),
            },
            None => Limits::default(),
        }
    }
}

impl Controller for HistoryVerifier {
    type Memory = HistoryState;

    fn tape(&self) -> &[char] {
        self.core.tape()
    }

    fn initial_registers(&self) -> Vec<Vec<BigRational>> {
        vec![self.core.initial_register()]
    }

    fn initial_memory(&self) -> HistoryState {
        self.core.initial_state()
    }

    fn action<'a>(&'a self, st: &HistoryState, _: usize) -> Action<'a> {
        match self.core.pending_step(st) {
            Some((sop, kind)) => Action::Read(vec![(0, sop, kind)]),
            None => Action::Communicate(HISTORY_REQUEST),
        }
    }

    fn on_response(
        &self,
        st: &HistoryState,
        head: usize,
        symbol: char,
    ) -> Transition<HistoryState> {
        let r = self.core.receive(st, head, symbol);
        Transition {
            memory: r.state,
            head_move: r.head_move,
            verdict: r.verdict,
        }
    }

    fn on_outcome(&self, st: &HistoryState, _: usize, mains: &[usize]) -> Transition<HistoryState> {
        let (memory, verdict) = self.core.outcome(st, mains[0]);
        Transition {
            memory,
            head_move: 0,
            verdict,
        }
    }
}

/// Streams a fixed symbol sequence, answering only history requests.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StreamProver {
    symbols: Vec<char>,
    /// Start over after the last symbol instead of sending `$` forever.
    cycle: bool,
}

impl StreamProver {
    pub fn new(text: &str) -> Self {
        Self {
            symbols: text.chars().collect(),
            cycle: false,
        }
    }

    pub fn cycling(text: &str) -> Self {
        Self {
            symbols: text.chars().collect(),
            cycle: true,
        }
    }

    pub fn text(&self) -> String {
        self.symbols.iter().collect()
    }
}

/// Number of earlier requests for `symbol`, i.e. the position of the answer
/// to the latest one.
pub fn requests_before(transcript: &[ChannelEvent], symbol: char) -> usize {
    transcript
        .iter()
        .filter(|e| **e == ChannelEvent::Request(symbol))
        .count()
        .saturating_sub(1)
}

impl Prover for StreamProver {
    fn respond(&self, transcript: &[ChannelEvent]) -> char {
        let i = requests_before(transcript, HISTORY_REQUEST);
        if i < self.symbols.len() {
            self.symbols[i]
        } else if self.cycle && !self.symbols.is_empty() {
            self.symbols[i % self.symbols.len()]
        } else {
            END
        }
    }
}

/// Configurations and labels of the run an honest prover reports: the
/// accepting run when there is one, otherwise the run taking the first
/// listed choice at every branching step.
pub fn honest_run(spec: &TmSpec, w: &str) -> Result<(Vec<Configuration>, Vec<char>)> {
    if spec.is_deterministic() {
        return spec.run_with_choices(w, &[], RUN_STEPS);
    }
    if let Some(run) = spec.accepting_run(w, RUN_STEPS)? {
        return Ok(run);
    }
    let mut history = vec![spec.initial_configuration(w)?];
    let mut labels = Vec::new();
    loop {
        let current = history.last().expect("nonempty").clone();
        if spec.is_halting(current.state()) {
            return Ok((history, labels));
        }
        if history.len() > RUN_STEPS {
            return Err(Error::StepLimitExceeded(RUN_STEPS));
        }
        let rules = spec.rules(current.state(), current.scanned());
        let choice = if rules.len() > 1 {
            rules[0].choice
        } else {
            None
        };
        let (next, _) = spec.step(&current, choice)?.ok_or(Error::NoTransition {
            state: current.state(),
            symbol: current.scanned(),
        })?;
        labels.push(choice.unwrap_or(NO_CHOICE));
        history.push(next);
    }
}

/// The honest wire text, labelled for the nondeterministic variant.
pub fn honest_history(spec: &TmSpec, w: &str, labelled: bool) -> Result<String> {
    let (h, labels) = honest_run(spec, w)?;
    Ok(serialize_history(&h, labelled.then_some(&labels[..])))
}

pub fn honest_history_prover(spec: &TmSpec, w: &str, labelled: bool) -> Result<StreamProver> {
    honest_history(spec, w, labelled).map(|t| StreamProver::new(&t))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheatKind {
    /// Replace the symbol at `offset` of configuration `block` (0-based) by
    /// `replacement`.
    SymbolMutation {
        block: usize,
        offset: usize,
        replacement: char,
    },
    /// Swap the final state for a halting state of the other type.
    WrongHaltType,
    /// Only three separators after configuration `block`.
    SeparatorMiscount { block: usize },
    /// Pad configuration `block` with blanks beyond the length bound.
    OverlongConfig { block: usize },
    /// Drop the final configuration.
    Truncated,
    /// Exchange configurations `a` and `b`.
    SwappedConfigs { a: usize, b: usize },
    /// Repeat every configuration but the last, forever.
    Endless,
}

impl CheatKind {
    pub fn name(&self) -> &'static str {
        match self {
            CheatKind::SymbolMutation { .. } => "symbol-mutation",
            CheatKind::WrongHaltType => "wrong-halt-type",
            CheatKind::SeparatorMiscount { .. } => "separator-miscount",
            CheatKind::OverlongConfig { .. } => "overlong-config",
            CheatKind::Truncated => "truncated",
            CheatKind::SwappedConfigs { .. } => "swapped-configs",
            CheatKind::Endless => "endless",
        }
    }
}

/// A deterministic corruption of an honest history.
pub fn cheating_prover(
    spec: &TmSpec,
    kind: CheatKind,
    history: &[Configuration],
    labels: Option<&[char]>,
) -> Result<StreamProver> {
    let mut blocks: Vec<Vec<char>> = history.iter().map(|c| c.symbols().to_vec()).collect();
    let mut seps = vec![4usize; blocks.len()];
    let check = |i: usize| -> Result<()> {
        if i < history.len() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "history has {} configurations, no block {i}",
                history.len()
            )))
        }
    };
    let mut cycle = false;
    let mut end = true;
    match kind {
        CheatKind::SymbolMutation {
            block,
            offset,
            replacement,
        } => {
            check(block)?;
            let slot = blocks[block].get_mut(offset).ok_or_else(|| {
                Error::InvalidParameter(format!("no offset {offset} in block {block}"))
            })?;
            *slot = replacement;
        }
        CheatKind::WrongHaltType => {
            let last = history
                .last()
                .ok_or_else(|| Error::InvalidParameter("empty history".into()))?;
            let accepting = spec.is_accepting(last.state());
            let other = spec
                .states()
                .iter()
                .copied()
                .find(|&s| spec.is_halting(s) && spec.is_accepting(s) != accepting)
                .ok_or_else(|| {
                    Error::InvalidParameter("machine has a single halting type".into())
                })?;
            let b = blocks.len() - 1;
            blocks[b][last.state_position()] = other;
        }
        CheatKind::SeparatorMiscount { block } => {
            check(block)?;
            seps[block] = 3;
        }
        CheatKind::OverlongConfig { block } => {
            check(block)?;
            let bound = spec.length_bound(history[0].len() - 3);
            while blocks[block].len() <= bound {
                blocks[block].push(BLANK);
            }
        }
        CheatKind::Truncated => {
            blocks.pop();
            seps.pop();
        }
        CheatKind::SwappedConfigs { a, b } => {
            check(a)?;
            check(b)?;
            blocks.swap(a, b);
        }
        CheatKind::Endless => {
            blocks.pop();
            seps.pop();
            cycle = true;
            end = false;
        }
    }
    let mut text = String::new();
    for (i, (block, n)) in blocks.iter().zip(&seps).enumerate() {
        if let Some(l) = labels {
            text.push(l.get(i).copied().unwrap_or(NO_CHOICE));
        }
        text.extend(block);
        text.extend(std::iter::repeat_n(SEPARATOR, *n));
    }
    if end {
        text.push(END);
    }
    Ok(if cycle {
        StreamProver::cycling(&text)
    } else {
        StreamProver::new(&text)
    })
}

#[derive(Clone, Debug)]
pub struct HistoryAnalysis {
    pub denominator: u64,
    pub coefficient: u64,
    pub iteration: IterationAnalysis,
    pub outcome: VerdictDistribution,
}

impl HistoryAnalysis {
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

/// Exact analysis of one iteration against `prover`. `limits` defaults to
/// [`HistoryVerifier::default_limits`].
pub fn analyze_history_protocol<P: Prover + ?Sized>(
    verifier: &HistoryVerifier,
    prover: &P,
    limits: Option<Limits>,
) -> Result<HistoryAnalysis> {
    let limits = limits.unwrap_or_else(|| verifier.default_limits());
    let iteration = run_exact(verifier, prover, limits)?;
    let outcome = total_outcome(&iteration);
    Ok(HistoryAnalysis {
        denominator: verifier.denominator(),
        coefficient: verifier.core.ops().coefficient,
        iteration,
        outcome,
    })
}
