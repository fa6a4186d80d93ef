//! Single-tape Turing machines, configuration strings and their successors.
//!
//! Every symbol is a `char`. The blank is `#`. A configuration `x s y` is
//! the significant part of the tape with the state symbol `s` inserted just
//! before the scanned cell.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use num_bigint::BigUint;
use num_traits::Zero;

use crate::error::{Error, Result};

pub const BLANK: char = '#';
/// Separator between configurations in a history.
pub const SEPARATOR: char = '@';
/// End of a history.
pub const END: char = '$';
/// Label sent for configurations without a nondeterministic choice.
pub const NO_CHOICE: char = '-';

const RESERVED: [char; 5] = [SEPARATOR, END, NO_CHOICE, '¢', '/'];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rule {
    pub next: char,
    pub write: char,
    pub shift: i8,
    pub choice: Option<char>,
    pub emit: Option<char>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TmSpec {
    states: Vec<char>,
    input_alphabet: Vec<char>,
    tape_alphabet: Vec<char>,
    start: char,
    accept: Vec<char>,
    reject: Vec<char>,
    k: usize,
    rules: BTreeMap<(char, char), Vec<Rule>>,
}

fn format_err(line: usize, msg: impl fmt::Display) -> Error {
    Error::MachineFormat(format!("line {line}: {msg}"))
}

fn single_char(word: &str, line: usize) -> Result<char> {
    let mut it = word.chars();
    match (it.next(), it.next()) {
        (Some(c), None) => Ok(c),
        _ => Err(format_err(
            line,
            format!("expected a single symbol, got `{word}`"),
        )),
    }
}

impl TmSpec {
    /// Parses the line-oriented machine format:
    ///
    /// ```text
    /// states: S E O Y N
    /// input: 0 1
    /// tape: 0 1 #
    /// start: S
    /// accept: Y
    /// reject: N
    /// k: 2
    /// S # -> E # +1
    /// G 1 -> Y 1 0 choice=a emit=1
    /// ```
    pub fn parse(text: &str) -> Result<Self> {
        let mut states = None;
        let mut input = None;
        let mut tape = None;
        let mut start = None;
        let mut accept = None;
        let mut reject = None;
        let mut k = None;
        let mut raw_rules = Vec::new();

        for (idx, line) in text.lines().enumerate() {
            let n = idx + 1;
            let line = line.split("//").next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some((key, value)) = line.split_once(':') {
                let symbols = || -> Result<Vec<char>> {
                    value
                        .split_whitespace()
                        .map(|w| single_char(w, n))
                        .collect()
                };
                match key.trim() {
                    "states" => states = Some(symbols()?),
                    "input" => input = Some(symbols()?),
                    "tape" => tape = Some(symbols()?),
                    "start" => start = Some(single_char(value.trim(), n)?),
                    "accept" => accept = Some(symbols()?),
                    "reject" => reject = Some(symbols()?),
                    "k" => {
                        k = Some(
                            value
                                .trim()
                                .parse::<usize>()
                                .ok()
                                .filter(|&k| k > 0)
                                .ok_or_else(|| format_err(n, "k must be a positive integer"))?,
                        )
                    }
                    other => return Err(format_err(n, format!("unknown header `{other}`"))),
                }
                continue;
            }
            raw_rules.push((n, line.to_string()));
        }

        let states = states.ok_or_else(|| format_err(0, "missing `states`"))?;
        let input_alphabet = input.ok_or_else(|| format_err(0, "missing `input`"))?;
        let mut tape_alphabet = tape.ok_or_else(|| format_err(0, "missing `tape`"))?;
        if !tape_alphabet.contains(&BLANK) {
            tape_alphabet.push(BLANK);
        }
        let spec_start = start.ok_or_else(|| format_err(0, "missing `start`"))?;

        let mut spec = TmSpec {
            states,
            input_alphabet,
            tape_alphabet,
            start: spec_start,
            accept: accept.unwrap_or_default(),
            reject: reject.unwrap_or_default(),
            k: k.unwrap_or(1),
            rules: BTreeMap::new(),
        };
        spec.check_alphabets()?;

        for (n, line) in raw_rules {
            let words: Vec<&str> = line.split_whitespace().collect();
            if words.len() < 6 || words[2] != "->" {
                return Err(format_err(
                    n,
                    "expected `s σ -> s' σ' d [choice=c] [emit=u]`",
                ));
            }
            let state = single_char(words[0], n)?;
            let read = single_char(words[1], n)?;
            let next = single_char(words[3], n)?;
            let write = single_char(words[4], n)?;
            let shift = match words[5] {
                "-1" | "L" => -1,
                "0" | "S" => 0,
                "+1" | "1" | "R" => 1,
                other => return Err(format_err(n, format!("bad direction `{other}`"))),
            };
            let mut choice = None;
            let mut emit = None;
            for extra in &words[6..] {
                match extra.split_once('=') {
                    Some(("choice", c)) => choice = Some(single_char(c, n)?),
                    Some(("emit", c)) => emit = Some(single_char(c, n)?),
                    _ => return Err(format_err(n, format!("unknown field `{extra}`"))),
                }
            }
            if !spec.is_state(state) || !spec.is_state(next) {
                return Err(format_err(n, "unknown state"));
            }
            if !spec.is_tape_symbol(read) || !spec.is_tape_symbol(write) {
                return Err(format_err(n, "unknown tape symbol"));
            }
            if spec.is_halting(state) {
                return Err(format_err(n, "halting states have no transitions"));
            }
            if let Some(c) = choice {
                if RESERVED.contains(&c) || c.is_whitespace() {
                    return Err(format_err(n, format!("reserved choice label {c:?}")));
                }
            }
            if let Some(u) = emit {
                if RESERVED.contains(&u) {
                    return Err(format_err(n, format!("reserved output symbol {u:?}")));
                }
            }
            spec.rules.entry((state, read)).or_default().push(Rule {
                next,
                write,
                shift,
                choice,
                emit,
            });
        }

        for ((s, a), rules) in &spec.rules {
            if rules.len() > 1 {
                let mut labels: Vec<Option<char>> = rules.iter().map(|r| r.choice).collect();
                labels.sort();
                labels.dedup();
                if labels.len() != rules.len() || labels.contains(&None) {
                    return Err(Error::MachineFormat(format!(
                        "branching transitions on ({s}, {a}) need distinct choice labels"
                    )));
                }
            }
        }
        Ok(spec)
    }

    fn check_alphabets(&self) -> Result<()> {
        let mut all: Vec<char> = self.states.clone();
        all.extend(&self.tape_alphabet);
        let mut sorted = all.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != all.len() {
            return Err(Error::MachineFormat(
                "states and tape symbols must be distinct".into(),
            ));
        }
        if let Some(c) = all
            .iter()
            .find(|c| RESERVED.contains(c) || c.is_whitespace())
        {
            return Err(Error::MachineFormat(format!("reserved symbol {c:?}")));
        }
        if self.input_alphabet.contains(&BLANK) {
            return Err(Error::MachineFormat(
                "the blank is not an input symbol".into(),
            ));
        }
        if let Some(c) = self
            .input_alphabet
            .iter()
            .find(|c| !self.tape_alphabet.contains(c))
        {
            return Err(Error::MachineFormat(format!(
                "input symbol {c:?} missing from tape"
            )));
        }
        let named = std::iter::once(&self.start)
            .chain(&self.accept)
            .chain(&self.reject);
        if let Some(s) = named.clone().find(|s| !self.states.contains(s)) {
            return Err(Error::MachineFormat(format!("unknown state {s:?}")));
        }
        if self.accept.iter().any(|s| self.reject.contains(s)) {
            return Err(Error::MachineFormat(
                "a state cannot both accept and reject".into(),
            ));
        }
        Ok(())
    }

    pub fn states(&self) -> &[char] {
        &self.states
    }

    pub fn input_alphabet(&self) -> &[char] {
        &self.input_alphabet
    }

    pub fn tape_alphabet(&self) -> &[char] {
        &self.tape_alphabet
    }

    pub fn start(&self) -> char {
        self.start
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn is_state(&self, c: char) -> bool {
        self.states.contains(&c)
    }

    pub fn is_tape_symbol(&self, c: char) -> bool {
        self.tape_alphabet.contains(&c)
    }

    pub fn is_accepting(&self, s: char) -> bool {
        self.accept.contains(&s)
    }

    pub fn is_rejecting(&self, s: char) -> bool {
        self.reject.contains(&s)
    }

    pub fn is_halting(&self, s: char) -> bool {
        self.is_accepting(s) || self.is_rejecting(s)
    }

    pub fn is_deterministic(&self) -> bool {
        self.rules.values().all(|r| r.len() == 1)
    }

    pub fn rules(&self, state: char, read: char) -> &[Rule] {
        self.rules
            .get(&(state, read))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Every choice label used anywhere in the machine.
    pub fn choice_labels(&self) -> Vec<char> {
        let mut labels: Vec<char> = self
            .rules
            .values()
            .flatten()
            .filter_map(|r| r.choice)
            .collect();
        labels.sort();
        labels.dedup();
        labels
    }

    /// Longest configuration a history may contain for input length `n`.
    pub fn length_bound(&self, n: usize) -> usize {
        self.k * (n + 2)
    }

    /// Picks the rule applied in state `s` reading `a`.
    pub fn select(&self, state: char, read: char, choice: Option<char>) -> Result<&Rule> {
        let rules = self.rules(state, read);
        match rules {
            [] => Err(Error::NoTransition {
                state,
                symbol: read,
            }),
            [only] => Ok(only),
            many => {
                let c = choice.ok_or(Error::MissingChoice)?;
                many.iter()
                    .find(|r| r.choice == Some(c))
                    .ok_or(Error::InvalidChoice(c))
            }
        }
    }

    /// `s_I # w #`.
    pub fn initial_configuration(&self, w: &str) -> Result<Configuration> {
        let mut symbols = vec![self.start, BLANK];
        for c in w.chars() {
            if !self.input_alphabet.contains(&c) {
                return Err(Error::InvalidInputSymbol(c));
            }
            symbols.push(c);
        }
        symbols.push(BLANK);
        Ok(Configuration {
            symbols,
            state_at: 0,
        })
    }

    /// Checks that `symbols` contains exactly one state, not in last position,
    /// and otherwise only tape symbols.
    pub fn configuration(&self, symbols: Vec<char>) -> Result<Configuration> {
        let mut state_at = None;
        for (i, &c) in symbols.iter().enumerate() {
            if self.is_state(c) {
                if state_at.is_some() {
                    return Err(Error::InvalidConfiguration("two state symbols".into()));
                }
                state_at = Some(i);
            } else if !self.is_tape_symbol(c) {
                return Err(Error::UnknownSymbol(c));
            }
        }
        let state_at =
            state_at.ok_or_else(|| Error::InvalidConfiguration("no state symbol".into()))?;
        if state_at + 1 == symbols.len() {
            return Err(Error::InvalidConfiguration(
                "state symbol in last position".into(),
            ));
        }
        Ok(Configuration { symbols, state_at })
    }

    pub fn parse_configuration(&self, text: &str) -> Result<Configuration> {
        self.configuration(text.chars().collect())
    }

    /// Applies one transition; `None` for a halting configuration.
    pub fn next_config(
        &self,
        c: &Configuration,
        choice: Option<char>,
    ) -> Result<Option<Configuration>> {
        Ok(self.step(c, choice)?.map(|(next, _)| next))
    }

    /// Like [`TmSpec::next_config`] but also returns the applied rule.
    pub fn step(
        &self,
        c: &Configuration,
        choice: Option<char>,
    ) -> Result<Option<(Configuration, &Rule)>> {
        let state = c.state();
        if self.is_halting(state) {
            return Ok(None);
        }
        let rule = self.select(state, c.scanned(), choice)?;
        let p = c.state_at;
        let x = &c.symbols[..p];
        let rest = &c.symbols[p + 2..];
        let mut raw: Vec<char> = Vec::with_capacity(c.symbols.len() + 2);
        match rule.shift {
            1 => {
                raw.extend_from_slice(x);
                raw.push(rule.write);
                raw.push(rule.next);
                raw.extend_from_slice(rest);
                if rest.is_empty() {
                    raw.push(BLANK);
                }
            }
            0 => {
                raw.extend_from_slice(x);
                raw.push(rule.next);
                raw.push(rule.write);
                raw.extend_from_slice(rest);
            }
            _ => match x.split_last() {
                Some((last, init)) => {
                    raw.extend_from_slice(init);
                    raw.push(rule.next);
                    raw.push(*last);
                    raw.push(rule.write);
                    raw.extend_from_slice(rest);
                }
                None => {
                    raw.push(rule.next);
                    raw.push(BLANK);
                    raw.push(rule.write);
                    raw.extend_from_slice(rest);
                }
            },
        }
        let fixed = self.trim(raw);
        let next = self.configuration(fixed)?;
        Ok(Some((next, rule)))
    }

    fn is_plain(&self, c: char) -> bool {
        c != BLANK && self.is_tape_symbol(c)
    }

    /// Keeps the flanks tidy: a tape symbol at either end gets a blank next
    /// to it, and one surplus blank is dropped from a `##` end.
    fn trim(&self, mut raw: Vec<char>) -> Vec<char> {
        if raw.first().is_some_and(|&c| self.is_plain(c)) {
            raw.insert(0, BLANK);
        } else if raw.len() >= 4 && raw[0] == BLANK && raw[1] == BLANK {
            raw.remove(0);
        }
        let n = raw.len();
        if raw
            .last()
            .is_some_and(|&c| self.is_plain(c) || self.is_state(c))
        {
            raw.push(BLANK);
        } else if n >= 4 && raw[n - 1] == BLANK && raw[n - 2] == BLANK {
            raw.pop();
        }
        raw
    }

    /// Deterministic run from the initial configuration.
    pub fn run_history(&self, w: &str, max_steps: usize) -> Result<Vec<Configuration>> {
        self.run_with_choices(w, &[], max_steps).map(|(h, _)| h)
    }

    /// Runs resolving branching steps with `choices` in order. Returns the
    /// configurations and the label used at each non-final configuration
    /// (`-` where nothing was branching).
    pub fn run_with_choices(
        &self,
        w: &str,
        choices: &[char],
        max_steps: usize,
    ) -> Result<(Vec<Configuration>, Vec<char>)> {
        let mut history = vec![self.initial_configuration(w)?];
        let mut labels = Vec::new();
        let mut pending = choices.iter();
        loop {
            let current = history.last().expect("nonempty");
            if self.is_halting(current.state()) {
                return Ok((history, labels));
            }
            if history.len() > max_steps {
                return Err(Error::StepLimitExceeded(max_steps));
            }
            let branching = self.rules(current.state(), current.scanned()).len() > 1;
            let choice = if branching {
                pending.next().copied()
            } else {
                None
            };
            let next = self
                .next_config(current, choice)?
                .expect("non-halting configuration has a successor");
            labels.push(choice.unwrap_or(NO_CHOICE));
            history.push(next);
        }
    }

    /// Depth-first search for an accepting run; `None` if no branch within
    /// `max_steps` accepts.
    pub fn accepting_run(
        &self,
        w: &str,
        max_steps: usize,
    ) -> Result<Option<(Vec<Configuration>, Vec<char>)>> {
        fn search(
            spec: &TmSpec,
            history: &mut Vec<Configuration>,
            labels: &mut Vec<char>,
            max_steps: usize,
        ) -> Result<bool> {
            let current = history.last().expect("nonempty").clone();
            if spec.is_halting(current.state()) {
                return Ok(spec.is_accepting(current.state()));
            }
            if history.len() > max_steps {
                return Ok(false);
            }
            let rules = spec.rules(current.state(), current.scanned());
            let options: Vec<Option<char>> = if rules.len() > 1 {
                rules.iter().map(|r| r.choice).collect()
            } else {
                vec![None]
            };
            for choice in options {
                let next = match spec.next_config(&current, choice)? {
                    Some(n) => n,
                    None => continue,
                };
                history.push(next);
                labels.push(choice.unwrap_or(NO_CHOICE));
                if search(spec, history, labels, max_steps)? {
                    return Ok(true);
                }
                history.pop();
                labels.pop();
            }
            Ok(false)
        }
        let mut history = vec![self.initial_configuration(w)?];
        let mut labels = Vec::new();
        Ok(search(self, &mut history, &mut labels, max_steps)?.then_some((history, labels)))
    }

    /// Symbols written to the output tape along a deterministic run.
    pub fn output(&self, w: &str, max_steps: usize) -> Result<String> {
        let history = self.run_history(w, max_steps)?;
        let mut out = String::new();
        for c in &history {
            if let Some((_, rule)) = self.step(c, None)? {
                out.extend(rule.emit);
            }
        }
        Ok(out)
    }

    /// All configurations reachable from `s_I # w #` in at most `steps`
    /// transitions, across every choice.
    pub fn reachable(&self, w: &str, steps: usize) -> Result<Vec<Configuration>> {
        let mut seen = vec![self.initial_configuration(w)?];
        let mut frontier = seen.clone();
        for _ in 0..steps {
            let mut next_frontier = Vec::new();
            for c in &frontier {
                if self.is_halting(c.state()) {
                    continue;
                }
                let rules = self.rules(c.state(), c.scanned());
                let options: Vec<Option<char>> = if rules.len() > 1 {
                    rules.iter().map(|r| r.choice).collect()
                } else {
                    vec![None]
                };
                for choice in options {
                    match self.next_config(c, choice) {
                        Ok(Some(n)) if !seen.contains(&n) => {
                            seen.push(n.clone());
                            next_frontier.push(n);
                        }
                        Ok(_) | Err(Error::NoTransition { .. }) => {}
                        Err(e) => return Err(e),
                    }
                }
            }
            frontier = next_frontier;
        }
        Ok(seen)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Configuration {
    symbols: Vec<char>,
    state_at: usize,
}

impl Configuration {
    pub fn symbols(&self) -> &[char] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn state(&self) -> char {
        self.symbols[self.state_at]
    }

    pub fn state_position(&self) -> usize {
        self.state_at
    }

    pub fn scanned(&self) -> char {
        self.symbols[self.state_at + 1]
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.symbols.iter().try_for_each(|c| write!(f, "{c}"))
    }
}

/// Assignment of base-m digits to the configuration alphabet.
///
/// Digit 0 goes to a non-blank tape symbol, which can never start a
/// configuration; without one, the base grows by one and 0 stays unused.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DigitMap {
    base: u64,
    digits: BTreeMap<char, u64>,
}

impl DigitMap {
    pub fn for_spec(spec: &TmSpec) -> Self {
        let mut order: Vec<char> = Vec::new();
        let zero = spec.tape_alphabet.iter().copied().find(|&c| c != BLANK);
        order.extend(zero);
        order.extend(
            spec.tape_alphabet
                .iter()
                .copied()
                .filter(|&c| Some(c) != zero),
        );
        order.extend(&spec.states);
        let offset = if zero.is_some() { 0 } else { 1 };
        let digits = order
            .iter()
            .enumerate()
            .map(|(i, &c)| (c, (i + offset) as u64))
            .collect();
        DigitMap {
            base: (order.len() + offset) as u64,
            digits,
        }
    }

    pub fn base(&self) -> u64 {
        self.base
    }

    pub fn digit(&self, c: char) -> Result<u64> {
        self.digits.get(&c).copied().ok_or(Error::UnknownSymbol(c))
    }

    pub fn symbols(&self) -> impl Iterator<Item = (char, u64)> + '_ {
        self.digits.iter().map(|(&c, &d)| (c, d))
    }

    /// Positional base-m value.
    pub fn value(&self, symbols: &[char]) -> Result<BigUint> {
        let mut v = BigUint::zero();
        for &c in symbols {
            v = v * self.base + self.digit(c)?;
        }
        Ok(v)
    }
}

pub fn config_value(c: &Configuration, dm: &DigitMap) -> Result<BigUint> {
    dm.value(c.symbols())
}

/// Computes the successor of a configuration while it is scanned left to
/// right, holding back at most a few symbols.
///
/// Feed symbols with [`SuccessorStream::push`], call
/// [`SuccessorStream::finish`] at the end, and collect output with
/// [`SuccessorStream::pop`]. Popping one symbol after every push leaves at
/// most three symbols for after `finish` on well-formed configurations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SuccessorStream {
    choice: Option<char>,
    phase: Phase,
    /// Last tape symbol before the state, not yet released.
    held: Option<char>,
    /// Raw successor symbols waiting for the left-flank decision.
    head_buf: Vec<char>,
    left_done: bool,
    /// Trailing blank held back for the right-flank decision.
    tail: Option<char>,
    last_out: Option<char>,
    state_out: bool,
    raw_len: usize,
    inputs: usize,
    out: VecDeque<char>,
    emitted: Option<char>,
    halted: bool,
    finished: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Phase {
    BeforeState,
    AfterState(char),
    Rest { appended_needed: bool },
}

impl SuccessorStream {
    pub fn new(choice: Option<char>) -> Self {
        Self {
            choice,
            phase: Phase::BeforeState,
            held: None,
            head_buf: Vec::new(),
            left_done: false,
            tail: None,
            last_out: None,
            state_out: false,
            raw_len: 0,
            inputs: 0,
            out: VecDeque::new(),
            emitted: None,
            halted: false,
            finished: false,
        }
    }

    /// Output symbol of the transition, once the scanned cell is known.
    pub fn emitted(&self) -> Option<char> {
        self.emitted
    }

    /// The scanned configuration is a halting one; nothing more is produced.
    pub fn halted(&self) -> bool {
        self.halted
    }

    pub fn pending(&self) -> usize {
        self.out.len()
    }

    pub fn pop(&mut self) -> Option<char> {
        self.out.pop_front()
    }

    pub fn push(&mut self, spec: &TmSpec, c: char) -> Result<()> {
        if self.finished {
            return Err(Error::InvalidConfiguration("symbol after the end".into()));
        }
        self.inputs += 1;
        if self.halted {
            return Ok(());
        }
        match self.phase {
            Phase::BeforeState => {
                if spec.is_state(c) {
                    if spec.is_halting(c) {
                        self.halted = true;
                        return Ok(());
                    }
                    self.phase = Phase::AfterState(c);
                } else if spec.is_tape_symbol(c) {
                    if let Some(prev) = self.held.replace(c) {
                        self.raw(spec, prev);
                    }
                } else {
                    return Err(Error::UnknownSymbol(c));
                }
            }
            Phase::AfterState(state) => {
                if !spec.is_tape_symbol(c) {
                    return Err(if spec.is_state(c) {
                        Error::InvalidConfiguration("two state symbols".into())
                    } else {
                        Error::UnknownSymbol(c)
                    });
                }
                let rule = spec.select(state, c, self.choice)?.clone();
                self.emitted = rule.emit;
                match rule.shift {
                    1 => {
                        if let Some(h) = self.held.take() {
                            self.raw(spec, h);
                        }
                        self.raw(spec, rule.write);
                        self.raw(spec, rule.next);
                    }
                    0 => {
                        if let Some(h) = self.held.take() {
                            self.raw(spec, h);
                        }
                        self.raw(spec, rule.next);
                        self.raw(spec, rule.write);
                    }
                    _ => {
                        let h = self.held.take().unwrap_or(BLANK);
                        self.raw(spec, rule.next);
                        self.raw(spec, h);
                        self.raw(spec, rule.write);
                    }
                }
                self.phase = Phase::Rest {
                    appended_needed: rule.shift == 1,
                };
            }
            Phase::Rest { .. } => {
                if spec.is_state(c) {
                    return Err(Error::InvalidConfiguration("two state symbols".into()));
                }
                if !spec.is_tape_symbol(c) {
                    return Err(Error::UnknownSymbol(c));
                }
                self.phase = Phase::Rest {
                    appended_needed: false,
                };
                self.raw(spec, c);
            }
        }
        Ok(())
    }

    pub fn finish(&mut self, spec: &TmSpec) -> Result<()> {
        if self.finished {
            return Ok(());
        }
        self.finished = true;
        if self.halted {
            return Ok(());
        }
        match self.phase {
            Phase::BeforeState => {
                return Err(Error::InvalidConfiguration("no state symbol".into()))
            }
            Phase::AfterState(_) => {
                return Err(Error::InvalidConfiguration(
                    "state symbol in last position".into(),
                ))
            }
            Phase::Rest { appended_needed } => {
                if appended_needed {
                    self.raw(spec, BLANK);
                }
            }
        }
        // left flank with whatever is buffered
        self.decide_left(spec, true);
        // right flank
        match self.tail.take() {
            Some(t) => {
                let drop =
                    t == BLANK && self.last_out == Some(BLANK) && self.raw_len_after_left() >= 4;
                if !drop {
                    self.emit(t);
                }
            }
            None => {
                if self.last_out.is_some_and(|c| Self::plain_or_state(spec, c)) {
                    self.emit(BLANK);
                }
            }
        }
        Ok(())
    }

    fn plain_or_state(spec: &TmSpec, c: char) -> bool {
        (c != BLANK && spec.is_tape_symbol(c)) || spec.is_state(c)
    }

    fn raw_len_after_left(&self) -> usize {
        self.raw_len
    }

    /// Receives one symbol of the untrimmed successor.
    fn raw(&mut self, spec: &TmSpec, c: char) {
        self.raw_len += 1;
        if self.left_done {
            self.right(spec, c);
            return;
        }
        self.head_buf.push(c);
        self.decide_left(spec, false);
    }

    fn decide_left(&mut self, spec: &TmSpec, at_end: bool) {
        if self.left_done || self.head_buf.is_empty() {
            return;
        }
        let first = self.head_buf[0];
        let decided = if first != BLANK {
            if spec.is_tape_symbol(first) {
                self.raw_len += 1;
                self.right(spec, BLANK);
            }
            true
        } else if self.head_buf.len() >= 2 {
            if self.head_buf[1] == BLANK {
                // drop one blank only if the successor has at least four symbols
                // a raw successor never ends in its state symbol
                let ends_in_state = self.head_buf.last().is_some_and(|&c| spec.is_state(c));
                if self.raw_len + usize::from(ends_in_state) >= 4 || self.inputs >= 4 {
                    self.head_buf.remove(0);
                    self.raw_len -= 1;
                    true
                } else {
                    at_end
                }
            } else {
                true
            }
        } else {
            // the next raw symbol is the held one or the new state
            at_end || self.held.is_some_and(|h| h != BLANK)
        };
        if decided {
            self.left_done = true;
            for c in std::mem::take(&mut self.head_buf) {
                self.right(spec, c);
            }
        }
    }

    /// Right flank: blanks after the new state are held back one at a time.
    fn right(&mut self, spec: &TmSpec, c: char) {
        if let Some(t) = self.tail.take() {
            self.emit(t);
        }
        if spec.is_state(c) {
            self.state_out = true;
        }
        if c == BLANK && self.state_out {
            self.tail = Some(c);
        } else {
            self.emit(c);
        }
    }

    fn emit(&mut self, c: char) {
        self.last_out = Some(c);
        self.out.push_back(c);
    }
}

/// Successor of `c` computed by the streaming transducer.
pub fn streaming_successor(spec: &TmSpec, c: &[char], choice: Option<char>) -> Result<Vec<char>> {
    let mut s = SuccessorStream::new(choice);
    for &x in c {
        s.push(spec, x)?;
    }
    s.finish(spec)?;
    Ok(std::iter::from_fn(|| s.pop()).collect())
}

/// History wire format: `[label] c₁ @@@@ [label] c₂ @@@@ … $`. Labels are
/// written only when `labels` is given; the halting block gets `-`.
pub fn serialize_history(history: &[Configuration], labels: Option<&[char]>) -> String {
    let mut out = String::new();
    for (i, c) in history.iter().enumerate() {
        if let Some(l) = labels {
            out.push(l.get(i).copied().unwrap_or(NO_CHOICE));
        }
        out.push_str(&c.to_string());
        out.push_str("@@@@");
    }
    out.push(END);
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FormatErrorKind {
    FirstConfiguration,
    SeparatorCount,
    MissingEnd,
    TrailingSymbols,
    HaltingPosition,
    TooLong,
    BadConfiguration,
    BadChoice,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HistoryVerdict {
    /// Well formed and consistent; `accepted` is the type of the halting
    /// configuration.
    Valid {
        accepted: bool,
    },
    /// Configuration `index` (1-based) is not the successor of the one
    /// before it.
    Mismatch(usize),
    FormatError(FormatErrorKind),
}

/// Classical reference check of a history stream.
pub fn validate_history(
    spec: &TmSpec,
    w: &str,
    history: &str,
    with_labels: bool,
) -> HistoryVerdict {
    use FormatErrorKind::*;
    use HistoryVerdict::FormatError as F;

    let body = match history.strip_suffix(END) {
        Some(b) => b,
        None => {
            return if history.contains(END) {
                F(TrailingSymbols)
            } else {
                F(MissingEnd)
            };
        }
    };
    if body.contains(END) {
        return F(TrailingSymbols);
    }
    // split into blocks, each followed by exactly four separators
    let chars: Vec<char> = body.chars().collect();
    let mut blocks: Vec<Vec<char>> = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let start = i;
        while i < chars.len() && chars[i] != SEPARATOR {
            i += 1;
        }
        let block = chars[start..i].to_vec();
        let mut seps = 0;
        while i < chars.len() && chars[i] == SEPARATOR {
            seps += 1;
            i += 1;
        }
        if seps != 4 {
            return F(SeparatorCount);
        }
        blocks.push(block);
    }
    if blocks.is_empty() {
        return F(FirstConfiguration);
    }

    let mut configs = Vec::new();
    let mut labels = Vec::new();
    for block in blocks {
        let (label, symbols) = if with_labels {
            match block.split_first() {
                Some((l, rest)) => (Some(*l), rest.to_vec()),
                None => return F(BadConfiguration),
            }
        } else {
            (None, block)
        };
        if configs.is_empty() {
            match spec.initial_configuration(w) {
                Ok(c1) if c1.symbols() == symbols.as_slice() => {}
                _ => return F(FirstConfiguration),
            }
        }
        if symbols.len() > spec.length_bound(w.chars().count()) {
            return F(TooLong);
        }
        match spec.configuration(symbols) {
            Ok(c) => configs.push(c),
            Err(_) => return F(BadConfiguration),
        }
        labels.push(label);
    }
    let halting: Vec<bool> = configs.iter().map(|c| spec.is_halting(c.state())).collect();
    if !halting.last().copied().unwrap_or(false) || halting.iter().filter(|&&h| h).count() != 1 {
        return F(HaltingPosition);
    }
    for (i, pair) in configs.windows(2).enumerate() {
        let choice = match labels[i] {
            Some(l) => {
                let branching = spec.rules(pair[0].state(), pair[0].scanned()).len() > 1;
                match (branching, l) {
                    (false, NO_CHOICE) => None,
                    (true, l) if l != NO_CHOICE => Some(l),
                    _ => return F(BadChoice),
                }
            }
            None => None,
        };
        match spec.next_config(&pair[0], choice) {
            Ok(Some(next)) if next == pair[1] => {}
            Ok(_) => return HistoryVerdict::Mismatch(i + 2),
            Err(Error::InvalidChoice(_)) | Err(Error::MissingChoice) => return F(BadChoice),
            Err(_) => return HistoryVerdict::Mismatch(i + 2),
        }
    }
    if let Some(Some(l)) = labels.last() {
        if *l != NO_CHOICE {
            return F(BadChoice);
        }
    }
    let last = configs.last().expect("nonempty");
    HistoryVerdict::Valid {
        accepted: spec.is_accepting(last.state()),
    }
}

/// Machines shipped with the crate.
pub mod machines {
    use super::TmSpec;

    pub const PARITY: &str = include_str!("../data/parity.tm");
    pub const PALINDROME: &str = include_str!("../data/palindrome.tm");
    pub const CONTAINS_ONE: &str = include_str!("../data/contains_one.tm");
    pub const COPIER: &str = include_str!("../data/copier.tm");
    pub const EMITTER: &str = include_str!("../data/emitter.tm");

    fn load(text: &str) -> TmSpec {
        TmSpec::parse(text).expect("shipped machine parses")
    }

    /// Accepts words over {0,1} with an even number of 1s.
    pub fn parity() -> TmSpec {
        load(PARITY)
    }

    /// Accepts palindromes over {0,1}.
    pub fn palindrome() -> TmSpec {
        load(PALINDROME)
    }

    /// Nondeterministic: guesses which 1 to stop at.
    pub fn contains_one() -> TmSpec {
        load(CONTAINS_ONE)
    }

    /// Copies its input to the output tape.
    pub fn copier() -> TmSpec {
        load(COPIER)
    }

    /// Ignores its input and writes a fixed knapsack instance.
    pub fn emitter() -> TmSpec {
        load(EMITTER)
    }

    pub fn all() -> Vec<(&'static str, TmSpec)> {
        vec![
            ("parity", parity()),
            ("palindrome", palindrome()),
            ("contains_one", contains_one()),
            ("copier", copier()),
            ("emitter", emitter()),
        ]
    }
}
