//! Serializable analysis reports. Probabilities are exact fractions `p/q`
//! with a 12-significant-digit decimal next to them; field order is fixed.

use serde::Serialize;

use crate::compose::{ComposedAnalysis, ComposedReport};
use crate::exact::{decimal_approx, fraction_string, BigRational};
use crate::history::HistoryAnalysis;
use crate::knapsack::{KnapsackAnalysis, StrategyAnalysis};
use crate::machine::{
    ChiSquareResult, IterationAnalysis, IterationCounts, StepKind, StepSample, VerdictDistribution,
};
use crate::superop::Superoperator;

pub const SCHEMA: u32 = 1;
pub const APPROX_DIGITS: usize = 12;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Probability {
    pub exact: String,
    pub approx: String,
}

impl From<&BigRational> for Probability {
    fn from(x: &BigRational) -> Self {
        Self {
            exact: fraction_string(x),
            approx: decimal_approx(x, APPROX_DIGITS),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct IterationReport {
    pub p_accept: Probability,
    pub p_reject: Probability,
    pub p_restart: Probability,
    pub decision_leaves: usize,
    pub max_steps: usize,
}

impl From<&IterationAnalysis> for IterationReport {
    fn from(a: &IterationAnalysis) -> Self {
        Self {
            p_accept: (&a.p_accept).into(),
            p_reject: (&a.p_reject).into(),
            p_restart: (&a.p_restart).into(),
            decision_leaves: a.leaves.len(),
            max_steps: a.steps,
        }
    }
}

/// `None` fields mean the iteration never decides.
#[derive(Clone, Debug, Serialize)]
pub struct OutcomeReport {
    pub overall_accept: Option<Probability>,
    pub overall_reject: Option<Probability>,
    pub expected_iterations: Option<Probability>,
    pub expected_steps: Option<Probability>,
}

impl From<&VerdictDistribution> for OutcomeReport {
    fn from(d: &VerdictDistribution) -> Self {
        Self {
            overall_accept: d.overall_accept.as_ref().map(Into::into),
            overall_reject: d.overall_reject.as_ref().map(Into::into),
            expected_iterations: d.expected_iterations.as_ref().map(Into::into),
            expected_steps: d.expected_steps.as_ref().map(Into::into),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StrategyReport {
    /// Answer table, one bit per universal prefix in breadth-first order.
    pub strategy: Option<String>,
    pub iteration: IterationReport,
    pub outcome: OutcomeReport,
}

impl From<&StrategyAnalysis> for StrategyReport {
    fn from(s: &StrategyAnalysis) -> Self {
        Self {
            strategy: s.strategy.as_ref().map(|s| s.code()),
            iteration: (&s.iteration).into(),
            outcome: (&s.outcome).into(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct KnapsackReport {
    pub schema: u32,
    pub kind: &'static str,
    pub instance: String,
    pub rounds: usize,
    pub member: bool,
    pub denominator: u64,
    pub steps: usize,
    pub strategies: Vec<StrategyReport>,
    pub worst_case_rejection: Probability,
    pub min_reject_accept_ratio: Option<Probability>,
}

impl From<&KnapsackAnalysis> for KnapsackReport {
    fn from(a: &KnapsackAnalysis) -> Self {
        Self {
            schema: SCHEMA,
            kind: "knapsack",
            instance: a.instance.text().to_string(),
            rounds: a.instance.n(),
            member: a.member,
            denominator: a.denominator,
            steps: a.steps,
            strategies: a.strategies.iter().map(Into::into).collect(),
            worst_case_rejection: (&a.worst_case_rejection()).into(),
            min_reject_accept_ratio: a.min_reject_accept_ratio().as_ref().map(Into::into),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HistoryReport {
    pub schema: u32,
    pub kind: &'static str,
    pub input: String,
    pub labelled: bool,
    pub prover: String,
    pub coefficient: u64,
    pub denominator: u64,
    pub iteration: IterationReport,
    pub outcome: OutcomeReport,
}

impl HistoryReport {
    pub fn new(a: &HistoryAnalysis, input: &str, labelled: bool, prover: &str) -> Self {
        Self {
            schema: SCHEMA,
            kind: if labelled { "ntm-history" } else { "history" },
            input: input.to_string(),
            labelled,
            prover: prover.to_string(),
            coefficient: a.coefficient,
            denominator: a.denominator,
            iteration: (&a.iteration).into(),
            outcome: (&a.outcome).into(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ComposedStrategyReport {
    pub strategy: String,
    pub iteration: IterationReport,
    pub outcome: OutcomeReport,
}

#[derive(Clone, Debug, Serialize)]
pub struct CompositionReport {
    pub schema: u32,
    pub kind: &'static str,
    pub input: String,
    pub reduced: String,
    pub member: bool,
    pub denominator: u64,
    pub strategies: Vec<ComposedStrategyReport>,
    pub worst_case_rejection: Probability,
}

impl CompositionReport {
    /// `codes[i]` names the bit strategy of `r.strategies[i]`.
    pub fn new(r: &ComposedReport, input: &str, codes: &[String]) -> Self {
        let entry = |(a, code): (&ComposedAnalysis, &String)| ComposedStrategyReport {
            strategy: code.clone(),
            iteration: (&a.iteration).into(),
            outcome: (&a.outcome).into(),
        };
        Self {
            schema: SCHEMA,
            kind: "composition",
            input: input.to_string(),
            reduced: r.instance.text().to_string(),
            member: r.member,
            denominator: r.denominator,
            strategies: r.strategies.iter().zip(codes).map(entry).collect(),
            worst_case_rejection: (&r.worst_case_rejection()).into(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuperoperatorReport {
    pub schema: u32,
    pub kind: &'static str,
    pub dim: usize,
    pub denominator: u64,
    pub elements: usize,
    pub mains: usize,
    pub valid: bool,
}

impl From<&Superoperator> for SuperoperatorReport {
    fn from(s: &Superoperator) -> Self {
        Self {
            schema: SCHEMA,
            kind: "superoperator",
            dim: s.dim(),
            denominator: s.denominator(),
            elements: s.len(),
            mains: s.main_indices().len(),
            valid: s.validate(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ChiSquareReport {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
    pub passed: bool,
}

impl From<&ChiSquareResult> for ChiSquareReport {
    fn from(c: &ChiSquareResult) -> Self {
        Self {
            statistic: c.statistic,
            degrees_of_freedom: c.degrees_of_freedom,
            p_value: c.p_value,
            passed: c.passed,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StepSampleReport {
    pub schema: u32,
    pub kind: &'static str,
    pub step: &'static str,
    pub seed: u64,
    pub samples: u64,
    pub probabilities: Vec<Probability>,
    pub counts: Vec<u64>,
    pub chi_square: ChiSquareReport,
}

impl StepSampleReport {
    pub fn new(s: &StepSample, seed: u64, chi: &ChiSquareResult) -> Self {
        Self {
            schema: SCHEMA,
            kind: "sample-step",
            step: s.kind.map_or("superoperator", StepKind::name),
            seed,
            samples: s.samples(),
            probabilities: s.probabilities.iter().map(Into::into).collect(),
            counts: s.counts.clone(),
            chi_square: chi.into(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct IterationSampleReport {
    pub schema: u32,
    pub kind: &'static str,
    pub seed: u64,
    pub samples: u64,
    pub exact: IterationReport,
    pub accept: u64,
    pub reject: u64,
    pub restart: u64,
    pub chi_square: ChiSquareReport,
}

impl IterationSampleReport {
    pub fn new(
        exact: &IterationAnalysis,
        counts: &IterationCounts,
        seed: u64,
        chi: &ChiSquareResult,
    ) -> Self {
        Self {
            schema: SCHEMA,
            kind: "sample-iteration",
            seed,
            samples: counts.accept + counts.reject + counts.restart,
            exact: exact.into(),
            accept: counts.accept,
            reject: counts.reject,
            restart: counts.restart,
            chi_square: chi.into(),
        }
    }
}
