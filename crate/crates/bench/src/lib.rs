//! Shared fixtures for the benchmarks.

use amqcfa_core::exact::{rat, RationalMatrix};
use amqcfa_core::knapsack::{parse_instance, KnapsackInstance};
use amqcfa_core::turing::{machines, TmSpec};

pub const MEMBER_1: &str = "101;A(1,10)E(100,11)";
pub const NON_MEMBER_2: &str = "1010;A(1,10)E(100,11)A(1,10)E(100,100)";

pub fn instance(text: &str) -> KnapsackInstance {
    parse_instance(text).expect("fixture parses")
}

/// A single diagonal payload `diag(1, 2, .., n)` over the integers.
pub fn diagonal_payload(n: usize) -> RationalMatrix {
    let rows = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { rat(i as i64 + 1) } else { rat(0) })
                .collect()
        })
        .collect();
    RationalMatrix::from_rows(rows).expect("square")
}

pub fn parity() -> TmSpec {
    machines::parity()
}
