pub mod compose;
pub mod error;
pub mod exact;
pub mod history;
pub mod knapsack;
pub mod machine;
pub mod report;
pub mod superop;
pub mod turing;

pub use error::{Error, Result};
